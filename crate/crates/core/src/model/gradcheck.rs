//! Gradient verification against central finite differences.

use crate::error::{Error, Result};
use crate::model::train::{batch_backward, batch_loss_value};
use crate::model::ModelParams;

/// One batch of already-encoded id sequences. The snippet side uses code
/// ids, tree ids, or both (fused); the query side is always present.
#[derive(Debug, Clone)]
pub struct TrainingBatch {
    pub code_ids: Option<Vec<Vec<u32>>>,
    pub tree_ids: Option<Vec<Vec<u32>>>,
    pub query_ids: Vec<Vec<u32>>,
}

impl TrainingBatch {
    pub fn len(&self) -> usize {
        self.query_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.query_ids.is_empty()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.code_ids.is_none() && self.tree_ids.is_none() {
            return Err(Error::InvalidConfig(
                "a batch needs code ids, tree ids, or both".into(),
            ));
        }
        for side in [&self.code_ids, &self.tree_ids].into_iter().flatten() {
            if side.len() != self.query_ids.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.query_ids.len(),
                    got: side.len(),
                });
            }
        }
        Ok(())
    }
}

/// Compare analytic gradients with central finite differences on every
/// parameter; returns the maximum relative error. Intended for small
/// configurations.
pub fn grad_check(params: &mut ModelParams, batch: &TrainingBatch, epsilon: f64) -> Result<f64> {
    let (_, analytic, _) = batch_backward(params, batch)?;
    let block_count = params.blocks().len();
    let mut max_rel = 0.0f64;
    for bi in 0..block_count {
        let len = params.blocks()[bi].1.len();
        for ei in 0..len {
            let orig = params.blocks()[bi].1.data()[ei];
            params.blocks_mut()[bi].1.data_mut()[ei] = orig + epsilon;
            let plus = batch_loss_value(params, batch)?;
            params.blocks_mut()[bi].1.data_mut()[ei] = orig - epsilon;
            let minus = batch_loss_value(params, batch)?;
            params.blocks_mut()[bi].1.data_mut()[ei] = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let ana = analytic.blocks()[bi].1.data()[ei];
            let denom = ana.abs().max(numeric.abs()).max(1e-8);
            max_rel = max_rel.max((ana - numeric).abs() / denom);
        }
    }
    Ok(max_rel)
}
