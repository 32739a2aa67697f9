//! Run configuration: a flat JSON file merged with command-line flags.
//! Precedence: `SSTSEARCH_SEED` env var (seed only), then flags, then the
//! config file, then defaults.

use serde::Deserialize;
use std::path::{Path, PathBuf};

use sstsearch_core::model::{EncoderKind, Mode, TrainConfig};
use sstsearch_core::serialize::{Method, SamplerConfig};
use sstsearch_core::sst::{load_rules, TransformRuleSet};

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub corpus: Option<PathBuf>,
    pub lang: Option<String>,
    pub rules: Option<PathBuf>,
    pub method: Option<String>,
    pub mode: Option<String>,
    pub encoder: Option<String>,
    pub n_paths: Option<usize>,
    pub length_threshold: Option<usize>,
    pub width_threshold: Option<usize>,
    pub seed: Option<u64>,
    pub batch_size: Option<usize>,
    pub embedding_dim: Option<usize>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub max_seq_len: Option<usize>,
    pub vocab_cap: Option<usize>,
    pub min_token_count: Option<usize>,
    pub out: Option<PathBuf>,
    pub split: Option<String>,
}

/// Settings shared by every subcommand after merging.
pub struct Ctx {
    pub file: FileConfig,
    pub seed: u64,
    pub out: PathBuf,
}

pub const SEED_ENV: &str = "SSTSEARCH_SEED";

impl Ctx {
    pub fn new(
        config: Option<&Path>,
        seed_flag: Option<u64>,
        out_flag: Option<&Path>,
    ) -> Result<Ctx, CliError> {
        let file = match config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Data(anyhow::anyhow!("cannot read config {}: {e}", path.display()))
                })?;
                serde_json::from_str(&text).map_err(|e| {
                    CliError::Data(anyhow::anyhow!("bad config {}: {e}", path.display()))
                })?
            }
            None => FileConfig::default(),
        };
        let seed = match std::env::var(SEED_ENV) {
            Ok(value) => value.parse().map_err(|_| {
                CliError::Usage(format!("{SEED_ENV} must be an unsigned integer, got {value:?}"))
            })?,
            Err(_) => seed_flag.or(file.seed).unwrap_or(0),
        };
        let out = out_flag
            .map(Path::to_path_buf)
            .or_else(|| file.out.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Ctx { file, seed, out })
    }

    pub fn corpus(&self, flag: Option<&Path>) -> Result<PathBuf, CliError> {
        flag.map(Path::to_path_buf)
            .or_else(|| self.file.corpus.clone())
            .ok_or_else(|| CliError::Usage("--corpus is required (flag or config)".into()))
    }

    pub fn lang(&self, flag: Option<&str>) -> String {
        flag.map(str::to_string)
            .or_else(|| self.file.lang.clone())
            .unwrap_or_else(|| "minilang".into())
    }

    /// Rule resolution: explicit file, then built-in defaults for the
    /// language, then the identity rule set.
    pub fn rules(
        &self,
        rules_flag: Option<&Path>,
        lang_flag: Option<&str>,
    ) -> Result<TransformRuleSet, CliError> {
        if let Some(path) = rules_flag.or(self.file.rules.as_deref()) {
            return load_rules(path)
                .map_err(|e| CliError::Data(anyhow::anyhow!("rules {}: {e}", path.display())));
        }
        let lang = self.lang(lang_flag);
        Ok(TransformRuleSet::defaults_for(&lang).unwrap_or_else(TransformRuleSet::identity))
    }

    pub fn method(&self, flag: Option<Method>) -> Result<Method, CliError> {
        if let Some(m) = flag {
            return Ok(m);
        }
        match &self.file.method {
            Some(s) => s
                .parse()
                .map_err(|e| CliError::Data(anyhow::anyhow!("config method: {e}"))),
            None => Err(CliError::Usage("--method is required (flag or config)".into())),
        }
    }

    pub fn mode(&self, flag: Option<Mode>) -> Result<Mode, CliError> {
        if let Some(m) = flag {
            return Ok(m);
        }
        match &self.file.mode {
            Some(s) => s
                .parse()
                .map_err(|e| CliError::Data(anyhow::anyhow!("config mode: {e}"))),
            None => Err(CliError::Usage("--mode is required (flag or config)".into())),
        }
    }

    pub fn sampler(&self, args: &crate::SamplerArgs) -> SamplerConfig {
        let defaults = SamplerConfig::default();
        SamplerConfig {
            n_paths: args
                .n_paths
                .or(self.file.n_paths)
                .unwrap_or(defaults.n_paths),
            length_threshold: args
                .length_threshold
                .or(self.file.length_threshold)
                .unwrap_or(defaults.length_threshold),
            width_threshold: args
                .width_threshold
                .or(self.file.width_threshold)
                .unwrap_or(defaults.width_threshold),
            seed: self.seed,
        }
    }

    pub fn train_config(&self, args: &crate::TrainArgs) -> Result<TrainConfig, CliError> {
        let defaults = TrainConfig::default();
        let encoder = match (args.encoder, &self.file.encoder) {
            (Some(kind), _) => kind,
            (None, Some(s)) => s
                .parse::<EncoderKind>()
                .map_err(|e| CliError::Data(anyhow::anyhow!("config encoder: {e}")))?,
            (None, None) => defaults.encoder,
        };
        Ok(TrainConfig {
            batch_size: args.batch_size.or(self.file.batch_size).unwrap_or(defaults.batch_size),
            embedding_dim: args
                .embedding_dim
                .or(self.file.embedding_dim)
                .unwrap_or(defaults.embedding_dim),
            learning_rate: args
                .learning_rate
                .or(self.file.learning_rate)
                .unwrap_or(defaults.learning_rate),
            epochs: args.epochs.or(self.file.epochs).unwrap_or(defaults.epochs),
            seed: self.seed,
            max_seq_len: args
                .max_seq_len
                .or(self.file.max_seq_len)
                .unwrap_or(defaults.max_seq_len),
            vocab_cap: args.vocab_cap.or(self.file.vocab_cap).unwrap_or(defaults.vocab_cap),
            min_token_count: args
                .min_token_count
                .or(self.file.min_token_count)
                .unwrap_or(defaults.min_token_count),
            encoder,
        })
    }
}
