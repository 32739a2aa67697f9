//! Seed derivation.
//!
//! All randomness flows from a single base seed. Stages derive their own
//! streams by label, and per-item streams mix in the pair id, so output is
//! independent of iteration or scheduling order.

/// FNV-1a over a byte slice. Stable across platforms and runs.
pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Derive a stage seed from the base seed and a stage label.
pub fn derive(base: u64, label: &str) -> u64 {
    let mut bytes = Vec::with_capacity(8 + label.len());
    bytes.extend_from_slice(&base.to_le_bytes());
    bytes.extend_from_slice(label.as_bytes());
    fnv1a64(&bytes)
}

/// Per-item seed: base xor a stable hash of the item id.
pub fn item(base: u64, id: &str) -> u64 {
    base ^ fnv1a64(id.as_bytes())
}
