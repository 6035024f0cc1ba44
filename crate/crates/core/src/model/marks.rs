//! Counter-based pair marks: every unordered id pair gets a uniform mark in
//! `[0, 1)` computed by hashing `(seed, min id, max id)`. Nothing is stored,
//! so a point inserted later (with a fresh id) sees marks that are
//! independent of, and consistent with, the existing ones.

use serde::{Deserialize, Serialize};

/// Anything that assigns a mark to an unordered pair of point ids.
pub trait Marks: Sync {
    fn mark(&self, a: i64, b: i64) -> f64;
}

#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
pub(crate) fn unit_from_bits(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Mark drawn from the mark block `block` for the pair it forms with
/// point `other`.
#[inline]
pub(crate) fn block_mark(block: u64, other: i64) -> f64 {
    unit_from_bits(mix64(mix64(block) ^ (other as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

/// Derives a child seed from a parent seed and a salt.
#[inline]
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    mix64(mix64(seed ^ 0x6a09_e667_f3bc_c909).wrapping_add(salt.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairMarkSource {
    seed: u64,
}

impl PairMarkSource {
    pub fn new(seed: u64) -> Self {
        PairMarkSource { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn value(&self, a: i64, b: i64) -> f64 {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let mut h = mix64(self.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
        h = mix64(h ^ (lo as u64).wrapping_mul(0xd6e8_feb8_6659_fd93));
        h = mix64(h.wrapping_add((hi as u64).wrapping_mul(0xa076_1d64_78bd_642f)));
        unit_from_bits(h)
    }
}

impl Marks for PairMarkSource {
    #[inline]
    fn mark(&self, a: i64, b: i64) -> f64 {
        self.value(a, b)
    }
}
