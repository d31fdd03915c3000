//! Counter-based normal variates.
//!
//! Variate `index` of stream `stream` under `seed` is a pure function of the
//! triple: ChaCha20 keyed by `seed`, stream id `stream`, one 64-bit word per
//! index, mapped through the inverse normal CDF. Any sub-range can therefore
//! be regenerated without replaying what came before it.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::distribution::{ContinuousCDF, Normal};

/// Stream 0 carries the base Brownian increments; refinement level `l` uses stream `l`.
pub const BASE_STREAM: u64 = 0;

pub struct NormalStream {
    rng: ChaCha20Rng,
    normal: Normal,
}

impl NormalStream {
    pub fn new(seed: u64, stream: u64, start: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        // word position counts 32-bit words
        rng.set_word_pos(u128::from(start) * 2);
        NormalStream {
            rng,
            normal: Normal::standard(),
        }
    }

    pub fn next_normal(&mut self) -> f64 {
        let bits = self.rng.next_u64() >> 11;
        // open interval (0, 1): never 0 or 1, so the quantile stays finite
        let u = (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
        self.normal.inverse_cdf(u)
    }
}

pub fn normal_at(seed: u64, stream: u64, index: u64) -> f64 {
    NormalStream::new(seed, stream, index).next_normal()
}

/// Per-path seed for Monte Carlo experiments (SplitMix64 finaliser).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
