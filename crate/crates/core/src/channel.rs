//! BPSK over the real AWGN channel and seeded per-frame random streams.
//!
//! Bit 0 maps to +1 and bit 1 to -1, so a positive LLR favours bit 0.
//! Random streams are ChaCha8 (`rand_chacha` 0.9.0) seeded from a SplitMix64
//! hash of `(master seed, stream, frame index)`, which makes every frame
//! reproducible independently of how frames are scheduled on threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Noise standard deviation of a real-valued AWGN channel with unit-energy BPSK.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AwgnChannel {
    sigma: f64,
}

impl AwgnChannel {
    pub fn new(sigma: f64) -> Self {
        assert!(sigma > 0.0 && sigma.is_finite(), "sigma must be positive, got {sigma}");
        Self { sigma }
    }

    pub fn from_eb_n0(ebn0_db: f64, rate: f64) -> Self {
        Self::new(eb_n0_to_sigma(ebn0_db, rate))
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `y_i = (1 - 2 c_i) + noise`.
    pub fn transmit<R: Rng + ?Sized>(&self, codeword: &[u8], rng: &mut R) -> Vec<f64> {
        let mut y = Vec::with_capacity(codeword.len());
        self.transmit_into(codeword, rng, &mut y);
        y
    }

    pub fn transmit_into<R: Rng + ?Sized>(&self, codeword: &[u8], rng: &mut R, out: &mut Vec<f64>) {
        out.clear();
        out.extend(codeword.iter().map(|&c| {
            debug_assert!(c <= 1);
            let noise: f64 = rng.sample(StandardNormal);
            bpsk(c) + self.sigma * noise
        }));
    }

    /// Channel LLRs `2 y / sigma^2`.
    pub fn llr(&self, y: &[f64]) -> Vec<f64> {
        let scale = 2.0 / (self.sigma * self.sigma);
        y.iter().map(|&v| scale * v).collect()
    }

    pub fn llr_in_place(&self, y: &mut [f64]) {
        let scale = 2.0 / (self.sigma * self.sigma);
        y.iter_mut().for_each(|v| *v *= scale);
    }
}

#[inline]
/// `k` uniform bits.
pub fn random_bits<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<u8> {
    (0..k).map(|_| rng.random_range(0..2u8)).collect()
}

pub fn bpsk(bit: u8) -> f64 {
    1.0 - 2.0 * f64::from(bit)
}

/// `sigma = (2 R 10^(Eb/N0 / 10))^(-1/2)`.
pub fn eb_n0_to_sigma(ebn0_db: f64, rate: f64) -> f64 {
    assert!(rate > 0.0 && rate <= 1.0, "rate must lie in (0, 1], got {rate}");
    (2.0 * rate * 10f64.powf(ebn0_db / 10.0)).powf(-0.5)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives a 64-bit substream seed from a master seed, a stream id (for
/// example an SNR point) and a frame index.
pub fn derive_seed(master: u64, stream: u64, frame: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ frame)
}

pub fn frame_rng(master: u64, stream: u64, frame: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, frame))
}
