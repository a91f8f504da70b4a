//! Deterministic random number generation.
//!
//! The generator is SplitMix64: 64 bits of state, one multiply-xorshift
//! finalizer per output. It is the reproducibility backbone for dataset
//! synthesis and parameter initialization, so the exact update and all
//! derived distributions are frozen here. Identical seeds produce identical
//! sequences on every platform; parallel work must derive independent child
//! streams instead of sharing a generator.

/// 2^64 / golden ratio, the SplitMix64 increment.
const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 finalizer (Stafford mix 13).
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic SplitMix64 stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    /// Seed of an independent child stream:
    /// `child(seed, index) = mix(seed ^ (index * GOLDEN_GAMMA))`.
    ///
    /// Child streams indexed differently never coincide in practice, which
    /// makes per-image, per-variant and per-parameter streams independent
    /// of evaluation order.
    pub fn child_seed(seed: u64, index: u64) -> u64 {
        mix(seed ^ index.wrapping_mul(GOLDEN_GAMMA))
    }

    /// Child stream generator, see [`Rng::child_seed`].
    pub fn child(seed: u64, index: u64) -> Self {
        Rng::new(Self::child_seed(seed, index))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    /// Uniform in `[0, 1)` with 53-bit resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`, safe as a logarithm argument.
    fn next_open_f64(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`. `n` must be nonzero.
    pub fn next_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        // Modulo bias is below 2^-50 for the small n used here.
        self.next_u64() % n
    }

    /// Uniform real in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal via Box-Muller. Two uniforms are consumed per draw
    /// so the generator state stays exactly 64 bits (no cached spare).
    pub fn next_normal(&mut self) -> f64 {
        let u1 = self.next_open_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
