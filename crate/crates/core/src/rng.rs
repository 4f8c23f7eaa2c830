//! Seeded randomness shared by every stage of the pipeline.
//!
//! The generator is SplitMix64 (Steele, Lea & Flood; constants as in Vigna's
//! public-domain reference `splitmix64.c`). It is tiny, has no platform or
//! crate-version dependence, and is easy to reproduce in any language, so a
//! dataset generated here can be regenerated bit-for-bit elsewhere.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_2: u64 = 0x94D0_49BB_1331_11EB;

const FNV_OFFSET: u64 = 0xCBF2_9CE4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01B3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    /// Uniform integer in `0..bound` using Lemire's widening multiply with
    /// rejection, so there is no modulo bias.
    ///
    /// Panics if `bound == 0`.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let m = u128::from(self.next_u64()) * u128::from(bound);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    /// Uniform double in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// SplitMix64 output finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_2);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Per-clip sub-seed: `mix(job_seed + GOLDEN_GAMMA * (1 + fnv1a(clip_id)))`.
///
/// Depends only on the job seed and the clip id, never on which other clips
/// share the batch.
pub fn clip_seed(job_seed: u64, clip_id: &str) -> u64 {
    let h = fnv1a(clip_id.as_bytes());
    mix(job_seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(h.wrapping_add(1))))
}
