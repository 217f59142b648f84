//! Seeded pseudo-random numbers for instance generation and restarts.
//!
//! Everything that consumes randomness in this crate goes through
//! [`SplitMix64`], a 64-bit counter-based generator, so that fixtures and
//! grids are reproducible bit-for-bit across platforms and releases. The
//! algorithm is pinned here rather than borrowed from a library:
//!
//! ```text
//! state += 0x9E3779B97F4A7C15
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! output = z ^ (z >> 31)
//! ```
//!
//! Derived streams use `derive_seed(master, a, b) = mix64(mix64(master ^ a) ^ b)`.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The splitmix64 output permutation, usable as a standalone 64-bit mixer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for a named substream: `mix64(mix64(master ^ stream) ^ index)`.
#[inline]
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    mix64(mix64(master ^ stream) ^ index)
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)` using the top 53 bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, bound)` via the widening-multiply reduction.
    ///
    /// The bias is `O(bound / 2^64)`, far below anything observable here;
    /// the reduction is branch-free and identical on every platform.
    #[inline]
    pub fn next_below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }

    /// Uniform in `[lo, hi]` (inclusive).
    #[inline]
    pub fn next_range_inclusive(&mut self, lo: u64, hi: u64) -> u64 {
        lo + self.next_below(hi - lo + 1)
    }

    /// Standard normal via Box-Muller: `sqrt(-2 ln u1) * cos(2 pi u2)`,
    /// with `u1` forced away from zero.
    pub fn next_normal(&mut self) -> f64 {
        let u1 = loop {
            let u = self.next_f64();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
