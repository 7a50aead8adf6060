//! Counter-based SplitMix64 stream.
//!
//! Draw `n` of stream `seed` is `mix(seed + (n + 1) * 0x9E3779B97F4A7C15)` with
//! the standard SplitMix64 finalizer, so every draw is addressable without
//! touching the ones before it. Normals use Box–Muller (cosine branch) on the
//! draw pair `(2n, 2n + 1)`. The construction is small enough to port
//! bit-for-bit to other languages.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    seed: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    #[inline]
    pub fn bits(&self, counter: u64) -> u64 {
        mix(self
            .seed
            .wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform in (0, 1], 53 bits of resolution.
    #[inline]
    pub fn uniform(&self, counter: u64) -> f64 {
        ((self.bits(counter) >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal sample number `index`.
    #[inline]
    pub fn normal(&self, index: u64) -> f64 {
        let u1 = self.uniform(2 * index);
        let u2 = self.uniform(2 * index + 1);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_reference_splitmix_sequence() {
        // Sequential SplitMix64 seeded with 0 starts with these outputs.
        let rng = CounterRng::new(0);
        assert_eq!(rng.bits(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(rng.bits(1), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(rng.bits(2), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn uniform_stays_in_half_open_unit_interval() {
        let rng = CounterRng::new(42);
        for n in 0..10_000 {
            let u = rng.uniform(n);
            assert!(u > 0.0 && u <= 1.0);
        }
    }

    #[test]
    fn normal_moments() {
        let rng = CounterRng::new(7);
        let n = 200_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for i in 0..n {
            let z = rng.normal(i);
            s += z;
            s2 += z * z;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }
}
