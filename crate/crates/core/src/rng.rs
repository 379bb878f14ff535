//! Seeded random numbers for the verify suites.
//!
//! SplitMix64 (Steele, Lea, Flood 2014): state advances by the golden-gamma
//! constant 0x9E3779B97F4A7C15 and each output is finalized with two
//! xor-shift-multiply rounds (0xBF58476D1CE4E5B9, 0x94D049BB133111EB).
//! The algorithm is pinned here so reruns — in any language — reproduce the
//! exact sample streams byte for byte.

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 bits of mantissa.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform point in the closed disc of radius `rad` centered at 0,
    /// by rejection from the square.
    pub fn in_disc(&mut self, rad: f64) -> (f64, f64) {
        loop {
            let x = self.uniform(-rad, rad);
            let y = self.uniform(-rad, rad);
            if x * x + y * y <= rad * rad {
                return (x, y);
            }
        }
    }
}
