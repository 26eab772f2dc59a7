//! Fixed-point value encoding on a symmetric grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid of step ε/(4·D·n) covering [−n/ε, n/ε]; code = k + K for grid
/// point k·step, k ∈ [−K, K].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    pub step: f64,
    pub bound: f64,
    pub half_levels: u64,
    pub value_bits: u32,
}

/// Bits needed to index `levels` distinct values.
pub fn bits_for(levels: u64) -> u32 {
    if levels <= 1 {
        0
    } else {
        64 - (levels - 1).leading_zeros()
    }
}

impl Quantizer {
    pub fn new(n: usize, eps: f64, d: usize) -> Result<Self> {
        if !(eps > 0.0) || n == 0 || d == 0 {
            return Err(Error::InvalidParameter(format!("quantizer needs n, D >= 1 and eps > 0 (n={n}, D={d}, eps={eps})")));
        }
        let step = eps / (4.0 * d as f64 * n as f64);
        let bound = n as f64 / eps;
        let k = (bound / step).ceil();
        if k >= (1u64 << 62) as f64 {
            return Err(Error::InvalidParameter("quantizer grid exceeds 62 bits".into()));
        }
        let half_levels = k as u64;
        Ok(Quantizer { step, bound, half_levels, value_bits: bits_for(2 * half_levels + 1) })
    }

    /// Round to the nearest grid point (ties to even); rejects |x| > bound.
    pub fn encode(&self, x: f64) -> Result<u64> {
        if !x.is_finite() || x.abs() > self.bound {
            return Err(Error::QuantizerOverflow { value: x, bound: self.bound });
        }
        let k = (x / self.step).round_ties_even();
        let k = k.clamp(-(self.half_levels as f64), self.half_levels as f64) as i64;
        Ok((k + self.half_levels as i64) as u64)
    }

    pub fn decode(&self, code: u64) -> f64 {
        (code as i64 - self.half_levels as i64) as f64 * self.step
    }

    /// Encode, saturating out-of-range values at ±bound. Returns (code, saturated?).
    pub fn encode_saturating(&self, x: f64) -> (u64, bool) {
        match self.encode(x) {
            Ok(c) => (c, false),
            Err(_) => (self.encode(self.bound.copysign(x)).unwrap(), true),
        }
    }
}

/// Quantize one value: (code, bit width, dequantized value).
pub fn quantize_value(x: f64, n: usize, eps: f64, d: usize) -> Result<(u64, u32, f64)> {
    let q = Quantizer::new(n, eps, d)?;
    let c = q.encode(x)?;
    Ok((c, q.value_bits, q.decode(c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_and_grid_points_are_exact() {
        let q = Quantizer::new(100, 0.1, 10).unwrap();
        assert_eq!(q.decode(q.encode(0.0).unwrap()), 0.0);
        assert_eq!(q.decode(q.encode(3.0 * q.step).unwrap()), 3.0 * q.step);
        assert_eq!(q.decode(q.encode(-7.0 * q.step).unwrap()), -7.0 * q.step);
    }

    #[test]
    fn ties_go_to_even() {
        let q = Quantizer::new(1, 1.0, 1).unwrap();
        assert_eq!(q.step, 0.25);
        assert_eq!(q.decode(q.encode(0.125).unwrap()), 0.0);
        assert_eq!(q.decode(q.encode(0.375).unwrap()), 0.5);
        assert_eq!(q.decode(q.encode(-0.375).unwrap()), -0.5);
    }

    #[test]
    fn out_of_range_rejected() {
        let q = Quantizer::new(4, 0.5, 2).unwrap();
        assert!(matches!(q.encode(8.5), Err(Error::QuantizerOverflow { .. })));
        assert!(q.encode(8.0).is_ok());
        assert!(q.encode(f64::NAN).is_err());
        let (c, sat) = q.encode_saturating(-100.0);
        assert!(sat && q.decode(c) == -8.0);
    }

    #[test]
    fn bit_width_counts_every_level() {
        assert_eq!(bits_for(1), 0);
        assert_eq!(bits_for(2), 1);
        assert_eq!(bits_for(3), 2);
        assert_eq!(bits_for(1 << 20), 20);
        assert_eq!(bits_for((1 << 20) + 1), 21);
        let q = Quantizer::new(1024, 0.1, 10).unwrap();
        assert!(q.half_levels * 2 < 1u64 << q.value_bits);
        assert!(q.half_levels * 2 + 1 > 1u64 << (q.value_bits - 1));
    }

    #[test]
    fn error_at_most_half_step() {
        let q = Quantizer::new(50, 0.2, 100).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1_000_000 {
            let x: f64 = rng.gen_range(-1.0..=1.0);
            let y = q.decode(q.encode(x).unwrap());
            assert!((x - y).abs() <= q.step / 2.0 * (1.0 + 1e-12));
        }
    }
}
