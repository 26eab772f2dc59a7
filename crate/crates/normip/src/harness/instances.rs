//! Hard-instance generators from the lower-bound reductions, plus random
//! dual pairs. Indices are 0-based.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::{dual_exponent, eval_norm, lp_norm, Exponent, NormSpec};

/// v = Σ x_j e_j, w = e_i, so ⟨v, w⟩ = x_i.
pub fn gen_index_instance(bits: &[u8], i: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if let Some(b) = bits.iter().find(|b| **b > 1) {
        return Err(Error::InvalidParameter(format!("index bits must be 0/1, got {b}")));
    }
    if i >= bits.len() {
        return Err(Error::InvalidParameter(format!("index {i} out of range for n = {}", bits.len())));
    }
    let v = bits.iter().map(|b| *b as f64).collect();
    let mut w = vec![0.0; bits.len()];
    w[i] = 1.0;
    Ok((v, w))
}

/// Bit decoded from an estimate of x_i.
pub fn decode_index_bit(estimate: f64) -> u8 {
    u8::from(estimate > 0.5)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapSide {
    /// Δ ≤ k/2 − C√k
    Low,
    /// Δ ≥ k/2 + C√k
    High,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapHammingInstance {
    pub k: usize,
    pub c: f64,
    pub x: Vec<u8>,
    pub y: Vec<u8>,
    pub distance: usize,
    pub side: GapSide,
    /// x / ‖x‖_p
    pub v: Vec<f64>,
    /// y / ‖y‖_q
    pub w: Vec<f64>,
    /// ‖x‖_p ‖y‖_q; ⟨x, y⟩ = scale · ⟨v, w⟩.
    pub scale: f64,
}

fn popcount(ws: &[u64]) -> usize {
    ws.iter().map(|w| w.count_ones() as usize).sum()
}

fn unpack(ws: &[u64], k: usize) -> Vec<u8> {
    (0..k).map(|j| ((ws[j / 64] >> (j % 64)) & 1) as u8).collect()
}

fn side_of(distance: usize, k: usize, c: f64) -> Option<GapSide> {
    let half = k as f64 / 2.0;
    let gap = c * (k as f64).sqrt();
    let d = distance as f64;
    if d <= half - gap {
        Some(GapSide::Low)
    } else if d >= half + gap {
        Some(GapSide::High)
    } else {
        None
    }
}

/// Uniform binary x, y conditioned on Δ(x, y) falling outside the gap (and on
/// the requested side, if any), by rejection with at most `budget` tries.
/// The pair is encoded for ℓ_p as v = x/‖x‖_p, w = y/‖y‖_q.
pub fn gen_gap_hamming<R: Rng + ?Sized>(
    k: usize,
    c: f64,
    p: Exponent,
    side: Option<GapSide>,
    rng: &mut R,
    budget: u64,
) -> Result<GapHammingInstance> {
    if !(c > 0.0) || (k as f64) < 4.0 * c * c {
        return Err(Error::InvalidParameter(format!("gap-hamming needs k >= 4C^2 (k={k}, C={c})")));
    }
    let words = k.div_ceil(64);
    let last_mask = if k.is_multiple_of(64) { u64::MAX } else { (1u64 << (k % 64)) - 1 };
    let draw = |rng: &mut R| {
        let mut ws: Vec<u64> = (0..words).map(|_| rng.gen()).collect();
        ws[words - 1] &= last_mask;
        ws
    };
    // Δ only depends on z = x ⊕ y, which is uniform and independent of x.
    let mut accepted = None;
    for _ in 0..budget {
        let z = draw(rng);
        if let Some(s) = side_of(popcount(&z), k, c) {
            if side.is_none_or(|want| want == s) {
                accepted = Some((z, s));
                break;
            }
        }
    }
    let Some((z, s)) = accepted else {
        return Err(Error::NoConvergence { what: format!("gap-hamming rejection sampling ({budget} tries)"), best: f64::NAN });
    };
    let xw = draw(rng);
    let yw: Vec<u64> = xw.iter().zip(&z).map(|(a, b)| a ^ b).collect();
    let distance = popcount(&z);
    let nx = popcount(&xw) as i64;
    let ny = popcount(&yw) as i64;
    let ip = xw.iter().zip(&yw).map(|(a, b)| (a & b).count_ones() as i64).sum::<i64>();
    if nx + ny - 2 * ip != distance as i64 {
        return Err(Error::AuditFailed(format!("Δ identity broken: {nx} + {ny} - 2·{ip} != {distance}")));
    }
    let x = unpack(&xw, k);
    let y = unpack(&yw, k);
    let xf: Vec<f64> = x.iter().map(|b| *b as f64).collect();
    let yf: Vec<f64> = y.iter().map(|b| *b as f64).collect();
    let q = dual_exponent(p)?;
    let (nxp, nyq) = (lp_norm(&xf, p)?, lp_norm(&yf, q)?);
    let unit = |v: &[f64], s: f64| if s > 0.0 { v.iter().map(|t| t / s).collect() } else { vec![0.0; k] };
    Ok(GapHammingInstance { k, c, v: unit(&xf, nxp), w: unit(&yf, nyq), scale: nxp * nyq, x, y, distance, side: s })
}

impl GapHammingInstance {
    /// Δ̂ = |x| + |y| − 2·scale·estimate, thresholded at k/2.
    pub fn decide(&self, estimate: f64) -> GapSide {
        let nx = self.x.iter().map(|b| *b as f64).sum::<f64>();
        let ny = self.y.iter().map(|b| *b as f64).sum::<f64>();
        let d = nx + ny - 2.0 * self.scale * estimate;
        if d > self.k as f64 / 2.0 {
            GapSide::High
        } else {
            GapSide::Low
        }
    }
}

/// Gaussian directions rescaled onto the unit spheres of N and N*.
pub fn random_dual_pair<R: Rng + ?Sized>(spec: &NormSpec, n: usize, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let dual = NormSpec::DualOf { inner: Box::new(spec.clone()) };
    let mut unit = |norm: &NormSpec| -> Result<Vec<f64>> {
        for _ in 0..100 {
            let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let s = eval_norm(norm, &g)?;
            if s > 0.0 {
                return Ok(g.iter().map(|x| x / s).collect());
            }
        }
        Err(Error::NoConvergence { what: "nonzero gaussian draw".into(), best: 0.0 })
    };
    let v = unit(spec)?;
    let w = unit(&dual)?;
    Ok((v, w))
}

/// Checks ‖v‖_N ≤ 1 + 1e-12 and ‖w‖_{N*} ≤ 1 + 1e-12.
pub fn check_pair(spec: &NormSpec, v: &[f64], w: &[f64]) -> Result<()> {
    let nv = eval_norm(spec, v)?;
    let nw = eval_norm(&NormSpec::DualOf { inner: Box::new(spec.clone()) }, w)?;
    if nv > 1.0 + 1e-12 || nw > 1.0 + 1e-12 {
        return Err(Error::Precondition(format!("instance outside the unit balls: ||v|| = {nv}, ||w||_* = {nw}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn index_examples() {
        let (v, w) = gen_index_instance(&[1, 0, 1, 0], 1).unwrap();
        assert_eq!(crate::vector::dot(&v, &w), 0.0);
        let (v, w) = gen_index_instance(&[1; 5], 3).unwrap();
        assert_eq!(crate::vector::dot(&v, &w), 1.0);
        assert!(gen_index_instance(&[2, 0], 0).is_err());
        assert!(gen_index_instance(&[1, 0], 2).is_err());
        assert_eq!(decode_index_bit(0.51), 1);
        assert_eq!(decode_index_bit(0.5), 0);
    }

    #[test]
    fn gap_sides() {
        assert_eq!(side_of(0, 16, 1.0), Some(GapSide::Low));
        assert_eq!(side_of(16, 16, 1.0), Some(GapSide::High));
        assert_eq!(side_of(8, 16, 1.0), None);
    }

    #[test]
    fn gap_hamming_respects_side() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for side in [GapSide::Low, GapSide::High] {
            let g = gen_gap_hamming(100, 1.0, Exponent::Finite(2.0), Some(side), &mut rng, 1_000_000).unwrap();
            assert_eq!(g.side, side);
            let d = g.x.iter().zip(&g.y).filter(|(a, b)| a != b).count();
            assert_eq!(d, g.distance);
            let ip: f64 = g.x.iter().zip(&g.y).map(|(a, b)| (*a * *b) as f64).sum();
            assert!((crate::vector::dot(&g.v, &g.w) * g.scale - ip).abs() < 1e-9);
            assert_eq!(g.decide(ip / g.scale), side);
        }
        assert!(gen_gap_hamming(10, 2.0, Exponent::Finite(2.0), None, &mut rng, 10).is_err());
    }

    #[test]
    fn random_pairs_are_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for spec in [NormSpec::l1(), NormSpec::l2(), NormSpec::linf(), NormSpec::topk(2)] {
            let (v, w) = random_dual_pair(&spec, 6, &mut rng).unwrap();
            check_pair(&spec, &v, &w).unwrap();
        }
    }
}
