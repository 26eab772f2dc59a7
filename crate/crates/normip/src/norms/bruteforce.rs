//! Brute-force dual norms: ‖w‖_* = sup over the unit ball of ⟨v, w⟩.
//!
//! Polyhedral balls are handled exactly through their extreme points;
//! everything else falls back to multi-start ascent, which only ever
//! certifies a lower bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{eval_norm, norm_subgradient, Exponent, NormSpec};
use crate::error::{check_dim, Error, Result};
use crate::polytopes::{enumerate_vertices, VERTEX_CAP};
use crate::vector::dot;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualNormEstimate {
    pub value: f64,
    /// false when the value came from the ascent fallback (a lower bound).
    pub exact: bool,
}

fn guard(count: f64) -> Result<()> {
    if count > VERTEX_CAP as f64 {
        return Err(Error::EnumerationCap { cap: VERTEX_CAP });
    }
    Ok(())
}

/// All ±1 vectors times `scale`; with `half`, only those with a leading +1.
fn sign_vectors(n: usize, scale: f64, half: bool) -> Result<Vec<Vec<f64>>> {
    let free = if half { n.saturating_sub(1) } else { n };
    guard(2f64.powi(free as i32))?;
    let sign = |mask: usize, i: usize| -> f64 {
        let bit = match (half, i) {
            (true, 0) => return scale,
            (true, i) => i - 1,
            (false, i) => i,
        };
        if mask >> bit & 1 == 1 {
            -scale
        } else {
            scale
        }
    };
    Ok((0..1usize << free).map(|mask| (0..n).map(|i| sign(mask, i)).collect()).collect())
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

fn signed_basis(n: usize, scale: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        for s in [scale, -scale] {
            let mut e = vec![0.0; n];
            e[i] = s;
            out.push(e);
        }
    }
    out
}

fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// A finite set whose convex hull is the unit ball, or `None` when the ball
/// is not polyhedral (or not handled).
pub fn ball_generators(spec: &NormSpec, n: usize) -> Result<Option<Vec<Vec<f64>>>> {
    Ok(match spec {
        NormSpec::Lp { p: Exponent::Finite(p) } if *p == 1.0 => Some(signed_basis(n, 1.0)),
        NormSpec::Lp { p: Exponent::Infinity } => Some(sign_vectors(n, 1.0, false)?),
        NormSpec::Lp { .. } => None,
        NormSpec::TopK { k } => {
            // ±e_i and ±1/k sign vectors: the ball is conv of both families.
            let mut g = signed_basis(n, 1.0);
            g.extend(sign_vectors(n, 1.0 / *k as f64, false)?);
            Some(g)
        }
        NormSpec::Scaled { inner, factor } => {
            ball_generators(inner, n)?.map(|g| g.into_iter().map(|v| v.into_iter().map(|x| x / factor).collect()).collect())
        }
        NormSpec::Max { .. } => match ball_facets(spec, n)? {
            Some(rows) => Some(enumerate_vertices(&rows, n, VERTEX_CAP)?),
            None => None,
        },
        NormSpec::DualOf { inner } => ball_facets(inner, n)?,
        NormSpec::Polytope { rep } => match rep.vrep() {
            Some(v) => Some(v.to_vec()),
            None => Some(enumerate_vertices(rep.hrep().unwrap(), n, VERTEX_CAP)?),
        },
        NormSpec::HSum { .. } | NormSpec::Symmetric(_) => None,
    })
}

/// Rows h with unit ball = {x : |⟨h, x⟩| ≤ 1 for all h}, or `None`.
/// These are exactly generators of the dual ball.
pub fn ball_facets(spec: &NormSpec, n: usize) -> Result<Option<Vec<Vec<f64>>>> {
    Ok(match spec {
        NormSpec::Lp { p: Exponent::Finite(p) } if *p == 1.0 => Some(sign_vectors(n, 1.0, true)?),
        NormSpec::Lp { p: Exponent::Infinity } => Some((0..n).map(|i| unit(n, i)).collect()),
        NormSpec::Lp { .. } => None,
        NormSpec::TopK { k } => {
            let k = *k;
            if k == 0 || k > n {
                return Err(Error::InvalidParameter(format!("k = {k} outside [1, {n}]")));
            }
            guard(binomial(n, k) * 2f64.powi(k as i32 - 1))?;
            let mut rows = Vec::new();
            for s in k_subsets(n, k) {
                for signs in sign_vectors(k, 1.0, true)? {
                    let mut r = vec![0.0; n];
                    for (&i, &x) in s.iter().zip(&signs) {
                        r[i] = x;
                    }
                    rows.push(r);
                }
            }
            Some(rows)
        }
        NormSpec::Scaled { inner, factor } => {
            ball_facets(inner, n)?.map(|g| g.into_iter().map(|v| v.into_iter().map(|x| x * factor).collect()).collect())
        }
        NormSpec::Max { a, b } => match (ball_facets(a, n)?, ball_facets(b, n)?) {
            (Some(mut fa), Some(fb)) => {
                fa.extend(fb);
                Some(fa)
            }
            _ => None,
        },
        NormSpec::DualOf { inner } => ball_generators(inner, n)?,
        NormSpec::Polytope { rep } => match rep.hrep() {
            Some(h) => Some(h.to_vec()),
            None => Some(enumerate_vertices(rep.vrep().unwrap(), n, VERTEX_CAP)?),
        },
        NormSpec::HSum { .. } | NormSpec::Symmetric(_) => None,
    })
}

/// Reusable brute-force dual evaluator (generators are computed once).
pub struct BruteForceDual {
    spec: NormSpec,
    n: usize,
    budget: usize,
    generators: Option<Vec<Vec<f64>>>,
}

impl BruteForceDual {
    pub fn new(spec: &NormSpec, n: usize, budget: usize) -> Result<Self> {
        Ok(BruteForceDual { spec: spec.clone(), n, budget, generators: ball_generators(spec, n)? })
    }

    pub fn is_exact(&self) -> bool {
        self.generators.is_some()
    }

    pub fn generators(&self) -> Option<&[Vec<f64>]> {
        self.generators.as_deref()
    }

    pub fn eval(&self, w: &[f64]) -> Result<DualNormEstimate> {
        check_dim(w, self.n)?;
        match &self.generators {
            Some(g) => Ok(DualNormEstimate { value: g.iter().map(|v| dot(v, w).abs()).fold(0.0, f64::max), exact: true }),
            None => Ok(DualNormEstimate { value: ascent(&self.spec, w, self.budget)?, exact: false }),
        }
    }
}

pub fn dual_norm_bruteforce(spec: &NormSpec, w: &[f64], budget: usize) -> Result<DualNormEstimate> {
    BruteForceDual::new(spec, w.len(), budget)?.eval(w)
}

/// Maximize ⟨x, w⟩ / ‖x‖ by normalized gradient ascent with backtracking.
fn ascent(spec: &NormSpec, w: &[f64], budget: usize) -> Result<f64> {
    let n = w.len();
    if w.iter().all(|x| *x == 0.0) {
        return Ok(0.0);
    }
    let ratio = |x: &[f64]| -> Result<f64> {
        let nx = eval_norm(spec, x)?;
        Ok(if nx > 0.0 { dot(x, w) / nx } else { f64::NEG_INFINITY })
    };
    let mut starts = vec![w.to_vec(), w.iter().map(|x| x.signum()).collect::<Vec<_>>()];
    let j = super::magnitude_order(w)[0];
    let mut e = vec![0.0; n];
    e[j] = w[j].signum();
    starts.push(e);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 ^ budget as u64);
    for _ in 0..budget.max(1) {
        starts.push((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
    }

    let mut best = 0.0f64;
    for mut x in starts {
        let mut f = ratio(&x)?;
        if !f.is_finite() {
            continue;
        }
        let mut step = 0.5 * crate::norms::lp_norm(&x, Exponent::Finite(2.0))?;
        for _ in 0..300 {
            let nx = eval_norm(spec, &x)?;
            let g = norm_subgradient(spec, &x)?;
            let xw = dot(&x, w);
            let grad: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| (wi * nx - xw * gi) / (nx * nx)).collect();
            let gn = grad.iter().map(|t| t * t).sum::<f64>().sqrt();
            if gn < 1e-15 {
                break;
            }
            let scale = crate::norms::lp_norm(&x, Exponent::Finite(2.0))?;
            let mut moved = false;
            while step > 1e-13 * scale {
                let cand: Vec<f64> = x.iter().zip(&grad).map(|(a, b)| a + step * b / gn).collect();
                let fc = ratio(&cand)?;
                if fc > f {
                    x = cand;
                    f = fc;
                    step *= 1.5;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        best = best.max(f);
    }
    Ok(best)
}
