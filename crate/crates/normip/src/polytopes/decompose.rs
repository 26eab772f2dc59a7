//! v = Σ λ_j V_j with λ in the simplex: pairwise Frank–Wolfe, then
//! Carathéodory pruning and an exact re-solve on the active set. An LP
//! vertex solution is the fallback when the iterative route falls short.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{gauge_norm, Polytope};
use crate::error::{Error, Result};
use crate::lp::minimize;
use crate::vector::dot;

const FW_TOL: f64 = 1e-10;
const FW_CAP: usize = 100_000;
const VALID_TOL: f64 = 1e-9;

/// Sparse convex weights over the polytope's vertex list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexCombination {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl ConvexCombination {
    pub fn point(&self, vertices: &[Vec<f64>]) -> Vec<f64> {
        let n = vertices[0].len();
        let mut x = vec![0.0; n];
        for (&j, &l) in self.indices.iter().zip(&self.weights) {
            x.iter_mut().zip(&vertices[j]).for_each(|(a, b)| *a += l * b);
        }
        x
    }
}

/// λ ≥ 0, Σλ = 1 and Σλ_j V_j = v, all within 1e-9.
pub fn validate_decomposition(vertices: &[Vec<f64>], v: &[f64], c: &ConvexCombination) -> Result<()> {
    if c.weights.iter().any(|l| *l < 0.0 || !l.is_finite()) {
        return Err(Error::AuditFailed("negative weight".into()));
    }
    let sum: f64 = c.weights.iter().sum();
    if (sum - 1.0).abs() > VALID_TOL {
        return Err(Error::AuditFailed(format!("weights sum to {sum}")));
    }
    let x = c.point(vertices);
    let err = x.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if err > VALID_TOL {
        return Err(Error::AuditFailed(format!("reconstruction error {err}")));
    }
    Ok(())
}

pub fn convex_decompose(p: &Polytope, v: &[f64]) -> Result<ConvexCombination> {
    let g = gauge_norm(p, v)?;
    if g > 1.0 + VALID_TOL {
        return Err(Error::Precondition(format!("point lies outside P: gauge exceeds 1 by {}", g - 1.0)));
    }
    let vs = p.vertices()?;
    let fw = frank_wolfe(&vs, v);
    let polished = caratheodory(&vs, fw, v.len()).and_then(|c| polish(&vs, v, c));
    if let Some(c) = polished.filter(|c| validate_decomposition(&vs, v, c).is_ok()) {
        return Ok(c);
    }
    let c = lp_decompose(&vs, v)?;
    let c = polish(&vs, v, c.clone()).filter(|c| validate_decomposition(&vs, v, c).is_ok()).unwrap_or(c);
    validate_decomposition(&vs, v, &c)?;
    Ok(c)
}

/// Pairwise Frank–Wolfe on ½‖Σλ_j V_j − v‖² over the simplex.
fn frank_wolfe(vs: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let m = vs.len();
    let mut lam = vec![0.0; m];
    let start = (0..m).max_by(|&a, &b| dot(&vs[a], v).total_cmp(&dot(&vs[b], v))).unwrap();
    lam[start] = 1.0;
    let mut x = vs[start].clone();
    for _ in 0..FW_CAP {
        let r: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - b).collect();
        if r.iter().map(|t| t * t).sum::<f64>().sqrt() <= FW_TOL * 1e-2 {
            break;
        }
        let grads: Vec<f64> = vs.iter().map(|u| dot(u, &r)).collect();
        let s = (0..m).min_by(|&a, &b| grads[a].total_cmp(&grads[b])).unwrap();
        let a = (0..m).filter(|&j| lam[j] > 0.0).max_by(|&a, &b| grads[a].total_cmp(&grads[b])).unwrap();
        if grads[a] - grads[s] <= FW_TOL * 1e-2 {
            break;
        }
        let d: Vec<f64> = vs[s].iter().zip(&vs[a]).map(|(p, q)| p - q).collect();
        let dd = dot(&d, &d);
        if dd == 0.0 {
            break;
        }
        let gamma = (-dot(&r, &d) / dd).clamp(0.0, lam[a]);
        if gamma == 0.0 {
            break;
        }
        lam[s] += gamma;
        lam[a] -= gamma;
        if lam[a] < 1e-15 {
            lam[a] = 0.0;
        }
        x.iter_mut().zip(&d).for_each(|(xi, di)| *xi += gamma * di);
    }
    lam
}

/// Reduce the support to ≤ n+1 affinely independent vertices.
fn caratheodory(vs: &[Vec<f64>], mut lam: Vec<f64>, n: usize) -> Option<ConvexCombination> {
    loop {
        let active: Vec<usize> = (0..lam.len()).filter(|&j| lam[j] > 0.0).collect();
        if active.len() <= n + 1 {
            let weights = active.iter().map(|&j| lam[j]).collect();
            return Some(ConvexCombination { indices: active, weights });
        }
        // A null vector μ of [V_S; 1ᵀ] (exists because |S| > n + 1).
        let k = active.len();
        let a = DMatrix::from_fn(n + 1, k, |i, j| if i < n { vs[active[j]][i] } else { 1.0 });
        let mu = null_vector(&a)?;
        let t = active
            .iter()
            .zip(&mu)
            .filter(|(_, m)| **m > 1e-14)
            .map(|(&j, m)| lam[j] / m)
            .fold(f64::INFINITY, f64::min);
        if !t.is_finite() {
            return None;
        }
        let mut dropped = false;
        for (&j, m) in active.iter().zip(&mu) {
            lam[j] -= t * m;
            if lam[j] <= 1e-15 {
                lam[j] = 0.0;
                dropped = true;
            }
        }
        if !dropped {
            return None;
        }
    }
}

/// A unit vector in the null space of a wide matrix via reduced row echelon form.
fn null_vector(a: &DMatrix<f64>) -> Option<Vec<f64>> {
    let (r, c) = a.shape();
    let mut m = a.clone();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..c {
        if row == r {
            break;
        }
        let (p, val) = (row..r).map(|i| (i, m[(i, col)].abs())).max_by(|x, y| x.1.total_cmp(&y.1))?;
        if val < 1e-12 {
            continue;
        }
        m.swap_rows(row, p);
        let piv = m[(row, col)];
        for j in 0..c {
            m[(row, j)] /= piv;
        }
        for i in 0..r {
            if i != row {
                let f = m[(i, col)];
                if f != 0.0 {
                    for j in 0..c {
                        m[(i, j)] -= f * m[(row, j)];
                    }
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    let free = (0..c).find(|j| !pivots.contains(j))?;
    let mut mu = vec![0.0; c];
    mu[free] = 1.0;
    for (i, &pc) in pivots.iter().enumerate() {
        mu[pc] = -m[(i, free)];
    }
    Some(mu)
}

/// Exact re-solve of [V_S; 1ᵀ] λ = [v; 1] on the active set.
fn polish(vs: &[Vec<f64>], v: &[f64], c: ConvexCombination) -> Option<ConvexCombination> {
    let n = v.len();
    let k = c.indices.len();
    let a = DMatrix::from_fn(n + 1, k, |i, j| if i < n { vs[c.indices[j]][i] } else { 1.0 });
    let b = DVector::from_iterator(n + 1, v.iter().copied().chain([1.0]));
    let sol = a.svd(true, true).solve(&b, 1e-13).ok()?;
    if sol.iter().any(|x| *x < -1e-12 || !x.is_finite()) {
        return Some(c);
    }
    let weights: Vec<f64> = sol.iter().map(|x| x.max(0.0)).collect();
    let keep: Vec<usize> = (0..k).filter(|&j| weights[j] > 0.0).collect();
    Some(ConvexCombination { indices: keep.iter().map(|&j| c.indices[j]).collect(), weights: keep.iter().map(|&j| weights[j]).collect() })
}

fn lp_decompose(vs: &[Vec<f64>], v: &[f64]) -> Result<ConvexCombination> {
    let n = v.len();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| vs.iter().map(|u| u[i]).collect()).collect();
    a.push(vec![1.0; vs.len()]);
    let b: Vec<f64> = v.iter().copied().chain([1.0]).collect();
    let sol = minimize(&vec![0.0; vs.len()], &a, &b).map_err(|e| match e {
        Error::Infeasible => Error::Precondition("point is not in the convex hull of the vertices".into()),
        e => e,
    })?;
    let indices: Vec<usize> = (0..vs.len()).filter(|&j| sol.x[j] > 0.0).collect();
    let weights = indices.iter().map(|&j| sol.x[j]).collect();
    Ok(ConvexCombination { indices, weights })
}
