//! Double-description vertex enumeration for centrally symmetric polytopes
//! P = {x : |⟨a_i, x⟩| ≤ 1}.
//!
//! Works on the homogenized cone {(x, t) : |⟨a_i, x⟩| ≤ t}, whose extreme
//! rays are exactly (v, 1) for the vertices v of P. Adjacency uses the
//! combinatorial test on zero sets.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const VERTEX_CAP: usize = 2_000_000;

#[derive(Clone)]
struct Ray {
    y: Vec<f64>,
    zeros: Vec<u64>,
}

fn bit_set(z: &mut [u64], i: usize) {
    z[i / 64] |= 1 << (i % 64);
}

fn popcount(z: &[u64]) -> u32 {
    z.iter().map(|w| w.count_ones()).sum()
}

fn and(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(x, y)| x & y).collect()
}

fn contains(sup: &[u64], sub: &[u64]) -> bool {
    sup.iter().zip(sub).all(|(s, t)| s & t == *t)
}

fn normalize(y: &mut [f64]) {
    let m = y.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m > 0.0 {
        y.iter_mut().for_each(|x| *x /= m);
    }
}

/// Greedy selection of `d` linearly independent rows by incremental elimination.
fn independent_rows(h: &[Vec<f64>], d: usize) -> Option<Vec<usize>> {
    let mut basis: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut chosen = Vec::new();
    for (i, row) in h.iter().enumerate() {
        let mut r = row.clone();
        for (p, b) in &basis {
            let f = r[*p] / b[*p];
            if f != 0.0 {
                r.iter_mut().zip(b).for_each(|(x, y)| *x -= f * y);
            }
        }
        let scale = row.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let (p, m) = r.iter().enumerate().fold((0, 0.0f64), |acc, (j, x)| if x.abs() > acc.1 { (j, x.abs()) } else { acc });
        if m > 1e-9 * scale {
            basis.push((p, r));
            chosen.push(i);
            if chosen.len() == d {
                return Some(chosen);
            }
        }
    }
    None
}

/// Vertices of {x ∈ ℝⁿ : |⟨r, x⟩| ≤ 1 for every row r}, as a full
/// symmetric list. Errors when the rows do not span ℝⁿ (unbounded set) or
/// the ray count exceeds `cap`.
pub fn enumerate_vertices(rows: &[Vec<f64>], n: usize, cap: usize) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::InvalidParameter("dimension 0".into()));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: r.len() });
    }
    let d = n + 1;
    let mut h: Vec<Vec<f64>> = Vec::with_capacity(2 * rows.len());
    for r in rows {
        for s in [1.0, -1.0] {
            let mut row: Vec<f64> = r.iter().map(|x| s * x).collect();
            row.push(-1.0);
            h.push(row);
        }
    }
    let words = h.len().div_ceil(64);
    let start = independent_rows(&h, d).ok_or_else(|| Error::UnboundedGauge("inequality rows do not span the space".into()))?;

    // Initial simplicial cone: rays r_j with H_S r_j = -e_j.
    let hs = DMatrix::from_fn(d, d, |i, j| h[start[i]][j]);
    let inv = hs.try_inverse().ok_or_else(|| Error::UnboundedGauge("singular initial basis".into()))?;
    let mut rays: Vec<Ray> = (0..d)
        .map(|j| {
            let mut y: Vec<f64> = (0..d).map(|i| -inv[(i, j)]).collect();
            normalize(&mut y);
            let mut zeros = vec![0u64; words];
            for (k, &row) in start.iter().enumerate() {
                if k != j {
                    bit_set(&mut zeros, row);
                }
            }
            Ray { y, zeros }
        })
        .collect();

    let mut in_start = vec![false; h.len()];
    start.iter().for_each(|&i| in_start[i] = true);
    for (hi, row) in h.iter().enumerate() {
        if in_start[hi] {
            continue;
        }
        let scale = row.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let tol = 1e-9 * scale;
        let vals: Vec<f64> = rays.iter().map(|r| r.y.iter().zip(row).map(|(a, b)| a * b).sum()).collect();
        let plus: Vec<usize> = (0..rays.len()).filter(|&i| vals[i] > tol).collect();
        if plus.is_empty() {
            for (r, &v) in rays.iter_mut().zip(&vals) {
                if v.abs() <= tol {
                    bit_set(&mut r.zeros, hi);
                }
            }
            continue;
        }
        let minus: Vec<usize> = (0..rays.len()).filter(|&i| vals[i] < -tol).collect();
        let mut fresh: Vec<Ray> = Vec::new();
        for &p in &plus {
            for &q in &minus {
                let common = and(&rays[p].zeros, &rays[q].zeros);
                if (popcount(&common) as usize) < d - 2 {
                    continue;
                }
                let adjacent = rays.iter().enumerate().all(|(r, ray)| r == p || r == q || !contains(&ray.zeros, &common));
                if !adjacent {
                    continue;
                }
                let (vp, vq) = (vals[p], vals[q]);
                let mut y: Vec<f64> = rays[q].y.iter().zip(&rays[p].y).map(|(yq, yp)| vp * yq - vq * yp).collect();
                normalize(&mut y);
                let mut zeros = common;
                bit_set(&mut zeros, hi);
                fresh.push(Ray { y, zeros });
            }
        }
        let mut next: Vec<Ray> = Vec::with_capacity(rays.len() + fresh.len());
        for (i, mut r) in rays.into_iter().enumerate() {
            if vals[i] <= tol {
                if vals[i] >= -tol {
                    bit_set(&mut r.zeros, hi);
                }
                next.push(r);
            }
        }
        next.extend(fresh);
        if next.len() > cap {
            return Err(Error::EnumerationCap { cap });
        }
        rays = next;
    }

    let mut out = Vec::with_capacity(rays.len());
    for r in rays {
        let t = r.y[n];
        if t <= 1e-12 {
            return Err(Error::UnboundedGauge("recession direction found".into()));
        }
        out.push(r.y[..n].iter().map(|x| x / t).collect());
    }
    Ok(out)
}
