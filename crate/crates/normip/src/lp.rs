//! Small dense linear programs: two-phase tableau simplex with Bland's rule.
//!
//! Sizes here are desk-scale (tens of rows, up to a few thousand columns),
//! so a dense tableau is fine. The optimal basis is re-solved with LU at the
//! end so returned points are accurate to roughly machine precision.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 200_000;

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

struct Tableau {
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    m: usize,
    width: usize,
}

impl Tableau {
    fn rhs(&self) -> usize {
        self.width
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for x in self.t[r].iter_mut() {
            *x /= p;
        }
        let row = self.t[r].clone();
        for (i, ti) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = ti[c];
            if f != 0.0 {
                for (x, y) in ti.iter_mut().zip(&row) {
                    *x -= f * y;
                }
                ti[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Run simplex on the objective row `m` over columns `0..cols`.
    fn optimize(&mut self, cols: usize) -> Result<()> {
        let rhs = self.rhs();
        for _ in 0..MAX_PIVOTS {
            let obj = &self.t[self.m];
            let Some(c) = (0..cols).find(|&j| obj[j] < -PIVOT_TOL) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.t[i][c];
                if a > PIVOT_TOL {
                    let ratio = self.t[i][rhs] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((j, best)) => {
                            if ratio < best - 1e-14 || (ratio <= best + 1e-14 && self.basis[i] < self.basis[j]) {
                                Some((i, ratio))
                            } else {
                                Some((j, best))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Err(Error::Unbounded),
                Some((r, _)) => self.pivot(r, c),
            }
        }
        Err(Error::NoConvergence { what: "simplex pivot limit".into(), best: f64::NAN })
    }
}

/// minimize c·x subject to A x = b, x ≥ 0.
pub fn minimize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution> {
    let m = a.len();
    let n = c.len();
    if b.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: b.len() });
    }
    if let Some(row) = a.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: row.len() });
    }
    let width = n + m;
    let mut t = Vec::with_capacity(m + 1);
    for (i, (row, &bi)) in a.iter().zip(b).enumerate() {
        let s = if bi < 0.0 { -1.0 } else { 1.0 };
        let mut r: Vec<f64> = row.iter().map(|x| s * x).collect();
        r.resize(width + 1, 0.0);
        r[n + i] = 1.0;
        r[width] = s * bi;
        t.push(r);
    }
    // Phase 1 objective: the sum of artificials, expressed in nonbasic terms.
    let mut obj = vec![0.0; width + 1];
    for r in &t {
        for j in 0..n {
            obj[j] -= r[j];
        }
        obj[width] -= r[width];
    }
    t.push(obj);
    let mut tab = Tableau { t, basis: (n..n + m).collect(), m, width };
    tab.optimize(width)?;
    let scale = b.iter().fold(1.0f64, |s, x| s.max(x.abs()));
    if -tab.t[m][width] > 1e-9 * scale {
        return Err(Error::Infeasible);
    }

    // Drive remaining artificials out of the basis; drop redundant rows.
    let mut keep = vec![true; m];
    for i in 0..m {
        if tab.basis[i] >= n {
            match (0..n).find(|&j| tab.t[i][j].abs() > 1e-9) {
                Some(j) => tab.pivot(i, j),
                None => keep[i] = false,
            }
        }
    }
    let rows: Vec<usize> = (0..m).filter(|&i| keep[i]).collect();
    let mut t2: Vec<Vec<f64>> = rows.iter().map(|&i| tab.t[i].clone()).collect();
    let basis: Vec<usize> = rows.iter().map(|&i| tab.basis[i]).collect();
    let mut obj = vec![0.0; width + 1];
    obj[..n].copy_from_slice(c);
    for (r, &bv) in t2.iter().zip(&basis) {
        let cb = c[bv];
        if cb != 0.0 {
            for j in 0..=width {
                obj[j] -= cb * r[j];
            }
        }
    }
    t2.push(obj);
    let mut tab = Tableau { m: rows.len(), t: t2, basis, width };
    tab.optimize(n)?;

    let mut x = vec![0.0; n];
    for (i, &bv) in tab.basis.iter().enumerate() {
        x[bv] = tab.t[i][width].max(0.0);
    }
    // Re-solve B x_B = b on the original data for accuracy.
    let k = rows.len();
    if k > 0 {
        let bm = DMatrix::from_fn(k, k, |i, j| a[rows[i]][tab.basis[j]]);
        let rhs = DVector::from_iterator(k, rows.iter().map(|&i| b[i]));
        if let Some(sol) = bm.lu().solve(&rhs) {
            if sol.iter().all(|v| v.is_finite() && *v >= -1e-9) {
                for (j, &bv) in tab.basis.iter().enumerate() {
                    x[bv] = sol[j].max(0.0);
                }
            }
        }
    }
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Ok(LpSolution { x, objective })
}

/// min Σλ subject to Σ λ_j g_j = target, λ ≥ 0: the gauge of `target`
/// with respect to conv(generators). Returns (value, λ).
pub fn gauge_lp(generators: &[Vec<f64>], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = target.len();
    let a: Vec<Vec<f64>> = (0..n).map(|i| generators.iter().map(|g| g[i]).collect()).collect();
    let c = vec![1.0; generators.len()];
    let sol = minimize(&c, &a, target)?;
    Ok((sol.objective, sol.x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_lp() {
        // min -x - y s.t. x + 2y + s1 = 4, 3x + y + s2 = 6
        let sol = minimize(&[-1.0, -1.0, 0.0, 0.0], &[vec![1.0, 2.0, 1.0, 0.0], vec![3.0, 1.0, 0.0, 1.0]], &[4.0, 6.0]).unwrap();
        assert!((sol.objective + 2.8).abs() < 1e-12);
        assert!((sol.x[0] - 1.6).abs() < 1e-12 && (sol.x[1] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        assert_eq!(minimize(&[1.0], &[vec![1.0]], &[-1.0]), Err(Error::Infeasible));
        assert_eq!(minimize(&[-1.0, 0.0], &[vec![1.0, -1.0]], &[0.0]), Err(Error::Unbounded));
    }

    #[test]
    fn redundant_rows_are_dropped() {
        let sol = minimize(&[1.0, 2.0], &[vec![1.0, 1.0], vec![2.0, 2.0]], &[1.0, 2.0]).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_polytope_gauge_is_l1() {
        let gens = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let (g, lam) = gauge_lp(&gens, &[0.3, -1.2]).unwrap();
        assert!((g - 1.5).abs() < 1e-14);
        assert_eq!(lam.len(), 4);
    }
}
