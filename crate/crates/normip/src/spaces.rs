//! Space algebra: structural duals, max-norm dual splits, the top-k
//! inf-convolution, embeddings, and dual lifting across embeddings.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::lp::gauge_lp;
use crate::norms::{
    ball_facets, dual_exponent, dual_norm_bruteforce, eval_norm, kth_largest_magnitude, lp_norm, norm_subgradient,
    topk_norm, Exponent, NormSpec,
};
use crate::polytopes::dual_polytope;
use crate::vector::{dot, sub};

/// Default iteration budget for the numeric split / inf-convolution search.
pub const SPLIT_BUDGET: usize = 10_000;

/// Structural dual of a space.
pub fn dual_spec(spec: &NormSpec) -> Result<NormSpec> {
    Ok(match spec {
        NormSpec::Lp { p } => NormSpec::Lp { p: dual_exponent(*p)? },
        NormSpec::TopK { k } => NormSpec::topk_dual(*k),
        NormSpec::Max { .. } => match topk_shape(spec) {
            Some(k) => NormSpec::TopK { k },
            None => NormSpec::DualOf { inner: Box::new(spec.clone()) },
        },
        NormSpec::HSum { h, parts, dims } => {
            NormSpec::hsum(dual_spec(h)?, parts.iter().map(dual_spec).collect::<Result<_>>()?, dims.clone())
        }
        NormSpec::Polytope { rep } => NormSpec::Polytope { rep: dual_polytope(rep) },
        NormSpec::Scaled { inner, factor } => {
            if !(*factor > 0.0) {
                return Err(Error::InvalidParameter(format!("scale factor {factor} must be positive")));
            }
            NormSpec::scaled(dual_spec(inner)?, 1.0 / factor)
        }
        NormSpec::DualOf { inner } => (**inner).clone(),
        NormSpec::Symmetric(o) => match o.dual_oracle() {
            Some(d) => NormSpec::Symmetric(d),
            None => return Err(Error::Unsupported(format!("{} has no dual oracle", o.name()))),
        },
    })
}

/// Some(k) when `spec` is max(ℓ∞, ℓ₁/k) (in either order), the dual of T^{(k)}.
pub fn topk_shape(spec: &NormSpec) -> Option<usize> {
    fn pair(a: &NormSpec, b: &NormSpec) -> Option<usize> {
        if !matches!(a, NormSpec::Lp { p: Exponent::Infinity }) {
            return None;
        }
        let NormSpec::Scaled { inner, factor } = b else { return None };
        if !matches!(**inner, NormSpec::Lp { p: Exponent::Finite(p) } if p == 1.0) || !(*factor > 0.0) {
            return None;
        }
        let k = 1.0 / factor;
        let r = k.round();
        (r >= 1.0 && (k - r).abs() <= 1e-9 * k).then_some(r as usize)
    }
    match spec {
        NormSpec::Max { a, b } => pair(a, b).or_else(|| pair(b, a)),
        _ => None,
    }
}

fn symmetric_rows(rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let neg: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| -x).collect()).collect();
    rows.into_iter().chain(neg).collect()
}

/// ‖w‖ in the dual of `inner`: closed form for the top-k shape, an LP over the
/// dual ball's generators when `inner` is polyhedral, else the numeric
/// inf-convolution (an upper bound).
pub fn eval_dual_of(inner: &NormSpec, w: &[f64]) -> Result<f64> {
    let n = w.len();
    if w.iter().all(|x| *x == 0.0) {
        return Ok(0.0);
    }
    if let Some(k) = topk_shape(inner) {
        return topk_norm(w, k.min(n));
    }
    match inner {
        NormSpec::Max { a, b } => match ball_facets(inner, n)? {
            Some(rows) => Ok(gauge_lp(&symmetric_rows(rows), w)?.0),
            None => Ok(numeric_split(w, a, b, SPLIT_BUDGET)?.total()),
        },
        NormSpec::DualOf { inner } => eval_norm(inner, w),
        other => match dual_spec(other)? {
            NormSpec::DualOf { .. } => Ok(dual_norm_bruteforce(other, w, 64)?.value),
            d => eval_norm(&d, w),
        },
    }
}

/// v = a + b with ‖a‖₁ + k‖b‖∞ = ‖v‖_{T(k)}: b clamps v at the k-th largest
/// magnitude, a keeps the excess.
pub fn topk_decompose(v: &[f64], k: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    check_finite(v, "v")?;
    let theta = kth_largest_magnitude(v, k);
    let b: Vec<f64> = v.iter().map(|x| x.clamp(-theta, theta)).collect();
    let a = sub(v, &b);
    Ok((a, b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRoute {
    Zero,
    TopK,
    Lp,
    Subgradient,
}

/// w = w1 + w2 with ‖w1‖_{a*} + ‖w2‖_{b*} ≤ 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxDualSplit {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub budget1: f64,
    pub budget2: f64,
    pub route: SplitRoute,
}

impl MaxDualSplit {
    pub fn total(&self) -> f64 {
        self.budget1 + self.budget2
    }
}

/// Split w (in the dual of max(a, b)) across the two dual balls.
pub fn split_max_dual(w: &[f64], a: &NormSpec, b: &NormSpec, budget: usize) -> Result<MaxDualSplit> {
    check_finite(w, "w")?;
    let n = w.len();
    let (da, db) = (dual_spec(a)?, dual_spec(b)?);
    let s = if w.iter().all(|x| *x == 0.0) {
        MaxDualSplit { w1: vec![0.0; n], w2: vec![0.0; n], budget1: 0.0, budget2: 0.0, route: SplitRoute::Zero }
    } else if let Some(k) = topk_shape(&NormSpec::max(a.clone(), b.clone())) {
        // The ℓ∞ piece pairs with ℓ₁ (the excess), the ℓ₁/k piece with k·ℓ∞ (the clamp).
        let (excess, clamp) = topk_decompose(w, k)?;
        let (w1, w2) = if matches!(a, NormSpec::Lp { p: Exponent::Infinity }) { (excess, clamp) } else { (clamp, excess) };
        MaxDualSplit { budget1: eval_norm(&da, &w1)?, budget2: eval_norm(&db, &w2)?, w1, w2, route: SplitRoute::TopK }
    } else if let (Some(fa), Some(fb)) = (ball_facets(a, n)?, ball_facets(b, n)?) {
        let ga = symmetric_rows(fa);
        let gb = symmetric_rows(fb);
        let all: Vec<Vec<f64>> = ga.iter().chain(&gb).cloned().collect();
        let (_, lambda) = gauge_lp(&all, w)?;
        let mut w1 = vec![0.0; n];
        for (g, l) in ga.iter().zip(&lambda) {
            w1.iter_mut().zip(g).for_each(|(x, y)| *x += l * y);
        }
        let w2 = sub(w, &w1);
        MaxDualSplit { budget1: eval_norm(&da, &w1)?, budget2: eval_norm(&db, &w2)?, w1, w2, route: SplitRoute::Lp }
    } else {
        numeric_split(w, a, b, budget)?
    };
    if s.total() > 1.0 + 1e-9 {
        return Err(Error::SplitFailed { achieved: s.total() });
    }
    Ok(s)
}

/// Minimize ‖u‖_{a*} + ‖w − u‖_{b*} by subgradient steps with a Polyak
/// target taken from a primal lower-bound certificate.
fn numeric_split(w: &[f64], a: &NormSpec, b: &NormSpec, budget: usize) -> Result<MaxDualSplit> {
    let (da, db) = (dual_spec(a)?, dual_spec(b)?);
    let f = |u: &[f64]| -> Result<(f64, f64)> { Ok((eval_norm(&da, u)?, eval_norm(&db, &sub(w, u))?)) };
    let mut best: Option<(f64, Vec<f64>, (f64, f64))> = None;
    let mut lower = 0.0f64;
    let starts = [w.to_vec(), vec![0.0; w.len()], w.iter().map(|x| x / 2.0).collect::<Vec<_>>()];
    let iters = (budget / starts.len()).max(1);
    for mut u in starts {
        for _ in 0..iters {
            let (fa, fb) = f(&u)?;
            let total = fa + fb;
            if best.as_ref().is_none_or(|(t, _, _)| total < *t) {
                best = Some((total, u.clone(), (fa, fb)));
            }
            let g1 = norm_subgradient(&da, &u)?;
            let g2 = norm_subgradient(&db, &sub(w, &u))?;
            // Lower bound: any v in the primal max-ball gives ⟨v, w⟩ ≤ optimum.
            let v: Vec<f64> = g1.iter().zip(&g2).map(|(x, y)| (x + y) / 2.0).collect();
            let nv = eval_norm(a, &v)?.max(eval_norm(b, &v)?);
            if nv > 0.0 {
                lower = lower.max(dot(&v, w) / nv);
            }
            let d: Vec<f64> = g1.iter().zip(&g2).map(|(x, y)| x - y).collect();
            let dd = dot(&d, &d);
            let gap = best.as_ref().unwrap().0 - lower;
            if dd == 0.0 || gap <= 1e-12 * (1.0 + lower) {
                break;
            }
            let step = (total - lower).max(1e-3 * gap) / dd;
            u.iter_mut().zip(&d).for_each(|(x, y)| *x -= step * y);
        }
    }
    let (_, w1, (b1, b2)) = best.unwrap();
    let w2 = sub(w, &w1);
    Ok(MaxDualSplit { w1, w2, budget1: b1, budget2: b2, route: SplitRoute::Subgradient })
}

/// Linear map i: ℝ^k → ℝ^n with ‖i(x)‖_Y ≤ ‖x‖_X ≤ α‖i(x)‖_Y.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    /// n rows of length k.
    pub matrix: Vec<Vec<f64>>,
    pub distortion: f64,
    pub source: NormSpec,
    pub target: NormSpec,
}

impl Embedding {
    /// Checks shape, finiteness and full column rank.
    pub fn new(matrix: Vec<Vec<f64>>, distortion: f64, source: NormSpec, target: NormSpec) -> Result<Self> {
        let e = Embedding { matrix, distortion, source, target };
        e.validate()?;
        Ok(e)
    }

    /// x ↦ x on ℝ^k.
    pub fn identity(k: usize, spec: NormSpec) -> Result<Self> {
        let m = (0..k).map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        Embedding::new(m, 1.0, spec.clone(), spec)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.matrix.len();
        let k = self.matrix.first().map_or(0, |r| r.len());
        if n == 0 || k == 0 || k > n {
            return Err(Error::InvalidParameter(format!("embedding matrix must be n x k with 1 <= k <= n (got {n} x {k})")));
        }
        for r in &self.matrix {
            check_dim(r, k)?;
            check_finite(r, "embedding matrix")?;
        }
        if !(self.distortion >= 1.0) {
            return Err(Error::InvalidParameter(format!("distortion {} < 1", self.distortion)));
        }
        if self.dense().rank(1e-10) < k {
            return Err(Error::InvalidParameter("embedding is not injective".into()));
        }
        if let Some(d) = self.source.fixed_dim().filter(|d| *d != k) {
            return Err(Error::DimensionMismatch { expected: k, got: d });
        }
        if let Some(d) = self.target.fixed_dim().filter(|d| *d != n) {
            return Err(Error::DimensionMismatch { expected: n, got: d });
        }
        Ok(())
    }

    pub fn source_dim(&self) -> usize {
        self.matrix[0].len()
    }

    pub fn target_dim(&self) -> usize {
        self.matrix.len()
    }

    fn dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.target_dim(), self.source_dim(), |i, j| self.matrix[i][j])
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(x, self.source_dim())?;
        Ok(self.matrix.iter().map(|r| dot(r, x)).collect())
    }

    /// Eᵀy.
    pub fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(y, self.target_dim())?;
        let mut out = vec![0.0; self.source_dim()];
        for (r, yi) in self.matrix.iter().zip(y) {
            out.iter_mut().zip(r).for_each(|(o, m)| *o += m * yi);
        }
        Ok(out)
    }

    /// Distortion audit on basis vectors, sign vectors (k ≤ 12) and random
    /// Gaussian points.
    pub fn audit(&self, trials: usize, seed: u64) -> Result<()> {
        self.validate()?;
        let k = self.source_dim();
        let mut pts: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        if k <= 12 {
            pts.extend((0..1usize << k).map(|m| (0..k).map(|i| if m >> i & 1 == 1 { -1.0 } else { 1.0 }).collect()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        pts.extend((0..trials).map(|_| (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()));
        for x in pts {
            let nx = eval_norm(&self.source, &x)?;
            let ny = eval_norm(&self.target, &self.apply(&x)?)?;
            let tol = 1e-9 * (1.0 + nx);
            if ny > nx + tol || nx > self.distortion * ny + tol {
                return Err(Error::AuditFailed(format!(
                    "distortion violated at x = {x:?}: ||x||_X = {nx}, ||i(x)||_Y = {ny}, alpha = {}",
                    self.distortion
                )));
            }
        }
        Ok(())
    }
}

/// ℓ∞^r ↪ ℓ_p^n, x ↦ r^{−1/p}·(x, 0): contractive, distortion r^{1/p}.
pub fn linf_into_lp_embedding(r: usize, p: f64, n: usize) -> Result<Embedding> {
    if !(p >= 2.0) {
        return Err(Error::InvalidParameter(format!("p = {p} < 2 has no explicit embedding here")));
    }
    if r == 0 || r > n {
        return Err(Error::InvalidParameter(format!("need 1 <= r <= n (r = {r}, n = {n})")));
    }
    let p = Exponent::new(p)?;
    let alpha = match p {
        Exponent::Infinity => 1.0,
        Exponent::Finite(p) => (r as f64).powf(1.0 / p),
    };
    let c = 1.0 / alpha;
    let m = (0..n).map(|i| (0..r).map(|j| if i == j { c } else { 0.0 }).collect()).collect();
    Embedding::new(m, alpha, NormSpec::linf(), NormSpec::Lp { p })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftRoute {
    Lp,
    MinNorm,
    Subgradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftResult {
    pub w: Vec<f64>,
    /// ‖w‖ in the target dual.
    pub norm: f64,
    /// Certified lower bound on the optimum over the coset.
    pub lower_bound: f64,
    pub converged: bool,
    pub route: LiftRoute,
}

const LIFT_ITERS: usize = 10_000;
const LIFT_RESTARTS: usize = 5;

/// A w' on the target side with Eᵀw' = w and ‖w'‖_{Y*} minimal.
pub fn lift_dual_vector(emb: &Embedding, w: &[f64]) -> Result<LiftResult> {
    emb.validate()?;
    let (n, k) = (emb.target_dim(), emb.source_dim());
    check_dim(w, k)?;
    check_finite(w, "w")?;
    let ydual = dual_spec(&emb.target)?;
    let e = emb.dense();
    let gram_inv = (e.transpose() * &e).try_inverse().ok_or_else(|| Error::InvalidParameter("embedding is not injective".into()))?;
    let min_norm: Vec<f64> = (&e * (&gram_inv * DVector::from_column_slice(w))).iter().copied().collect();

    if w.iter().all(|x| *x == 0.0) {
        return Ok(LiftResult { w: vec![0.0; n], norm: 0.0, lower_bound: 0.0, converged: true, route: LiftRoute::MinNorm });
    }
    if matches!(emb.target, NormSpec::Lp { p: Exponent::Finite(p) } if p == 2.0) {
        let norm = lp_norm(&min_norm, Exponent::Finite(2.0))?;
        return Ok(LiftResult { w: min_norm, norm, lower_bound: norm, converged: true, route: LiftRoute::MinNorm });
    }
    if let Some(rows) = ball_facets(&emb.target, n)? {
        // Generators g_j of the target dual ball; min Σλ subject to Σλ_j Eᵀg_j = w.
        let gens = symmetric_rows(rows);
        let cols: Vec<Vec<f64>> = gens.iter().map(|g| emb.adjoint(g)).collect::<Result<_>>()?;
        let (val, lambda) = gauge_lp(&cols, w)?;
        let mut lifted = vec![0.0; n];
        for (g, l) in gens.iter().zip(&lambda) {
            lifted.iter_mut().zip(g).for_each(|(x, y)| *x += l * y);
        }
        let norm = eval_norm(&ydual, &lifted)?;
        return Ok(LiftResult { w: lifted, norm, lower_bound: val.min(norm), converged: true, route: LiftRoute::Lp });
    }

    // Projected subgradient on the coset min_norm + ker(Eᵀ), Polyak steps
    // aimed at the best duality lower bound.
    let proj = DMatrix::<f64>::identity(n, n) - &e * &gram_inv * e.transpose();
    let project = |g: &[f64]| -> Vec<f64> { (&proj * DVector::from_column_slice(g)).iter().copied().collect() };
    let mut rng = ChaCha8Rng::seed_from_u64(0x11f7);
    let scale = lp_norm(&min_norm, Exponent::Finite(2.0))?;
    let mut best = (f64::INFINITY, min_norm.clone());
    let mut lower = 0.0f64;
    for restart in 0..LIFT_RESTARTS {
        let mut x = if restart == 0 {
            min_norm.clone()
        } else {
            let z: Vec<f64> = (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
            crate::vector::add(&min_norm, &project(&z))
        };
        for _ in 0..LIFT_ITERS {
            let f = eval_norm(&ydual, &x)?;
            if f < best.0 {
                best = (f, x.clone());
            }
            let g = norm_subgradient(&ydual, &x)?;
            let xg: Vec<f64> = (&gram_inv * (e.transpose() * DVector::from_column_slice(&g))).iter().copied().collect();
            let ex = emb.apply(&xg)?;
            let nex = eval_norm(&emb.target, &ex)?;
            if nex > 0.0 {
                lower = lower.max(dot(&xg, w) / nex);
            }
            if best.0 - lower <= 1e-9 * best.0.max(1.0) {
                break;
            }
            let pg = project(&g);
            let gg = dot(&pg, &pg);
            if gg < 1e-30 {
                break;
            }
            let step = (f - lower).max(1e-3 * (best.0 - lower)) / gg;
            x.iter_mut().zip(&pg).for_each(|(a, b)| *a -= step * b);
        }
    }
    let converged = best.0 - lower <= 1e-6 * best.0.max(1.0);
    Ok(LiftResult { w: best.1, norm: best.0, lower_bound: lower, converged, route: LiftRoute::Subgradient })
}

/// Outcome of the disjoint-support growth audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisjointSumReport {
    pub passed: bool,
    /// min over tested families of ‖Σv_i‖ / min‖v_i‖.
    pub min_ratio: f64,
    pub families: usize,
    pub witness: Option<Vec<Vec<f64>>>,
}

/// Certify a claim "no ℓ∞^k copy at distortion 1/eps": every family of k
/// disjoint-support vectors with equal norm must satisfy ‖Σv_i‖ > min‖v_i‖/eps.
/// Exhaustive over flat blocks (all size profiles) plus `trials` random families.
pub fn audit_disjoint_sum(spec: &NormSpec, n: usize, k: usize, eps: f64, trials: usize, seed: u64) -> Result<DisjointSumReport> {
    if k < 2 || k > n || !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("need 2 <= k <= n and eps in (0,1) (k = {k}, n = {n}, eps = {eps})")));
    }
    let mut min_ratio = f64::INFINITY;
    let mut witness = None;
    let mut families = 0;
    let mut consider = |fam: Vec<Vec<f64>>| -> Result<()> {
        let mut normed = Vec::with_capacity(fam.len());
        for v in fam {
            let nv = eval_norm(spec, &v)?;
            normed.push(v.into_iter().map(|x| x / nv).collect::<Vec<f64>>());
        }
        let sum = normed.iter().fold(vec![0.0; n], |acc, v| crate::vector::add(&acc, v));
        let r = eval_norm(spec, &sum)?;
        families += 1;
        if r < min_ratio {
            min_ratio = r;
            witness = Some(normed);
        }
        Ok(())
    };
    // Nondecreasing block-size profiles m_1 ≤ … ≤ m_k with Σm ≤ n.
    fn profiles(k: usize, left: usize, min: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for m in min..=left {
            if m * (k - cur.len()) > left {
                break;
            }
            cur.push(m);
            profiles(k, left - m, m, cur, out);
            cur.pop();
        }
    }
    let mut all = Vec::new();
    profiles(k, n, 1, &mut Vec::new(), &mut all);
    for prof in all {
        let mut at = 0;
        let fam = prof
            .iter()
            .map(|&m| {
                let mut v = vec![0.0; n];
                v[at..at + m].iter_mut().for_each(|x| *x = 1.0);
                at += m;
                v
            })
            .collect();
        consider(fam)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let mut owner: Vec<Option<usize>> = (0..n).map(|_| rng.gen_range(0..=k).checked_sub(1)).collect();
        // Every copy needs a nonempty support.
        for (i, o) in owner.iter_mut().take(k).enumerate() {
            *o = Some(i);
        }
        let mut fam = vec![vec![0.0; n]; k];
        for (j, o) in owner.iter().enumerate() {
            if let Some(i) = o {
                fam[*i][j] = rng.sample::<f64, _>(StandardNormal);
            }
        }
        if fam.iter().any(|v| v.iter().all(|x| *x == 0.0)) {
            continue;
        }
        consider(fam)?;
    }
    Ok(DisjointSumReport { passed: min_ratio > 1.0 / eps, min_ratio, families, witness })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structural_duals() {
        assert_eq!(dual_spec(&NormSpec::l1()).unwrap(), NormSpec::linf());
        assert_eq!(dual_spec(&NormSpec::topk(2)).unwrap(), NormSpec::topk_dual(2));
        assert_eq!(dual_spec(&NormSpec::topk_dual(3)).unwrap(), NormSpec::topk(3));
        let m = NormSpec::max(NormSpec::l2(), NormSpec::l1());
        assert!(matches!(dual_spec(&m).unwrap(), NormSpec::DualOf { .. }));
        assert_eq!(dual_spec(&dual_spec(&m).unwrap()).unwrap(), m);
    }

    #[test]
    fn topk_shape_detects_both_orders() {
        assert_eq!(topk_shape(&NormSpec::topk_dual(4)), Some(4));
        let swapped = NormSpec::max(NormSpec::scaled(NormSpec::l1(), 0.5), NormSpec::linf());
        assert_eq!(topk_shape(&swapped), Some(2));
        assert_eq!(topk_shape(&NormSpec::max(NormSpec::linf(), NormSpec::scaled(NormSpec::l1(), 0.4))), None);
    }

    #[test]
    fn decompose_examples() {
        let (a, b) = topk_decompose(&[3.0, 1.0, 2.0, 0.0], 2).unwrap();
        assert_eq!(a, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(b, vec![2.0, 1.0, 2.0, 0.0]);
        let (a, b) = topk_decompose(&[1.0, 1.0, 1.0], 3).unwrap();
        assert_eq!(a, vec![0.0; 3]);
        assert_eq!(b, vec![1.0; 3]);
        let (a, b) = topk_decompose(&[5.0, 0.0, 0.0], 1).unwrap();
        assert_eq!(a, vec![0.0; 3]);
        assert_eq!(b, vec![5.0, 0.0, 0.0]);
        assert!(topk_decompose(&[1.0], 0).is_err());
    }

    #[test]
    fn split_examples() {
        let k = 3;
        let (a, b) = (NormSpec::linf(), NormSpec::scaled(NormSpec::l1(), 1.0 / k as f64));
        let s = split_max_dual(&[1.0, 0.0, 0.0, 0.0], &a, &b, 100).unwrap();
        assert_eq!(s.w1, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!((s.budget1, s.budget2), (1.0, 0.0));
        let z = split_max_dual(&[0.0; 4], &a, &b, 100).unwrap();
        assert_eq!((z.budget1, z.budget2), (0.0, 0.0));
        let w: Vec<f64> = [3.0, 1.0, 2.0, 0.0].iter().map(|x| x / 5.0).collect();
        let s = split_max_dual(&w, &NormSpec::linf(), &NormSpec::scaled(NormSpec::l1(), 0.5), 100).unwrap();
        assert!(s.total() <= 1.0 + 1e-9);
        assert!(s.w1.iter().zip(&s.w2).zip(&w).all(|((x, y), z)| (x + y - z).abs() <= 1e-12));
    }

    #[test]
    fn polyhedral_split_uses_lp() {
        // max(ℓ∞, ℓ₁/2) without the exact shape: write ℓ₁/2 as a polytope-free scaled ℓ₁ of factor 0.45.
        let (a, b) = (NormSpec::linf(), NormSpec::scaled(NormSpec::l1(), 0.45));
        let w = [0.3, -0.2, 0.1];
        let val = eval_dual_of(&NormSpec::max(a.clone(), b.clone()), &w).unwrap();
        let wn: Vec<f64> = w.iter().map(|x| x / val).collect();
        let s = split_max_dual(&wn, &a, &b, 100).unwrap();
        assert_eq!(s.route, SplitRoute::Lp);
        assert!((s.total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn numeric_split_on_smooth_pieces() {
        let (a, b) = (NormSpec::l2(), NormSpec::scaled(NormSpec::l2(), 2.0));
        // max(‖x‖₂, 2‖x‖₂) = 2‖x‖₂, so the dual is ‖w‖₂/2.
        let w = [0.6, 0.8];
        let v = eval_dual_of(&NormSpec::max(a.clone(), b.clone()), &w).unwrap();
        assert!((v - 0.5).abs() < 1e-6, "{v}");
    }

    #[test]
    fn linf_embeddings() {
        assert_eq!(linf_into_lp_embedding(4, 2.0, 10).unwrap().distortion, 2.0);
        assert_eq!(linf_into_lp_embedding(1, 3.0, 5).unwrap().distortion, 1.0);
        assert!((linf_into_lp_embedding(16, 4.0, 16).unwrap().distortion - 2.0).abs() < 1e-15);
        assert!(linf_into_lp_embedding(2, 1.5, 4).is_err());
        linf_into_lp_embedding(4, 2.0, 10).unwrap().audit(200, 1).unwrap();
        linf_into_lp_embedding(3, 5.0, 3).unwrap().audit(200, 2).unwrap();
    }

    #[test]
    fn identity_lift_is_identity() {
        for spec in [NormSpec::l2(), NormSpec::l1(), NormSpec::lp(3.0).unwrap()] {
            let e = Embedding::identity(3, spec).unwrap();
            let r = lift_dual_vector(&e, &[0.5, -0.25, 0.125]).unwrap();
            assert!(r.w.iter().zip([0.5, -0.25, 0.125]).all(|(a, b)| (a - b).abs() < 1e-9), "{:?}", r);
        }
    }

    #[test]
    fn non_injective_rejected() {
        let m = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(Embedding::new(m, 1.0, NormSpec::l2(), NormSpec::l2()).is_err());
    }

    #[test]
    fn disjoint_sum_topk() {
        // T(2) on n = 3: sizes (1, 2) give e1 + (0, 1/2, 1/2), ratio 1.5.
        let rep = audit_disjoint_sum(&NormSpec::topk(2), 3, 2, 0.7, 200, 3).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!((rep.min_ratio - 1.5).abs() < 1e-12);
        assert!(!audit_disjoint_sum(&NormSpec::topk(2), 3, 2, 0.6, 200, 3).unwrap().passed);
        // n = 4 fits two flat blocks of size 2: ratio 1.
        let rep = audit_disjoint_sum(&NormSpec::topk(2), 4, 2, 0.9, 200, 3).unwrap();
        assert!(!rep.passed);
        assert!((rep.min_ratio - 1.0).abs() < 1e-12);
    }
}
