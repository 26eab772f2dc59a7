//! Primal and dual norms for every space the protocols use.

mod bruteforce;
mod oracle;

use std::cmp::Ordering;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_finite, Error, Result};
use crate::polytopes::{gauge_norm, Polytope};

pub use bruteforce::{ball_facets, ball_generators, dual_norm_bruteforce, BruteForceDual, DualNormEstimate};
pub use oracle::{NormFn, SymmetricOracle};

/// An ℓ_p exponent; ∞ is its own value so nothing ever computes `|x|^inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            Ok(Exponent::Infinity)
        } else if p.is_finite() && p >= 1.0 {
            Ok(Exponent::Finite(p))
        } else {
            Err(Error::InvalidParameter(format!("exponent p = {p} must be >= 1")))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinity)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

// JSON has no infinity literal: ∞ travels as the string "inf".
impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => s.serialize_f64(*p),
            Exponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        let p = match Raw::deserialize(d)? {
            Raw::Num(p) => p,
            Raw::Str(s) if matches!(s.as_str(), "inf" | "infinity" | "Infinity") => f64::INFINITY,
            Raw::Str(s) => return Err(serde::de::Error::custom(format!("bad exponent {s:?}"))),
        };
        Exponent::new(p).map_err(serde::de::Error::custom)
    }
}

/// Recursive description of a normed space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NormSpec {
    Lp { p: Exponent },
    #[serde(rename = "topk")]
    TopK { k: usize },
    /// max(‖·‖_a, ‖·‖_b); unit ball is the intersection.
    Max { a: Box<NormSpec>, b: Box<NormSpec> },
    /// h applied to the vector of block norms; `dims[i]` is the size of block i.
    #[serde(rename = "hsum")]
    HSum { h: Box<NormSpec>, parts: Vec<NormSpec>, dims: Vec<usize> },
    Polytope { rep: Polytope },
    /// factor · ‖·‖_inner.
    Scaled { inner: Box<NormSpec>, factor: f64 },
    /// The dual of `inner`, kept symbolic and evaluated numerically.
    DualOf { inner: Box<NormSpec> },
    #[serde(skip)]
    Symmetric(SymmetricOracle),
}

impl NormSpec {
    pub fn lp(p: f64) -> Result<Self> {
        Ok(NormSpec::Lp { p: Exponent::new(p)? })
    }
    pub fn l1() -> Self {
        NormSpec::Lp { p: Exponent::Finite(1.0) }
    }
    pub fn l2() -> Self {
        NormSpec::Lp { p: Exponent::Finite(2.0) }
    }
    pub fn linf() -> Self {
        NormSpec::Lp { p: Exponent::Infinity }
    }
    pub fn topk(k: usize) -> Self {
        NormSpec::TopK { k }
    }
    pub fn max(a: NormSpec, b: NormSpec) -> Self {
        NormSpec::Max { a: Box::new(a), b: Box::new(b) }
    }
    pub fn scaled(inner: NormSpec, factor: f64) -> Self {
        NormSpec::Scaled { inner: Box::new(inner), factor }
    }
    pub fn hsum(h: NormSpec, parts: Vec<NormSpec>, dims: Vec<usize>) -> Self {
        NormSpec::HSum { h: Box::new(h), parts, dims }
    }
    pub fn polytope(rep: Polytope) -> Self {
        NormSpec::Polytope { rep }
    }
    /// max(ℓ∞, ℓ₁/k): the dual of the top-k norm.
    pub fn topk_dual(k: usize) -> Self {
        NormSpec::max(NormSpec::linf(), NormSpec::scaled(NormSpec::l1(), 1.0 / k as f64))
    }

    /// Structural dual; see [`crate::spaces::dual_spec`].
    pub fn dual(&self) -> Result<NormSpec> {
        crate::spaces::dual_spec(self)
    }

    /// The dimension this spec is pinned to, if any (ℓ_p and top-k work in any dimension).
    pub fn fixed_dim(&self) -> Option<usize> {
        match self {
            NormSpec::Lp { .. } | NormSpec::TopK { .. } => None,
            NormSpec::Max { a, b } => a.fixed_dim().or_else(|| b.fixed_dim()),
            NormSpec::HSum { dims, .. } => Some(dims.iter().sum()),
            NormSpec::Polytope { rep } => Some(rep.dim()),
            NormSpec::Scaled { inner, .. } | NormSpec::DualOf { inner } => inner.fixed_dim(),
            NormSpec::Symmetric(o) => Some(o.dim()),
        }
    }

    /// Short human-readable label.
    pub fn label(&self) -> String {
        match self {
            NormSpec::Lp { p } => format!("l{p}"),
            NormSpec::TopK { k } => format!("top{k}"),
            NormSpec::Max { a, b } => format!("max({},{})", a.label(), b.label()),
            NormSpec::HSum { h, parts, .. } => {
                format!("hsum[{}]({})", h.label(), parts.iter().map(|p| p.label()).collect::<Vec<_>>().join(","))
            }
            NormSpec::Polytope { rep } => format!("polytope{}", rep.dim()),
            NormSpec::Scaled { inner, factor } => format!("{factor}*{}", inner.label()),
            NormSpec::DualOf { inner } => format!("dual({})", inner.label()),
            NormSpec::Symmetric(o) => o.name().to_string(),
        }
    }
}

pub fn lp_norm(v: &[f64], p: Exponent) -> Result<f64> {
    match p {
        Exponent::Infinity => Ok(v.iter().fold(0.0f64, |m, x| m.max(x.abs()))),
        Exponent::Finite(p) if !(p >= 1.0) => Err(Error::InvalidParameter(format!("p = {p} < 1"))),
        Exponent::Finite(1.0) => Ok(v.iter().map(|x| x.abs()).sum()),
        Exponent::Finite(p) => {
            // Factor out the largest magnitude so |x|^p neither overflows nor underflows.
            let m = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if m == 0.0 {
                return Ok(0.0);
            }
            let s: f64 = if p == 2.0 {
                v.iter().map(|x| (x / m) * (x / m)).sum()
            } else {
                v.iter().map(|x| (x.abs() / m).powf(p)).sum()
            };
            Ok(m * s.powf(1.0 / p))
        }
    }
}

pub fn dual_exponent(p: Exponent) -> Result<Exponent> {
    match p {
        Exponent::Infinity => Ok(Exponent::Finite(1.0)),
        Exponent::Finite(1.0) => Ok(Exponent::Infinity),
        Exponent::Finite(p) if p > 1.0 => Ok(Exponent::Finite(p / (p - 1.0))),
        Exponent::Finite(p) => Err(Error::InvalidParameter(format!("p = {p} < 1"))),
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("k = {k} outside [1, {n}]")));
    }
    Ok(())
}

/// Order by magnitude descending, lowest index first among ties.
fn magnitude_order(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[j].abs().partial_cmp(&v[i].abs()).unwrap_or(Ordering::Equal).then(i.cmp(&j)));
    idx
}

/// Indices of the k largest magnitudes (ties to the lowest index), in increasing index order.
pub fn topk_indices(v: &[f64], k: usize) -> Vec<usize> {
    let mut idx = magnitude_order(v);
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// The k-th largest magnitude of v (0 when k > n).
pub fn kth_largest_magnitude(v: &[f64], k: usize) -> f64 {
    if k == 0 || k > v.len() {
        return 0.0;
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let (_, kth, _) = mags.select_nth_unstable_by(k - 1, |a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    *kth
}

pub fn topk_norm(v: &[f64], k: usize) -> Result<f64> {
    check_k(k, v.len())?;
    // Summing in index order makes k = n agree bit-for-bit with ℓ₁.
    Ok(topk_indices(v, k).into_iter().map(|i| v[i].abs()).sum())
}

pub fn topk_dual_norm(w: &[f64], k: usize) -> Result<f64> {
    check_k(k, w.len())?;
    let linf = lp_norm(w, Exponent::Infinity)?;
    let l1 = lp_norm(w, Exponent::Finite(1.0))?;
    Ok(linf.max(l1 / k as f64))
}

pub fn eval_norm(spec: &NormSpec, v: &[f64]) -> Result<f64> {
    check_finite(v, "v")?;
    if let Some(n) = spec.fixed_dim() {
        crate::error::check_dim(v, n)?;
    }
    eval_unchecked(spec, v)
}

fn eval_unchecked(spec: &NormSpec, v: &[f64]) -> Result<f64> {
    match spec {
        NormSpec::Lp { p } => lp_norm(v, *p),
        NormSpec::TopK { k } => topk_norm(v, *k),
        NormSpec::Max { a, b } => Ok(eval_unchecked(a, v)?.max(eval_unchecked(b, v)?)),
        NormSpec::HSum { h, parts, dims } => {
            let q = block_norms(parts, dims, v)?;
            eval_unchecked(h, &q)
        }
        NormSpec::Polytope { rep } => gauge_norm(rep, v),
        NormSpec::Scaled { inner, factor } => Ok(factor * eval_unchecked(inner, v)?),
        NormSpec::DualOf { inner } => crate::spaces::eval_dual_of(inner, v),
        NormSpec::Symmetric(o) => o.eval(v),
    }
}

/// Split `v` into consecutive blocks of the given sizes.
pub fn blocks<'a>(dims: &[usize], v: &'a [f64]) -> Result<Vec<&'a [f64]>> {
    let total: usize = dims.iter().sum();
    crate::error::check_dim(v, total)?;
    let mut out = Vec::with_capacity(dims.len());
    let mut at = 0;
    for &d in dims {
        out.push(&v[at..at + d]);
        at += d;
    }
    Ok(out)
}

pub fn block_norms(parts: &[NormSpec], dims: &[usize], v: &[f64]) -> Result<Vec<f64>> {
    if parts.len() != dims.len() {
        return Err(Error::DimensionMismatch { expected: parts.len(), got: dims.len() });
    }
    blocks(dims, v)?.into_iter().zip(parts).map(|(b, s)| eval_unchecked(s, b)).collect()
}

/// A subgradient g of ‖·‖ at v: ⟨g, v⟩ = ‖v‖ and ‖g‖_* ≤ 1.
///
/// Closed forms where available, central differences otherwise.
pub fn norm_subgradient(spec: &NormSpec, v: &[f64]) -> Result<Vec<f64>> {
    let n = v.len();
    if v.iter().all(|x| *x == 0.0) {
        return Ok(vec![0.0; n]);
    }
    match spec {
        NormSpec::Lp { p: Exponent::Infinity } => {
            let j = magnitude_order(v)[0];
            let mut g = vec![0.0; n];
            g[j] = v[j].signum();
            Ok(g)
        }
        NormSpec::Lp { p: Exponent::Finite(p) } if *p == 1.0 => Ok(v.iter().map(|x| sign0(*x)).collect()),
        NormSpec::Lp { p: Exponent::Finite(p) } => {
            let nv = lp_norm(v, Exponent::Finite(*p))?;
            Ok(v.iter().map(|x| x.signum() * (x.abs() / nv).powf(p - 1.0)).collect())
        }
        NormSpec::TopK { k } => {
            let mut g = vec![0.0; n];
            for i in topk_indices(v, *k) {
                g[i] = sign0(v[i]);
            }
            Ok(g)
        }
        NormSpec::Max { a, b } => {
            if eval_unchecked(a, v)? >= eval_unchecked(b, v)? {
                norm_subgradient(a, v)
            } else {
                norm_subgradient(b, v)
            }
        }
        NormSpec::Scaled { inner, factor } => Ok(norm_subgradient(inner, v)?.into_iter().map(|x| x * factor).collect()),
        NormSpec::HSum { h, parts, dims } => {
            let q = block_norms(parts, dims, v)?;
            let gh = norm_subgradient(h, &q)?;
            let mut g = Vec::with_capacity(n);
            for ((b, s), c) in blocks(dims, v)?.into_iter().zip(parts).zip(gh) {
                g.extend(norm_subgradient(s, b)?.into_iter().map(|x| x * c));
            }
            Ok(g)
        }
        NormSpec::Polytope { rep } if rep.hrep().is_some() => {
            let rows = rep.hrep().unwrap();
            let mut best = (0, f64::NEG_INFINITY);
            for (i, r) in rows.iter().enumerate() {
                let x = crate::vector::dot(r, v);
                if x.abs() > best.1.abs() {
                    best = (i, x);
                }
            }
            let s = best.1.signum();
            Ok(rows[best.0].iter().map(|x| x * s).collect())
        }
        NormSpec::DualOf { inner } => match crate::spaces::topk_shape(inner) {
            Some(k) if k <= n => norm_subgradient(&NormSpec::TopK { k }, v),
            _ => numeric_gradient(spec, v),
        },
        _ => numeric_gradient(spec, v),
    }
}

fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn numeric_gradient(spec: &NormSpec, v: &[f64]) -> Result<Vec<f64>> {
    let h = 1e-6 * (1.0 + crate::vector::max_abs(v));
    let mut x = v.to_vec();
    let mut g = vec![0.0; v.len()];
    for i in 0..v.len() {
        x[i] = v[i] + h;
        let fp = eval_unchecked(spec, &x)?;
        x[i] = v[i] - h;
        let fm = eval_unchecked(spec, &x)?;
        x[i] = v[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

/// Which symmetry property a counterexample broke.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryViolation {
    Permutation,
    Sign,
    Monotonicity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub kind: SymmetryViolation,
    pub v: Vec<f64>,
    pub transformed: Vec<f64>,
    pub norm_v: f64,
    pub norm_transformed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub passed: bool,
    pub trials: usize,
    pub counterexample: Option<Counterexample>,
}

/// Randomized checks of permutation invariance, sign invariance and
/// coordinate-wise monotonicity; stops at the first counterexample.
pub fn audit_symmetry(spec: &NormSpec, n: usize, trials: usize, seed: u64) -> Result<SymmetryReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = |a: f64, b: f64| 1e-9 * (1.0 + a.abs().max(b.abs()));
    for _ in 0..trials {
        let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let nv = eval_norm(spec, &v)?;

        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let pv: Vec<f64> = perm.iter().map(|&i| v[i]).collect();
        let np = eval_norm(spec, &pv)?;
        if (np - nv).abs() > tol(np, nv) {
            return Ok(fail(trials, SymmetryViolation::Permutation, v, pv, nv, np));
        }

        let sv: Vec<f64> = v.iter().map(|x| if rng.gen::<bool>() { -x } else { *x }).collect();
        let ns = eval_norm(spec, &sv)?;
        if (ns - nv).abs() > tol(ns, nv) {
            return Ok(fail(trials, SymmetryViolation::Sign, v, sv, nv, ns));
        }

        let shrunk: Vec<f64> = v.iter().map(|x| x * rng.gen::<f64>()).collect();
        let nm = eval_norm(spec, &shrunk)?;
        if nm > nv + tol(nm, nv) {
            return Ok(fail(trials, SymmetryViolation::Monotonicity, v, shrunk, nv, nm));
        }
    }
    Ok(SymmetryReport { passed: true, trials, counterexample: None })
}

fn fail(trials: usize, kind: SymmetryViolation, v: Vec<f64>, t: Vec<f64>, nv: f64, nt: f64) -> SymmetryReport {
    SymmetryReport {
        passed: false,
        trials,
        counterexample: Some(Counterexample { kind, v, transformed: t, norm_v: nv, norm_transformed: nt }),
    }
}

/// Check ‖e₁‖ = 1 (to 1e-9); returns the measured value.
pub fn audit_normalization(spec: &NormSpec, n: usize) -> Result<f64> {
    let mut e1 = vec![0.0; n];
    e1[0] = 1.0;
    let val = eval_norm(spec, &e1)?;
    if (val - 1.0).abs() > 1e-9 {
        return Err(Error::AuditFailed(format!("{}: ||e1|| = {val}, expected 1", spec.label())));
    }
    Ok(val)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lp_examples() {
        assert_eq!(lp_norm(&[3.0, 4.0], Exponent::Finite(2.0)).unwrap(), 5.0);
        assert_eq!(lp_norm(&[1.0, -1.0, 1.0], Exponent::Infinity).unwrap(), 1.0);
        assert_eq!(lp_norm(&[1.0; 4], Exponent::Finite(1.0)).unwrap(), 4.0);
        assert!(lp_norm(&[1.0], Exponent::Finite(0.5)).is_err());
        assert!(Exponent::new(0.9).is_err());
    }

    #[test]
    fn dual_exponents() {
        assert_eq!(dual_exponent(Exponent::Finite(2.0)).unwrap(), Exponent::Finite(2.0));
        assert_eq!(dual_exponent(Exponent::Finite(1.0)).unwrap(), Exponent::Infinity);
        assert_eq!(dual_exponent(Exponent::Infinity).unwrap(), Exponent::Finite(1.0));
        assert_eq!(dual_exponent(Exponent::Finite(4.0)).unwrap(), Exponent::Finite(4.0 / 3.0));
    }

    #[test]
    fn topk_examples() {
        assert_eq!(topk_norm(&[3.0, 1.0, 2.0, 0.0], 2).unwrap(), 5.0);
        assert_eq!(topk_norm(&[1.0; 5], 5).unwrap(), 5.0);
        assert_eq!(topk_norm(&[-5.0, 4.0, -3.0, 2.0, 1.0], 3).unwrap(), 12.0);
        assert!(topk_norm(&[1.0, 2.0], 3).is_err());
        assert!(topk_norm(&[1.0, 2.0], 0).is_err());
        assert_eq!(topk_dual_norm(&[1.0, 1.0, 1.0], 2).unwrap(), 1.5);
        assert_eq!(topk_dual_norm(&[2.0, 0.0, 0.0], 2).unwrap(), 2.0);
        assert_eq!(topk_dual_norm(&[1.0; 4], 4).unwrap(), 1.0);
    }

    #[test]
    fn topk_ties_go_to_lowest_index() {
        assert_eq!(topk_indices(&[1.0, -2.0, 2.0, 2.0], 2), vec![1, 2]);
        assert_eq!(kth_largest_magnitude(&[1.0, -2.0, 2.0, 0.5], 3), 1.0);
    }

    #[test]
    fn eval_examples() {
        let hs = NormSpec::hsum(NormSpec::l1(), vec![NormSpec::l2(), NormSpec::l2()], vec![2, 2]);
        assert_eq!(eval_norm(&hs, &[3.0, 4.0, 0.0, 0.0]).unwrap(), 5.0);
        assert!(eval_norm(&hs, &[3.0, 4.0, 0.0]).is_err());
        assert_eq!(eval_norm(&NormSpec::l2(), &[3.0, 4.0]).unwrap(), 5.0);
        assert!(eval_norm(&NormSpec::l2(), &[f64::NAN]).is_err());
        let w = [0.3, -2.0, 1.5, 0.25];
        assert_eq!(eval_norm(&NormSpec::topk_dual(2), &w).unwrap(), topk_dual_norm(&w, 2).unwrap());
    }

    #[test]
    fn subgradients_attain_the_norm() {
        let v = [0.3, -2.0, 1.5, 0.25];
        for spec in [NormSpec::l1(), NormSpec::l2(), NormSpec::linf(), NormSpec::lp(3.0).unwrap(), NormSpec::topk(2)] {
            let g = norm_subgradient(&spec, &v).unwrap();
            let nv = eval_norm(&spec, &v).unwrap();
            assert!((crate::vector::dot(&g, &v) - nv).abs() < 1e-12, "{}", spec.label());
            assert!(eval_norm(&spec.dual().unwrap(), &g).unwrap() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn symmetry_audit_examples() {
        assert!(audit_symmetry(&NormSpec::lp(3.0).unwrap(), 5, 100, 1).unwrap().passed);
        assert!(audit_symmetry(&NormSpec::topk(2), 5, 100, 1).unwrap().passed);
        let weighted = NormSpec::hsum(NormSpec::l1(), vec![NormSpec::l1(), NormSpec::scaled(NormSpec::l1(), 2.0)], vec![1, 1]);
        let rep = audit_symmetry(&weighted, 2, 100, 1).unwrap();
        assert!(!rep.passed);
        assert_eq!(rep.counterexample.unwrap().kind, SymmetryViolation::Permutation);
    }

    #[test]
    fn exponent_json() {
        let s = NormSpec::linf();
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"type":"lp","p":"inf"}"#);
        assert_eq!(serde_json::from_str::<NormSpec>(&j).unwrap(), s);
        let t: NormSpec = serde_json::from_str(r#"{"type":"topk","k":3}"#).unwrap();
        assert_eq!(t, NormSpec::topk(3));
        assert!(serde_json::from_str::<NormSpec>(r#"{"type":"lp","p":0.5}"#).is_err());
    }
}
