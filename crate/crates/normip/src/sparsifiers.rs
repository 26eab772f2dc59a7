//! Importance-sampling sparsifiers behind one (ε, δ, D) contract.
//!
//! φ(v) is the average of s independent one-sparse draws e_t·v_t/p_t. The s
//! draws are generated as a multinomial count vector (sequential conditional
//! binomials), which is the same distribution as s categorical draws with
//! repeats merged, at O(support) cost independent of s.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::Binomial;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::norms::{eval_norm, lp_norm, Exponent, NormSpec};
use crate::vector::SparseVector;

pub const DEFAULT_LP_CONSTANT: f64 = 36.0;
pub const DEFAULT_LEVELSET_CONSTANT: f64 = 8.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SparsifierKind {
    /// p_i = |v_i|^p on the ℓ_p-normalized vector.
    LpSampling { p: Exponent },
    /// Dyadic level sets of |v|; `k`, `eps` describe the excluded ℓ∞^k copies.
    LevelSet { norm: NormSpec, k: usize, eps: f64 },
    /// φ(v) = v; sends every coordinate.
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsifierSpec {
    pub kind: SparsifierKind,
    pub epsilon: f64,
    pub delta: f64,
    pub constant: f64,
    pub sample_count: u64,
    pub sparsity_cap: u64,
}

/// Sample-count multiplier for failure probabilities below 1/3 (Chebyshev scaling).
fn delta_multiplier(delta: f64) -> f64 {
    (1.0 / (3.0 * delta)).max(1.0)
}

fn check_accuracy(epsilon: f64, delta: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must lie in (0, 1)")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta = {delta} must lie in (0, 1)")));
    }
    Ok(())
}

fn to_count(x: f64) -> Result<u64> {
    if !x.is_finite() || x > 1e15 {
        return Err(Error::InvalidParameter(format!("sample count {x} is not representable")));
    }
    Ok(x.ceil().max(1.0) as u64)
}

/// p̂ = ln k / ln(1/ε).
pub fn p_hat(k: usize, eps: f64) -> f64 {
    (k as f64).ln() / (1.0 / eps).ln()
}

impl SparsifierSpec {
    /// ℓ_p importance sampling with the default constant.
    pub fn lp(p: f64, epsilon: f64, delta: f64) -> Result<Self> {
        Self::lp_with_constant(p, epsilon, delta, DEFAULT_LP_CONSTANT)
    }

    /// s = ⌈C·ε^{−max(2,p)}·max(1, 1/(3δ))⌉.
    pub fn lp_with_constant(p: f64, epsilon: f64, delta: f64, constant: f64) -> Result<Self> {
        check_accuracy(epsilon, delta)?;
        let p = Exponent::new(p)?;
        let Exponent::Finite(pv) = p else {
            return Err(Error::InvalidParameter("ℓ∞ sampling has no finite sample count; use the exact sparsifier".into()));
        };
        let s = to_count(constant * epsilon.powf(-pv.max(2.0)) * delta_multiplier(delta))?;
        Ok(SparsifierSpec { kind: SparsifierKind::LpSampling { p }, epsilon, delta, constant, sample_count: s, sparsity_cap: s })
    }

    /// Level-set sampling for a symmetric norm excluding ℓ∞^k at distortion 1/eps:
    /// s = ⌈(C·p̂/ε)^{2p̂}·(k·log₂ n)²·max(1, 1/(3δ))⌉.
    pub fn level_set(norm: NormSpec, k: usize, eps: f64, epsilon: f64, delta: f64, n: usize) -> Result<Self> {
        Self::level_set_with_constant(norm, k, eps, epsilon, delta, n, DEFAULT_LEVELSET_CONSTANT)
    }

    pub fn level_set_with_constant(norm: NormSpec, k: usize, eps: f64, epsilon: f64, delta: f64, n: usize, constant: f64) -> Result<Self> {
        check_accuracy(epsilon, delta)?;
        if k < 2 || !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!("level-set sampling needs k >= 2 and eps in (0,1); got k={k}, eps={eps}")));
        }
        let ph = p_hat(k, eps);
        let logn = (n.max(2) as f64).log2();
        let s = to_count((constant * ph / epsilon).powf(2.0 * ph) * (k as f64 * logn).powi(2) * delta_multiplier(delta))?;
        Ok(SparsifierSpec { kind: SparsifierKind::LevelSet { norm, k, eps }, epsilon, delta, constant, sample_count: s, sparsity_cap: s })
    }

    /// φ(v) = v in dimension n; `epsilon` only sets the value grid.
    pub fn exact(n: usize, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || n == 0 {
            return Err(Error::InvalidParameter("exact sparsifier needs n >= 1 and epsilon > 0".into()));
        }
        Ok(SparsifierSpec { kind: SparsifierKind::Exact, epsilon, delta: 0.0, constant: 0.0, sample_count: n as u64, sparsity_cap: n as u64 })
    }

    /// Cap the sample count (and the sparsity cap with it).
    pub fn with_sample_cap(mut self, cap: u64) -> Self {
        self.sample_count = self.sample_count.min(cap.max(1));
        self.sparsity_cap = self.sample_count;
        self
    }

    /// Override the sample count (and the sparsity cap with it).
    pub fn with_sample_count(mut self, s: u64) -> Self {
        self.sample_count = s.max(1);
        self.sparsity_cap = self.sample_count;
        self
    }

    /// The primal norm this sparsifier expects v to be bounded in.
    pub fn norm(&self) -> Option<NormSpec> {
        match &self.kind {
            SparsifierKind::LpSampling { p } => Some(NormSpec::Lp { p: *p }),
            SparsifierKind::LevelSet { norm, .. } => Some(norm.clone()),
            SparsifierKind::Exact => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_count == 0 || self.sample_count > self.sparsity_cap {
            return Err(Error::InvalidParameter(format!("need 1 <= s <= D (s = {}, D = {})", self.sample_count, self.sparsity_cap)));
        }
        if let SparsifierKind::LpSampling { p: Exponent::Infinity } = self.kind {
            return Err(Error::InvalidParameter("ℓ∞ sampling is not supported".into()));
        }
        Ok(())
    }
}

/// Sampling probabilities over coordinates; zero wherever v is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingDistribution {
    pub probs: Vec<f64>,
}

impl SamplingDistribution {
    /// Σp = 1 ± 1e-12 and p_i = 0 wherever v_i = 0.
    pub fn validate(&self, v: &[f64]) -> Result<()> {
        let s: f64 = self.probs.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::AuditFailed(format!("probabilities sum to {s}")));
        }
        if self.probs.iter().zip(v).any(|(p, x)| *x == 0.0 && *p != 0.0 || *p < 0.0) {
            return Err(Error::AuditFailed("mass on a zero coordinate".into()));
        }
        Ok(())
    }

    fn support(&self) -> Vec<usize> {
        (0..self.probs.len()).filter(|&i| self.probs[i] > 0.0).collect()
    }
}

fn normalized(mut probs: Vec<f64>) -> Result<SamplingDistribution> {
    let s: f64 = probs.iter().sum();
    if !(s > 0.0) {
        return Err(Error::InvalidParameter("zero vector has no sampling distribution".into()));
    }
    probs.iter_mut().for_each(|p| *p /= s);
    Ok(SamplingDistribution { probs })
}

/// p_i = |v_i|^p (v is expected to have ‖v‖_p = 1; mass is renormalized).
pub fn lp_distribution(v: &[f64], p: Exponent) -> Result<SamplingDistribution> {
    check_finite(v, "v")?;
    let Exponent::Finite(p) = p else {
        return Err(Error::InvalidParameter("ℓ∞ sampling is not supported".into()));
    };
    normalized(v.iter().map(|x| x.abs().powf(p)).collect())
}

/// Dyadic level of x ∈ (0, 1]: the i ≥ 1 with 2^{−i} < x ≤ 2^{−i+1}, read
/// off the binary exponent so boundaries are exact.
pub fn dyadic_level(x: f64) -> i64 {
    debug_assert!(x > 0.0 && x <= 1.0 && x.is_normal());
    let bits = x.to_bits();
    let e = ((bits >> 52) & 0x7ff) as i64 - 1023;
    let mantissa = bits & ((1u64 << 52) - 1);
    if mantissa == 0 {
        1 - e
    } else {
        -e
    }
}

/// R = ⌈3·log₂ n⌉ (at least 1).
pub fn level_count(n: usize) -> usize {
    ((3.0 * (n.max(2) as f64).log2()).ceil() as usize).max(1)
}

/// Partition of the support into dyadic levels plus the tail class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSets {
    pub r: usize,
    /// Class of each coordinate: Some(1..=R) for a level, Some(R+1) for the
    /// tail, None for zeros.
    pub class: Vec<Option<usize>>,
    pub nonempty: usize,
    pub tail_size: usize,
}

pub fn level_sets(v: &[f64], n: usize) -> Result<LevelSets> {
    check_finite(v, "v")?;
    if let Some(x) = v.iter().find(|x| x.abs() > 1.0) {
        return Err(Error::Precondition(format!("level sets need |v_j| <= 1, got {x}")));
    }
    let r = level_count(n);
    let tail_cut = 2f64.powi(-(r as i32));
    let class: Vec<Option<usize>> = v
        .iter()
        .map(|x| {
            let a = x.abs();
            if a == 0.0 {
                None
            } else if a <= tail_cut {
                Some(r + 1)
            } else {
                Some(dyadic_level(a) as usize)
            }
        })
        .collect();
    let mut sizes = vec![0usize; r + 2];
    class.iter().flatten().for_each(|&c| sizes[c] += 1);
    let nonempty = sizes.iter().filter(|&&s| s > 0).count();
    Ok(LevelSets { r, class, nonempty, tail_size: sizes[r + 1] })
}

/// p_j = 1/(#nonempty classes) · 1/|class(j)|.
pub fn levelset_distribution(v: &[f64], n: usize) -> Result<SamplingDistribution> {
    let ls = level_sets(v, n)?;
    if ls.nonempty == 0 {
        return Err(Error::InvalidParameter("zero vector has no sampling distribution".into()));
    }
    let mut sizes = vec![0usize; ls.r + 2];
    ls.class.iter().flatten().for_each(|&c| sizes[c] += 1);
    let probs = ls.class.iter().map(|c| c.map_or(0.0, |c| 1.0 / (ls.nonempty as f64 * sizes[c] as f64))).collect();
    Ok(SamplingDistribution { probs })
}

/// One draw e_t · v_t / p_t.
pub fn draw_one_sparse<R: Rng + ?Sized>(v: &[f64], dist: &SamplingDistribution, rng: &mut R) -> Result<SparseVector> {
    let support = dist.support();
    let weights: Vec<f64> = support.iter().map(|&i| dist.probs[i]).collect();
    let wi = WeightedIndex::new(&weights).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let t = support[wi.sample(rng)];
    SparseVector::new(v.len(), vec![t], vec![v[t] / dist.probs[t]])
}

/// Multinomial(s, p) counts over the support, in index order.
fn multinomial_counts<R: Rng + ?Sized>(s: u64, dist: &SamplingDistribution, rng: &mut R) -> Vec<(usize, u64)> {
    let support = dist.support();
    let mut suffix = vec![0.0; support.len() + 1];
    for j in (0..support.len()).rev() {
        suffix[j] = suffix[j + 1] + dist.probs[support[j]];
    }
    let mut left = s;
    let mut out = Vec::new();
    for (j, &i) in support.iter().enumerate() {
        if left == 0 {
            break;
        }
        let c = if j + 1 == support.len() {
            left
        } else {
            let q = (dist.probs[i] / suffix[j]).clamp(0.0, 1.0);
            Binomial::new(left, q).expect("valid binomial").sample(rng)
        };
        if c > 0 {
            out.push((i, c));
            left -= c;
        }
    }
    out
}

/// (1/s)·Σ of s draws, repeated indices merged.
fn average_of_draws<R: Rng + ?Sized>(v: &[f64], dist: &SamplingDistribution, s: u64, scale: f64, rng: &mut R) -> Result<SparseVector> {
    let counts = multinomial_counts(s, dist, rng);
    let (idx, vals): (Vec<usize>, Vec<f64>) =
        counts.into_iter().map(|(i, c)| (i, scale * (c as f64 / s as f64) * (v[i] / dist.probs[i]))).unzip();
    let out = SparseVector::new(v.len(), idx, vals)?;
    assert!(out.nnz() as u64 <= s, "sparsity cap violated");
    Ok(out)
}

/// φ(v) = ‖v‖_p · (1/s)·Σ_j ṽ^{(j)} with ṽ drawn for v/‖v‖_p.
pub fn lp_sparsify<R: Rng + ?Sized>(v: &[f64], spec: &SparsifierSpec, rng: &mut R) -> Result<SparseVector> {
    let SparsifierKind::LpSampling { p } = spec.kind else {
        return Err(Error::InvalidParameter("lp_sparsify needs an LpSampling spec".into()));
    };
    check_finite(v, "v")?;
    let norm = lp_norm(v, p)?;
    if norm == 0.0 {
        return Ok(SparseVector::zeros(v.len()));
    }
    let u: Vec<f64> = v.iter().map(|x| x / norm).collect();
    let dist = lp_distribution(&u, p)?;
    average_of_draws(&u, &dist, spec.sample_count, norm, rng)
}

/// Level-set sampling; v must already lie in the unit ball of the spec's norm.
pub fn symmetric_sparsify<R: Rng + ?Sized>(v: &[f64], spec: &SparsifierSpec, rng: &mut R) -> Result<SparseVector> {
    if !matches!(spec.kind, SparsifierKind::LevelSet { .. }) {
        return Err(Error::InvalidParameter("symmetric_sparsify needs a LevelSet spec".into()));
    }
    check_finite(v, "v")?;
    if v.iter().all(|x| *x == 0.0) {
        return Ok(SparseVector::zeros(v.len()));
    }
    let dist = levelset_distribution(v, v.len())?;
    average_of_draws(v, &dist, spec.sample_count, 1.0, rng)
}

/// Dispatch on the spec's kind.
pub fn sparsify<R: Rng + ?Sized>(v: &[f64], spec: &SparsifierSpec, rng: &mut R) -> Result<SparseVector> {
    match spec.kind {
        SparsifierKind::LpSampling { .. } => lp_sparsify(v, spec, rng),
        SparsifierKind::LevelSet { .. } => symmetric_sparsify(v, spec, rng),
        SparsifierKind::Exact => {
            check_finite(v, "v")?;
            Ok(SparseVector::from_dense(v))
        }
    }
}

/// Cheap check of ‖v‖ ≤ 1 under the sparsifier's norm (ℓ_p only).
pub fn check_unit_ball(v: &[f64], spec: &SparsifierSpec) -> Result<()> {
    if let SparsifierKind::LpSampling { p } = spec.kind {
        let nv = lp_norm(v, p)?;
        if nv > 1.0 + 1e-9 {
            return Err(Error::Precondition(format!("||v||_{p} = {nv} > 1")));
        }
    }
    Ok(())
}

/// Plug-in weak q-norm: max over ranks r of (r/m)^{1/q}·|Z|_(r).
pub fn weak_qnorm_estimate(samples: &[f64], q: f64) -> Result<f64> {
    if samples.len() < 100 {
        return Err(Error::InvalidParameter(format!("need at least 100 samples, got {}", samples.len())));
    }
    if !(q >= 1.0) {
        return Err(Error::InvalidParameter(format!("q = {q} < 1")));
    }
    check_finite(samples, "samples")?;
    let mut a: Vec<f64> = samples.iter().map(|x| x.abs()).collect();
    a.sort_by(|x, y| y.total_cmp(x));
    let m = a.len() as f64;
    Ok(a.iter().enumerate().map(|(r, z)| ((r + 1) as f64 / m).powf(1.0 / q) * z).fold(0.0, f64::max))
}

/// max over nonempty-mass subsets S of Pr(t ∈ S)^{−1/p̂}·‖v_S‖_N, by
/// exhaustive enumeration (n ≤ 20).
pub fn weak_moment_sup(v: &[f64], norm: &NormSpec, dist: &SamplingDistribution, p_hat: f64) -> Result<f64> {
    let n = v.len();
    if n > 20 {
        return Err(Error::InvalidParameter(format!("exhaustive subset search needs n <= 20, got {n}")));
    }
    let mut best = 0.0f64;
    let mut vs = vec![0.0; n];
    for mask in 1u32..(1u32 << n) {
        let mut pr = 0.0;
        for i in 0..n {
            if mask >> i & 1 == 1 {
                vs[i] = v[i];
                pr += dist.probs[i];
            } else {
                vs[i] = 0.0;
            }
        }
        if pr > 0.0 {
            best = best.max(pr.powf(-1.0 / p_hat) * eval_norm(norm, &vs)?);
        }
    }
    Ok(best)
}

/// (k·R')^{1/p̂}·(1 + 1e-9) + (R'·|T₊|)^{1/p̂}·‖v_{T₊}‖_N.
pub fn weak_moment_bound(v: &[f64], norm: &NormSpec, k: usize, p_hat: f64) -> Result<f64> {
    let ls = level_sets(v, v.len())?;
    let rp = ls.nonempty as f64;
    let main = (k as f64 * rp).powf(1.0 / p_hat) * (1.0 + 1e-9);
    if ls.tail_size == 0 {
        return Ok(main);
    }
    let tail: Vec<f64> = v.iter().zip(&ls.class).map(|(x, c)| if *c == Some(ls.r + 1) { *x } else { 0.0 }).collect();
    Ok(main + (rp * ls.tail_size as f64).powf(1.0 / p_hat) * eval_norm(norm, &tail)?)
}
