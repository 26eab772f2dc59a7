//! Search over dual-ball directions for the w a sparsifier (or protocol)
//! handles worst.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mix_seed, stats, trial_rng};
use crate::error::Result;
use crate::norms::{eval_norm, norm_subgradient, Exponent, NormSpec};
use crate::protocols::{run_protocol, ProtocolSpec};
use crate::sparsifiers::{sparsify, SparsifierSpec};
use crate::vector::{dot, SparseVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualCandidate {
    pub label: String,
    pub w: Vec<f64>,
    /// Empirical Pr(|error| ≤ ε) over the probe trials.
    pub success_rate: f64,
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn dual_norm(spec: &NormSpec, w: &[f64]) -> Result<f64> {
    eval_norm(&NormSpec::DualOf { inner: Box::new(spec.clone()) }, w)
}

/// Extreme points of the dual ball when it is a known polytope; sampled
/// when there are more than `cap`.
fn dual_vertices<R: Rng + ?Sized>(spec: &NormSpec, n: usize, cap: usize, rng: &mut R) -> Option<Vec<(String, Vec<f64>)>> {
    let signs = |mask: u64| -> Vec<f64> { (0..n).map(|j| if mask >> j & 1 == 1 { -1.0 } else { 1.0 }).collect() };
    let random_signs = |rng: &mut R| -> Vec<f64> { (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect() };
    match spec {
        // dual ℓ∞: sign vectors
        NormSpec::Lp { p: Exponent::Finite(p) } if *p == 1.0 => {
            if n < 63 && (1u64 << n) as usize <= cap {
                Some((0..1u64 << n).map(|m| (format!("sign#{m}"), signs(m))).collect())
            } else {
                Some((0..cap).map(|j| (format!("sign~{j}"), random_signs(rng))).collect())
            }
        }
        // dual ℓ1: ±e_i
        NormSpec::Lp { p: Exponent::Infinity } => Some(
            (0..n)
                .flat_map(|i| {
                    [1.0, -1.0].into_iter().map(move |s| {
                        let mut e = vec![0.0; n];
                        e[i] = s;
                        (format!("e{i}{}", if s > 0.0 { "+" } else { "-" }), e)
                    })
                })
                .take(cap)
                .collect(),
        ),
        // dual ball {‖w‖∞ ≤ 1, ‖w‖₁ ≤ k}: k signed ones
        NormSpec::TopK { k } if *k <= n => Some(
            (0..cap)
                .map(|j| {
                    let mut w = vec![0.0; n];
                    for i in sample(rng, n, *k) {
                        w[i] = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    }
                    (format!("ksign~{j}"), w)
                })
                .collect(),
        ),
        NormSpec::Polytope { rep } => {
            let rows = match rep.hrep() {
                Some(r) => r.to_vec(),
                None => rep.completed().ok()?.hrep()?.to_vec(),
            };
            Some(
                rows.iter()
                    .enumerate()
                    .flat_map(|(i, a)| [(format!("facet{i}+"), a.clone()), (format!("facet{i}-"), a.iter().map(|x| -x).collect())])
                    .take(cap)
                    .collect(),
            )
        }
        _ => None,
    }
}

/// Candidate dual vectors for `v`, each rescaled to dual norm 1. At most
/// `budget` are returned (and at least one if `budget ≥ 1`).
pub fn dual_candidates(spec: &NormSpec, v: &[f64], budget: usize, seed: u64) -> Result<Vec<(String, Vec<f64>)>> {
    let n = v.len();
    let mut rng = trial_rng(seed, 0, 0);
    let mut raw: Vec<(String, Vec<f64>)> = Vec::new();
    let sv: Vec<f64> = v.iter().map(|x| sign(*x)).collect();
    raw.push(("aligned".into(), norm_subgradient(spec, v)?));
    raw.push(("sign".into(), sv.clone()));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| v[*b].abs().total_cmp(&v[*a].abs()).then(a.cmp(b)));
    let mut m = 1;
    while m <= n {
        let mut top = vec![0.0; n];
        let mut bottom = vec![0.0; n];
        for j in 0..m {
            top[order[j]] = sv[order[j]];
            bottom[order[n - 1 - j]] = sv[order[n - 1 - j]];
        }
        raw.push((format!("top{m}"), top));
        // mass where v is small is where importance sampling is weakest
        raw.push((format!("bottom{m}"), bottom));
        m *= 2;
    }
    let mut alternating = sv.clone();
    for (r, &i) in order.iter().enumerate() {
        if r % 2 == 1 {
            alternating[i] = -alternating[i];
        }
    }
    raw.push(("alternating".into(), alternating));
    let room = budget.saturating_sub(raw.len()).max(budget / 2);
    if let Some(vs) = dual_vertices(spec, n, room, &mut rng) {
        raw.extend(vs);
    }
    while raw.len() < budget {
        let j = raw.len();
        raw.push((format!("random{j}"), (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect()));
    }
    let mut out = Vec::new();
    for (label, w) in raw {
        let s = dual_norm(spec, &w)?;
        if s > 0.0 && s.is_finite() {
            out.push((label, w.iter().map(|x| x / s).collect()));
        }
        if out.len() == budget {
            break;
        }
    }
    Ok(out)
}

fn rank(mut cands: Vec<DualCandidate>) -> Vec<DualCandidate> {
    // stable: ties keep generation order
    cands.sort_by(|a, b| a.success_rate.total_cmp(&b.success_rate));
    cands
}

/// Draws φ(v) for `trials` seeds and scores every candidate against the same
/// draws; worst (lowest success) first.
pub fn adversarial_dual_search(
    spec: &NormSpec,
    v: &[f64],
    sparsifier: &SparsifierSpec,
    budget: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<DualCandidate>> {
    let cands = dual_candidates(spec, v, budget.max(1), seed)?;
    let phis: Vec<SparseVector> = (0..trials)
        .into_par_iter()
        .map(|t| sparsify(v, sparsifier, &mut trial_rng(seed, 1, t as u64)))
        .collect::<Result<_>>()?;
    let eps = sparsifier.epsilon;
    Ok(rank(
        cands
            .into_par_iter()
            .map(|(label, w)| {
                let truth = dot(v, &w);
                let z: Vec<f64> = phis.iter().map(|phi| phi.dot(&w) - truth).collect();
                DualCandidate { label, w, success_rate: stats::success_rate(&z, eps) }
            })
            .collect(),
    ))
}

/// Same search scored through a full protocol run per (candidate, trial).
pub fn adversarial_protocol_search(
    spec: &NormSpec,
    v: &[f64],
    protocol: &ProtocolSpec,
    budget: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<DualCandidate>> {
    let cands = dual_candidates(spec, v, budget.max(1), seed)?;
    let eps = protocol.epsilon();
    let scored = cands
        .into_par_iter()
        .enumerate()
        .map(|(c, (label, w))| {
            let truth = dot(v, &w);
            let z = (0..trials)
                .map(|t| Ok(run_protocol(protocol, v, &w, &mut trial_rng(mix_seed(seed, 2, c as u64), 0, t as u64))?.estimate - truth))
                .collect::<Result<Vec<f64>>>()?;
            Ok(DualCandidate { label, w, success_rate: stats::success_rate(&z, eps) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rank(scored))
}
