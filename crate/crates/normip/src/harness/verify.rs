//! A quick invariant/oracle suite, run by `normip verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{run_index_pipeline, run_trials};
use crate::error::Result;
use crate::norms::{dual_norm_bruteforce, eval_norm, topk_norm, NormSpec};
use crate::polytopes::Polytope;
use crate::protocols::{lp_protocol, run_protocol, topk_protocol, Quantizer, ProtocolSpec};
use crate::spaces::topk_decompose;
use crate::sparsifiers::SparsifierSpec;
use crate::vector::dot;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, r: Result<(bool, String)>) -> Check {
    match r {
        Ok((passed, detail)) => Check { name: name.into(), passed, detail },
        Err(e) => Check { name: name.into(), passed: false, detail: format!("error: {e}") },
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()
}

fn dual_oracles(trials: usize) -> Result<(bool, String)> {
    let n = 4;
    let specs = vec![
        NormSpec::l1(),
        NormSpec::linf(),
        NormSpec::topk(1),
        NormSpec::topk(2),
        NormSpec::topk(3),
        NormSpec::polytope(Polytope::cube(n)?),
        NormSpec::polytope(Polytope::cross_polytope(n)?),
        NormSpec::max(NormSpec::linf(), NormSpec::scaled(NormSpec::l1(), 0.5)),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for spec in &specs {
        let dual = spec.dual()?;
        for _ in 0..trials {
            let w = gaussian_vec(&mut rng, n);
            let bf = dual_norm_bruteforce(spec, &w, 0)?;
            worst = worst.max((bf.value - eval_norm(&dual, &w)?).abs());
        }
    }
    Ok((worst <= 1e-9, format!("max |brute force - closed form| = {worst:.3e}")))
}

fn topk_identity(trials: usize) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let n = rng.gen_range(1..=10);
        let v = gaussian_vec(&mut rng, n);
        for k in 1..=n {
            let (a, b) = topk_decompose(&v, k)?;
            let l1: f64 = a.iter().map(|x| x.abs()).sum();
            let li = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            worst = worst.max((l1 + k as f64 * li - topk_norm(&v, k)?).abs());
        }
    }
    Ok((worst <= 1e-12, format!("max residual = {worst:.3e}")))
}

fn holder(trials: usize) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let specs = [NormSpec::l1(), NormSpec::l2(), NormSpec::lp(3.0)?, NormSpec::linf(), NormSpec::topk(2)];
    let mut bad = 0;
    for spec in &specs {
        let dual = spec.dual()?;
        for _ in 0..trials {
            let v = gaussian_vec(&mut rng, 6);
            let w = gaussian_vec(&mut rng, 6);
            if dot(&v, &w).abs() > eval_norm(spec, &v)? * eval_norm(&dual, &w)? * (1.0 + 1e-12) {
                bad += 1;
            }
        }
    }
    Ok((bad == 0, format!("{bad} violations")))
}

fn determinism() -> Result<(bool, String)> {
    let p = topk_protocol(2, 0.3, 1.0 / 3.0)?;
    let v = [0.3, -0.2, 0.1, 0.0, 0.25, -0.05];
    let w = [0.5, 0.5, -0.5, 0.25, 0.0, 0.1];
    let a = serde_json::to_string(&run_trials("det", 0, &p, &v, &w, 50, 7)?)?;
    let b = serde_json::to_string(&run_trials("det", 0, &p, &v, &w, 50, 7)?)?;
    Ok((a == b, format!("{} bytes", a.len())))
}

fn swap_involution() -> Result<(bool, String)> {
    let p = lp_protocol(2.0, 0.3, 1.0 / 3.0)?;
    let pp = ProtocolSpec::swap(ProtocolSpec::swap(p.clone()));
    let v = [0.6, 0.0, -0.8];
    let w = [0.1, 0.9, 0.3];
    let mut same = true;
    for s in 0..20 {
        let a = run_protocol(&p, &v, &w, &mut ChaCha8Rng::seed_from_u64(s))?;
        let b = run_protocol(&pp, &v, &w, &mut ChaCha8Rng::seed_from_u64(s))?;
        same &= a.transcript == b.transcript && a.estimate == b.estimate;
    }
    Ok((same, "20 seeds".into()))
}

fn bit_soundness() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let protos = [lp_protocol(1.0, 0.3, 0.2)?, lp_protocol(2.0, 0.3, 0.2)?, lp_protocol(3.0, 0.3, 0.2)?, topk_protocol(3, 0.3, 0.2)?];
    let specs = [NormSpec::l1(), NormSpec::l2(), NormSpec::lp(3.0)?, NormSpec::topk(3)];
    let mut runs = 0;
    for (p, spec) in protos.iter().zip(&specs) {
        for _ in 0..25 {
            let (v, w) = super::random_dual_pair(spec, 12, &mut rng)?;
            // run_protocol itself rejects transcripts over the declared cost
            run_protocol(p, &v, &w, &mut rng)?;
            runs += 1;
        }
    }
    Ok((true, format!("{runs} runs within declared cost")))
}

fn quantizer_roundtrip() -> Result<(bool, String)> {
    let q = Quantizer::new(64, 0.1, 16)?;
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let worst = (0..10_000)
        .map(|_| {
            let x: f64 = rng.gen_range(-q.bound..=q.bound);
            Ok((q.decode(q.encode(x)?) - x).abs())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok((worst <= q.step / 2.0 * (1.0 + 1e-12), format!("max error {worst:.3e}, step {:.3e}", q.step)))
}

fn index_uncompressed() -> Result<(bool, String)> {
    let n = 32;
    let p = ProtocolSpec::one_way(SparsifierSpec::exact(n, 0.25)?);
    let r = run_index_pipeline(n, &p, 100, 16)?;
    Ok((r.correct == r.instances, format!("{}/{} bits decoded", r.correct, r.instances)))
}

fn polytope_reps() -> Result<(bool, String)> {
    for n in 2..=4 {
        Polytope::cube(n)?.completed()?.audit_reps()?;
        Polytope::cross_polytope(n)?.completed()?.audit_reps()?;
    }
    Ok((true, "cube and cross-polytope, n = 2..4".into()))
}

/// Every check, in order.
pub fn verify_suite() -> Vec<Check> {
    vec![
        check("dual_norm_oracles", dual_oracles(200)),
        check("topk_decomposition", topk_identity(200)),
        check("holder_inequality", holder(200)),
        check("report_determinism", determinism()),
        check("swap_involution", swap_involution()),
        check("bit_soundness", bit_soundness()),
        check("quantizer_roundtrip", quantizer_roundtrip()),
        check("index_uncompressed", index_uncompressed()),
        check("polytope_representations", polytope_reps()),
    ]
}
