use normip::harness::instances::{gen_gap_hamming, GapSide};
use normip::harness::{
    adversary::adversarial_dual_search, run_sweep, run_trials, CellConfig, InstanceFamily, LpGrid, SweepConfig, SweepOutput,
};
use normip::norms::{Exponent, NormSpec};
use normip::protocols::{lp_protocol, topk_protocol};
use normip::sparsifiers::SparsifierSpec;
use normip::vector::dot;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_config() -> SweepConfig {
    SweepConfig {
        master_seed: 7,
        cells: vec![CellConfig {
            name: "topk".into(),
            protocol: topk_protocol(2, 0.3, 1.0 / 3.0).unwrap(),
            family: InstanceFamily::RandomDualPair { spec: NormSpec::topk(2), n: 8 },
            trials: 100,
        }],
        grids: vec![LpGrid {
            name: "l2".into(),
            p: 2.0,
            epsilons: vec![0.3],
            delta: 1.0 / 3.0,
            sample_counts: vec![],
            family: InstanceFamily::RandomDualPair { spec: NormSpec::l2(), n: 8 },
            trials: 100,
        }],
    }
}

#[test]
fn sweep_is_byte_reproducible() {
    let cfg = small_config();
    let a = run_sweep(&cfg).unwrap();
    let b = run_sweep(&cfg).unwrap();
    assert!(a.failures.is_empty());
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(a.summary_csv().unwrap(), b.summary_csv().unwrap());
}

#[test]
fn one_cell_hundred_trials() {
    let p = lp_protocol(2.0, 0.3, 1.0 / 3.0).unwrap();
    let v = [0.6, 0.0, 0.8, 0.0];
    let w = [0.5, 0.5, 0.5, 0.5];
    let r = run_trials("c", 0, &p, &v, &w, 100, 11).unwrap();
    assert_eq!(r.z.len(), 100);
    assert_eq!(r.seeds.len(), 100);
    assert!((r.truth - dot(&v, &w)).abs() < 1e-15);
    // ⌈log₂ n⌉ + value bits per sample, s samples every time
    assert!(r.bits.iter().all(|&b| b == r.bits[0]));
    assert!(r.max_bits() <= r.declared_bits);
    r.validate().unwrap();
}

#[test]
fn tail_shrinks_as_samples_grow() {
    let cfg = SweepConfig {
        master_seed: 3,
        cells: vec![],
        grids: vec![LpGrid {
            name: "l2".into(),
            p: 2.0,
            epsilons: vec![0.2],
            delta: 1.0 / 3.0,
            sample_counts: vec![25, 100, 400, 1600],
            family: InstanceFamily::RandomDualPair { spec: NormSpec::l2(), n: 32 },
            trials: 1000,
        }],
    };
    let out = run_sweep(&cfg).unwrap();
    let p95: Vec<f64> = out.reports.iter().map(|r| r.p95_abs).collect();
    assert_eq!(p95.len(), 4);
    for pair in p95.windows(2) {
        assert!(pair[1] <= pair[0] * 1.1, "p95 |Z| = {p95:?}");
    }
}

#[test]
fn artifacts_round_trip() {
    let out = run_sweep(&small_config()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    out.write_artifacts(dir.path()).unwrap();
    let back = SweepOutput::from_json(&std::fs::read_to_string(dir.path().join("reports.json")).unwrap()).unwrap();
    assert_eq!(back.to_json().unwrap(), out.to_json().unwrap());
    let csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(csv.starts_with("cell,epsilon,s,D,bits,success,mean_abs_z,p95_abs_z"));
    assert_eq!(csv.lines().count(), 1 + out.reports.len());
    assert!(dir.path().join("timings.json").exists());
}

#[test]
fn tampered_report_fails_validation() {
    let out = run_sweep(&small_config()).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&out.to_json().unwrap()).unwrap();
    v["reports"][0]["success_rate"] = serde_json::json!(0.0001);
    assert!(SweepOutput::from_json(&v.to_string()).is_err());
}

#[test]
fn bad_cell_is_quarantined() {
    let mut cfg = small_config();
    cfg.cells.push(CellConfig {
        name: "mismatch".into(),
        protocol: lp_protocol(2.0, 0.3, 1.0 / 3.0).unwrap(),
        family: InstanceFamily::Fixed { spec: NormSpec::l2(), v: vec![0.5, 0.5, 0.5], w: vec![0.1, 0.1] },
        trials: 10,
    });
    let out = run_sweep(&cfg).unwrap();
    assert_eq!(out.reports.len(), 2);
    assert_eq!(out.failures.len(), 1);
    assert_eq!(out.failures[0].cell, "mismatch");
}

#[test]
fn searched_dual_is_no_easier_than_random() {
    let n = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (v, w_rand) = normip::harness::instances::random_dual_pair(&NormSpec::l2(), n, &mut rng).unwrap();
    let sp = SparsifierSpec::lp(2.0, 0.3, 1.0 / 3.0).unwrap().with_sample_count(20);
    let ranked = adversarial_dual_search(&NormSpec::l2(), &v, &sp, 30, 400, 9).unwrap();
    let z = normip::harness::sparsifier_errors(&v, &w_rand, &sp, 400, 9).unwrap();
    let random_rate = normip::harness::stats::success_rate(&z, 0.3);
    assert!(ranked[0].success_rate <= random_rate + 0.05, "{} vs {random_rate}", ranked[0].success_rate);
    assert!(ranked.windows(2).all(|p| p[0].success_rate <= p[1].success_rate));
}

#[test]
fn gap_hamming_sides_and_decisions() {
    let (k, c) = (400, 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for side in [GapSide::Low, GapSide::High] {
        let g = gen_gap_hamming(k, c, Exponent::Finite(2.0), Some(side), &mut rng, 10_000_000).unwrap();
        assert_eq!(g.side, side);
        let gap = c * (k as f64).sqrt();
        match side {
            GapSide::Low => assert!(g.distance as f64 <= k as f64 / 2.0 - gap),
            GapSide::High => assert!(g.distance as f64 >= k as f64 / 2.0 + gap),
        }
        let hamming = g.x.iter().zip(&g.y).filter(|(a, b)| a != b).count();
        assert_eq!(hamming, g.distance);
        // the exact inner product always decides correctly
        assert_eq!(g.decide(dot(&g.v, &g.w)), side);
    }
    // k below 4C² is rejected
    assert!(gen_gap_hamming(10, 2.0, Exponent::Finite(2.0), None, &mut rng, 1000).is_err());
}
