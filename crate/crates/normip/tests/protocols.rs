use normip::norms::NormSpec;
use normip::protocols::{lp_protocol, run_protocol, topk_protocol, Party, ProtocolSpec};
use normip::spaces::{linf_into_lp_embedding, Embedding};
use normip::sparsifiers::SparsifierSpec;
use normip::vector::dot;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// (v, w) with ‖v‖₂ ≤ 1, ‖w‖₂ ≤ 1 built from arbitrary reals.
fn unit_pair(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    (a.iter().map(|x| x / na).collect(), b.iter().map(|x| x / nb).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn same_seed_same_transcript(a in prop::collection::vec(-1.0f64..1.0, 8), b in prop::collection::vec(-1.0f64..1.0, 8), seed in any::<u64>()) {
        let (v, w) = unit_pair(&a, &b);
        // ‖w‖_{4/3} ≤ ‖w‖₁ ≤ 1 for the swapped ℓ₄ protocol
        let l1 = w.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        let w1: Vec<f64> = w.iter().map(|x| x / l1).collect();
        for (p, w) in [(lp_protocol(2.0, 0.3, 1.0 / 3.0).unwrap(), &w), (lp_protocol(4.0, 0.3, 1.0 / 3.0).unwrap(), &w1)] {
            let x = run_protocol(&p, &v, w, &mut rng(seed)).unwrap();
            let y = run_protocol(&p, &v, w, &mut rng(seed)).unwrap();
            prop_assert_eq!(x, y);
        }
    }

    #[test]
    fn swap_twice_is_identity(a in prop::collection::vec(-1.0f64..1.0, 6), b in prop::collection::vec(-1.0f64..1.0, 6), seed in any::<u64>()) {
        let (v, w) = unit_pair(&a, &b);
        let p = lp_protocol(2.0, 0.25, 1.0 / 3.0).unwrap();
        let pp = ProtocolSpec::swap(ProtocolSpec::swap(p.clone()));
        let x = run_protocol(&p, &v, &w, &mut rng(seed)).unwrap();
        let y = run_protocol(&pp, &v, &w, &mut rng(seed)).unwrap();
        prop_assert_eq!(x.transcript, y.transcript);
        prop_assert_eq!(x.estimate, y.estimate);
    }

    #[test]
    fn bits_within_declared_cost(a in prop::collection::vec(-1.0f64..1.0, 10), b in prop::collection::vec(-1.0f64..1.0, 10), seed in any::<u64>()) {
        let (v, w) = unit_pair(&a, &b);
        // top-k inputs: ‖v‖_T ≤ ‖v‖₁ and ‖w‖_{T*} ≤ ‖w‖∞ on the scaled vectors
        let l1: f64 = v.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        let vt: Vec<f64> = v.iter().map(|x| x / l1).collect();
        let linf = w.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let w_inf: Vec<f64> = w.iter().map(|x| x / linf).collect();
        let dual = w.iter().map(|x| x.abs()).sum::<f64>() / 3.0;
        let wt: Vec<f64> = w.iter().map(|x| x / linf.max(dual)).collect();
        let cases = [
            (lp_protocol(1.0, 0.3, 0.2).unwrap(), vt.clone(), w_inf),
            (lp_protocol(2.0, 0.3, 0.2).unwrap(), v.clone(), w.clone()),
            (topk_protocol(3, 0.3, 0.2).unwrap(), vt, wt),
        ];
        for (p, v, w) in cases {
            let out = run_protocol(&p, &v, &w, &mut rng(seed)).unwrap();
            prop_assert!(out.transcript.total_bits() <= p.declared_cost(v.len()).unwrap());
            prop_assert!(out.estimate.abs() <= 1.0);
        }
    }

    #[test]
    fn exact_children_make_max_split_exact(a in prop::collection::vec(-1.0f64..1.0, 6), b in prop::collection::vec(-1.0f64..1.0, 6), seed in any::<u64>()) {
        let n = 6;
        let k = 2.0;
        let eps = 0.2;
        let exact = SparsifierSpec::exact(n, eps).unwrap();
        let p = ProtocolSpec::max_split(
            NormSpec::linf(),
            NormSpec::scaled(NormSpec::l1(), 1.0 / k),
            ProtocolSpec::swap(ProtocolSpec::one_way(exact.clone())),
            ProtocolSpec::one_way_scaled(exact, 1.0 / k),
        );
        // v in the max(ℓ∞, ℓ₁/k) ball, w in its dual ball T(2)
        let s = a.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(a.iter().map(|x| x.abs()).sum::<f64>() / k).max(1.0);
        let v: Vec<f64> = a.iter().map(|x| x / s).collect();
        let mut sorted: Vec<f64> = b.iter().map(|x| x.abs()).collect();
        sorted.sort_by(|x, y| y.total_cmp(x));
        let t = (sorted[0] + sorted[1]).max(1.0);
        let w: Vec<f64> = b.iter().map(|x| x / t).collect();
        let out = run_protocol(&p, &v, &w, &mut rng(seed)).unwrap();
        prop_assert!((out.estimate - dot(&v, &w)).abs() <= eps / 4.0, "{} vs {}", out.estimate, dot(&v, &w));
    }
}

#[test]
fn declared_cost_example() {
    // D = 10, n = 1024: 10·(10 + value_bits)
    let sp = SparsifierSpec::lp(2.0, 0.1, 1.0 / 3.0).unwrap().with_sample_count(10);
    let p = ProtocolSpec::one_way(sp);
    let q = normip::protocols::Quantizer::new(1024, 0.1, 10).unwrap();
    assert_eq!(p.declared_cost(1024).unwrap(), 10 * (10 + q.value_bits as u64));
}

#[test]
fn zero_w_gives_zero() {
    let p = topk_protocol(2, 0.2, 1.0 / 3.0).unwrap();
    let out = run_protocol(&p, &[0.3, 0.2, -0.1, 0.0], &[0.0; 4], &mut rng(1)).unwrap();
    assert_eq!(out.estimate, 0.0);
}

#[test]
fn swapped_protocol_is_sent_by_bob() {
    let p = lp_protocol(3.0, 0.3, 1.0 / 3.0).unwrap();
    let out = run_protocol(&p, &[0.5, 0.5, 0.0], &[0.2, -0.4, 0.1], &mut rng(2)).unwrap();
    assert!(out.transcript.messages().iter().all(|m| m.sender == Party::Bob));
}

#[test]
fn embedding_reduction_linf_into_l2() {
    // ℓ∞⁴ ↪ ℓ₂⁴ with α = 2; inner protocol at ε/2
    let eps = 0.2;
    let emb = linf_into_lp_embedding(4, 2.0, 4).unwrap();
    assert_eq!(emb.distortion, 2.0);
    let inner = ProtocolSpec::one_way(SparsifierSpec::exact(4, eps / 2.0).unwrap());
    let p = ProtocolSpec::embed_reduce(emb, inner);
    let v = [1.0, -1.0, 0.5, 0.0];
    let w = [0.25, 0.25, -0.25, 0.25];
    let out = run_protocol(&p, &v, &w, &mut rng(3)).unwrap();
    assert!((out.estimate - dot(&v, &w)).abs() <= eps);
}

#[test]
fn identity_embedding_passes_through() {
    let emb = Embedding::identity(3, NormSpec::l2()).unwrap();
    let inner = ProtocolSpec::one_way(SparsifierSpec::exact(3, 0.1).unwrap());
    let direct = run_protocol(&inner, &[0.6, 0.0, 0.8], &[1.0, 0.0, 0.0], &mut rng(4)).unwrap();
    let via = run_protocol(&ProtocolSpec::embed_reduce(emb, inner), &[0.6, 0.0, 0.8], &[1.0, 0.0, 0.0], &mut rng(4)).unwrap();
    assert!((direct.estimate - via.estimate).abs() < 1e-12);
}

#[test]
fn spec_json_round_trip() {
    let p = topk_protocol(3, 0.2, 1.0 / 3.0).unwrap();
    let s = serde_json::to_string(&p).unwrap();
    let back: ProtocolSpec = serde_json::from_str(&s).unwrap();
    assert_eq!(back, p);
}

#[test]
fn inputs_outside_unit_ball_rejected() {
    let p = lp_protocol(2.0, 0.3, 1.0 / 3.0).unwrap();
    assert!(run_protocol(&p, &[2.0, 0.0], &[1.0, 0.0], &mut rng(5)).is_err());
}
