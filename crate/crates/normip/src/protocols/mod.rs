//! Two-party protocols as explicit combinator trees, executed with
//! bit-exact transcripts.
//!
//! Every node returns an estimate clamped to [−1, 1] (the true inner product
//! lies there under the norm preconditions); the raw value is kept in the
//! trace.

mod quantize;
mod transcript;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use quantize::{bits_for, quantize_value, Quantizer};
pub use transcript::{BitString, Message, Party, Transcript};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::norms::{block_norms, blocks, dual_exponent, eval_norm, lp_norm, NormSpec};
use crate::polytopes::VertexSample;
use crate::spaces::{dual_spec, lift_dual_vector, split_max_dual, Embedding, SPLIT_BUDGET};
use crate::sparsifiers::{sparsify, SparsifierKind, SparsifierSpec};

/// Alice sparsifies `scale·v` and sends it; Bob outputs ⟨φ, w⟩ / scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneWaySpec {
    pub sparsifier: SparsifierSpec,
    #[serde(default = "unit_scale")]
    pub scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

/// Run `inner` with the roles of the two parties exchanged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwapSpec {
    pub inner: Box<ProtocolSpec>,
}

/// IP for max(a, b): Bob splits w across the two dual balls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxSplitSpec {
    pub a: NormSpec,
    pub b: NormSpec,
    pub inner_a: Box<ProtocolSpec>,
    pub inner_b: Box<ProtocolSpec>,
}

/// IP for the h-sum of `parts` (block sizes `dims`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HSumSpec {
    pub h_sparsifier: SparsifierSpec,
    pub parts: Vec<NormSpec>,
    pub dims: Vec<usize>,
    pub inner_parts: Vec<ProtocolSpec>,
    /// Median repeats per block: ⌈c·log₂(D₂ + 2)⌉.
    #[serde(default = "default_repeat_constant")]
    pub repeat_constant: f64,
}

fn default_repeat_constant() -> f64 {
    4.0
}

/// Run `inner` on the target side of an embedding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedSpec {
    pub embedding: Embedding,
    pub inner: Box<ProtocolSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProtocolSpec {
    OneWaySparsify(OneWaySpec),
    Swap(SwapSpec),
    MaxSplit(MaxSplitSpec),
    HsumCompose(HSumSpec),
    EmbedReduce(EmbedSpec),
    VertexSample(VertexSample),
}

/// Per-node diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub node: String,
    pub raw_estimate: f64,
    /// Coordinates (or vertex ids) sent by this node itself.
    pub sparsity: usize,
    /// Values clipped at the quantizer's guard bound.
    pub saturated: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budgets: Option<[f64; 2]>,
}

impl TraceEntry {
    pub(crate) fn leaf(node: &str, raw: f64, sparsity: usize, saturated: usize) -> Self {
        TraceEntry { node: node.to_string(), raw_estimate: raw, sparsity, saturated, budgets: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolOutcome {
    pub estimate: f64,
    pub transcript: Transcript,
    pub trace: Vec<TraceEntry>,
}

impl ProtocolOutcome {
    /// Total coordinates / ids sent over all leaves.
    pub fn sparsity(&self) -> usize {
        self.trace.iter().map(|t| t.sparsity).sum()
    }

    pub fn saturations(&self) -> usize {
        self.trace.iter().map(|t| t.saturated).sum()
    }
}

pub(crate) fn clamp_unit(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

fn ceil_log2(n: usize) -> u32 {
    bits_for(n as u64)
}

impl ProtocolSpec {
    pub fn one_way(sparsifier: SparsifierSpec) -> Self {
        ProtocolSpec::OneWaySparsify(OneWaySpec { sparsifier, scale: 1.0 })
    }

    pub fn one_way_scaled(sparsifier: SparsifierSpec, scale: f64) -> Self {
        ProtocolSpec::OneWaySparsify(OneWaySpec { sparsifier, scale })
    }

    pub fn swap(inner: ProtocolSpec) -> Self {
        ProtocolSpec::Swap(SwapSpec { inner: Box::new(inner) })
    }

    pub fn max_split(a: NormSpec, b: NormSpec, inner_a: ProtocolSpec, inner_b: ProtocolSpec) -> Self {
        ProtocolSpec::MaxSplit(MaxSplitSpec { a, b, inner_a: Box::new(inner_a), inner_b: Box::new(inner_b) })
    }

    pub fn embed_reduce(embedding: Embedding, inner: ProtocolSpec) -> Self {
        ProtocolSpec::EmbedReduce(EmbedSpec { embedding, inner: Box::new(inner) })
    }

    /// Declared additive error.
    pub fn epsilon(&self) -> f64 {
        match self {
            ProtocolSpec::OneWaySparsify(s) => s.sparsifier.epsilon,
            ProtocolSpec::Swap(s) => s.inner.epsilon(),
            ProtocolSpec::MaxSplit(s) => s.inner_a.epsilon().max(s.inner_b.epsilon()),
            ProtocolSpec::HsumCompose(s) => {
                2.0 * s.inner_parts.iter().map(|p| p.epsilon()).fold(0.0, f64::max) + s.h_sparsifier.epsilon
            }
            ProtocolSpec::EmbedReduce(s) => s.embedding.distortion * s.inner.epsilon(),
            ProtocolSpec::VertexSample(s) => s.epsilon,
        }
    }

    /// Declared failure probability.
    pub fn delta(&self) -> f64 {
        match self {
            ProtocolSpec::OneWaySparsify(s) => s.sparsifier.delta,
            ProtocolSpec::Swap(s) => s.inner.delta(),
            ProtocolSpec::MaxSplit(s) => s.inner_a.delta() + s.inner_b.delta(),
            ProtocolSpec::HsumCompose(_) => 1.0 / 3.0,
            ProtocolSpec::EmbedReduce(s) => s.inner.delta(),
            ProtocolSpec::VertexSample(s) => s.delta(),
        }
    }

    /// Upper bound on transcript bits for inputs of dimension n.
    pub fn declared_cost(&self, n: usize) -> Result<u64> {
        Ok(match self {
            ProtocolSpec::OneWaySparsify(s) => {
                let d = (s.sparsifier.sparsity_cap as usize).min(n);
                let q = Quantizer::new(n, s.sparsifier.epsilon, d.max(1))?;
                d as u64 * (ceil_log2(n) + q.value_bits) as u64
            }
            ProtocolSpec::Swap(s) => s.inner.declared_cost(n)?,
            ProtocolSpec::MaxSplit(s) => SPLIT_HEADER_BITS + s.inner_a.declared_cost(n)? + s.inner_b.declared_cost(n)?,
            ProtocolSpec::HsumCompose(s) => {
                let d = s.dims.len();
                let d2 = (s.h_sparsifier.sparsity_cap as usize).min(d);
                let q = Quantizer::new(d, s.h_sparsifier.epsilon, d2.max(1))?;
                let child = s
                    .inner_parts
                    .iter()
                    .zip(&s.dims)
                    .map(|(p, &di)| p.declared_cost(di))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .max()
                    .unwrap_or(0);
                let r = s.repeats() as u64;
                d2 as u64 * (ceil_log2(d) + q.value_bits) as u64 + d2 as u64 * r * child
            }
            ProtocolSpec::EmbedReduce(s) => s.inner.declared_cost(s.embedding.target_dim())?,
            ProtocolSpec::VertexSample(s) => s.declared_cost()?,
        })
    }

    /// Structural checks for inputs of dimension n.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            ProtocolSpec::OneWaySparsify(s) => {
                s.sparsifier.validate()?;
                if !(s.scale > 0.0 && s.scale.is_finite()) {
                    return Err(Error::InvalidParameter(format!("scale {} must be positive", s.scale)));
                }
                Ok(())
            }
            ProtocolSpec::Swap(s) => s.inner.validate(n),
            ProtocolSpec::MaxSplit(s) => {
                s.inner_a.validate(n)?;
                s.inner_b.validate(n)
            }
            ProtocolSpec::HsumCompose(s) => {
                let d = s.dims.len();
                if s.parts.len() != d || s.inner_parts.len() != d {
                    return Err(Error::InvalidParameter(format!(
                        "hsum needs one part and one inner protocol per block ({} dims, {} parts, {} protocols)",
                        d,
                        s.parts.len(),
                        s.inner_parts.len()
                    )));
                }
                if s.dims.iter().sum::<usize>() != n {
                    return Err(Error::DimensionMismatch { expected: s.dims.iter().sum(), got: n });
                }
                s.h_sparsifier.validate()?;
                s.inner_parts.iter().zip(&s.dims).try_for_each(|(p, &di)| p.validate(di))
            }
            ProtocolSpec::EmbedReduce(s) => {
                s.embedding.validate()?;
                if s.embedding.source_dim() != n {
                    return Err(Error::DimensionMismatch { expected: s.embedding.source_dim(), got: n });
                }
                s.inner.validate(s.embedding.target_dim())
            }
            ProtocolSpec::VertexSample(s) => {
                if s.polytope.dim() != n {
                    return Err(Error::DimensionMismatch { expected: s.polytope.dim(), got: n });
                }
                Ok(())
            }
        }
    }
}

const SPLIT_HEADER_BITS: u64 = 64;

impl HSumSpec {
    pub fn repeats(&self) -> usize {
        let d2 = (self.h_sparsifier.sparsity_cap as usize).min(self.dims.len());
        (self.repeat_constant * ((d2 + 2) as f64).log2()).ceil().max(1.0) as usize
    }
}

/// ℓ_p protocol: sparsify on the side whose exponent is at most 2.
pub fn lp_protocol(p: f64, epsilon: f64, delta: f64) -> Result<ProtocolSpec> {
    let e = crate::norms::Exponent::new(p)?;
    if p <= 2.0 {
        Ok(ProtocolSpec::one_way(SparsifierSpec::lp(p, epsilon, delta)?))
    } else {
        let q = dual_exponent(e)?.value();
        Ok(ProtocolSpec::swap(ProtocolSpec::one_way(SparsifierSpec::lp(q, epsilon, delta)?)))
    }
}

/// T^{(k)} protocol: swap into max(ℓ∞, ℓ₁/k) and split Bob's vector there.
pub fn topk_protocol(k: usize, epsilon: f64, delta: f64) -> Result<ProtocolSpec> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    let child = SparsifierSpec::lp(1.0, epsilon, delta / 2.0)?;
    Ok(ProtocolSpec::swap(ProtocolSpec::max_split(
        NormSpec::linf(),
        NormSpec::scaled(NormSpec::l1(), 1.0 / k as f64),
        ProtocolSpec::swap(ProtocolSpec::one_way(child.clone())),
        ProtocolSpec::one_way_scaled(child, 1.0 / k as f64),
    )))
}

/// Execute `spec` on (v, w). The transcript is checked against the declared cost.
pub fn run_protocol<R: Rng + ?Sized>(spec: &ProtocolSpec, v: &[f64], w: &[f64], rng: &mut R) -> Result<ProtocolOutcome> {
    check_finite(v, "v")?;
    check_finite(w, "w")?;
    check_dim(w, v.len())?;
    spec.validate(v.len())?;
    let out = run_node(spec, v, w, rng)?;
    let bound = spec.declared_cost(v.len())?;
    if out.transcript.total_bits() > bound {
        return Err(Error::AuditFailed(format!("transcript used {} bits, declared bound {bound}", out.transcript.total_bits())));
    }
    Ok(out)
}

fn run_node<R: Rng + ?Sized>(spec: &ProtocolSpec, v: &[f64], w: &[f64], rng: &mut R) -> Result<ProtocolOutcome> {
    match spec {
        ProtocolSpec::OneWaySparsify(s) => run_one_way(s, v, w, rng),
        ProtocolSpec::Swap(s) => run_swap(s, v, w, rng),
        ProtocolSpec::MaxSplit(s) => run_max_split(s, v, w, rng),
        ProtocolSpec::HsumCompose(s) => run_hsum_compose(s, v, w, rng),
        ProtocolSpec::EmbedReduce(s) => run_embed_reduce(s, v, w, rng),
        ProtocolSpec::VertexSample(s) => s.run(v, w, rng),
    }
}

/// Send an encoding of φ(scale·v); Bob decodes and pairs it with w / scale.
pub fn run_one_way<R: Rng + ?Sized>(spec: &OneWaySpec, v: &[f64], w: &[f64], rng: &mut R) -> Result<ProtocolOutcome> {
    check_dim(w, v.len())?;
    let n = v.len();
    let c = spec.scale;
    let cv: Vec<f64> = v.iter().map(|x| c * x).collect();
    let wc: Vec<f64> = w.iter().map(|x| x / c).collect();
    if let SparsifierKind::LpSampling { p } = spec.sparsifier.kind {
        let nv = lp_norm(&cv, p)?;
        let nw = lp_norm(&wc, dual_exponent(p)?)?;
        if nv > 1.0 + 1e-9 || nw > 1.0 + 1e-9 {
            return Err(Error::Precondition(format!("one-way inputs outside the unit balls: ||v|| = {nv}, ||w||_* = {nw}")));
        }
    }
    let phi = sparsify(&cv, &spec.sparsifier, rng)?;
    let d = (spec.sparsifier.sparsity_cap as usize).min(n).max(1);
    if phi.nnz() > d {
        return Err(Error::AuditFailed(format!("sparsifier produced {} > D = {d} coordinates", phi.nnz())));
    }
    let q = Quantizer::new(n, spec.sparsifier.epsilon, d)?;
    let ib = ceil_log2(n);
    let mut payload = BitString::new();
    let mut saturated = 0;
    for (i, x) in phi.iter() {
        let (code, sat) = q.encode_saturating(x);
        saturated += sat as usize;
        payload.push(i as u64, ib);
        payload.push(code, q.value_bits);
    }
    // Bob's side: decode from the bits alone.
    let width = (ib + q.value_bits) as usize;
    let mut raw = 0.0;
    if width > 0 {
        for k in 0..payload.len() / width {
            let i = payload.read(k * width, ib) as usize;
            let x = q.decode(payload.read(k * width + ib as usize, q.value_bits));
            raw += x * wc[i];
        }
    }
    let mut t = Transcript::new();
    t.push(Message { sender: Party::Alice, label: "phi".into(), payload, quantizer: Some(q) });
    Ok(ProtocolOutcome { estimate: clamp_unit(raw), transcript: t, trace: vec![TraceEntry::leaf("one_way", raw, phi.nnz(), saturated)] })
}

/// Inner protocol on (w, v), with every message relabeled.
pub fn run_swap<R: Rng + ?Sized>(spec: &SwapSpec, v: &[f64], w: &[f64], rng: &mut R) -> Result<ProtocolOutcome> {
    let mut out = run_node(&spec.inner, w, v, rng)?;
    out.transcript.swap_parties();
    out.trace.push(TraceEntry::leaf("swap", out.estimate, 0, 0));
    Ok(out)
}

fn budget_code(b: f64) -> u64 {
    (b.clamp(0.0, 1.0) * u32::MAX as f64).round() as u64
}

/// Bob splits w = w₁ + w₂; each child estimates ⟨v, w_i/b_i⟩ and is rescaled by b_i.
pub fn run_max_split<R: Rng + ?Sized>(spec: &MaxSplitSpec, v: &[f64], w: &[f64], rng: &mut R) -> Result<ProtocolOutcome> {
    let split = split_max_dual(w, &spec.a, &spec.b, SPLIT_BUDGET)?;
    let mut t = Transcript::new();
    let mut header = BitString::new();
    header.push(budget_code(split.budget1), 32);
    header.push(budget_code(split.budget2), 32);
    t.push(Message { sender: Party::Bob, label: "split".into(), payload: header, quantizer: None });
    let mut trace = Vec::new();
    let mut raw = 0.0;
    for (child, wi, b) in [(&spec.inner_a, &split.w1, split.budget1), (&spec.inner_b, &split.w2, split.budget2)] {
        if b <= 0.0 {
            continue;
        }
        let wn: Vec<f64> = wi.iter().map(|x| x / b).collect();
        let out = run_node(child, v, &wn, rng)?;
        raw += b * out.estimate;
        t.append(out.transcript);
        trace.extend(out.trace);
    }
    trace.push(TraceEntry { budgets: Some([split.budget1, split.budget2]), ..TraceEntry::leaf("max_split", raw, 0, 0) });
    Ok(ProtocolOutcome { estimate: clamp_unit(raw), transcript: t, trace })
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len();
    if m % 2 == 1 {
        xs[m / 2]
    } else {
        (xs[m / 2 - 1] + xs[m / 2]) / 2.0
    }
}

/// Alice sparsifies the block-norm vector q; for each surviving block the
/// inner protocol runs on the normalized blocks and the median is kept.
pub fn run_hsum_compose<R: Rng + ?Sized>(spec: &HSumSpec, v: &[f64], w: &[f64], rng: &mut R) -> Result<ProtocolOutcome> {
    check_dim(w, v.len())?;
    let d = spec.dims.len();
    let q = block_norms(&spec.parts, &spec.dims, v)?;
    if let Some(h) = spec.h_sparsifier.norm() {
        let nq = eval_norm(&h, &q)?;
        if nq > 1.0 + 1e-9 {
            return Err(Error::Precondition(format!("||v||_V = {nq} > 1")));
        }
    }
    let phi = sparsify(&q, &spec.h_sparsifier, rng)?;
    let d2 = (spec.h_sparsifier.sparsity_cap as usize).min(d).max(1);
    let quant = Quantizer::new(d, spec.h_sparsifier.epsilon, d2)?;
    let ib = ceil_log2(d);
    let mut payload = BitString::new();
    let mut saturated = 0;
    let mut sent = Vec::with_capacity(phi.nnz());
    for (i, x) in phi.iter() {
        let (code, sat) = quant.encode_saturating(x);
        saturated += sat as usize;
        payload.push(i as u64, ib);
        payload.push(code, quant.value_bits);
        sent.push((i, quant.decode(code)));
    }
    let mut t = Transcript::new();
    t.push(Message { sender: Party::Alice, label: "phi_q".into(), payload, quantizer: Some(quant) });
    let mut trace = vec![TraceEntry::leaf("hsum_phi", 0.0, phi.nnz(), saturated)];

    let vb = blocks(&spec.dims, v)?;
    let wb = blocks(&spec.dims, w)?;
    let r = spec.repeats();
    let mut u = 0.0;
    for (i, phi_i) in sent {
        let wnorm = eval_norm(&dual_spec(&spec.parts[i])?, wb[i])?;
        if q[i] == 0.0 || wnorm == 0.0 || phi_i == 0.0 {
            continue;
        }
        let vi: Vec<f64> = vb[i].iter().map(|x| x / q[i]).collect();
        let wi: Vec<f64> = wb[i].iter().map(|x| x / wnorm).collect();
        let mut ests = Vec::with_capacity(r);
        for _ in 0..r {
            let out = run_node(&spec.inner_parts[i], &vi, &wi, rng)?;
            ests.push(out.estimate);
            t.append(out.transcript);
            trace.extend(out.trace);
        }
        u += phi_i * median(&mut ests) * wnorm;
    }
    trace.push(TraceEntry::leaf("hsum", u, 0, 0));
    Ok(ProtocolOutcome { estimate: clamp_unit(u), transcript: t, trace })
}

/// Alice maps v through the embedding, Bob lifts w and divides by α; the
/// inner estimate is multiplied back by α.
pub fn run_embed_reduce<R: Rng + ?Sized>(spec: &EmbedSpec, v: &[f64], w: &[f64], rng: &mut R) -> Result<ProtocolOutcome> {
    let emb = &spec.embedding;
    let alpha = emb.distortion;
    let x = emb.apply(v)?;
    let lift = lift_dual_vector(emb, w)?;
    if lift.norm > alpha * (1.0 + 1e-6) + 1e-12 {
        return Err(Error::Precondition(format!("lifted dual norm {} exceeds the distortion {alpha}", lift.norm)));
    }
    let y: Vec<f64> = lift.w.iter().map(|t| t / alpha).collect();
    let mut out = run_node(&spec.inner, &x, &y, rng)?;
    let raw = alpha * out.estimate;
    out.trace.push(TraceEntry::leaf("embed_reduce", raw, 0, 0));
    out.estimate = clamp_unit(raw);
    Ok(out)
}

/// One-line estimate of transcript size for a one-way sparsifier protocol:
/// D·(⌈log₂ n⌉ + value_bits).
pub fn one_way_bits(d: usize, n: usize, value_bits: u32) -> u64 {
    d as u64 * (ceil_log2(n) + value_bits) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn one_way_basis_vectors() {
        let n = 8;
        let spec = ProtocolSpec::one_way(SparsifierSpec::lp(1.0, 0.1, 1.0 / 3.0).unwrap());
        let mut e = vec![0.0; n];
        e[3] = 1.0;
        let out = run_protocol(&spec, &e, &e, &mut rng(1)).unwrap();
        let q = Quantizer::new(n, 0.1, n).unwrap();
        assert!((out.estimate - 1.0).abs() <= q.step / 2.0);
        assert_eq!(out.transcript.total_bits(), (3 + q.value_bits) as u64);
        assert_eq!(out.transcript.senders(), vec![Party::Alice]);
    }

    #[test]
    fn disjoint_supports_give_zero() {
        let spec = ProtocolSpec::one_way(SparsifierSpec::lp(1.0, 0.1, 1.0 / 3.0).unwrap());
        let v = [0.5, 0.5, 0.0, 0.0];
        let w = [0.0, 0.0, 1.0, -1.0];
        assert_eq!(run_protocol(&spec, &v, &w, &mut rng(2)).unwrap().estimate, 0.0);
    }

    #[test]
    fn declared_cost_arithmetic() {
        assert_eq!(one_way_bits(10, 1024, 24), 340);
        let s = SparsifierSpec::lp(2.0, 0.1, 1.0 / 3.0).unwrap().with_sample_cap(10);
        let spec = ProtocolSpec::one_way(s);
        let q = Quantizer::new(1024, 0.1, 10).unwrap();
        assert_eq!(spec.declared_cost(1024).unwrap(), 10 * (10 + q.value_bits as u64));
    }

    #[test]
    fn swap_is_an_involution() {
        let p = ProtocolSpec::one_way(SparsifierSpec::lp(2.0, 0.3, 1.0 / 3.0).unwrap().with_sample_cap(5));
        let pp = ProtocolSpec::swap(ProtocolSpec::swap(p.clone()));
        let v = [0.6, 0.0, 0.8, 0.0];
        let w = [0.0, 1.0, 0.0, 0.0];
        let a = run_protocol(&p, &v, &w, &mut rng(3)).unwrap();
        let b = run_protocol(&pp, &v, &w, &mut rng(3)).unwrap();
        assert_eq!(a.transcript, b.transcript);
        assert_eq!(a.estimate, b.estimate);
    }

    #[test]
    fn swapped_sender_is_bob() {
        let p = ProtocolSpec::swap(ProtocolSpec::one_way(SparsifierSpec::lp(1.0, 0.2, 1.0 / 3.0).unwrap()));
        let v = [1.0, -1.0, 1.0];
        let w = [0.2, 0.3, 0.5];
        let out = run_protocol(&p, &v, &w, &mut rng(4)).unwrap();
        assert_eq!(out.transcript.senders(), vec![Party::Bob]);
    }

    #[test]
    fn max_split_zero_and_exact_children() {
        let n = 6;
        let spec = topk_protocol(2, 0.2, 1.0 / 3.0).unwrap();
        let v = [0.5, -0.5, 0.0, 0.0, 0.0, 0.0];
        let out = run_protocol(&spec, &v, &[0.0; 6], &mut rng(5)).unwrap();
        assert_eq!(out.estimate, 0.0);
        // Exact children: only quantization error remains.
        let ex = SparsifierSpec::exact(n, 0.2).unwrap();
        let exact = ProtocolSpec::swap(ProtocolSpec::max_split(
            NormSpec::linf(),
            NormSpec::scaled(NormSpec::l1(), 0.5),
            ProtocolSpec::swap(ProtocolSpec::one_way(ex.clone())),
            ProtocolSpec::one_way_scaled(ex, 0.5),
        ));
        let w = [0.3, 0.1, -0.2, 0.05, 0.0, 0.1];
        let out = run_protocol(&exact, &v, &w, &mut rng(6)).unwrap();
        let truth = crate::vector::dot(&v, &w);
        assert!((out.estimate - truth).abs() <= 0.2 / 4.0, "{} vs {truth}", out.estimate);
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = topk_protocol(3, 0.2, 1.0 / 3.0).unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        let back: ProtocolSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        assert!(text.contains("\"type\":\"max_split\""));
    }

    #[test]
    fn embed_identity_passes_through() {
        let p = ProtocolSpec::one_way(SparsifierSpec::exact(3, 0.1).unwrap());
        let e = Embedding::identity(3, NormSpec::l1()).unwrap();
        let spec = ProtocolSpec::embed_reduce(e, p.clone());
        let v = [0.2, -0.3, 0.5];
        let w = [1.0, 0.5, -1.0];
        let a = run_protocol(&p, &v, &w, &mut rng(7)).unwrap();
        let b = run_protocol(&spec, &v, &w, &mut rng(7)).unwrap();
        assert!((a.estimate - b.estimate).abs() < 1e-12);
        let z = run_protocol(&spec, &v, &[0.0; 3], &mut rng(7)).unwrap();
        assert_eq!(z.estimate, 0.0);
    }

    #[test]
    fn hsum_zero_w() {
        let parts: Vec<NormSpec> = (1..=2).map(NormSpec::topk).collect();
        let spec = ProtocolSpec::HsumCompose(HSumSpec {
            h_sparsifier: SparsifierSpec::lp(1.0, 0.1, 1.0 / 9.0).unwrap(),
            parts,
            dims: vec![2, 2],
            inner_parts: (1..=2).map(|k| topk_protocol(k, 0.2, 1.0 / 3.0).unwrap()).collect(),
            repeat_constant: 4.0,
        });
        let v = [0.25, 0.0, 0.25, 0.25];
        let out = run_protocol(&spec, &v, &[0.0; 4], &mut rng(8)).unwrap();
        assert_eq!(out.estimate, 0.0);
    }
}
