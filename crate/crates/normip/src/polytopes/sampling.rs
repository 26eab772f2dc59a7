//! The vertex-sampling protocol for gauge norms of polytopes, and slack
//! matrix entries computed in expectation from it.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{convex_decompose, Polytope};
use crate::error::{check_dim, Error, Result};
use crate::protocols::{bits_for, clamp_unit, BitString, Message, Party, ProtocolOutcome, TraceEntry, Transcript};
use crate::vector::dot;

fn default_constant() -> f64 {
    3.0
}

/// Alice writes v as a convex combination of vertices and sends the ids of
/// t = ⌈C/ε²⌉ sampled vertices; Bob averages ⟨vertex, w⟩.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexSample {
    pub polytope: Polytope,
    pub epsilon: f64,
    /// Chebyshev constant; the failure probability is 1/C.
    #[serde(default = "default_constant")]
    pub constant: f64,
}

impl VertexSample {
    /// Fills in the vertex list up front so runs do not re-enumerate it.
    pub fn new(polytope: Polytope, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be positive")));
        }
        let polytope = if polytope.vrep().is_some() { polytope } else { polytope.completed()? };
        Ok(VertexSample { polytope, epsilon, constant: default_constant() })
    }

    pub fn samples(&self) -> usize {
        (self.constant / (self.epsilon * self.epsilon)).ceil() as usize
    }

    pub fn delta(&self) -> f64 {
        1.0 / self.constant
    }

    /// ⌈log₂ |V|⌉ for the full (symmetric) vertex list.
    pub fn id_bits(&self) -> Result<u32> {
        Ok(bits_for(self.polytope.vertices()?.len() as u64))
    }

    pub fn declared_cost(&self) -> Result<u64> {
        Ok(self.samples() as u64 * self.id_bits()? as u64)
    }

    pub fn run<R: Rng + ?Sized>(&self, v: &[f64], w: &[f64], rng: &mut R) -> Result<ProtocolOutcome> {
        let p = &self.polytope;
        check_dim(v, p.dim())?;
        check_dim(w, p.dim())?;
        let vs = p.vertices()?;
        // Bob's precondition: w in the polar body, i.e. |⟨V_j, w⟩| ≤ 1 for all vertices.
        let dual_gauge = vs.iter().map(|u| dot(u, w).abs()).fold(0.0, f64::max);
        if dual_gauge > 1.0 + 1e-9 {
            return Err(Error::Precondition(format!("w has dual gauge {dual_gauge} > 1")));
        }
        let comb = convex_decompose(p, v)?;
        let pick = WeightedIndex::new(&comb.weights).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let bits = bits_for(vs.len() as u64);
        let t = self.samples();
        let mut payload = BitString::new();
        for _ in 0..t {
            payload.push(comb.indices[pick.sample(rng)] as u64, bits);
        }
        let mut sum = 0.0;
        let mut seen = vec![false; vs.len()];
        for k in 0..t {
            let id = payload.read(k * bits as usize, bits) as usize;
            seen[id] = true;
            sum += dot(&vs[id], w);
        }
        let raw = sum / t as f64;
        let mut tr = Transcript::new();
        tr.push(Message { sender: Party::Alice, label: "vertex_ids".into(), payload, quantizer: None });
        let distinct = seen.iter().filter(|s| **s).count();
        Ok(ProtocolOutcome { estimate: clamp_unit(raw), transcript: tr, trace: vec![TraceEntry::leaf("vertex_sample", raw, distinct, 0)] })
    }
}

pub fn vertex_sampling_protocol<R: Rng + ?Sized>(p: &Polytope, v: &[f64], w: &[f64], eps: f64, rng: &mut R) -> Result<ProtocolOutcome> {
    VertexSample::new(p.clone(), eps)?.run(v, w, rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// ⟨A_i, x⟩ ≤ 1
    Plus,
    /// −⟨A_i, x⟩ ≤ 1
    Minus,
}

/// One half of a symmetric inequality pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inequality {
    pub row: usize,
    pub side: Side,
}

impl Inequality {
    pub fn plus(row: usize) -> Self {
        Inequality { row, side: Side::Plus }
    }
}

/// Median-of-r slack estimate with an injected inner-product estimator:
/// clamp(1 − median, 0, 2), r = ⌈4·log₂(1/ε)⌉.
pub fn slack_in_expectation_with<F>(p: &Polytope, vertex: usize, ineq: Inequality, eps: f64, mut estimate: F) -> Result<f64>
where
    F: FnMut(&[f64], &[f64]) -> Result<f64>,
{
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon = {eps} must lie in (0, 1)")));
    }
    let full;
    let p = if p.hrep().is_some() && p.vrep().is_some() {
        p
    } else {
        full = p.completed()?;
        &full
    };
    let vs = p.vrep().unwrap();
    let rows = p.hrep().unwrap();
    let v = vs.get(vertex).ok_or_else(|| Error::InvalidParameter(format!("vertex {vertex} out of range")))?;
    let a = rows.get(ineq.row).ok_or_else(|| Error::InvalidParameter(format!("inequality {} out of range", ineq.row)))?;
    let a: Vec<f64> = match ineq.side {
        Side::Plus => a.clone(),
        Side::Minus => a.iter().map(|x| -x).collect(),
    };
    let r = (4.0 * (1.0 / eps).log2()).ceil().max(1.0) as usize;
    let mut ests = (0..r).map(|_| estimate(v, &a)).collect::<Result<Vec<f64>>>()?;
    ests.sort_by(f64::total_cmp);
    let m = if r % 2 == 1 { ests[r / 2] } else { (ests[r / 2 - 1] + ests[r / 2]) / 2.0 };
    Ok((1.0 - m).clamp(0.0, 2.0))
}

/// Slack S_P(v, i) computed in expectation through the vertex-sampling protocol.
pub fn slack_in_expectation<R: Rng + ?Sized>(p: &Polytope, vertex: usize, ineq: Inequality, eps: f64, rng: &mut R) -> Result<f64> {
    let proto = VertexSample::new(p.clone(), eps)?;
    slack_in_expectation_with(p, vertex, ineq, eps, |v, w| Ok(proto.run(v, w, rng)?.estimate))
}
