//! Origin-symmetric polytopes: gauges, duals, slack matrices, convex
//! decompositions, and the vertex-sampling protocol.

mod dd;
mod decompose;
mod sampling;

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::lp::gauge_lp;
use crate::vector::dot;

pub use dd::{enumerate_vertices, VERTEX_CAP};
pub use decompose::{convex_decompose, validate_decomposition, ConvexCombination};
pub use sampling::{
    slack_in_expectation, slack_in_expectation_with, vertex_sampling_protocol, Inequality, Side, VertexSample,
};

/// P = {x : −1 ≤ ⟨A_i, x⟩ ≤ 1 ∀i} and/or P = conv(V) with V = −V.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolytopeRepr", into = "PolytopeRepr")]
pub struct Polytope {
    n: usize,
    hrep: Option<Vec<Vec<f64>>>,
    vrep: Option<Vec<Vec<f64>>>,
}

/// On-disk form. An optional `b` (all positive) is folded into the rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct PolytopeRepr {
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hrep: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vrep: Option<Vec<Vec<f64>>>,
}

impl TryFrom<PolytopeRepr> for Polytope {
    type Error = Error;
    fn try_from(r: PolytopeRepr) -> Result<Self> {
        let hrep = match (r.hrep, r.b) {
            (Some(rows), Some(b)) => {
                if b.len() != rows.len() {
                    return Err(Error::DimensionMismatch { expected: rows.len(), got: b.len() });
                }
                if b.iter().any(|x| !(*x > 0.0)) {
                    return Err(Error::InvalidParameter("right-hand sides must be positive".into()));
                }
                Some(rows.into_iter().zip(b).map(|(row, bi)| row.into_iter().map(|x| x / bi).collect()).collect())
            }
            (Some(rows), None) => Some(rows),
            (None, Some(_)) => return Err(Error::InvalidParameter("b given without hrep".into())),
            (None, None) => None,
        };
        match (hrep, r.vrep) {
            (Some(h), Some(v)) => Polytope::with_both(h, v, r.n),
            (Some(h), None) => Polytope::from_hrep(h, r.n),
            (None, Some(v)) => Polytope::from_vrep(v, r.n),
            (None, None) => Err(Error::InvalidParameter("polytope needs hrep or vrep".into())),
        }
    }
}

impl From<Polytope> for PolytopeRepr {
    fn from(p: Polytope) -> Self {
        PolytopeRepr { n: p.n, hrep: p.hrep, b: None, vrep: p.vrep }
    }
}

fn check_rows(rows: &[Vec<f64>], n: usize, what: &str) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("dimension 0".into()));
    }
    if rows.is_empty() {
        return Err(Error::InvalidParameter(format!("empty {what}")));
    }
    for r in rows {
        check_dim(r, n)?;
        check_finite(r, what)?;
    }
    Ok(())
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// Keep one representative of each ± pair (first nonzero positive) and drop duplicates.
pub fn dedup_symmetric(vs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vs {
        let s = v.iter().find(|x| x.abs() > 1e-12).map_or(1.0, |x| x.signum());
        let c: Vec<f64> = v.iter().map(|x| s * x).collect();
        if !out.iter().any(|u| close(u, &c, 1e-9)) {
            out.push(c);
        }
    }
    out
}

fn symmetric_closure(vs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    dedup_symmetric(vs).into_iter().flat_map(|v| [v.clone(), v.into_iter().map(|x| -x).collect()]).collect()
}

fn rank(rows: &[Vec<f64>], n: usize) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    m.rank(1e-9)
}

impl Polytope {
    pub fn from_hrep(rows: Vec<Vec<f64>>, n: usize) -> Result<Self> {
        check_rows(&rows, n, "hrep")?;
        Ok(Polytope { n, hrep: Some(rows), vrep: None })
    }

    /// `vertices` must be closed under negation (audited).
    pub fn from_vrep(vertices: Vec<Vec<f64>>, n: usize) -> Result<Self> {
        check_rows(&vertices, n, "vrep")?;
        for v in &vertices {
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            if !vertices.iter().any(|u| close(u, &neg, 1e-9)) {
                return Err(Error::AuditFailed(format!("vrep not symmetric: -{v:?} missing")));
            }
        }
        Ok(Polytope { n, hrep: None, vrep: Some(vertices) })
    }

    /// Both representations; they are audited against each other.
    pub fn with_both(rows: Vec<Vec<f64>>, vertices: Vec<Vec<f64>>, n: usize) -> Result<Self> {
        let h = Polytope::from_hrep(rows, n)?;
        let v = Polytope::from_vrep(vertices, n)?;
        let p = Polytope { n, hrep: h.hrep, vrep: v.vrep };
        p.audit_reps()?;
        Ok(p)
    }

    /// [−1, 1]ⁿ given by its inequalities.
    pub fn cube(n: usize) -> Result<Self> {
        Polytope::from_hrep((0..n).map(|i| unit(n, i)).collect(), n)
    }

    /// conv{±e_i} given by its vertices.
    pub fn cross_polytope(n: usize) -> Result<Self> {
        Polytope::from_vrep((0..n).flat_map(|i| [unit(n, i), unit(n, i).into_iter().map(|x| -x).collect()]).collect(), n)
    }

    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn hrep(&self) -> Option<&[Vec<f64>]> {
        self.hrep.as_deref()
    }
    pub fn vrep(&self) -> Option<&[Vec<f64>]> {
        self.vrep.as_deref()
    }

    /// Fill in whichever representation is missing (double description; small n only).
    pub fn completed(&self) -> Result<Polytope> {
        let mut p = self.clone();
        if p.vrep.is_none() {
            p.vrep = Some(enumerate_vertices(p.hrep.as_ref().unwrap(), p.n, VERTEX_CAP)?);
        }
        if p.hrep.is_none() {
            let dual_vertices = enumerate_vertices(p.vrep.as_ref().unwrap(), p.n, VERTEX_CAP)?;
            p.hrep = Some(dedup_symmetric(&dual_vertices));
        }
        Ok(p)
    }

    /// The vertex list, enumerating it if only inequalities are stored.
    pub fn vertices(&self) -> Result<Vec<Vec<f64>>> {
        match &self.vrep {
            Some(v) => Ok(v.clone()),
            None => enumerate_vertices(self.hrep.as_ref().unwrap(), self.n, VERTEX_CAP),
        }
    }

    /// With both reps present: every vertex is feasible and actually a vertex
    /// (its tight rows have full rank), and both gauges agree on random rays.
    pub fn audit_reps(&self) -> Result<()> {
        let (Some(h), Some(vs)) = (&self.hrep, &self.vrep) else {
            return Err(Error::RepMismatch("both representations are required".into()));
        };
        for v in vs {
            let vals: Vec<f64> = h.iter().map(|r| dot(r, v)).collect();
            if let Some(x) = vals.iter().find(|x| x.abs() > 1.0 + 1e-9) {
                return Err(Error::RepMismatch(format!("vertex {v:?} violates an inequality (|<A_i,v>| = {})", x.abs())));
            }
            let tight: Vec<Vec<f64>> = h.iter().zip(&vals).filter(|(_, x)| (x.abs() - 1.0).abs() <= 1e-9).map(|(r, _)| r.clone()).collect();
            if rank(&tight, self.n) < self.n {
                return Err(Error::RepMismatch(format!("{v:?} is not a vertex")));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0xa0d17);
        for _ in 0..20 {
            let x: Vec<f64> = (0..self.n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let gh = h.iter().map(|r| dot(r, &x).abs()).fold(0.0, f64::max);
            let (gv, _) = gauge_lp(vs, &x).map_err(|_| Error::RepMismatch("vertex hull is lower-dimensional".into()))?;
            if (gh - gv).abs() > 1e-9 * (1.0 + gh) {
                return Err(Error::RepMismatch(format!("gauges disagree: {gh} (hrep) vs {gv} (vrep)")));
            }
        }
        Ok(())
    }
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

/// Minkowski functional inf{λ : x/λ ∈ P}.
pub fn gauge_norm(p: &Polytope, x: &[f64]) -> Result<f64> {
    check_dim(x, p.n)?;
    check_finite(x, "x")?;
    if let Some(h) = &p.hrep {
        return Ok(h.iter().map(|r| dot(r, x).abs()).fold(0.0, f64::max));
    }
    let vs = p.vrep.as_ref().unwrap();
    if x.iter().all(|t| *t == 0.0) {
        return Ok(0.0);
    }
    match gauge_lp(vs, x) {
        Ok((g, _)) => Ok(g),
        Err(Error::Infeasible) => Err(Error::UnboundedGauge(format!("{x:?} is outside the span of the vertices"))),
        Err(e) => Err(e),
    }
}

/// Polar body: inequality rows become vertices ±A_i and vice versa.
pub fn dual_polytope(p: &Polytope) -> Polytope {
    Polytope {
        n: p.n,
        hrep: p.vrep.as_ref().map(|v| dedup_symmetric(v)),
        vrep: p.hrep.as_ref().map(|h| symmetric_closure(h)),
    }
}

/// Vertex × inequality slacks 1 − ⟨A_i, v⟩ (the "+" side of each pair).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlackMatrix {
    pub entries: Vec<Vec<f64>>,
}

impl SlackMatrix {
    pub fn rows(&self) -> usize {
        self.entries.len()
    }
    pub fn cols(&self) -> usize {
        self.entries.first().map_or(0, |r| r.len())
    }

    /// CSV with a header row of inequality ids and a leading vertex-id column.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("vertex");
        for j in 0..self.cols() {
            let _ = write!(s, ",ineq{j}");
        }
        s.push('\n');
        for (i, row) in self.entries.iter().enumerate() {
            let _ = write!(s, "v{i}");
            for x in row {
                let _ = write!(s, ",{x:?}");
            }
            s.push('\n');
        }
        s
    }
}

pub fn slack_matrix(p: &Polytope) -> Result<SlackMatrix> {
    p.audit_reps()?;
    let (h, vs) = (p.hrep.as_ref().unwrap(), p.vrep.as_ref().unwrap());
    let entries = vs
        .iter()
        .map(|v| h.iter().map(|r| (1.0 - dot(r, v)).clamp(0.0, 2.0)).map(|x| if x < 1e-12 { 0.0 } else { x }).collect())
        .collect();
    Ok(SlackMatrix { entries })
}
