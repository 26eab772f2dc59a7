use std::fmt;
use std::sync::Arc;

use super::{audit_normalization, audit_symmetry, NormSpec};
use crate::error::{check_dim, Error, Result};

/// A black-box norm. Must be re-entrant: it is called concurrently from
/// parallel trials.
pub type NormFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// User-supplied symmetric norm, audited before it can be used.
#[derive(Clone)]
pub struct SymmetricOracle {
    name: String,
    dim: usize,
    eval: NormFn,
    dual: Option<NormFn>,
}

impl SymmetricOracle {
    /// Wrap `eval` (and optionally its dual) after randomized symmetry and
    /// normalization audits. Oracles with ‖e₁‖ ≠ 1 are rejected, not rescaled.
    pub fn new(name: &str, dim: usize, eval: NormFn, dual: Option<NormFn>, trials: usize, seed: u64) -> Result<Self> {
        let oracle = SymmetricOracle { name: name.to_string(), dim, eval, dual };
        oracle.audit(trials, seed)?;
        if let Some(d) = oracle.dual_oracle() {
            d.audit(trials, seed.wrapping_add(1))?;
        }
        Ok(oracle)
    }

    fn audit(&self, trials: usize, seed: u64) -> Result<()> {
        let spec = NormSpec::Symmetric(self.clone());
        audit_normalization(&spec, self.dim)?;
        let rep = audit_symmetry(&spec, self.dim, trials, seed)?;
        if let Some(c) = rep.counterexample {
            return Err(Error::AuditFailed(format!("{}: {:?} violated at v = {:?}", self.name, c.kind, c.v)));
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, v: &[f64]) -> Result<f64> {
        check_dim(v, self.dim)?;
        let x = (self.eval)(v);
        if !x.is_finite() || x < 0.0 {
            return Err(Error::NonFinite(format!("{} returned {x}", self.name)));
        }
        Ok(x)
    }

    /// The dual as its own oracle (roles of `eval` and `dual` swapped).
    pub fn dual_oracle(&self) -> Option<SymmetricOracle> {
        self.dual.as_ref().map(|d| SymmetricOracle {
            name: format!("dual({})", self.name),
            dim: self.dim,
            eval: d.clone(),
            dual: Some(self.eval.clone()),
        })
    }
}

impl fmt::Debug for SymmetricOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymmetricOracle").field("name", &self.name).field("dim", &self.dim).finish()
    }
}

impl PartialEq for SymmetricOracle {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && Arc::ptr_eq(&self.eval, &other.eval)
    }
}
