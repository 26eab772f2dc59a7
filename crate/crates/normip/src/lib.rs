// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Randomized inner-product protocols under norm constraints: norms and
//! their duals, sparsifiers, protocol combinators with bit-exact
//! transcripts, polytope gauges, and a Monte-Carlo harness.

pub mod error;
pub mod harness;
pub mod lp;
pub mod norms;
pub mod polytopes;
pub mod protocols;
pub mod spaces;
pub mod sparsifiers;
pub mod vector;

pub use error::{Error, Result};
pub use norms::{eval_norm, Exponent, NormSpec};
pub use polytopes::Polytope;
pub use protocols::{run_protocol, ProtocolOutcome, ProtocolSpec, Transcript};
pub use sparsifiers::SparsifierSpec;
pub use vector::SparseVector;
