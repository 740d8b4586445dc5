//! Rank analysis for probability tensors arising from sparse log-linear
//! models, plus a collapsed-Tucker Gibbs sampler for contingency tables.
//!
//! The crate has three layers:
//!
//! * model plumbing: [`scheme`], [`tensor`], [`loglinear`], [`expansion`],
//!   and the text formats in [`io`];
//! * rank machinery: hitting-level collections ([`hitting`]), partition
//!   witnesses and conditional-independence checks ([`partition`]), the
//!   bound calculators ([`bounds`]), and a numerical oracle ([`oracle`]);
//! * inference: the collapsed-Tucker sampler ([`mcmc`]) and the replicated
//!   studies built on it ([`studies`]).

pub mod error;
pub mod expansion;
pub mod loglinear;
pub mod scheme;
pub mod tensor;

pub use error::{CoreError, Result};
pub use loglinear::{Graph, InteractionKey, LogLinearModel, SupportSummary};
pub use scheme::{VariableScheme, DEFAULT_CELL_CAP};
pub use tensor::{NonnegTensor, ProbabilityTensor, SIMPLEX_TOL};
