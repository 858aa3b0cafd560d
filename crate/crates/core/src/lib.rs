//! Byzantine-robust gradient aggregation.
//!
//! The centerpiece is the Flag Aggregator ([`flag`]), which learns a low
//! dimensional subspace from the workers' gradients by iteratively reweighted
//! least squares and returns the mean gradient projected onto it. Around it
//! sit the classical robust rules ([`aggregators`]), Byzantine behaviors
//! ([`attacks`]), nonlinear image augmentations ([`augment`]), the lifted
//! relaxation machinery ([`relaxation`]) and a deterministic parameter-server
//! training simulator ([`sim`]).

// `!(x > 0.0)` is how NaN is rejected throughout; index loops mirror the math
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod aggregators;
pub mod attacks;
pub mod augment;
pub mod error;
pub mod flag;
pub mod linalg;
pub mod relaxation;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use flag::{FlagConfig, GradientMatrix, Regularizer};
pub use linalg::{Matrix, Subspace};
