//! Model-free price bounds for path-light exotics via a sparse linear program
//! over a price mesh, with envelope and brute-force oracles.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod lp;
pub mod market;
pub mod mesh;
pub mod oracle;
pub mod par;
pub mod payoffs;
pub mod pipeline;
pub mod problem;
pub mod report;
pub mod solver;

pub use error::{Error, Result};
pub use mesh::Mesh;
pub use par::Execution;
pub use problem::{ProblemSpec, Side, ValidatedSpec};
