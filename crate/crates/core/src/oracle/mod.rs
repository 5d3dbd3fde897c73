//! Independent verification engines: grid concave envelopes, a brute-force
//! measure-side program and a feasibility audit for path measures.

pub mod brute;
pub mod dense;
pub mod envelope;
pub mod measure;

pub use brute::{primal_brute_force_lp, BruteForceResult, DEFAULT_PATH_CAP};
pub use envelope::{concave_envelope_on_grid, iterated_envelope_value, GridFunction};
pub use measure::{check_measure, check_measure_on, DiscreteMeasure, FeasibilityReport, WeightedPath};
