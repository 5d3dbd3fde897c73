//! LP solving behind a small trait, plus an independent certificate audit.
//!
//! Sign conventions for a minimisation LP: duals of `>=` rows are
//! non-negative, duals of `<=` rows non-positive, equality duals free, and
//! reduced costs are `c - Aᵀy`.

mod certify;
pub mod decomposition;
mod highs_backend;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lp::SparseLP;

pub use certify::{certify, CertificateReport, CheckResult};
pub use decomposition::{DecompositionConfig, DecompositionSolver, DecompositionStats};
pub use highs_backend::HighsSolver;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    PrimalSimplex,
    DualSimplex,
    InteriorPointWithCrossover,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub method: Method,
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub max_iter: u64,
    pub scaling: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::DualSimplex,
            feas_tol: 1e-8,
            opt_tol: 1e-8,
            max_iter: 10_000_000,
            scaling: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.feas_tol > 0.0 && self.opt_tol > 0.0) {
            return Err(crate::Error::Config("solver tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(crate::Error::Config("max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    IterLimit,
    NumericalTrouble,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LPSolution {
    pub status: SolveStatus,
    pub objective: f64,
    pub primal: Vec<f64>,
    pub dual_rows: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    /// Free-form note from the backend (iterations, method).
    #[serde(default)]
    pub info: String,
}

impl LPSolution {
    pub fn failed(status: SolveStatus, info: impl Into<String>) -> Self {
        Self {
            status,
            objective: f64::NAN,
            primal: Vec::new(),
            dual_rows: Vec::new(),
            reduced_costs: Vec::new(),
            info: info.into(),
        }
    }

    pub fn require_optimal(&self) -> Result<()> {
        if self.status == SolveStatus::Optimal {
            Ok(())
        } else {
            Err(crate::Error::StatusNotOptimal(self.status.to_string()))
        }
    }
}

pub trait LpSolver {
    /// Solves `lp`; non-optimal outcomes are reported through the status.
    fn solve(&mut self, lp: &SparseLP, cfg: &SolverConfig) -> Result<LPSolution>;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_json_defaults() {
        let cfg: SolverConfig = serde_json::from_str(r#"{"method": "primal_simplex"}"#).unwrap();
        assert_eq!(cfg.method, Method::PrimalSimplex);
        assert_eq!(cfg.feas_tol, 1e-8);
        assert!(cfg.validate().is_ok());
        let bad = SolverConfig {
            opt_tol: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
