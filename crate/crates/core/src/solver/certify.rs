use serde::{Deserialize, Serialize};

use super::{LPSolution, SolveStatus};
use crate::lp::{Sense, SparseLP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

impl CheckResult {
    fn new(value: f64, tol: f64) -> Self {
        Self {
            value,
            tol,
            pass: value <= tol,
        }
    }
}

/// Residuals recomputed from the LP triplets; every value is scaled so that
/// a pass means `value <= tol`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub status: SolveStatus,
    /// Largest row or bound violation relative to the row's magnitude.
    pub primal_residual: CheckResult,
    /// Largest wrong-signed row dual, relative to the largest dual.
    pub dual_sign: CheckResult,
    /// Largest reduced-cost violation of the variable bounds.
    pub dual_residual: CheckResult,
    /// Largest `|dual × slack|`, relative to `max(1, |objective|)`.
    pub complementarity: CheckResult,
    /// `|cᵀx - dual objective|` relative to `max(1, |cᵀx|)`.
    pub gap: CheckResult,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.status == SolveStatus::Optimal
            && self.primal_residual.pass
            && self.dual_sign.pass
            && self.dual_residual.pass
            && self.complementarity.pass
            && self.gap.pass
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.status != SolveStatus::Optimal {
            out.push("status");
        }
        for (name, c) in [
            ("primal_residual", &self.primal_residual),
            ("dual_sign", &self.dual_sign),
            ("dual_residual", &self.dual_residual),
            ("complementarity", &self.complementarity),
            ("gap", &self.gap),
        ] {
            if !c.pass {
                out.push(name);
            }
        }
        out
    }
}

/// Audits `sol` against `lp` from scratch.
pub fn certify(lp: &SparseLP, sol: &LPSolution, tol: f64) -> CertificateReport {
    let nr = lp.num_rows();
    let nv = lp.num_vars();
    if sol.status != SolveStatus::Optimal
        || sol.primal.len() != nv
        || sol.dual_rows.len() != nr
    {
        let fail = CheckResult {
            value: f64::INFINITY,
            tol,
            pass: false,
        };
        return CertificateReport {
            status: if sol.status == SolveStatus::Optimal {
                SolveStatus::NumericalTrouble
            } else {
                sol.status
            },
            primal_residual: fail.clone(),
            dual_sign: fail.clone(),
            dual_residual: fail.clone(),
            complementarity: fail.clone(),
            gap: fail,
            primal_objective: f64::NAN,
            dual_objective: f64::NAN,
        };
    }
    let x = &sol.primal;
    let y = &sol.dual_rows;

    // row magnitudes for relative residuals
    let mut row_scale: Vec<f64> = lp.rhs.iter().map(|b| b.abs().max(1.0)).collect();
    let mut col_scale: Vec<f64> = lp.objective.iter().map(|c| c.abs().max(1.0)).collect();
    let mut ax = vec![0.0; nr];
    let mut aty = vec![0.0; nv];
    for t in &lp.triplets {
        let (r, c) = (t.row as usize, t.col as usize);
        let term = t.coeff * x[c];
        ax[r] += term;
        row_scale[r] = row_scale[r].max(term.abs());
        let dterm = t.coeff * y[r];
        aty[c] += dterm;
        col_scale[c] = col_scale[c].max(dterm.abs());
    }

    let mut primal_res: f64 = 0.0;
    let mut sign_res: f64 = 0.0;
    let ymax = y.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut comp: f64 = 0.0;
    for i in 0..nr {
        let slack = ax[i] - lp.rhs[i];
        let viol = match lp.senses[i] {
            Sense::Ge => (-slack).max(0.0),
            Sense::Le => slack.max(0.0),
            Sense::Eq => slack.abs(),
        };
        primal_res = primal_res.max(viol / row_scale[i]);
        let wrong = match lp.senses[i] {
            Sense::Ge => (-y[i]).max(0.0),
            Sense::Le => y[i].max(0.0),
            Sense::Eq => 0.0,
        };
        sign_res = sign_res.max(wrong / ymax);
        if lp.senses[i] != Sense::Eq {
            comp = comp.max((y[i] * slack).abs());
        }
    }

    let mut dual_res: f64 = 0.0;
    let mut bound_term = 0.0;
    for j in 0..nv {
        let (lo, up) = (lp.var_lower[j], lp.var_upper[j]);
        primal_res = primal_res.max((lo - x[j]).max(x[j] - up).max(0.0) / x[j].abs().max(1.0));
        let d = lp.objective[j] - aty[j];
        let viol = match (lo.is_finite(), up.is_finite()) {
            (false, false) => d.abs(),
            (true, false) => (-d).max(0.0),
            (false, true) => d.max(0.0),
            (true, true) => 0.0,
        };
        dual_res = dual_res.max(viol / col_scale[j]);
        // the bound a reduced cost of that sign prices against
        let at = if d > 0.0 && lo.is_finite() {
            lo
        } else if d < 0.0 && up.is_finite() {
            up
        } else {
            x[j]
        };
        bound_term += d * at;
        comp = comp.max((d * (x[j] - at)).abs());
    }

    let primal_obj: f64 = lp.objective.iter().zip(x).map(|(c, v)| c * v).sum();
    let dual_obj: f64 = lp.rhs.iter().zip(y).map(|(b, v)| b * v).sum::<f64>() + bound_term;
    let obj_scale = primal_obj.abs().max(1.0);
    CertificateReport {
        status: sol.status,
        primal_residual: CheckResult::new(primal_res, tol),
        dual_sign: CheckResult::new(sign_res, tol),
        dual_residual: CheckResult::new(dual_res, tol),
        complementarity: CheckResult::new(comp / obj_scale, tol),
        gap: CheckResult::new((primal_obj - dual_obj).abs() / obj_scale, tol),
        primal_objective: primal_obj,
        dual_objective: dual_obj,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::Triplet;
    use crate::solver::{HighsSolver, LpSolver, SolverConfig};

    fn trivial() -> SparseLP {
        SparseLP::generic(
            vec![1.0],
            vec![Triplet {
                row: 0,
                col: 0,
                coeff: 1.0,
            }],
            vec![Sense::Ge],
            vec![3.0],
            vec![f64::NEG_INFINITY],
            vec![f64::INFINITY],
        )
        .unwrap()
    }

    fn exact() -> LPSolution {
        LPSolution {
            status: SolveStatus::Optimal,
            objective: 3.0,
            primal: vec![3.0],
            dual_rows: vec![1.0],
            reduced_costs: vec![0.0],
            info: String::new(),
        }
    }

    #[test]
    fn trivial_lp_certifies_with_zero_residuals() {
        let rep = certify(&trivial(), &exact(), 1e-12);
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(rep.primal_residual.value, 0.0);
        assert_eq!(rep.gap.value, 0.0);
        let solved = HighsSolver::new().solve(&trivial(), &SolverConfig::default()).unwrap();
        assert!(certify(&trivial(), &solved, 1e-12).passed());
    }

    #[test]
    fn injected_primal_fault_is_flagged() {
        let mut sol = exact();
        sol.primal[0] -= 1e-3;
        let rep = certify(&trivial(), &sol, 1e-8);
        assert!(!rep.primal_residual.pass);
        assert!(rep.failures().contains(&"primal_residual"));
    }

    #[test]
    fn wrong_dual_sign_is_flagged() {
        let mut sol = exact();
        sol.dual_rows[0] = -1.0;
        let rep = certify(&trivial(), &sol, 1e-8);
        assert!(!rep.dual_sign.pass);
        assert!(!rep.dual_residual.pass);
        assert!(!rep.passed());
    }

    #[test]
    fn non_optimal_never_passes() {
        let sol = LPSolution::failed(SolveStatus::IterLimit, "");
        let rep = certify(&trivial(), &sol, 1e-8);
        assert!(!rep.passed());
        assert_eq!(rep.status, SolveStatus::IterLimit);
    }
}
