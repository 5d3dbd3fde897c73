use highs::{ColProblem, HighsModelStatus, Sense as HSense};

use super::{LPSolution, LpSolver, Method, SolveStatus, SolverConfig};
use crate::error::{Error, Result};
use crate::lp::{Sense, SparseLP};

/// Embedded HiGHS backend.
#[derive(Debug, Default, Clone)]
pub struct HighsSolver {
    /// Extra `(option, value)` pairs passed verbatim to HiGHS.
    pub extra_options: Vec<(String, String)>,
}

impl HighsSolver {
    pub fn new() -> Self {
        Self::default()
    }
}

fn map_status(s: HighsModelStatus) -> SolveStatus {
    match s {
        HighsModelStatus::Optimal | HighsModelStatus::ModelEmpty => SolveStatus::Optimal,
        HighsModelStatus::Infeasible => SolveStatus::PrimalInfeasible,
        HighsModelStatus::Unbounded | HighsModelStatus::UnboundedOrInfeasible => {
            SolveStatus::DualInfeasible
        }
        HighsModelStatus::ReachedIterationLimit | HighsModelStatus::ReachedTimeLimit => {
            SolveStatus::IterLimit
        }
        _ => SolveStatus::NumericalTrouble,
    }
}

impl LpSolver for HighsSolver {
    fn solve(&mut self, lp: &SparseLP, cfg: &SolverConfig) -> Result<LPSolution> {
        lp.check()?;
        cfg.validate()?;
        let mut pb = ColProblem::new();
        let rows: Vec<_> = lp
            .senses
            .iter()
            .zip(&lp.rhs)
            .map(|(s, &b)| match s {
                Sense::Ge => pb.add_row(b..),
                Sense::Le => pb.add_row(..=b),
                Sense::Eq => pb.add_row(b..=b),
            })
            .collect();
        let mut by_col: Vec<Vec<(highs::Row, f64)>> = vec![Vec::new(); lp.num_vars()];
        for t in &lp.triplets {
            by_col[t.col as usize].push((rows[t.row as usize], t.coeff));
        }
        for (j, entries) in by_col.into_iter().enumerate() {
            let (lo, up) = (lp.var_lower[j], lp.var_upper[j]);
            pb.add_column(lp.objective[j], lo..=up, entries);
        }

        let mut model = pb
            .try_optimise(HSense::Minimise)
            .map_err(|e| Error::Solver(format!("HiGHS rejected the model: {e:?}")))?;
        let iter_limit = cfg.max_iter.min(i32::MAX as u64) as i32;
        match cfg.method {
            Method::DualSimplex => {
                model.set_option("solver", "simplex");
                model.set_option("simplex_strategy", 1);
            }
            Method::PrimalSimplex => {
                model.set_option("solver", "simplex");
                model.set_option("simplex_strategy", 4);
            }
            Method::InteriorPointWithCrossover => {
                model.set_option("solver", "ipm");
                model.set_option("run_crossover", "on");
            }
        }
        model.set_option("primal_feasibility_tolerance", cfg.feas_tol);
        model.set_option("dual_feasibility_tolerance", cfg.opt_tol);
        model.set_option("simplex_iteration_limit", iter_limit);
        model.set_option("ipm_iteration_limit", iter_limit);
        if !cfg.scaling {
            model.set_option("simplex_scale_strategy", 0);
        }
        model.set_option("threads", 1);
        model.set_option("random_seed", 0);
        for (k, v) in &self.extra_options {
            model.set_option(k.as_str(), v.as_str());
        }

        let solved = match model.try_solve() {
            Ok(s) => s,
            Err(e) => {
                return Ok(LPSolution::failed(
                    SolveStatus::NumericalTrouble,
                    format!("HiGHS run failed: {e:?}"),
                ))
            }
        };
        let status = map_status(solved.status());
        let info = format!(
            "highs {:?}: {} simplex / {} ipm iterations",
            cfg.method,
            solved.simplex_iteration_count(),
            solved.ipm_iteration_count()
        );
        log::info!("{info}, status {:?}", solved.status());
        if status != SolveStatus::Optimal {
            return Ok(LPSolution::failed(status, info));
        }
        let sol = solved.get_solution();
        let primal = sol.columns().to_vec();
        let mut dual_rows = sol.dual_rows().to_vec();
        let mut reduced_costs = sol.dual_columns().to_vec();

        // HiGHS reports duals with c - Aᵀy = reduced costs; confirm that and
        // flip if a build ever disagrees.
        let aty = lp.transpose_times(&dual_rows);
        let mismatch = |sign: f64| {
            lp.objective
                .iter()
                .zip(&aty)
                .zip(&reduced_costs)
                .map(|((c, a), d)| (c - sign * a - d).abs())
                .fold(0.0, f64::max)
        };
        if mismatch(-1.0) < mismatch(1.0) {
            log::warn!("HiGHS dual sign convention flipped; negating row duals");
            dual_rows.iter_mut().for_each(|y| *y = -*y);
        }
        // Recompute reduced costs from the triplets so they match the duals
        // exactly.
        let aty = lp.transpose_times(&dual_rows);
        for ((d, c), a) in reduced_costs.iter_mut().zip(&lp.objective).zip(&aty) {
            *d = c - a;
        }
        let objective = lp.objective.iter().zip(&primal).map(|(c, x)| c * x).sum();
        Ok(LPSolution {
            status,
            objective,
            primal,
            dual_rows,
            reduced_costs,
            info,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::Triplet;

    fn one_dim() -> SparseLP {
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

    #[test]
    fn one_dimensional_lp() {
        for method in [
            Method::DualSimplex,
            Method::PrimalSimplex,
            Method::InteriorPointWithCrossover,
        ] {
            let cfg = SolverConfig {
                method,
                ..Default::default()
            };
            let sol = HighsSolver::new().solve(&one_dim(), &cfg).unwrap();
            assert_eq!(sol.status, SolveStatus::Optimal);
            assert!((sol.objective - 3.0).abs() < 1e-12);
            assert!((sol.dual_rows[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        // x >= 1 and -x >= 0
        let lp = SparseLP::generic(
            vec![0.0],
            vec![
                Triplet {
                    row: 0,
                    col: 0,
                    coeff: 1.0,
                },
                Triplet {
                    row: 1,
                    col: 0,
                    coeff: -1.0,
                },
            ],
            vec![Sense::Ge, Sense::Ge],
            vec![1.0, 0.0],
            vec![f64::NEG_INFINITY],
            vec![f64::INFINITY],
        )
        .unwrap();
        let sol = HighsSolver::new().solve(&lp, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::PrimalInfeasible);
        assert!(sol.require_optimal().is_err());
    }

    #[test]
    fn unbounded_is_dual_infeasible() {
        let mut lp = one_dim();
        lp.objective[0] = -1.0;
        let sol = HighsSolver::new().solve(&lp, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::DualInfeasible);
    }
}
