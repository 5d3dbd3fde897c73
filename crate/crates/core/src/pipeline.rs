//! End-to-end runs: validate → mesh → quotes → build → solve → certify →
//! report, plus the oracle verification suites.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{Backend, RunConfig, SolverSection};
use crate::error::{Error, Result};
use crate::lp::{build_dual_lp, BuildOptions, SparseLP};
use crate::market::QuoteSet;
use crate::mesh::Mesh;
use crate::oracle::brute::primal_brute_force_lp;
use crate::oracle::envelope::{iterated_envelope_value, GridFunction};
use crate::oracle::measure::{check_measure_on, respects_bound, DiscreteMeasure};
use crate::par::Execution;
use crate::payoffs::ConstraintBlock;
use crate::problem::{ProblemSpec, Side, ValidatedSpec};
use crate::report::{build_report, BoundReport};
use crate::solver::{certify, DecompositionSolver, HighsSolver, LPSolution, LpSolver, SolveStatus};

/// A validated instance on its mesh.
#[derive(Debug, Clone)]
pub struct Instance {
    pub spec: ValidatedSpec,
    pub mesh: Mesh,
}

impl Instance {
    pub fn new(problem: ProblemSpec, mesh: Mesh) -> Result<Self> {
        Ok(Self {
            spec: problem.validate(Some(&mesh))?,
            mesh,
        })
    }

    pub fn from_config(cfg: &RunConfig, quotes: &QuoteSet, side: Side, mesh_scale: f64) -> Result<Self> {
        let mesh = cfg.mesh.build(mesh_scale)?;
        Self::new(cfg.problem(quotes, side)?, mesh)
    }

    /// The same instance without quote constraints.
    pub fn unconstrained(&self) -> Result<Self> {
        let mut p = self.spec.spec().clone();
        p.constraints = vec![ConstraintBlock::default(); p.horizon()];
        Self::new(p, self.mesh.clone())
    }

    pub fn with_side(&self, side: Side) -> Result<Self> {
        Self::new(self.spec.spec().clone().with_side(side), self.mesh.clone())
    }
}

/// Solved LP with its audit.
#[derive(Debug, Clone)]
pub struct Solved {
    pub lp: SparseLP,
    pub solution: LPSolution,
    pub backend: Backend,
    pub seconds: f64,
}

fn execution() -> Execution {
    Execution::default()
}

/// Builds and solves the LP of `inst` with the configured backend.
pub fn solve_instance(inst: &Instance, solver: &SolverSection) -> Result<Solved> {
    solver.highs.validate()?;
    let opts = BuildOptions {
        cell_cap: solver.cell_cap,
        execution: execution(),
    };
    let start = Instant::now();
    let lp = build_dual_lp(&inst.spec, &inst.mesh, &opts)?;
    let backend = match solver.backend {
        Backend::Auto if lp.num_vars() > solver.auto_threshold => Backend::Decomposition,
        Backend::Auto => Backend::Highs,
        b => b,
    };
    log::info!(
        "{:?} side: {} variables, {} rows, {} nonzeros, backend {backend:?}",
        inst.spec.side(),
        lp.num_vars(),
        lp.num_rows(),
        lp.nnz()
    );
    let solution = match backend {
        Backend::Decomposition => {
            let mut cfg = solver.decomposition;
            cfg.execution = execution();
            DecompositionSolver::new(cfg).solve(&inst.spec, &inst.mesh, &lp)?.0
        }
        _ => HighsSolver::new().solve(&lp, &solver.highs)?,
    };
    Ok(Solved {
        lp,
        solution,
        backend,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Result of one side of `bound`.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum SideOutcome {
    /// Optimal; the certificate verdict lives in the report diagnostics.
    Solved(Box<BoundReport>, Solved),
    /// The solver did not reach optimality.
    NotOptimal(SolveStatus, String),
}

pub fn run_side(inst: &Instance, solver: &SolverSection, measure_cap: usize) -> Result<SideOutcome> {
    let solved = solve_instance(inst, solver)?;
    if solved.solution.status != SolveStatus::Optimal {
        return Ok(SideOutcome::NotOptimal(
            solved.solution.status,
            describe_status(solved.solution.status),
        ));
    }
    let cert = certify(&solved.lp, &solved.solution, solver.certify_tol);
    let report = build_report(
        &solved.solution,
        &solved.lp,
        &inst.mesh,
        &inst.spec,
        cert,
        measure_cap,
    )?;
    Ok(SideOutcome::Solved(Box::new(report), solved))
}

/// Reads a backend status in terms of the pricing problem.
pub fn describe_status(status: SolveStatus) -> String {
    match status {
        SolveStatus::Optimal => "optimal".into(),
        // the hedging LP is unbounded below exactly when no martingale
        // measure on the grid reprices the quotes
        SolveStatus::DualInfeasible => {
            "PrimalInfeasible: no grid martingale measure is consistent with the quotes, so the duality hypothesis fails".into()
        }
        SolveStatus::PrimalInfeasible => "hedging LP infeasible (unexpected: zero hedge with envelopes is always feasible)".into(),
        SolveStatus::IterLimit => "iteration limit reached".into(),
        SolveStatus::NumericalTrouble => "numerical trouble".into(),
    }
}

/// One oracle comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    /// `None` when skipped.
    pub residual: Option<f64>,
    pub tol: f64,
    pub pass: bool,
    pub detail: String,
}

impl OracleCheck {
    fn compare(name: &str, a: f64, b: f64, tol: f64, detail: String) -> Self {
        let residual = (a - b).abs() / a.abs().max(b.abs()).max(1.0);
        Self {
            name: name.into(),
            residual: Some(residual),
            tol,
            pass: residual <= tol,
            detail,
        }
    }

    fn skipped(name: &str, why: String) -> Self {
        Self {
            name: name.into(),
            residual: None,
            tol: 0.0,
            pass: true,
            detail: format!("skipped: {why}"),
        }
    }

    fn failed(name: &str, why: String) -> Self {
        Self {
            name: name.into(),
            residual: None,
            tol: 0.0,
            pass: false,
            detail: why,
        }
    }
}

/// LP value of `inst` as a bound (sign-adjusted), or `None` if not optimal.
fn bound_of(inst: &Instance, solver: &SolverSection) -> Result<(Option<f64>, Solved)> {
    let s = solve_instance(inst, solver)?;
    let v = (s.solution.status == SolveStatus::Optimal).then(|| inst.spec.side().sign() * s.solution.objective);
    Ok((v, s))
}

/// Envelope recursion on the unconstrained variant versus its LP.
pub fn envelope_check(inst: &Instance, solver: &SolverSection) -> Result<OracleCheck> {
    let free = inst.unconstrained()?;
    let (lp_value, _) = bound_of(&free, solver)?;
    let Some(lp_value) = lp_value else {
        return Ok(OracleCheck::failed("envelope", "unconstrained LP not optimal".into()));
    };
    let memory = free.spec.memory();
    let h = (1..=free.spec.horizon())
        .map(|k| {
            let vals = free.spec.objective(k).sample_grid(&free.mesh, memory)?;
            GridFunction::new(&free.mesh, memory, vals)
        })
        .collect::<Result<Vec<_>>>()?;
    let (env, _) = iterated_envelope_value(&h, &free.mesh, free.spec.history(), execution())?;
    let env = free.spec.side().sign() * env;
    Ok(OracleCheck::compare(
        "envelope (no quotes)",
        lp_value,
        env,
        1e-8,
        format!("LP {lp_value:.10} vs envelope {env:.10}"),
    ))
}

/// Brute-force measure program versus the LP.
pub fn brute_force_check(inst: &Instance, solver: &SolverSection, path_cap: usize, tol: f64) -> Result<(OracleCheck, Option<DiscreteMeasure>)> {
    let brute = match primal_brute_force_lp(&inst.spec, &inst.mesh, path_cap) {
        Ok(b) => b,
        Err(e @ (Error::TooManyPaths { .. } | Error::HistoryOffGrid)) => {
            return Ok((OracleCheck::skipped("brute force", e.to_string()), None))
        }
        Err(Error::Infeasible) => {
            let (lp, s) = bound_of(inst, solver)?;
            let agree = lp.is_none() && s.solution.status == SolveStatus::DualInfeasible;
            let check = OracleCheck {
                name: "brute force".into(),
                residual: None,
                tol: 0.0,
                pass: agree,
                detail: format!(
                    "measure program infeasible; LP: {}",
                    describe_status(s.solution.status)
                ),
            };
            return Ok((check, None));
        }
        Err(e) => return Err(e),
    };
    let (lp, s) = bound_of(inst, solver)?;
    let check = match lp {
        Some(v) => OracleCheck::compare(
            "brute force",
            v,
            brute.value,
            tol,
            format!("LP {v:.10} vs brute force {:.10}", brute.value),
        ),
        None => OracleCheck::failed(
            "brute force",
            format!("LP {} but brute force found {}", describe_status(s.solution.status), brute.value),
        ),
    };
    Ok((check, Some(brute.measure)))
}

/// Runs every verification suite on `inst` (both sides).
pub fn verify_instance(inst: &Instance, solver: &SolverSection, path_cap: usize, tol: f64) -> Result<Vec<OracleCheck>> {
    let mut checks = Vec::new();
    let mut bounds = Vec::new();
    let mut measures: Vec<(String, DiscreteMeasure)> = Vec::new();
    for side in [Side::Lower, Side::Upper] {
        let inst = inst.with_side(side)?;
        let label = format!("{side:?}").to_lowercase();
        match run_side(&inst, solver, crate::report::DEFAULT_MEASURE_CAP)? {
            SideOutcome::NotOptimal(_, why) => {
                checks.push(OracleCheck::failed(&format!("{label} LP"), why));
                continue;
            }
            SideOutcome::Solved(report, _) => {
                let cert = &report.diagnostics.certificate;
                checks.push(OracleCheck {
                    name: format!("{label} certificate"),
                    residual: Some(cert.gap.value),
                    tol: cert.gap.tol,
                    pass: cert.passed(),
                    detail: format!("failures: {:?}", cert.failures()),
                });
                bounds.push((side, report.bound_value));
                if let Some(m) = &report.worst_case {
                    measures.push((format!("{label} worst case"), m.clone()));
                }
            }
        }
        let (check, measure) = brute_force_check(&inst, solver, path_cap, tol)?;
        checks.push(OracleCheck {
            name: format!("{label} {}", check.name),
            ..check
        });
        if let Some(m) = measure {
            measures.push((format!("{label} brute force optimum"), m));
        }
        let env = envelope_check(&inst, solver)?;
        checks.push(OracleCheck {
            name: format!("{label} {}", env.name),
            ..env
        });
    }
    // weak duality: every feasible measure prices inside the bounds
    let spot = inst.spec.history().spot();
    for (name, m) in &measures {
        let rep = check_measure_on(m, &inst.spec, Some(&inst.mesh));
        if !rep.is_feasible(tol, spot) {
            checks.push(OracleCheck::failed(
                &format!("weak duality ({name})"),
                format!("measure not feasible: residual {:.2e}, min slack {:.2e}", rep.martingale_residual, rep.min_slack),
            ));
            continue;
        }
        for &(side, b) in &bounds {
            let ok = respects_bound(&rep, b, side == Side::Upper, 1e-8);
            checks.push(OracleCheck {
                name: format!("weak duality ({name} vs {side:?})").to_lowercase(),
                residual: Some(side.sign() * (rep.objective - b)),
                tol: 1e-8,
                pass: ok,
                detail: format!("E[f] = {:.10}, bound {b:.10}", rep.objective),
            });
        }
    }
    if let [(_, lo), (_, hi)] = bounds[..] {
        checks.push(OracleCheck {
            name: "lower <= upper".into(),
            residual: Some(lo - hi),
            tol: 1e-8,
            pass: lo <= hi + 1e-8 * hi.abs().max(1.0),
            detail: format!("{lo:.10} <= {hi:.10}"),
        });
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    fn config() -> RunConfig {
        RunConfig::from_json(
            r#"{
            "spec": {
                "monitoring": [0.16666666666666666, 0.4166666666666667],
                "memory": 1,
                "domain": {"lower": 0.0},
                "history": [100.0],
                "objectives": [{"kind": "zero"}, {"kind": "forward_start_call"}]
            },
            "mesh": {"nodes": [0, 70, 80, 90, 100, 110, 120, 130, 200]},
            "quotes": {"synth": {"vol": 0.2, "expiries": [1, 2], "strikes": {"from": 70, "to": 130, "step": 10}}}
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn verify_small_forward_start() {
        let cfg = config();
        let q = cfg.quote_set().unwrap();
        let inst = Instance::from_config(&cfg, &q, Side::Upper, 1.0).unwrap();
        let checks = verify_instance(&inst, &cfg.solver, 100_000, 1e-6).unwrap();
        for c in &checks {
            assert!(c.pass, "{c:?}");
        }
        assert!(checks.iter().any(|c| c.name == "upper brute force" && c.residual.is_some()));
    }

    #[test]
    fn backends_agree() {
        let cfg = config();
        let q = cfg.quote_set().unwrap();
        for side in [Side::Upper, Side::Lower] {
            let inst = Instance::from_config(&cfg, &q, side, 1.0).unwrap();
            let mut solver = cfg.solver.clone();
            solver.backend = Backend::Highs;
            let a = solve_instance(&inst, &solver).unwrap();
            solver.backend = Backend::Decomposition;
            let b = solve_instance(&inst, &solver).unwrap();
            assert!((a.solution.objective - b.solution.objective).abs() < 1e-7);
            assert!(certify(&b.lp, &b.solution, 1e-8).passed());
        }
    }

    #[test]
    fn crossed_quotes_are_rejected() {
        let mut q = QuoteSet::new(Some(100.0));
        let bad = q.push(crate::market::Quote {
            expiry_index: 1,
            strike: 100.0,
            bid: 5.0,
            ask: 4.0,
        });
        assert!(bad.is_err());
        q.push(crate::market::Quote {
            expiry_index: 1,
            strike: 100.0,
            bid: 4.0,
            ask: 5.0,
        })
        .unwrap();
        assert_eq!(q.len(), 1);
    }
}
