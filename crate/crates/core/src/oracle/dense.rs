//! Small measure-side programs handed to a pure-Rust simplex, so the
//! brute-force oracle shares no code with the sparse HiGHS backend.

use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome};

/// `minimise c·x  s.t.  A_eq x = b_eq,  A_ge x >= b_ge,  x >= 0`.
#[derive(Debug, Clone, Default)]
pub struct DenseLp {
    pub cost: Vec<f64>,
    pub eq_rows: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub ge_rows: Vec<Vec<f64>>,
    pub ge_rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DenseOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
    Failed(String),
}

pub fn solve_dense(lp: &DenseLp) -> DenseOutcome {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = lp
        .cost
        .iter()
        .map(|&c| problem.add_var(c, (0.0, f64::INFINITY)))
        .collect();
    let rows = lp
        .eq_rows
        .iter()
        .zip(&lp.eq_rhs)
        .map(|r| (r, ComparisonOp::Eq))
        .chain(lp.ge_rows.iter().zip(&lp.ge_rhs).map(|r| (r, ComparisonOp::Ge)));
    for ((row, &rhs), op) in rows {
        let terms: Vec<_> = row
            .iter()
            .zip(&vars)
            .filter(|(a, _)| **a != 0.0)
            .map(|(&a, &v)| (v, a))
            .collect();
        problem.add_constraint(terms.as_slice(), op, rhs);
    }
    match problem.solve() {
        Ok(SolveOutcome::Solution(sol)) => {
            let x: Vec<f64> = vars.iter().map(|&v| sol.var_value(v).max(0.0)).collect();
            let objective = lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
            DenseOutcome::Optimal { x, objective }
        }
        Ok(SolveOutcome::Interrupted(_)) => DenseOutcome::Failed("interrupted".into()),
        Err(microlp::Error::Infeasible) => DenseOutcome::Infeasible,
        Err(microlp::Error::Unbounded) => DenseOutcome::Unbounded,
        Err(e) => DenseOutcome::Failed(e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(lp: &DenseLp) -> (Vec<f64>, f64) {
        match solve_dense(lp) {
            DenseOutcome::Optimal { x, objective } => (x, objective),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn small_lp() {
        // min -x - y  s.t. x + 2y <= 4, 3x + y <= 6
        let lp = DenseLp {
            cost: vec![-1.0, -1.0],
            ge_rows: vec![vec![-1.0, -2.0], vec![-3.0, -1.0]],
            ge_rhs: vec![-4.0, -6.0],
            ..Default::default()
        };
        let (x, objective) = optimal(&lp);
        assert!((x[0] - 1.6).abs() < 1e-9 && (x[1] - 1.2).abs() < 1e-9);
        assert!((objective + 2.8).abs() < 1e-9);
    }

    #[test]
    fn equality_and_infeasible() {
        let lp = DenseLp {
            cost: vec![1.0, 1.0],
            eq_rows: vec![vec![1.0, 1.0], vec![1.0, -1.0]],
            eq_rhs: vec![2.0, 0.0],
            ..Default::default()
        };
        let (x, objective) = optimal(&lp);
        assert!((x[0] - 1.0).abs() < 1e-9 && (x[1] - 1.0).abs() < 1e-9);
        assert!((objective - 2.0).abs() < 1e-9);
        let bad = DenseLp {
            cost: vec![0.0],
            eq_rows: vec![vec![1.0]],
            eq_rhs: vec![-1.0],
            ..Default::default()
        };
        assert_eq!(solve_dense(&bad), DenseOutcome::Infeasible);
    }

    #[test]
    fn unbounded() {
        let lp = DenseLp {
            cost: vec![-1.0, 0.0],
            eq_rows: vec![vec![0.0, 1.0]],
            eq_rhs: vec![1.0],
            ..Default::default()
        };
        assert_eq!(solve_dense(&lp), DenseOutcome::Unbounded);
    }

    #[test]
    fn degenerate_martingale_program() {
        // one-step martingale from 100 on {0, 50, 100, 150, 200}, maximising
        // the call struck at 100: all mass on the extremes gives 50
        let y = [0.0, 50.0, 100.0, 150.0, 200.0];
        let lp = DenseLp {
            cost: y.iter().map(|v| -(v - 100.0f64).max(0.0)).collect(),
            eq_rows: vec![vec![1.0; 5], y.iter().map(|v| v - 100.0).collect()],
            eq_rhs: vec![1.0, 0.0],
            ..Default::default()
        };
        let (x, objective) = optimal(&lp);
        assert!((objective + 50.0).abs() < 1e-9);
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
