//! Brute-force measure-side program over lattice paths.
//!
//! Each atom is a start cell `s` of the interpolation stencil of the initial
//! point together with nodes `j_1, ..., j_n`. The start cell fixes the
//! pre-transition value (`s_0`) and the earlier window (`s_1, ..., s_d`).

use crate::error::{Error, Result};
use crate::lp::initial_weights;
use crate::mesh::{GridShape, Mesh};
use crate::oracle::measure::{time_zero_offset, DiscreteMeasure, WeightedPath};
use crate::oracle::dense::{solve_dense, DenseLp, DenseOutcome};
use crate::problem::ValidatedSpec;

pub const DEFAULT_PATH_CAP: usize = 1_000_000;
/// Guard on the dense row storage.
const TABLEAU_CAP: usize = 40_000_000;
/// Path weights at or below this are simplex round-off.
const NOISE_WEIGHT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    /// Optimum of `E[Σ f_k]` as maximised, i.e. sign-adjusted back to the
    /// bound: the upper bound for `Side::Upper`, the lower bound otherwise.
    pub value: f64,
    pub measure: DiscreteMeasure,
}

/// Window of step `k` (1-based) for start cell `start` and nodes `path`.
fn window(start: &[usize], path: &[usize], k: usize, out: &mut [usize]) {
    for (c, o) in out.iter_mut().enumerate() {
        *o = if k > c {
            path[k - c - 1]
        } else {
            start[1 + c - k]
        };
    }
}

pub fn primal_brute_force_lp(spec: &ValidatedSpec, mesh: &Mesh, path_cap: usize) -> Result<BruteForceResult> {
    let n = spec.horizon();
    let d = spec.memory();
    let m = mesh.len();
    let y = mesh.points();
    let gamma = initial_weights(spec, mesh)?;
    let shape = GridShape::new(m, d);
    let per_start = m
        .checked_pow(n as u32)
        .ok_or(Error::TooManyPaths { paths: usize::MAX, cap: path_cap })?;
    let paths = per_start.saturating_mul(gamma.len());
    if paths > path_cap {
        return Err(Error::TooManyPaths { paths, cap: path_cap });
    }
    if d >= 1 && gamma.len() > 1 {
        return Err(Error::HistoryOffGrid);
    }

    let starts: Vec<(Vec<usize>, f64)> = gamma
        .iter()
        .map(|&(flat, w)| (shape.multi_index(flat), w))
        .collect();
    let p_k: Vec<usize> = (1..=n).map(|k| spec.constraints(k).dimension()).collect();
    let p: usize = p_k.iter().sum();
    // martingale rows: one per start and per prefix of length 0..n-1
    let prefixes: usize = (0..n).map(|t| m.pow(t as u32)).sum();
    let eq_count = starts.len() * (1 + prefixes);
    if (eq_count + p).saturating_mul(paths + p + eq_count) > TABLEAU_CAP {
        return Err(Error::TooManyPaths { paths, cap: path_cap });
    }

    let mut lp = DenseLp {
        cost: vec![0.0; paths],
        eq_rows: vec![vec![0.0; paths]; eq_count],
        eq_rhs: vec![0.0; eq_count],
        ge_rows: vec![vec![0.0; paths]; p],
        ge_rhs: vec![0.0; p],
    };
    let mut nodes = vec![0usize; n];
    let mut win = vec![0usize; d + 1];
    let mut yw = vec![0.0; d + 1];
    let mut gbuf = Vec::new();
    for (si, (start, w)) in starts.iter().enumerate() {
        let row0 = si * (1 + prefixes);
        lp.eq_rhs[row0] = *w;
        for q in 0..per_start {
            let col = si * per_start + q;
            // path nodes, j_1 most significant
            let mut rest = q;
            for t in (0..n).rev() {
                nodes[t] = rest % m;
                rest /= m;
            }
            lp.eq_rows[row0][col] = 1.0;
            // prefix of length t: index among prefixes of that length
            let mut offset = 1;
            let mut code = 0;
            for t in 0..n {
                let prev = if t == 0 { y[start[0]] } else { y[nodes[t - 1]] };
                lp.eq_rows[row0 + offset + code][col] = y[nodes[t]] - prev;
                offset += m.pow(t as u32);
                code = code * m + nodes[t];
            }
            let mut total = 0.0;
            let mut g_row = 0;
            for k in 1..=n {
                window(start, &nodes, k, &mut win);
                for (v, &i) in yw.iter_mut().zip(&win) {
                    *v = y[i];
                }
                total += spec.objective(k).eval_on_grid(mesh, &win)?;
                let block = spec.constraints(k);
                gbuf.resize(block.dimension(), 0.0);
                block.fill(yw[0], &mut gbuf);
                for (j, g) in gbuf.iter().enumerate() {
                    lp.ge_rows[g_row + j][col] = *g;
                }
                g_row += block.dimension();
            }
            // the dense solver minimises
            lp.cost[col] = -total;
        }
    }

    let (x, objective) = match solve_dense(&lp) {
        DenseOutcome::Optimal { x, objective } => (x, objective),
        DenseOutcome::Infeasible => return Err(Error::Infeasible),
        DenseOutcome::Unbounded => {
            return Err(Error::Solver("brute-force program is unbounded".into()))
        }
        DenseOutcome::Failed(why) => {
            return Err(Error::Solver(format!("brute-force solve failed: {why}")))
        }
    };
    let value = spec.side().sign() * -objective;

    let zero = time_zero_offset(d);
    let history = &spec.history().values;
    let mut measure = DiscreteMeasure::default();
    for (si, _) in starts.iter().enumerate() {
        for q in 0..per_start {
            let wgt = x[si * per_start + q];
            // round-off atoms of the simplex would dominate the conditional
            // drift of prefixes they alone reach
            if wgt <= NOISE_WEIGHT {
                continue;
            }
            let mut path = vec![0.0; zero + 1 + n];
            for j in 0..=zero {
                path[zero - j] = history[j];
            }
            let mut rest = q;
            for t in (0..n).rev() {
                path[zero + 1 + t] = y[rest % m];
                rest /= m;
            }
            measure.paths.push(WeightedPath { path, weight: wgt });
        }
    }
    measure.normalize(0.0);
    Ok(BruteForceResult { value, measure })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::measure::check_measure;
    use crate::payoffs::{ConstraintBlock, PayoffKind};
    use crate::problem::{InitialHistory, ProblemSpec, Side, StateDomain, TimeGrid};

    fn spec(
        objectives: Vec<PayoffKind>,
        memory: usize,
        x0: f64,
        mesh: &Mesh,
        side: Side,
    ) -> ValidatedSpec {
        let n = objectives.len();
        let times: Vec<f64> = (1..=n).map(|k| k as f64).collect();
        ProblemSpec {
            time_grid: TimeGrid::from_monitoring(&times, memory).unwrap(),
            domain: StateDomain::non_negative(),
            history: InitialHistory {
                values: vec![x0; memory.max(1)],
            },
            objectives: objectives.into_iter().map(Into::into).collect(),
            constraints: vec![ConstraintBlock::default(); n],
            side,
        }
        .validate(Some(mesh))
        .unwrap()
    }

    #[test]
    fn affine_payoff_is_killed_by_the_martingale() {
        let mesh = Mesh::new(vec![0.0, 50.0, 120.0, 200.0]).unwrap();
        let s = spec(
            vec![PayoffKind::Affine {
                intercept: 3.0,
                slopes: vec![2.0],
            }],
            0,
            70.0,
            &mesh,
            Side::Upper,
        );
        let r = primal_brute_force_lp(&s, &mesh, DEFAULT_PATH_CAP).unwrap();
        assert!((r.value - 143.0).abs() < 1e-9);
        let rep = check_measure(&r.measure, &s);
        assert!(rep.martingale_residual < 1e-9);
        assert!((rep.objective - 143.0).abs() < 1e-9);
    }

    #[test]
    fn forward_start_on_three_nodes() {
        let mesh = Mesh::new(vec![0.0, 100.0, 200.0]).unwrap();
        let s = spec(
            vec![PayoffKind::Zero, PayoffKind::ForwardStartCall],
            1,
            100.0,
            &mesh,
            Side::Upper,
        );
        let r = primal_brute_force_lp(&s, &mesh, DEFAULT_PATH_CAP).unwrap();
        assert!((r.value - 50.0).abs() < 1e-9);
        let lower = spec(
            vec![PayoffKind::Zero, PayoffKind::ForwardStartCall],
            1,
            100.0,
            &mesh,
            Side::Lower,
        );
        let r = primal_brute_force_lp(&lower, &mesh, DEFAULT_PATH_CAP).unwrap();
        assert!(r.value.abs() < 1e-9);
    }

    #[test]
    fn path_cap() {
        let mesh = Mesh::new((0..10).map(|i| i as f64).collect()).unwrap();
        let s = spec(vec![PayoffKind::Zero; 3], 0, 5.0, &mesh, Side::Upper);
        assert!(matches!(
            primal_brute_force_lp(&s, &mesh, 999),
            Err(Error::TooManyPaths { paths: 1000, cap: 999 })
        ));
    }

    #[test]
    fn off_grid_history_with_memory() {
        let mesh = Mesh::new(vec![0.0, 100.0, 200.0]).unwrap();
        let s = spec(
            vec![PayoffKind::ForwardStartCall],
            1,
            90.0,
            &mesh,
            Side::Upper,
        );
        assert!(matches!(
            primal_brute_force_lp(&s, &mesh, DEFAULT_PATH_CAP),
            Err(Error::HistoryOffGrid)
        ));
    }
}
