//! Structured solver for the grid LP via Lagrangian decomposition.
//!
//! For fixed multipliers λ the LP collapses to the backward envelope
//! recursion, whose value `D(λ)` is convex and piecewise linear in λ with
//! subgradient `E_Q[g]` under the two-point transitions of the envelopes.
//! Minimising `D` over `λ >= 0` with Kelley's cutting planes terminates at
//! the LP optimum; the primal and dual of the full LP are then rebuilt so
//! that the result can be audited against the triplets like any other
//! solution.

use serde::{Deserialize, Serialize};

use super::{HighsSolver, LPSolution, LpSolver, SolveStatus, SolverConfig};
use crate::error::{Error, Result};
use crate::lp::{initial_weights, RowTag, Sense, SparseLP, Triplet};
use crate::mesh::{GridShape, Mesh};
use crate::oracle::envelope::{fill_from_hull, upper_hull};
use crate::par::Execution;
use crate::problem::ValidatedSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecompositionConfig {
    /// Stop once `best - lower <= tol * max(1, |best|)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial box `0 <= λ <= box_size`; doubled while a bound is active.
    pub box_size: f64,
    pub execution: Execution,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
            box_size: 16.0,
            execution: Execution::default(),
        }
    }
}

struct Instance<'a> {
    mesh: &'a Mesh,
    shape: GridShape,
    n: usize,
    /// `f_k` on every cell
    f: Vec<Vec<f64>>,
    /// `g_k` per node, `m × p_k` row-major
    g: Vec<Vec<f64>>,
    p_k: Vec<usize>,
    lam_off: Vec<usize>,
    gamma: Vec<(usize, f64)>,
    exec: Execution,
}

/// Result of one backward sweep.
struct Sweep {
    value: f64,
    /// `hulls[k-1][slab]`
    hulls: Vec<Vec<Vec<usize>>>,
    /// envelopes `φ^k`, kept only when requested
    phi: Vec<Vec<f64>>,
}

impl<'a> Instance<'a> {
    fn new(spec: &ValidatedSpec, mesh: &'a Mesh, exec: Execution) -> Result<Self> {
        let n = spec.horizon();
        let shape = GridShape::new(mesh.len(), spec.memory());
        let f = (1..=n)
            .map(|k| spec.objective(k).sample_grid(mesh, spec.memory()))
            .collect::<Result<Vec<_>>>()?;
        let p_k: Vec<usize> = (1..=n).map(|k| spec.constraints(k).dimension()).collect();
        let g = (1..=n)
            .map(|k| {
                let block = spec.constraints(k);
                let pk = block.dimension();
                let mut out = vec![0.0; mesh.len() * pk];
                if pk > 0 {
                    for (i, y) in mesh.points().iter().enumerate() {
                        block.fill(*y, &mut out[i * pk..(i + 1) * pk]);
                    }
                }
                out
            })
            .collect();
        let mut lam_off = vec![0];
        for p in &p_k {
            lam_off.push(lam_off.last().unwrap() + p);
        }
        Ok(Self {
            mesh,
            shape,
            n,
            f,
            g,
            p_k,
            lam_off,
            gamma: initial_weights(spec, mesh)?,
            exec,
        })
    }

    fn p(&self) -> usize {
        *self.lam_off.last().unwrap()
    }

    /// `h_k = f_k + λ_k · g_k` on every cell.
    fn h(&self, k: usize, lam: &[f64]) -> Vec<f64> {
        let m = self.shape.m;
        let pk = self.p_k[k - 1];
        let lk = &lam[self.lam_off[k - 1]..self.lam_off[k]];
        let g = &self.g[k - 1];
        let node: Vec<f64> = (0..m)
            .map(|i| g[i * pk..(i + 1) * pk].iter().zip(lk).map(|(a, b)| a * b).sum())
            .collect();
        self.f[k - 1]
            .iter()
            .enumerate()
            .map(|(c, v)| v + node[c % m])
            .collect()
    }

    fn backward(&self, lam: &[f64], keep_phi: bool) -> Sweep {
        let m = self.shape.m;
        let x = self.mesh.points();
        let slabs = self.shape.slab_count();
        let mut hulls = vec![Vec::new(); self.n];
        let mut phi_all = vec![Vec::new(); self.n];
        let mut next: Option<Vec<f64>> = None;
        for k in (1..=self.n).rev() {
            let mut total = self.h(k, lam);
            if let Some(phi) = &next {
                for (c, v) in total.iter_mut().enumerate() {
                    *v += phi[self.shape.shift(c)];
                }
            }
            let parts: Vec<(Vec<usize>, Vec<f64>)> = self.exec.map_range(slabs, |s| {
                let v = &total[s * m..(s + 1) * m];
                let hull = upper_hull(x, v);
                let mut env = vec![0.0; m];
                fill_from_hull(x, v, &hull, &mut env);
                (hull, env)
            });
            let mut env = Vec::with_capacity(total.len());
            let mut hk = Vec::with_capacity(slabs);
            for (h, e) in parts {
                hk.push(h);
                env.extend(e);
            }
            hulls[k - 1] = hk;
            if keep_phi {
                phi_all[k - 1] = env.clone();
            }
            next = Some(env);
        }
        let phi1 = next.unwrap();
        let value = self.gamma.iter().map(|&(c, w)| w * phi1[c]).sum();
        Sweep {
            value,
            hulls,
            phi: phi_all,
        }
    }

    /// Forward pass under the two-point transitions of `sweep`. Returns the
    /// window marginals `π^k` and start distributions `ν^k`, and fills
    /// `subgrad` with `E[g]`.
    fn forward(&self, sweep: &Sweep, subgrad: &mut [f64], keep: bool) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let m = self.shape.m;
        let x = self.mesh.points();
        let cells = self.shape.cells();
        let mut nu = vec![0.0; cells];
        for &(c, w) in &self.gamma {
            nu[c] += w;
        }
        let mut pis = Vec::new();
        let mut nus = Vec::new();
        for k in 1..=self.n {
            let mut pi = vec![0.0; cells];
            for (c, &mass) in nu.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                let (s, i0) = (c / m, c % m);
                let hull = &sweep.hulls[k - 1][s];
                let pos = hull.partition_point(|&v| v < i0);
                if hull[pos] == i0 {
                    pi[c] += mass;
                } else {
                    let (l, r) = (hull[pos - 1], hull[pos]);
                    let wl = (x[r] - x[i0]) / (x[r] - x[l]);
                    pi[s * m + l] += mass * wl;
                    pi[s * m + r] += mass * (1.0 - wl);
                }
            }
            let pk = self.p_k[k - 1];
            if pk > 0 {
                let out = &mut subgrad[self.lam_off[k - 1]..self.lam_off[k]];
                out.fill(0.0);
                let g = &self.g[k - 1];
                for (c, &mass) in pi.iter().enumerate() {
                    if mass != 0.0 {
                        let i0 = c % m;
                        for (o, gv) in out.iter_mut().zip(&g[i0 * pk..(i0 + 1) * pk]) {
                            *o += mass * gv;
                        }
                    }
                }
            }
            let mut next = vec![0.0; cells];
            if k < self.n {
                for (c, &mass) in pi.iter().enumerate() {
                    if mass != 0.0 {
                        next[self.shape.shift(c)] += mass;
                    }
                }
            }
            if keep {
                nus.push(std::mem::replace(&mut nu, next));
                pis.push(pi);
            } else {
                nu = next;
            }
        }
        (pis, nus)
    }
}

/// One cutting plane `D(λ) >= value + subgrad · (λ - at)`.
struct Cut {
    at: Vec<f64>,
    value: f64,
    subgrad: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct DecompositionSolver {
    pub config: DecompositionConfig,
}

/// Iteration summary of the last solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionStats {
    pub iterations: usize,
    pub lower: f64,
    pub upper: f64,
    pub box_size: f64,
}

impl DecompositionSolver {
    pub fn new(config: DecompositionConfig) -> Self {
        Self { config }
    }

    /// Solves the LP `lp` built from `spec` on `mesh`.
    pub fn solve(&self, spec: &ValidatedSpec, mesh: &Mesh, lp: &SparseLP) -> Result<(LPSolution, DecompositionStats)> {
        let dir = lp
            .directory
            .as_ref()
            .ok_or_else(|| Error::Solver("decomposition needs a grid LP".into()))?;
        if lp.mesh_hash.as_deref() != Some(mesh.content_hash().as_str()) {
            return Err(Error::MeshMismatch);
        }
        let inst = Instance::new(spec, mesh, self.config.execution)?;
        let p = inst.p();
        if p != dir.num_lambda() {
            return Err(Error::MismatchedLengths("LP and spec disagree on p".into()));
        }

        let mut cuts: Vec<Cut> = Vec::new();
        let mut lam = vec![0.0; p];
        let mut best = (f64::INFINITY, lam.clone());
        let mut lower;
        let mut box_size = self.config.box_size;
        let mut mu: Vec<f64> = vec![1.0];
        let mut iterations = 0;
        let master_cfg = SolverConfig {
            feas_tol: 1e-10,
            opt_tol: 1e-10,
            ..Default::default()
        };
        loop {
            iterations += 1;
            let sweep = inst.backward(&lam, false);
            let mut subgrad = vec![0.0; p];
            inst.forward(&sweep, &mut subgrad, false);
            if sweep.value < best.0 {
                best = (sweep.value, lam.clone());
            }
            cuts.push(Cut {
                at: lam.clone(),
                value: sweep.value,
                subgrad,
            });
            if p == 0 {
                lower = sweep.value;
                break;
            }
            let (next, lb, duals) = solve_master(&cuts, box_size, &master_cfg)?;
            lower = lb;
            mu = duals;
            let gap = best.0 - lower;
            if iterations % 50 == 0 {
                log::debug!("decomposition iteration {iterations}: best {} lower {lower}", best.0);
            }
            if gap <= self.config.tol * best.0.abs().max(1.0) {
                let at_box = next.iter().chain(&best.1).any(|&v| v >= box_size * (1.0 - 1e-9));
                if !at_box {
                    break;
                }
                box_size *= 2.0;
                log::info!("multiplier box active; enlarging to {box_size}");
            }
            if iterations >= self.config.max_iter {
                let info = format!(
                    "decomposition stopped after {iterations} iterations, gap {gap:e}"
                );
                log::warn!("{info}");
                return Ok((
                    LPSolution::failed(SolveStatus::IterLimit, info),
                    DecompositionStats {
                        iterations,
                        lower,
                        upper: best.0,
                        box_size,
                    },
                ));
            }
            lam = next;
        }

        // Primal: envelopes at the best multipliers.
        let lam_best = best.1.clone();
        let sweep = inst.backward(&lam_best, true);
        let mut x = vec![0.0; lp.num_vars()];
        x[..p].copy_from_slice(&lam_best);
        for k in 1..=inst.n {
            let h = inst.h(k, &lam_best);
            let ho = dir.h_offset(k);
            x[ho..ho + h.len()].copy_from_slice(&h);
            let po = dir.phi_offset(k);
            x[po..po + h.len()].copy_from_slice(&sweep.phi[k - 1]);
        }

        // Dual: mixture of the measures behind the active cuts.
        let cells = inst.shape.cells();
        let mut pi = vec![vec![0.0; cells]; inst.n];
        let mut nu = vec![vec![0.0; cells]; inst.n];
        let mut scratch = vec![0.0; p];
        let total_mu: f64 = mu.iter().sum();
        for (cut, &w) in cuts.iter().zip(&mu) {
            if w <= 0.0 {
                continue;
            }
            let w = w / total_mu;
            let sw = inst.backward(&cut.at, false);
            let (pis, nus) = inst.forward(&sw, &mut scratch, true);
            for k in 0..inst.n {
                for (a, b) in pi[k].iter_mut().zip(&pis[k]) {
                    *a += w * b;
                }
                for (a, b) in nu[k].iter_mut().zip(&nus[k]) {
                    *a += w * b;
                }
            }
        }
        let y = assemble_duals(lp, mesh, &inst.shape, &pi, &nu)?;
        let aty = lp.transpose_times(&y);
        let reduced_costs = lp.objective.iter().zip(&aty).map(|(c, a)| c - a).collect();
        let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        let stats = DecompositionStats {
            iterations,
            lower,
            upper: best.0,
            box_size,
        };
        Ok((
            LPSolution {
                status: SolveStatus::Optimal,
                objective,
                primal: x,
                dual_rows: y,
                reduced_costs,
                info: format!(
                    "decomposition: {iterations} cutting-plane iterations, bracket [{lower}, {}]",
                    best.0
                ),
            },
            stats,
        ))
    }
}

/// Kelley master: `min t` over the cuts within the box. Returns the next
/// point, the model minimum and the cut multipliers.
fn solve_master(cuts: &[Cut], box_size: f64, cfg: &SolverConfig) -> Result<(Vec<f64>, f64, Vec<f64>)> {
    let p = cuts[0].at.len();
    let mut triplets = Vec::new();
    let mut rhs = Vec::with_capacity(cuts.len());
    for (r, cut) in cuts.iter().enumerate() {
        // t - s·λ >= v - s·λ_i
        triplets.push(Triplet {
            row: r as u32,
            col: p as u32,
            coeff: 1.0,
        });
        for (j, &s) in cut.subgrad.iter().enumerate() {
            if s != 0.0 {
                triplets.push(Triplet {
                    row: r as u32,
                    col: j as u32,
                    coeff: -s,
                });
            }
        }
        let sl: f64 = cut.subgrad.iter().zip(&cut.at).map(|(a, b)| a * b).sum();
        rhs.push(cut.value - sl);
    }
    let mut objective = vec![0.0; p + 1];
    objective[p] = 1.0;
    let mut lower = vec![0.0; p + 1];
    lower[p] = f64::NEG_INFINITY;
    let mut upper = vec![box_size; p + 1];
    upper[p] = f64::INFINITY;
    let master = SparseLP::generic(
        objective,
        triplets,
        vec![Sense::Ge; cuts.len()],
        rhs,
        lower,
        upper,
    )?;
    let sol = HighsSolver::new().solve(&master, cfg)?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::Solver(format!("cutting-plane master ended {}", sol.status)));
    }
    let lam = sol.primal[..p].iter().map(|v| v.clamp(0.0, box_size)).collect();
    let mu = sol.dual_rows.iter().map(|v| v.max(0.0)).collect();
    Ok((lam, sol.primal[p], mu))
}

/// Row duals of the grid LP from window marginals `pi` and start
/// distributions `nu` of a grid martingale measure.
pub fn assemble_duals(
    lp: &SparseLP,
    mesh: &Mesh,
    shape: &GridShape,
    pi: &[Vec<f64>],
    nu: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let m = shape.m;
    let x = mesh.points();
    let slabs = shape.slab_count();
    let n = pi.len();
    // ρ per (k, cell) for interior nodes
    let mut rho = vec![vec![0.0; shape.cells()]; n];
    for k in 0..n {
        for s in 0..slabs {
            let a = &pi[k][s * m..(s + 1) * m];
            let b = &nu[k][s * m..(s + 1) * m];
            if a.iter().chain(b).all(|v| *v == 0.0) {
                continue;
            }
            for l in 1..m - 1 {
                // difference of call functions at y_l
                let psi: f64 = (l + 1..m)
                    .map(|i| (a[i] - b[i]) * (x[i] - x[l]))
                    .sum();
                rho[k][s * m + l] = psi / ((x[l] - x[l - 1]) * (x[l + 1] - x[l]));
            }
        }
    }
    lp.row_tags
        .iter()
        .map(|tag| match *tag {
            RowTag::HDef { k, idx } | RowTag::Recursion { k, idx } => Ok(pi[k - 1][idx]),
            RowTag::Terminal { idx } => Ok(pi[n - 1][idx]),
            RowTag::Concavity { k, idx } => Ok(rho[k - 1][idx]),
            RowTag::Other(_) => Err(Error::Solver("row without grid semantics".into())),
        })
        .collect()
}
