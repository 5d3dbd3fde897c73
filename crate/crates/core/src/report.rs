//! Financial read-out of a solved grid LP: bound value, static hedge
//! positions and a worst-case price process rebuilt from the duals.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{RowTag, SparseLP};
use crate::mesh::{GridShape, Mesh};
use crate::oracle::measure::{check_measure_on, time_zero_offset, DiscreteMeasure, FeasibilityReport, WeightedPath};
use crate::payoffs::PayoffKind;
use crate::problem::{Side, ValidatedSpec};
use crate::solver::{CertificateReport, LPSolution};

/// Cap on the atoms of an extracted worst-case measure.
pub const DEFAULT_MEASURE_CAP: usize = 2_000_000;
/// Kernel probabilities below this are dropped.
const KERNEL_PRUNE: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeRow {
    pub expiry_index: usize,
    pub expiry_time: f64,
    pub strike: f64,
    /// Calls held (positive = long).
    pub net_position: f64,
    /// Multiplier of the `payoff - bid` component.
    pub bid_weight: f64,
    /// Multiplier of the `ask - payoff` component.
    pub ask_weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HedgeTable {
    pub rows: Vec<HedgeRow>,
}

impl HedgeTable {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, expiry_index: usize, strike: f64) -> Option<&HedgeRow> {
        self.rows
            .iter()
            .find(|r| r.expiry_index == expiry_index && r.strike == strike)
    }

    /// Expiry indices in increasing order.
    pub fn expiries(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.rows.iter().map(|r| r.expiry_index).collect();
        set.into_iter().collect()
    }
}

/// Static call positions of the optimal portfolio. For the upper side a
/// position is `ask_weight - bid_weight` (bought at the ask, sold at the
/// bid); the lower side reports the negation, i.e. the sub-hedge.
pub fn extract_hedges(sol: &LPSolution, lp: &SparseLP, spec: &ValidatedSpec) -> Result<HedgeTable> {
    sol.require_optimal()?;
    let dir = lp
        .directory
        .as_ref()
        .ok_or_else(|| Error::WellFormedness("hedges need a grid LP".into()))?;
    let sign = match spec.side() {
        Side::Upper => 1.0,
        Side::Lower => -1.0,
    };
    let mut rows = Vec::new();
    for k in 1..=spec.horizon() {
        let range = dir.lambda_range(k);
        let lam = &sol.primal[range];
        for (q, pair) in spec.constraints(k).quotes.iter().zip(lam.chunks_exact(2)) {
            rows.push(HedgeRow {
                expiry_index: k,
                expiry_time: spec.spec().time_grid.time(k as isize),
                strike: q.strike,
                net_position: sign * (pair[1] - pair[0]),
                bid_weight: pair[0],
                ask_weight: pair[1],
            });
        }
    }
    Ok(HedgeTable { rows })
}

/// Row duals arranged as window marginals `π^k`, start distributions `ν^k`
/// and concavity multipliers `ρ^k` on the cell grid.
struct DualGrid {
    pi: Vec<Vec<f64>>,
    nu: Vec<Vec<f64>>,
    rho: Vec<Vec<f64>>,
}

fn dual_grid(sol: &LPSolution, lp: &SparseLP, shape: &GridShape, gamma: &[(usize, f64)], n: usize) -> DualGrid {
    let cells = shape.cells();
    let mut pi = vec![vec![0.0; cells]; n];
    let mut rho = vec![vec![0.0; cells]; n];
    for (tag, &y) in lp.row_tags.iter().zip(&sol.dual_rows) {
        match *tag {
            RowTag::Terminal { idx } => pi[n - 1][idx] = y,
            RowTag::Recursion { k, idx } => pi[k - 1][idx] = y,
            RowTag::Concavity { k, idx } => rho[k - 1][idx] = y,
            _ => {}
        }
    }
    let mut nu = vec![vec![0.0; cells]; n];
    for &(c, w) in gamma {
        nu[0][c] += w;
    }
    for k in 1..n {
        let (before, after) = nu.split_at_mut(k);
        let _ = before;
        for (c, &mass) in pi[k - 1].iter().enumerate() {
            if mass != 0.0 {
                after[0][shape.shift(c)] += mass;
            }
        }
    }
    DualGrid { pi, nu, rho }
}

/// Absorption probabilities of the splitting chain on one slab: a particle
/// at node `l` stops with probability `π_l / (π_l + a_l)`, otherwise moves
/// to a neighbour so that its mean is preserved. Returns row-major `m × m`.
fn chain_kernel(x: &[f64], pi: &[f64], rho: &[f64]) -> Result<Vec<f64>> {
    let m = x.len();
    // I - Q, dense
    let mut a = vec![0.0; m * m];
    let mut stop = vec![0.0; m];
    for l in 0..m {
        a[l * m + l] = 1.0;
        let split = if l == 0 || l == m - 1 {
            0.0
        } else {
            rho[l].max(0.0) * (x[l + 1] - x[l - 1])
        };
        let through = pi[l].max(0.0) + split;
        if through <= 0.0 {
            stop[l] = 1.0;
            continue;
        }
        let q = split / through;
        stop[l] = 1.0 - q;
        if q > 0.0 {
            let up = (x[l] - x[l - 1]) / (x[l + 1] - x[l - 1]);
            a[l * m + l + 1] -= q * up;
            a[l * m + l - 1] -= q * (1.0 - up);
        }
    }
    // solve (I - Q) N = I by Gauss-Jordan with partial pivoting
    let mut inv = vec![0.0; m * m];
    for i in 0..m {
        inv[i * m + i] = 1.0;
    }
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&i, &j| a[i * m + col].abs().total_cmp(&a[j * m + col].abs()))
            .unwrap();
        if a[piv * m + col].abs() < 1e-300 {
            return Err(Error::DegenerateDuals("splitting chain never stops".into()));
        }
        if piv != col {
            for j in 0..m {
                a.swap(piv * m + j, col * m + j);
                inv.swap(piv * m + j, col * m + j);
            }
        }
        let p = a[col * m + col];
        for j in 0..m {
            a[col * m + j] /= p;
            inv[col * m + j] /= p;
        }
        for i in 0..m {
            if i != col {
                let f = a[i * m + col];
                if f != 0.0 {
                    for j in 0..m {
                        a[i * m + j] -= f * a[col * m + j];
                        inv[i * m + j] -= f * inv[col * m + j];
                    }
                }
            }
        }
    }
    for i in 0..m {
        for j in 0..m {
            inv[i * m + j] *= stop[j];
        }
    }
    Ok(inv)
}

/// Transition from a node with slab `s`: sparse `(node, prob)` list.
fn kernel_row(
    x: &[f64],
    dual: &DualGrid,
    k: usize,
    slab: usize,
    from: usize,
    cache: &mut std::collections::HashMap<(usize, usize), Vec<f64>>,
) -> Result<Vec<(usize, f64)>> {
    let m = x.len();
    let pi = &dual.pi[k - 1][slab * m..(slab + 1) * m];
    let nu = &dual.nu[k - 1][slab * m..(slab + 1) * m];
    let sources = nu.iter().filter(|v| **v > 0.0).count();
    let raw: Vec<f64> = if sources <= 1 {
        pi.iter().map(|v| v.max(0.0)).collect()
    } else {
        let kernel = match cache.entry((k, slab)) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => {
                let rho = &dual.rho[k - 1][slab * m..(slab + 1) * m];
                e.insert(chain_kernel(x, pi, rho)?)
            }
        };
        kernel[from * m..(from + 1) * m].to_vec()
    };
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateDuals(format!(
            "no transition mass at step {k} from node {from}"
        )));
    }
    Ok(raw
        .iter()
        .enumerate()
        .map(|(j, v)| (j, v / total))
        .filter(|(_, p)| *p > KERNEL_PRUNE)
        .collect())
}

/// Builds a worst-case path measure from the row duals: window marginals
/// come from the terminal/recursion rows and, where a start distribution
/// is not a single node, the concavity duals give a martingale coupling.
pub fn extract_worst_case_measure(
    sol: &LPSolution,
    lp: &SparseLP,
    mesh: &Mesh,
    spec: &ValidatedSpec,
    cap: usize,
) -> Result<DiscreteMeasure> {
    sol.require_optimal()?;
    if lp.mesh_hash.as_deref() != Some(mesh.content_hash().as_str()) {
        return Err(Error::MeshMismatch);
    }
    let n = spec.horizon();
    let d = spec.memory();
    let m = mesh.len();
    let x = mesh.points();
    let shape = GridShape::new(m, d);
    let gamma = crate::lp::initial_weights(spec, mesh)?;
    if d >= 1 && gamma.len() > 1 {
        return Err(Error::HistoryOffGrid);
    }
    let dual = dual_grid(sol, lp, &shape, &gamma, n);
    let mass: f64 = dual.pi[0].iter().sum();
    if !(mass > 0.0) {
        return Err(Error::DegenerateDuals("first-step duals carry no mass".into()));
    }

    let zero = time_zero_offset(d);
    let history = &spec.history().values;
    let mut prefix = vec![0.0; zero + 1];
    for j in 0..=zero {
        prefix[zero - j] = history[j];
    }

    // frontier: (node indices X_1..X_k, window cell at k, weight)
    struct State {
        nodes: Vec<usize>,
        cell: usize,
        weight: f64,
    }
    let mut frontier: Vec<State> = gamma
        .iter()
        .map(|&(c, w)| State {
            nodes: Vec::new(),
            cell: c,
            weight: w,
        })
        .collect();
    let mut cache = std::collections::HashMap::new();
    for k in 1..=n {
        let mut next = Vec::new();
        for st in &frontier {
            let slab = st.cell / m;
            let from = st.cell % m;
            for (j, p) in kernel_row(x, &dual, k, slab, from, &mut cache)? {
                let cell = j + m * slab;
                let mut nodes = st.nodes.clone();
                nodes.push(j);
                next.push(State {
                    nodes,
                    cell: if k < n { shape.shift(cell) } else { cell },
                    weight: st.weight * p,
                });
                if next.len() > cap {
                    return Err(Error::TooManyPaths {
                        paths: next.len(),
                        cap,
                    });
                }
            }
        }
        frontier = next;
    }
    let mut measure = DiscreteMeasure {
        paths: frontier
            .into_iter()
            .map(|st| {
                let mut path = prefix.clone();
                path.extend(st.nodes.iter().map(|&j| x[j]));
                WeightedPath {
                    path,
                    weight: st.weight,
                }
            })
            .collect(),
    };
    // merge duplicates only: an absolute cut would skew the conditional
    // means of low-mass prefixes
    measure.normalize(0.0);
    let total = measure.total_mass();
    for p in &mut measure.paths {
        p.weight /= total;
    }
    Ok(measure)
}

/// Compact, JSON-safe view of a [`FeasibilityReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSummary {
    pub atoms: usize,
    pub martingale_residual: f64,
    /// `None` when there are no constraints.
    pub min_slack: Option<f64>,
    pub normalization_error: f64,
    pub objective: f64,
    pub feasible: bool,
}

impl MeasureSummary {
    pub fn new(measure: &DiscreteMeasure, rep: &FeasibilityReport, tol: f64, spot: f64) -> Self {
        Self {
            atoms: measure.paths.len(),
            martingale_residual: rep.martingale_residual,
            min_slack: rep.min_slack.is_finite().then_some(rep.min_slack),
            normalization_error: rep.normalization_error,
            objective: rep.objective,
            feasible: rep.is_feasible(tol, spot),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub certificate: CertificateReport,
    pub measure: Option<MeasureSummary>,
    pub solver_info: String,
    /// Human-readable notes, e.g. why no measure was extracted.
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub side: Side,
    pub bound_value: f64,
    pub hedges: HedgeTable,
    pub worst_case: Option<DiscreteMeasure>,
    pub diagnostics: Diagnostics,
    /// `sqrt(bound / T_n)` for variance-type payoffs.
    pub annualized_vol: Option<f64>,
}

/// Whether the objective is a sum of log-return legs, so that the bound
/// reads as a variance.
pub fn is_variance_type(spec: &ValidatedSpec) -> bool {
    let kinds: Vec<&PayoffKind> = spec.spec().objectives.iter().map(|o| &o.kind).collect();
    kinds.iter().all(|k| {
        matches!(
            k,
            PayoffKind::Zero | PayoffKind::VarianceLeg | PayoffKind::NegLogContract { .. }
        )
    }) && kinds.iter().any(|k| !matches!(k, PayoffKind::Zero))
}

pub fn annualized_vol(spec: &ValidatedSpec, bound: f64) -> Option<f64> {
    let t = spec.spec().time_grid.time(spec.horizon() as isize);
    (is_variance_type(spec) && bound >= 0.0 && t > 0.0).then(|| (bound / t).sqrt())
}

/// Assembles a report; the measure is extracted and audited when possible,
/// and the reason is recorded otherwise.
pub fn build_report(
    sol: &LPSolution,
    lp: &SparseLP,
    mesh: &Mesh,
    spec: &ValidatedSpec,
    certificate: CertificateReport,
    measure_cap: usize,
) -> Result<BoundReport> {
    sol.require_optimal()?;
    let bound_value = spec.side().sign() * sol.objective;
    let hedges = extract_hedges(sol, lp, spec)?;
    let mut notes = Vec::new();
    let (worst_case, summary) = match extract_worst_case_measure(sol, lp, mesh, spec, measure_cap) {
        Ok(m) => {
            let rep = check_measure_on(&m, spec, Some(mesh));
            let s = MeasureSummary::new(&m, &rep, 1e-6, spec.history().spot());
            (Some(m), Some(s))
        }
        Err(e) => {
            notes.push(format!("worst-case measure not extracted: {e}"));
            (None, None)
        }
    };
    Ok(BoundReport {
        side: spec.side(),
        bound_value,
        hedges,
        worst_case,
        diagnostics: Diagnostics {
            certificate,
            measure: summary,
            solver_info: sol.info.clone(),
            notes,
        },
        annualized_vol: annualized_vol(spec, bound_value),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
    Table,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "table" | "text-table" => Ok(Self::Table),
            other => Err(Error::Config(format!("unknown report format {other:?}"))),
        }
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Json => "json",
            Self::Csv => "csv",
            Self::Table => "txt",
        }
    }
}

/// CSV hedge table `expiry_index,strike,net_position`.
pub fn hedges_to_csv(table: &HedgeTable) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["expiry_index", "strike", "net_position"])?;
    for r in &table.rows {
        w.write_record([
            r.expiry_index.to_string(),
            r.strike.to_string(),
            r.net_position.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Positions with strikes as columns and one row per expiry.
pub fn render_table(report: &BoundReport) -> String {
    let mut out = String::new();
    let side = match report.side {
        Side::Upper => "upper (super-replication)",
        Side::Lower => "lower (sub-replication)",
    };
    let _ = writeln!(out, "{side} bound: {:.4}", report.bound_value);
    if let Some(v) = report.annualized_vol {
        let _ = writeln!(out, "annualized volatility: {:.2}%", 100.0 * v);
    }
    let t = &report.hedges;
    if !t.is_empty() {
        let mut strikes: Vec<f64> = t.rows.iter().map(|r| r.strike).collect();
        strikes.sort_by(f64::total_cmp);
        strikes.dedup();
        let _ = write!(out, "{:<22}", "strike");
        for s in &strikes {
            let _ = write!(out, "{s:>10}");
        }
        out.push('\n');
        for k in t.expiries() {
            let time = t.rows.iter().find(|r| r.expiry_index == k).unwrap().expiry_time;
            let _ = write!(out, "{:<22}", format!("λ_{k} (T = {time:.4})"));
            for s in &strikes {
                match t.get(k, *s) {
                    Some(r) => {
                        let _ = write!(out, "{:>10.4}", if r.net_position.abs() < 5e-5 { 0.0 } else { r.net_position });
                    }
                    None => {
                        let _ = write!(out, "{:>10}", "-");
                    }
                }
            }
            out.push('\n');
        }
    }
    let c = &report.diagnostics.certificate;
    let _ = writeln!(
        out,
        "certificate: {} (gap {:.1e}, primal residual {:.1e})",
        if c.passed() { "pass" } else { "FAIL" },
        c.gap.value,
        c.primal_residual.value
    );
    if let Some(m) = &report.diagnostics.measure {
        let _ = writeln!(
            out,
            "worst-case measure: {} paths, martingale residual {:.1e}, objective {:.6}",
            m.atoms, m.martingale_residual, m.objective
        );
    }
    for note in &report.diagnostics.notes {
        let _ = writeln!(out, "note: {note}");
    }
    out
}

pub fn render(report: &BoundReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        ReportFormat::Csv => hedges_to_csv(&report.hedges),
        ReportFormat::Table => Ok(render_table(report)),
    }
}

pub fn emit_report(report: &BoundReport, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, render(report, format)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::measure::check_measure;
    use crate::lp::{build_dual_lp, BuildOptions};
    use crate::market::synthesize_quotes;
    use crate::payoffs::ConstraintBlock;
    use crate::problem::{InitialHistory, ProblemSpec, StateDomain, TimeGrid};
    use crate::solver::{certify, HighsSolver, LpSolver, SolverConfig};

    fn solve(spec: &ValidatedSpec, mesh: &Mesh) -> (SparseLP, LPSolution) {
        let lp = build_dual_lp(spec, mesh, &BuildOptions::default()).unwrap();
        let sol = HighsSolver::new().solve(&lp, &SolverConfig::default()).unwrap();
        (lp, sol)
    }

    fn unconstrained(objectives: Vec<PayoffKind>, memory: usize, x0: f64, mesh: &Mesh) -> ValidatedSpec {
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
            side: Side::Upper,
        }
        .validate(Some(mesh))
        .unwrap()
    }

    #[test]
    fn forward_start_splits_to_the_ends() {
        let mesh = Mesh::new(vec![0.0, 100.0, 200.0]).unwrap();
        let spec = unconstrained(vec![PayoffKind::Zero, PayoffKind::ForwardStartCall], 1, 100.0, &mesh);
        let (lp, sol) = solve(&spec, &mesh);
        let m = extract_worst_case_measure(&sol, &lp, &mesh, &spec, DEFAULT_MEASURE_CAP).unwrap();
        let rep = check_measure(&m, &spec);
        assert!(rep.martingale_residual < 1e-9);
        assert!((rep.objective - 50.0).abs() < 1e-9);
        // the mass ending at the initial level is either absent or worthless
        let on_ends: f64 = m
            .paths
            .iter()
            .filter(|p| p.path[2] == 0.0 || p.path[2] == 200.0)
            .map(|p| p.weight)
            .sum();
        assert!(on_ends > 0.5 - 1e-9);
    }

    #[test]
    fn affine_objective_gives_a_valid_measure() {
        let mesh = Mesh::new(vec![0.0, 40.0, 100.0, 130.0, 250.0]).unwrap();
        let spec = unconstrained(
            vec![
                PayoffKind::Affine {
                    intercept: 1.0,
                    slopes: vec![0.5],
                };
                3
            ],
            0,
            100.0,
            &mesh,
        );
        let (lp, sol) = solve(&spec, &mesh);
        let m = extract_worst_case_measure(&sol, &lp, &mesh, &spec, DEFAULT_MEASURE_CAP).unwrap();
        let rep = check_measure(&m, &spec);
        assert!(rep.martingale_residual < 1e-9);
        assert!((rep.objective - 153.0).abs() < 1e-9);
    }

    #[test]
    fn chain_kernel_is_a_martingale_coupling() {
        // ν = δ_1 + δ_3 halves, π spreads: the chain must reproduce π
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let nu = [0.0, 0.5, 0.0, 0.5, 0.0];
        // split half of the mass at 1 and all of the mass at 3
        let rho = [0.0, 0.125, 0.0, 0.25, 0.0];
        let pi = [0.125, 0.25, 0.125 + 0.25, 0.0, 0.25];
        let k = chain_kernel(&x, &pi, &rho).unwrap();
        for (i, &w) in nu.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let row = &k[i * 5..(i + 1) * 5];
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let mean: f64 = row.iter().zip(&x).map(|(p, y)| p * y).sum();
            assert!((mean - x[i]).abs() < 1e-12);
        }
        for j in 0..5 {
            let got: f64 = (0..5).map(|i| nu[i] * k[i * 5 + j]).sum();
            assert!((got - pi[j]).abs() < 1e-12, "node {j}: {got} vs {}", pi[j]);
        }
    }

    fn two_step_quoted(side: Side, mesh: &Mesh) -> ValidatedSpec {
        let quotes = synthesize_quotes(
            100.0,
            0.2,
            &[(1, 1.0 / 6.0), (2, 5.0 / 12.0)],
            &[90.0, 100.0, 110.0],
            0.0,
        )
        .unwrap();
        ProblemSpec {
            time_grid: TimeGrid::from_monitoring(&[1.0 / 6.0, 5.0 / 12.0], 0).unwrap(),
            domain: StateDomain::positive(),
            history: InitialHistory {
                values: vec![100.0],
            },
            objectives: vec![
                PayoffKind::Zero.into(),
                PayoffKind::NegLogContract {
                    scale: 2.0,
                    reference: 100.0,
                }
                .into(),
            ],
            constraints: quotes.blocks(2).unwrap(),
            side,
        }
        .validate(Some(mesh))
        .unwrap()
    }

    #[test]
    fn report_round_trip_and_formats() {
        let mesh = Mesh::new((1..=40).map(|i| 5.0 * i as f64).collect()).unwrap();
        for side in [Side::Upper, Side::Lower] {
            let spec = two_step_quoted(side, &mesh);
            let (lp, sol) = solve(&spec, &mesh);
            let cert = certify(&lp, &sol, 1e-8);
            assert!(cert.passed(), "{:?}", cert.failures());
            let rep = build_report(&sol, &lp, &mesh, &spec, cert, DEFAULT_MEASURE_CAP).unwrap();
            assert_eq!(rep.hedges.rows.len(), 6);
            for r in &rep.hedges.rows {
                assert!(r.net_position.abs() <= r.bid_weight + r.ask_weight + 1e-12);
            }
            let ms = rep.diagnostics.measure.as_ref().expect("measure extracted");
            assert!(ms.feasible, "{ms:?}");
            assert!((ms.objective - rep.bound_value).abs() <= 1e-6 * rep.bound_value.abs().max(1.0));
            assert!(rep.annualized_vol.is_some());

            let json = render(&rep, ReportFormat::Json).unwrap();
            let back: BoundReport = serde_json::from_str(&json).unwrap();
            assert_eq!(back, rep);
            let csv = render(&rep, ReportFormat::Csv).unwrap();
            assert_eq!(csv.lines().count(), 7);
            assert!(csv.starts_with("expiry_index,strike,net_position\n"));
            let table = render(&rep, ReportFormat::Table).unwrap();
            assert!(table.contains("λ_1") && table.contains("λ_2"));
        }
    }

    #[test]
    fn empty_hedge_table() {
        let mesh = Mesh::new(vec![0.0, 100.0, 200.0]).unwrap();
        let spec = unconstrained(vec![PayoffKind::Zero, PayoffKind::ForwardStartCall], 1, 100.0, &mesh);
        let (lp, sol) = solve(&spec, &mesh);
        let cert = certify(&lp, &sol, 1e-8);
        let rep = build_report(&sol, &lp, &mesh, &spec, cert, DEFAULT_MEASURE_CAP).unwrap();
        assert!(rep.hedges.is_empty());
        assert!(rep.worst_case.is_some());
        assert_eq!(hedges_to_csv(&rep.hedges).unwrap(), "expiry_index,strike,net_position\n");
        assert!((rep.bound_value - 50.0).abs() < 1e-9);
    }

    #[test]
    fn non_optimal_is_rejected() {
        let mesh = Mesh::new(vec![0.0, 100.0, 200.0]).unwrap();
        let spec = unconstrained(vec![PayoffKind::ForwardStartCall], 1, 100.0, &mesh);
        let lp = build_dual_lp(&spec, &mesh, &BuildOptions::default()).unwrap();
        let sol = LPSolution::failed(crate::solver::SolveStatus::IterLimit, "");
        assert!(matches!(
            extract_hedges(&sol, &lp, &spec),
            Err(Error::StatusNotOptimal(_))
        ));
    }
}
