//! Finitely supported path measures and their feasibility audit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::payoffs::{PayoffDescriptor, PayoffKind};
use crate::problem::ValidatedSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPath {
    /// Values at times `min(0, 1-d) ..= n`.
    pub path: Vec<f64>,
    pub weight: f64,
}

/// A measure on price paths given as weighted atoms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DiscreteMeasure {
    pub paths: Vec<WeightedPath>,
}

/// Index of time 0 inside a path for memory depth `d`.
pub fn time_zero_offset(memory: usize) -> usize {
    memory.saturating_sub(1)
}

impl DiscreteMeasure {
    /// A single path holding the initial value forever.
    pub fn constant_path(spec: &ValidatedSpec) -> Self {
        let n = spec.horizon();
        let d = spec.memory();
        let h = &spec.history().values;
        let mut path: Vec<f64> = h.iter().take(d.max(1)).rev().cloned().collect();
        path.extend(std::iter::repeat_n(h[0], n));
        Self {
            paths: vec![WeightedPath { path, weight: 1.0 }],
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.paths.iter().map(|p| p.weight).sum()
    }

    /// Merges identical paths and drops atoms below `prune`, keeping a
    /// deterministic lexicographic order.
    pub fn normalize(&mut self, prune: f64) {
        self.paths
            .sort_by(|a, b| cmp_paths(&a.path, &b.path));
        let mut out: Vec<WeightedPath> = Vec::with_capacity(self.paths.len());
        for p in self.paths.drain(..) {
            match out.last_mut() {
                Some(last) if last.path == p.path => last.weight += p.weight,
                _ => out.push(p),
            }
        }
        out.retain(|p| p.weight > prune);
        self.paths = out;
    }

    /// Convex combination `Σ w_i · μ_i`.
    pub fn mixture(parts: &[(f64, &DiscreteMeasure)]) -> Self {
        let mut paths = Vec::new();
        for (w, m) in parts {
            for p in &m.paths {
                paths.push(WeightedPath {
                    path: p.path.clone(),
                    weight: w * p.weight,
                });
            }
        }
        Self { paths }
    }
}

fn cmp_paths(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// Largest `|E[X_{k+1} | path up to k] - X_k|` over prefixes with mass.
    pub martingale_residual: f64,
    /// `min_slacks[k-1][l] = E[g_{k,l}(X_k)]`.
    pub min_slacks: Vec<Vec<f64>>,
    /// Smallest entry of `min_slacks` (`+inf` without constraints).
    pub min_slack: f64,
    pub normalization_error: f64,
    pub most_negative_weight: f64,
    /// Largest deviation of the pre-initial coordinates from the history.
    pub history_error: f64,
    /// Number of atoms with a coordinate outside the state domain.
    pub outside_domain: usize,
    /// `E[Σ f_k]` with the payoffs as given (not sign-adjusted).
    pub objective: f64,
    /// Set when a payoff could not be evaluated on some atom.
    pub evaluation_error: Option<String>,
}

impl FeasibilityReport {
    /// Whether every check passes; the martingale residual is compared to
    /// `tol · spot`.
    pub fn is_feasible(&self, tol: f64, spot: f64) -> bool {
        self.martingale_residual <= tol * spot.abs().max(1.0)
            && self.min_slack >= -tol
            && self.normalization_error <= tol
            && self.most_negative_weight >= -tol
            && self.history_error <= tol * spot.abs().max(1.0)
            && self.outside_domain == 0
            && self.evaluation_error.is_none()
    }
}

/// Audits `measure` against the martingale, history, normalisation and quote
/// constraints of `spec`, and evaluates the objective.
pub fn check_measure(measure: &DiscreteMeasure, spec: &ValidatedSpec) -> FeasibilityReport {
    check_measure_on(measure, spec, None)
}

/// As [`check_measure`]; with a mesh, tabulated payoffs are evaluated on
/// paths whose windows lie on its nodes.
pub fn check_measure_on(measure: &DiscreteMeasure, spec: &ValidatedSpec, mesh: Option<&Mesh>) -> FeasibilityReport {
    let n = spec.horizon();
    let d = spec.memory();
    let zero = time_zero_offset(d);
    let len = zero + n + 1;
    let history = &spec.history().values;
    let domain = spec.spec().domain;

    let mut report = FeasibilityReport {
        martingale_residual: 0.0,
        min_slacks: (1..=n)
            .map(|k| vec![0.0; spec.constraints(k).dimension()])
            .collect(),
        min_slack: f64::INFINITY,
        normalization_error: (measure.total_mass() - 1.0).abs(),
        most_negative_weight: measure
            .paths
            .iter()
            .map(|p| p.weight)
            .fold(0.0, f64::min),
        history_error: 0.0,
        outside_domain: 0,
        objective: 0.0,
        evaluation_error: None,
    };

    let mut window = vec![0.0; d + 1];
    let mut gbuf = Vec::new();
    for p in &measure.paths {
        if p.path.len() != len {
            report.evaluation_error = Some(format!(
                "path of length {} where {len} values are expected",
                p.path.len()
            ));
            continue;
        }
        for (j, &h) in history.iter().enumerate().take(zero + 1) {
            report.history_error = report.history_error.max((p.path[zero - j] - h).abs());
        }
        if p.path[zero + 1..].iter().any(|&x| !domain.contains(x)) {
            report.outside_domain += 1;
        }
        let mut total = 0.0;
        for k in 1..=n {
            for (c, w) in window.iter_mut().enumerate() {
                // time k - c lives at index zero + k - c
                *w = p.path[zero + k - c];
            }
            match eval_payoff(&spec.spec().objectives[k - 1], &window, mesh) {
                Ok(v) => total += v,
                Err(e) => report.evaluation_error = Some(e.to_string()),
            }
            let block = spec.constraints(k);
            gbuf.resize(block.dimension(), 0.0);
            block.fill(window[0], &mut gbuf);
            for (s, g) in report.min_slacks[k - 1].iter_mut().zip(&gbuf) {
                *s += p.weight * g;
            }
        }
        report.objective += p.weight * total;
    }
    report.min_slack = report
        .min_slacks
        .iter()
        .flatten()
        .cloned()
        .fold(f64::INFINITY, f64::min);

    // conditional increments along sorted prefixes
    let mut order: Vec<&WeightedPath> = measure
        .paths
        .iter()
        .filter(|p| p.path.len() == len)
        .collect();
    order.sort_by(|a, b| cmp_paths(&a.path, &b.path));
    for t in zero..zero + n {
        let mut i = 0;
        while i < order.len() {
            let prefix = &order[i].path[..=t];
            let mut mass = 0.0;
            let mut drift = 0.0;
            let mut j = i;
            while j < order.len() && order[j].path[..=t] == *prefix {
                mass += order[j].weight;
                drift += order[j].weight * (order[j].path[t + 1] - order[j].path[t]);
                j += 1;
            }
            if mass > 0.0 {
                report.martingale_residual = report.martingale_residual.max((drift / mass).abs());
            }
            i = j;
        }
    }
    report
}

fn eval_payoff(payoff: &PayoffDescriptor, window: &[f64], mesh: Option<&Mesh>) -> Result<f64> {
    match (mesh, &payoff.kind) {
        (Some(mesh), PayoffKind::Table { .. }) => {
            let index = window
                .iter()
                .map(|&x| {
                    mesh.node_index(x)
                        .ok_or_else(|| Error::DomainError(format!("{x} is not a mesh node")))
                })
                .collect::<Result<Vec<_>>>()?;
            payoff.eval_on_grid(mesh, &index)
        }
        _ => payoff.eval(window),
    }
}

/// Checks a report against an LP bound: the measure must be feasible and
/// its objective must not beat the bound (weak duality), for the side the
/// bound was computed on.
pub fn respects_bound(report: &FeasibilityReport, bound: f64, upper: bool, tol: f64) -> bool {
    if upper {
        report.objective <= bound + tol * bound.abs().max(1.0)
    } else {
        report.objective >= bound - tol * bound.abs().max(1.0)
    }
}

/// Serialises a measure to pretty JSON.
pub fn measure_to_json(measure: &DiscreteMeasure) -> Result<String> {
    Ok(serde_json::to_string_pretty(measure)?)
}
