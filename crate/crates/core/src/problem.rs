//! Problem instances: monitoring times, state domain, initial history,
//! payoffs and quote constraints, plus validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::payoffs::{AffineWitness, ConstraintBlock, PayoffDescriptor};

/// Absolute tolerance for validation comparisons, relative to the mesh scale.
pub const VALIDATION_TOL: f64 = 1e-9;

/// `T_{1-d} < ... < T_0 = 0 < T_1 < ... < T_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub times: Vec<f64>,
    pub memory: usize,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>, memory: usize) -> Result<Self> {
        let grid = Self { times, memory };
        grid.check()?;
        Ok(grid)
    }

    /// Grid for `n` monitoring dates after zero, with `memory` earlier dates
    /// spaced one unit apart before zero.
    pub fn from_monitoring(after_zero: &[f64], memory: usize) -> Result<Self> {
        let mut times: Vec<f64> = (1..=memory).rev().map(|j| -(j as f64)).collect();
        times.push(0.0);
        times.extend_from_slice(after_zero);
        Self::new(times, memory)
    }

    fn check(&self) -> Result<()> {
        if self.times.len() < self.memory + 2 {
            return Err(Error::EmptyTimes(format!(
                "{} times for memory depth {}: need at least one monitoring date",
                self.times.len(),
                self.memory
            )));
        }
        if self.times[self.memory] != 0.0 {
            return Err(Error::EmptyTimes(format!(
                "time at position {} must be 0, got {}",
                self.memory, self.times[self.memory]
            )));
        }
        if self.times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::EmptyTimes("times must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.times.len() - self.memory - 1
    }

    /// `T_k` for `k` in `1 - d ..= n`.
    pub fn time(&self, k: isize) -> f64 {
        self.times[(k + self.memory as isize) as usize]
    }
}

/// Convex state set `C`; `None` ends are unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateDomain {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    #[serde(default)]
    pub open_lower: bool,
    #[serde(default)]
    pub open_upper: bool,
}

impl StateDomain {
    pub fn closed(lower: f64, upper: f64) -> Self {
        Self {
            lower: Some(lower),
            upper: Some(upper),
            open_lower: false,
            open_upper: false,
        }
    }

    pub fn non_negative() -> Self {
        Self {
            lower: Some(0.0),
            upper: None,
            open_lower: false,
            open_upper: true,
        }
    }

    pub fn positive() -> Self {
        Self {
            lower: Some(0.0),
            upper: None,
            open_lower: true,
            open_upper: true,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lower.unwrap_or(f64::NEG_INFINITY)
    }

    pub fn hi(&self) -> f64 {
        self.upper.unwrap_or(f64::INFINITY)
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = match self.lower {
            None => true,
            Some(l) if self.open_lower => x > l,
            Some(l) => x >= l,
        };
        let below = match self.upper {
            None => true,
            Some(u) if self.open_upper => x < u,
            Some(u) => x <= u,
        };
        x.is_finite() && above && below
    }
}

/// `x_0, x_{-1}, ..., x_{1-d}`; a single value when `d = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InitialHistory {
    pub values: Vec<f64>,
}

impl InitialHistory {
    pub fn spot(&self) -> f64 {
        self.values[0]
    }

    /// The point `(x_0, x_0, x_{-1}, ..., x_{1-d})` at which the first value
    /// function is read.
    pub fn start_point(&self, memory: usize) -> Vec<f64> {
        let mut p = Vec::with_capacity(memory + 1);
        p.push(self.values[0]);
        p.extend(self.values.iter().take(memory));
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Upper,
    Lower,
}

impl Side {
    /// `+1` for upper bounds, `-1` for lower bounds.
    pub fn sign(self) -> f64 {
        match self {
            Side::Upper => 1.0,
            Side::Lower => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub time_grid: TimeGrid,
    pub domain: StateDomain,
    pub history: InitialHistory,
    pub objectives: Vec<PayoffDescriptor>,
    pub constraints: Vec<ConstraintBlock>,
    pub side: Side,
}

impl ProblemSpec {
    pub fn horizon(&self) -> usize {
        self.time_grid.horizon()
    }

    pub fn memory(&self) -> usize {
        self.time_grid.memory
    }

    pub fn with_side(mut self, side: Side) -> Self {
        self.side = side;
        self
    }

    /// Total number of constraint components `p`.
    pub fn constraint_dimension(&self) -> usize {
        self.constraints.iter().map(ConstraintBlock::dimension).sum()
    }

    /// Checks the instance. When a mesh is given, payoffs only need to be
    /// bounded on the mesh hull intersected with the domain.
    pub fn validate(self, mesh: Option<&Mesh>) -> Result<ValidatedSpec> {
        self.time_grid.check()?;
        let n = self.horizon();
        let d = self.memory();
        let hist_len = d.max(1);
        if self.history.values.len() != hist_len {
            return Err(Error::MismatchedLengths(format!(
                "history has {} values, memory depth {d} needs {hist_len}",
                self.history.values.len()
            )));
        }
        if !(self.domain.lo() < self.domain.hi()) {
            return Err(Error::DegenerateRange("state domain is empty".into()));
        }
        for &x in &self.history.values {
            if !self.domain.contains(x) {
                return Err(Error::HistoryOutsideDomain { value: x });
            }
        }
        if self.objectives.len() != n {
            return Err(Error::MismatchedLengths(format!(
                "{} objectives for horizon {n}",
                self.objectives.len()
            )));
        }
        if self.constraints.len() != n {
            return Err(Error::MismatchedLengths(format!(
                "{} constraint blocks for horizon {n}",
                self.constraints.len()
            )));
        }
        for (k, block) in self.constraints.iter().enumerate() {
            for q in &block.quotes {
                q.validate()?;
                if q.expiry_index != k + 1 {
                    return Err(Error::MismatchedLengths(format!(
                        "quote with expiry index {} stored in block {}",
                        q.expiry_index,
                        k + 1
                    )));
                }
                if let Some(mesh) = mesh {
                    if !mesh.contains(q.strike) {
                        return Err(Error::InvalidQuote(format!(
                            "strike {} outside mesh hull [{}, {}]",
                            q.strike,
                            mesh.lo(),
                            mesh.hi()
                        )));
                    }
                }
            }
        }
        for (k, obj) in self.objectives.iter().enumerate() {
            if let Some(w) = obj.min_window() {
                if w > d + 1 {
                    return Err(Error::MismatchedLengths(format!(
                        "objective {} reads {w} coordinates but memory depth is {d}",
                        k + 1
                    )));
                }
            }
        }

        let (mut lo, mut hi) = (self.domain.lo(), self.domain.hi());
        if let Some(mesh) = mesh {
            let tol = VALIDATION_TOL * mesh.lo().abs().max(mesh.hi().abs()).max(1.0);
            if mesh.lo() < lo - tol || mesh.hi() > hi + tol {
                return Err(Error::DegenerateRange(format!(
                    "mesh [{}, {}] leaves the state domain",
                    mesh.lo(),
                    mesh.hi()
                )));
            }
            for &x in &self.history.values {
                if x < mesh.lo() - tol || x > mesh.hi() + tol {
                    return Err(Error::HistoryOutsideHull {
                        value: x,
                        lo: mesh.lo(),
                        hi: mesh.hi(),
                    });
                }
            }
            lo = lo.max(mesh.lo());
            hi = hi.min(mesh.hi());
        }
        let bounded = lo.is_finite() && hi.is_finite();
        let side = self.side;
        let mut witnesses = Vec::with_capacity(n);
        for (k, obj) in self.objectives.iter().enumerate() {
            let effective = effective_payoff(obj, side);
            let w = effective.affine_witness(lo, hi, d + 1);
            if w.is_none() && !bounded {
                return Err(Error::UnboundedPayoffOnUnboundedMesh { index: k + 1 });
            }
            witnesses.push(w);
        }
        Ok(ValidatedSpec {
            spec: self,
            witnesses,
            effective_domain: (lo, hi),
        })
    }
}

fn effective_payoff(desc: &PayoffDescriptor, side: Side) -> PayoffDescriptor {
    match side {
        Side::Upper => desc.clone(),
        Side::Lower => desc.negated(),
    }
}

/// A checked instance with per-objective affine majorants where the payoff
/// kind provides one.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedSpec {
    spec: ProblemSpec,
    pub witnesses: Vec<Option<AffineWitness>>,
    /// Domain on which the witnesses hold: the state domain cut to the mesh.
    pub effective_domain: (f64, f64),
}

impl ValidatedSpec {
    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn into_inner(self) -> ProblemSpec {
        self.spec
    }

    pub fn horizon(&self) -> usize {
        self.spec.horizon()
    }

    pub fn memory(&self) -> usize {
        self.spec.memory()
    }

    pub fn side(&self) -> Side {
        self.spec.side
    }

    /// Objective `f_k` (1-based) as maximised, i.e. negated for lower bounds.
    pub fn objective(&self, k: usize) -> PayoffDescriptor {
        effective_payoff(&self.spec.objectives[k - 1], self.spec.side)
    }

    pub fn constraints(&self, k: usize) -> &ConstraintBlock {
        &self.spec.constraints[k - 1]
    }

    pub fn constraint_dimension(&self) -> usize {
        self.spec.constraint_dimension()
    }

    pub fn history(&self) -> &InitialHistory {
        &self.spec.history
    }
}
