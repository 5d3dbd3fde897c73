//! JSON run configuration with top-level sections `spec`, `mesh`, `quotes`,
//! `solver` and `output`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{load_quotes_csv, synthesize_quotes, QuoteSet};
use crate::mesh::{Mesh, GradedMeshParams};
use crate::payoffs::PayoffDescriptor;
use crate::problem::{InitialHistory, ProblemSpec, Side, StateDomain, TimeGrid};
use crate::report::ReportFormat;
use crate::solver::{DecompositionConfig, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub spec: SpecSection,
    pub mesh: MeshSection,
    #[serde(default)]
    pub quotes: QuoteSource,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Monitoring dates after zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Monitoring {
    Explicit(Vec<f64>),
    /// `T_k = k / per_year` for `k = 1..=count`.
    Uniform { count: usize, per_year: f64 },
}

impl Monitoring {
    pub fn times(&self) -> Vec<f64> {
        match self {
            Self::Explicit(t) => t.clone(),
            Self::Uniform { count, per_year } => {
                (1..=*count).map(|k| k as f64 / per_year).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Objectives {
    /// One payoff per monitoring date.
    List(Vec<PayoffDescriptor>),
    /// The same payoff at every date except the listed ones.
    Pattern {
        default: PayoffDescriptor,
        /// Keyed by monitoring index `k`; JSON object keys are strings.
        #[serde(default)]
        overrides: BTreeMap<String, PayoffDescriptor>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecSection {
    #[serde(default)]
    pub name: Option<String>,
    pub monitoring: Monitoring,
    #[serde(default)]
    pub memory: usize,
    /// Pre-zero dates; defaults to one unit spacing.
    #[serde(default)]
    pub pre_times: Option<Vec<f64>>,
    pub domain: StateDomain,
    /// `x_0, x_{-1}, ...`
    pub history: Vec<f64>,
    pub objectives: Objectives,
}

impl SpecSection {
    pub fn time_grid(&self) -> Result<TimeGrid> {
        let after = self.monitoring.times();
        match &self.pre_times {
            None => TimeGrid::from_monitoring(&after, self.memory),
            Some(pre) => {
                let mut times = pre.clone();
                times.push(0.0);
                times.extend(after);
                TimeGrid::new(times, self.memory)
            }
        }
    }

    pub fn objectives(&self, n: usize) -> Result<Vec<PayoffDescriptor>> {
        match &self.objectives {
            Objectives::List(v) => Ok(v.clone()),
            Objectives::Pattern { default, overrides } => {
                let mut out = vec![default.clone(); n];
                for (key, payoff) in overrides {
                    match key.parse::<usize>() {
                        Ok(k) if (1..=n).contains(&k) => out[k - 1] = payoff.clone(),
                        _ => {
                            return Err(Error::Config(format!(
                                "objective override key {key:?} is not an index in 1..={n}"
                            )))
                        }
                    }
                }
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSection {
    /// Coarse wings around a dense centre plus a far cap node.
    Graded(GradedMeshParams),
    Nodes(Vec<f64>),
}

impl MeshSection {
    /// Builds the mesh; `scale` refines (`> 1`) or coarsens (`< 1`) the
    /// parametric family and must be 1 for explicit nodes.
    pub fn build(&self, scale: f64) -> Result<Mesh> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!("mesh scale must be positive, got {scale}")));
        }
        match self {
            Self::Graded(p) => p.scaled(scale).build(),
            Self::Nodes(v) => {
                if scale != 1.0 {
                    return Err(Error::Config("mesh scale applies only to parametric meshes".into()));
                }
                Mesh::new(v.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Strikes {
    List(Vec<f64>),
    Range { from: f64, to: f64, step: f64 },
}

impl Strikes {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            Self::List(v) => Ok(v.clone()),
            Self::Range { from, to, step } => {
                if !(*step > 0.0) || to < from {
                    return Err(Error::Config(format!("bad strike range {from}..{to} step {step}")));
                }
                let count = ((to - from) / step + 1e-9).floor() as usize;
                Ok((0..=count).map(|i| from + i as f64 * step).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthQuotes {
    /// Defaults to `x_0`.
    #[serde(default)]
    pub spot: Option<f64>,
    pub vol: f64,
    /// Monitoring indices `k` carrying quotes; expiry times come from the grid.
    pub expiries: Vec<usize>,
    pub strikes: Strikes,
    #[serde(default)]
    pub half_spread: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuoteSource {
    #[default]
    None,
    Synth(SynthQuotes),
    Csv(PathBuf),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Sparse simplex for small grids, decomposition above the threshold.
    #[default]
    Auto,
    Highs,
    Decomposition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub backend: Backend,
    /// Variable count above which `auto` switches to decomposition.
    pub auto_threshold: usize,
    pub highs: SolverConfig,
    pub decomposition: DecompositionConfig,
    /// Tolerance of the certificate audit.
    pub certify_tol: f64,
    /// Grid cells per time step before the builder refuses.
    pub cell_cap: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            backend: Backend::Auto,
            auto_threshold: 150_000,
            highs: SolverConfig::default(),
            decomposition: DecompositionConfig::default(),
            certify_tol: 1e-8,
            cell_cap: crate::lp::DEFAULT_CELL_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sides {
    Upper,
    Lower,
    #[default]
    Both,
}

impl Sides {
    pub fn list(self) -> Vec<Side> {
        match self {
            Self::Upper => vec![Side::Upper],
            Self::Lower => vec![Side::Lower],
            Self::Both => vec![Side::Lower, Side::Upper],
        }
    }
}

impl std::str::FromStr for Sides {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upper" => Ok(Self::Upper),
            "lower" => Ok(Self::Lower),
            "both" => Ok(Self::Both),
            other => Err(Error::Config(format!("unknown side {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub enabled: bool,
    /// Path cap of the brute-force program.
    pub path_cap: usize,
    /// Mesh used by `verify`; defaults to the run mesh.
    pub verify_mesh: Option<MeshSection>,
    /// Relative tolerance for oracle agreement.
    pub tol: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            enabled: false,
            path_cap: 20_000,
            verify_mesh: None,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub format: ReportFormat,
    pub dir: Option<PathBuf>,
    pub sides: Sides,
    /// Where `quotes-synth` writes the quote CSV (relative to `dir`).
    pub quotes_csv: String,
    /// Atom cap for the worst-case measure.
    pub measure_cap: usize,
    pub oracle: OracleSection,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            format: ReportFormat::Table,
            dir: None,
            sides: Sides::Both,
            quotes_csv: "quotes.csv".into(),
            measure_cap: crate::report::DEFAULT_MEASURE_CAP,
            oracle: OracleSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads a config; relative CSV paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let QuoteSource::Csv(p) = &mut cfg.quotes {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Quote set for this run (empty when there is no source).
    pub fn quote_set(&self) -> Result<QuoteSet> {
        match &self.quotes {
            QuoteSource::None => Ok(QuoteSet::new(self.spec.history.first().copied())),
            QuoteSource::Csv(p) => load_quotes_csv(p),
            QuoteSource::Synth(s) => {
                let grid = self.spec.time_grid()?;
                let n = grid.horizon();
                let spot = match s.spot.or(self.spec.history.first().copied()) {
                    Some(v) => v,
                    None => return Err(Error::Config("no spot for quote synthesis".into())),
                };
                let mut expiries = Vec::with_capacity(s.expiries.len());
                for &k in &s.expiries {
                    if k == 0 || k > n {
                        return Err(Error::Config(format!("quote expiry index {k} outside 1..={n}")));
                    }
                    expiries.push((k, grid.time(k as isize)));
                }
                synthesize_quotes(spot, s.vol, &expiries, &s.strikes.values()?, s.half_spread)
            }
        }
    }

    /// Unvalidated problem for `side`, with constraints from `quotes`.
    pub fn problem(&self, quotes: &QuoteSet, side: Side) -> Result<ProblemSpec> {
        let time_grid = self.spec.time_grid()?;
        let n = time_grid.horizon();
        Ok(ProblemSpec {
            objectives: self.spec.objectives(n)?,
            constraints: quotes.blocks(n)?,
            time_grid,
            domain: self.spec.domain,
            history: InitialHistory {
                values: self.spec.history.clone(),
            },
            side,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoffs::PayoffKind;

    const FORWARD: &str = r#"{
        "spec": {
            "monitoring": [0.16666666666666666, 0.4166666666666667],
            "memory": 1,
            "domain": {"lower": 0.0},
            "history": [100.0],
            "objectives": [{"kind": "zero"}, {"kind": "forward_start_call"}]
        },
        "mesh": {"nodes": [0, 50, 70, 80, 90, 100, 110, 120, 130, 200, 10000]},
        "quotes": {"synth": {"vol": 0.2, "expiries": [1, 2], "strikes": {"from": 70, "to": 130, "step": 10}}}
    }"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = RunConfig::from_json(FORWARD).unwrap();
        assert_eq!(cfg.solver, SolverSection::default());
        assert_eq!(cfg.output.sides, Sides::Both);
        let q = cfg.quote_set().unwrap();
        assert_eq!(q.len(), 14);
        let spec = cfg.problem(&q, Side::Upper).unwrap();
        let mesh = cfg.mesh.build(1.0).unwrap();
        let v = spec.validate(Some(&mesh)).unwrap();
        assert_eq!(v.horizon(), 2);
        assert_eq!(v.constraint_dimension(), 28);
        let back = RunConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn pattern_objectives_and_uniform_times() {
        let text = r#"{
            "spec": {
                "monitoring": {"count": 5, "per_year": 240},
                "memory": 1,
                "domain": {"lower": 0.0, "open_lower": true},
                "history": [100.0],
                "objectives": {"default": {"kind": "gamma_leg"}, "overrides": {"2": {"kind": "zero"}}}
            },
            "mesh": {"graded": {"center": 100, "dense_lo": 70, "dense_hi": 130, "dense_step": 1,
                               "coarse_step": 10, "tail_lo": 1, "cap": 10000}}
        }"#;
        let cfg = RunConfig::from_json(text).unwrap();
        let obj = cfg.spec.objectives(5).unwrap();
        assert_eq!(obj[1].kind, PayoffKind::Zero);
        assert_eq!(obj[4].kind, PayoffKind::GammaLeg);
        assert_eq!(cfg.spec.time_grid().unwrap().time(5), 5.0 / 240.0);
        assert!(cfg.mesh.build(0.5).unwrap().len() < cfg.mesh.build(1.0).unwrap().len());
        assert!(cfg.quote_set().unwrap().is_empty());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_scale() {
        let bad = FORWARD.replace("\"memory\"", "\"memroy\"");
        assert!(matches!(RunConfig::from_json(&bad), Err(Error::Config(_))));
        let cfg = RunConfig::from_json(FORWARD).unwrap();
        assert!(cfg.mesh.build(0.5).is_err());
        assert!(cfg.mesh.build(-1.0).is_err());
    }
}
