use thiserror::Error;

/// Errors raised while validating, building, solving or reporting a bound.
#[derive(Debug, Error)]
pub enum Error {
    #[error("time grid is empty or has the wrong length: {0}")]
    EmptyTimes(String),
    #[error("initial history value {value} lies outside the state domain")]
    HistoryOutsideDomain { value: f64 },
    #[error("initial history value {value} lies outside the mesh hull [{lo}, {hi}]")]
    HistoryOutsideHull { value: f64, lo: f64, hi: f64 },
    #[error("length mismatch: {0}")]
    MismatchedLengths(String),
    #[error("payoff {index} has no affine upper bound on an unbounded domain")]
    UnboundedPayoffOnUnboundedMesh { index: usize },
    #[error("degenerate mesh range: {0}")]
    DegenerateRange(String),
    #[error("point coordinate {value} outside mesh hull [{lo}, {hi}]")]
    PointOutsideHull { value: f64, lo: f64, hi: f64 },
    #[error("index {index} is not an interior mesh index (m = {m})")]
    BoundaryIndex { index: usize, m: usize },
    #[error("payoff domain error: {0}")]
    DomainError(String),
    #[error("table payoff was sampled on mesh {expected}, evaluated on mesh {found}")]
    TableMeshMismatch { expected: String, found: String },
    #[error("invalid quote: {0}")]
    InvalidQuote(String),
    #[error("negative input to Black-Scholes: {0}")]
    NegativeInput(String),
    #[error("parse error on line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("crossed quote on line {line}: bid {bid} > ask {ask}")]
    CrossedQuote { line: usize, bid: f64, ask: f64 },
    #[error("grid of {cells} cells per time step exceeds the configured cap {cap}")]
    OverflowGuard { cells: usize, cap: usize },
    #[error("malformed LP: {0}")]
    WellFormedness(String),
    #[error("solution status is {0}, expected Optimal")]
    StatusNotOptimal(String),
    #[error("grid functions are defined on different meshes")]
    MeshMismatch,
    #[error("{paths} lattice paths exceed the cap {cap}")]
    TooManyPaths { paths: usize, cap: usize },
    #[error("no grid-supported martingale measure satisfies the constraints")]
    Infeasible,
    #[error("history must sit on mesh nodes for path-level measures when d >= 1")]
    HistoryOffGrid,
    #[error("dual multipliers do not assemble into a measure: {0}")]
    DegenerateDuals(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
