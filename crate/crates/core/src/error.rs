use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("measures live on different domains")]
    DomainMismatch,

    #[error("grid functions live on different grids")]
    GridMismatch,

    #[error("invalid atom at ({x}, {y}): {reason}")]
    InvalidAtom { x: f64, y: f64, reason: String },

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("negative input: {0}")]
    NegativeInput(String),

    #[error(
        "atom at ({x}, {y}) is closer than epsilon + 2h to the boundary (epsilon = {epsilon})"
    )]
    AtomNearBoundary { x: f64, y: f64, epsilon: f64 },

    #[error("mollifier width incompatible with grid: {0}")]
    WidthGrid(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("expected diffuse-only data, found {0} atom(s)")]
    NotDiffuse(usize),

    #[error("linear solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("nonlinear solve did not converge: {reason} (residual {residual:e})")]
    NonConvergence {
        reason: String,
        residual: f64,
        /// Last iterate, node values in row-major order.
        last_iterate: Vec<f64>,
    },

    #[error("system sweep {sweep}: {source}")]
    Sweep {
        sweep: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("block Gauss-Seidel did not converge after {sweeps} sweeps (L1 gap {gap:e})")]
    OuterNonConvergence { sweeps: usize, gap: f64 },

    #[error("contour of half-width {radius} around ({x}, {y}) leaves the domain interior")]
    ContourOutside { x: f64, y: f64, radius: f64 },

    #[error("probe {0} overlaps the exclusion zone of probe {1}")]
    ProbeOverlap(usize, usize),

    #[error("invalid probe: {0}")]
    InvalidProbe(String),

    #[error("nothing to run: {0}")]
    EmptySchedule(String),

    #[error("radial shooting did not converge: {0}")]
    Shooting(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("malformed grid file: {0}")]
    GridFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_sweep(self, sweep: usize) -> Self {
        Error::Sweep {
            sweep,
            source: Box::new(self),
        }
    }
}
