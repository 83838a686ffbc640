use thiserror::Error;

use crate::optimizer::MinimizeReport;
use crate::problem::Point;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({:.6}, {:.6}) is within {delta:e} of a fixed center", point.x, point.y)]
    Collision { point: Point, delta: f64 },

    #[error("degenerate configuration: r = 0 and z = 0")]
    Degenerate,

    #[error("odd-symmetry violation: {0}")]
    Symmetry(String),

    #[error("initializer produced an infeasible node at index {index}")]
    InfeasibleInit { index: usize },

    #[error("time {t} outside [-{horizon}, {horizon}]")]
    OutOfRange { t: f64, horizon: f64 },

    #[error("parameter out of range: {0}")]
    ParameterRange(String),

    #[error("line search stalled after {} iterations (grad norm {:e})", report.iterations, report.grad_norm)]
    Stalled { report: Box<MinimizeReport> },

    #[error("every trial step down to the floor enters a collision ball (iteration {})", report.iterations)]
    CollisionTrap { report: Box<MinimizeReport> },

    #[error("no convergence within {} iterations (grad norm {:e})", report.iterations, report.grad_norm)]
    MaxIters { report: Box<MinimizeReport> },

    #[error("window [{a}, {b}] exceeds the smallest horizon {horizon}")]
    Window { a: f64, b: f64, horizon: f64 },

    #[error("need at least {needed} rows, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("malformed trajectory file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Collision { .. } => "collision",
            Error::Degenerate => "degenerate",
            Error::Symmetry(_) => "symmetry",
            Error::InfeasibleInit { .. } => "infeasible_init",
            Error::OutOfRange { .. } => "out_of_range",
            Error::ParameterRange(_) => "parameter_range",
            Error::Stalled { .. } => "stalled",
            Error::CollisionTrap { .. } => "collision_trap",
            Error::MaxIters { .. } => "max_iters",
            Error::Window { .. } => "window",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }

    /// The last iterate of a failed minimization, if this error carries one.
    pub fn partial_report(&self) -> Option<&MinimizeReport> {
        match self {
            Error::Stalled { report } | Error::CollisionTrap { report } | Error::MaxIters { report } => Some(report),
            _ => None,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Format(format!("{other:?}")),
        }
    }
}
