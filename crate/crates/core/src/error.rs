use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("grid spacing {spacing:.3e} exceeds resolution bound {bound:.3e} ({points_per_wavelength} points per edge wavelength)")]
    Resolution {
        spacing: f64,
        bound: f64,
        points_per_wavelength: u32,
    },

    #[error("solution exceeded amplitude cap at x = {x:.6}")]
    Overflow { x: f64 },

    #[error("integrator step size underflow at x = {x:.6}")]
    StepUnderflow { x: f64 },

    #[error("non-finite value encountered at x = {x:.6}")]
    NonFinite { x: f64 },

    #[error("series start radius {epsilon:.3e} too large: truncation estimate {estimate:.3e}")]
    SeriesTruncation { epsilon: f64, estimate: f64 },

    #[error("grid too coarse: second-difference error estimate {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    GridTooCoarse { estimate: f64, tolerance: f64 },

    #[error("constraint not satisfied: {0}")]
    Constraint(String),

    #[error("fit window too short: {oscillations:.2} oscillations (need at least 3)")]
    WindowTooShort { oscillations: f64 },

    #[error("fit window [{inner}, {outer}] is outside the oscillatory tail")]
    WindowOutsideTail { inner: f64, outer: f64 },

    #[error("fit did not converge after {iterations} iterations (best residual {residual:.3e})")]
    FitDiverged { iterations: usize, residual: f64 },

    #[error("solve failed at E = {energy}: {source}")]
    ScanPoint {
        energy: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("time-stepping scheme failure at t = {t:.4}: {reason}")]
    SchemeFailure { t: f64, reason: String },

    #[error("no upper bracket: every rung is non-collapsing (largest tested N = {largest_norm:.4})")]
    NoUpperBracket { largest_norm: f64 },

    #[error("no lower bracket: every rung collapses (smallest tested N = {smallest_norm:.4})")]
    NoLowerBracket { smallest_norm: f64 },

    #[error("non-monotone verdicts across amplitude ladder: {table}")]
    NonMonotone { table: String },

    #[error("target norm {target} not reachable in amplitude range [{low}, {high}]")]
    NormTargetUnreachable { target: f64, low: f64, high: f64 },
}
