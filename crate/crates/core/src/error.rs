use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("axis {axis} is out of range for a {dim}-axis grid")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("axis {axis} has {points} points but at least {required} are needed")]
    TooFewPoints {
        axis: usize,
        points: usize,
        required: usize,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("loop is not closed (first point differs from last)")]
    OpenLoop,
    #[error("loop step {step} does not join adjacent grid points")]
    LoopLeavesGrid { step: usize },
    #[error("kernel radius {radius} exceeds the usable extent {limit} on axis {axis}")]
    KernelTooWide { axis: usize, radius: f64, limit: f64 },
    #[error("support violation at point {index}: q = 0 where p > 0")]
    SupportViolation { index: usize },
    #[error("zero denominator: rho_next = {value:e} at the target point")]
    ZeroDenominator { value: f64 },
    #[error("linear solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolveDiverged { iterations: usize, residual: f64 },
    #[error("density is below the floor at loop point {index}")]
    NodeOnLoop { index: usize },
    #[error("superposition vanishes identically")]
    VanishingSuperposition,
    #[error("{terminated} of {total} trajectories terminated, above the configured limit")]
    TooManyTerminated { terminated: usize, total: usize },
    #[error("insufficient samples: {have} available, {need} required")]
    InsufficientSamples { have: usize, need: usize },
    #[error("noise is unavailable because eta = 0")]
    NoiseUnavailable,
    #[error("degenerate fit: {0}")]
    DegenerateFit(&'static str),
    #[error("non-positive input at index {0}")]
    NonPositiveInput(usize),
    #[error("empty sample set")]
    EmptySamples,
    #[error("step drives p[{index}] negative; retry with dlambda <= {suggested:e}")]
    NegativeProbability { index: usize, suggested: f64 },
    #[error("p[{index}] = {value:e} is at the floor")]
    ProbabilityAtFloor { index: usize, value: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("timeline spacing {found} does not match the step duration {expected}")]
    TimelineMismatch { expected: f64, found: f64 },
    #[error("zero norm")]
    ZeroNorm,
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
