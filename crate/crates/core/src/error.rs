use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum VortexError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("grid mismatch: {left} samples vs {right} samples")]
    GridMismatch { left: usize, right: usize },

    #[error("dimension mismatch: expected n = {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("consecutive loops {index} and {next} differ by {distance:.3e} in sup norm (threshold {threshold})")]
    HomotopyAmbiguity { index: usize, next: usize, distance: f64, threshold: f64 },

    #[error("path needs at least two loops, got {0}")]
    PathTooShort(usize),

    #[error("action period fit is not linear in the winding: relative residual {residual:.3e}")]
    NonlinearPeriod { residual: f64 },

    #[error("sector {m}:{k} has no zero of the moment map along the ray from the seed")]
    EmptySector { m: u32, k: u32 },

    #[error("critical refinement left gradient residual {residual:.3e}")]
    CriticalResidual { residual: f64 },

    #[error("spectral gap {gap:.3e} is not separated from rank tolerance {rank_tol:.3e}")]
    IllSeparatedSpectrum { gap: f64, rank_tol: f64 },

    #[error("flow diverged at t = {time:.4}: state norm {norm:.3e}")]
    FlowDiverged { time: f64, norm: f64 },

    #[error("step size {dt} exceeds the stability bound {bound:.3e}")]
    StepTooLarge { dt: f64, bound: f64 },

    #[error("action increased by {increase:.3e} at t = {time:.4}")]
    NonMonotoneAction { time: f64, increase: f64 },

    #[error("trajectory has not converged: final gradient norm {grad_norm:.3e}")]
    NotConverged { grad_norm: f64 },

    #[error("final state is {distance:.3e} from every resolved sector")]
    Unclassified { distance: f64 },

    #[error("decay fit needs {needed} tail samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },

    #[error("decay fit residual {residual:.3e} exceeds {limit}")]
    NotAsymptotic { residual: f64, limit: f64 },

    #[error("every sample fell under the 0/0 guard")]
    AllSamplesExcluded,

    #[error("empty sector {m}:{k} for the given weights")]
    EmptySectorQuery { m: u32, k: u32 },

    #[error("incompatible webs: {0}")]
    IncompatibleWebs(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, VortexError>;

pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> VortexError {
    VortexError::InvalidParameter { field: field.to_string(), reason: reason.into() }
}

impl VortexError {
    /// Stable snake-case name of the variant.
    pub fn kind(&self) -> &'static str {
        use VortexError::*;
        match self {
            InvalidParameter { .. } => "invalid_parameter",
            GridMismatch { .. } => "grid_mismatch",
            DimensionMismatch { .. } => "dimension_mismatch",
            HomotopyAmbiguity { .. } => "homotopy_ambiguity",
            PathTooShort(_) => "path_too_short",
            NonlinearPeriod { .. } => "nonlinear_period",
            EmptySector { .. } => "empty_sector",
            CriticalResidual { .. } => "critical_residual",
            IllSeparatedSpectrum { .. } => "ill_separated_spectrum",
            FlowDiverged { .. } => "flow_diverged",
            StepTooLarge { .. } => "step_too_large",
            NonMonotoneAction { .. } => "non_monotone_action",
            NotConverged { .. } => "not_converged",
            Unclassified { .. } => "unclassified",
            TooFewSamples { .. } => "too_few_samples",
            NotAsymptotic { .. } => "not_asymptotic",
            AllSamplesExcluded => "all_samples_excluded",
            EmptySectorQuery { .. } => "empty_sector_query",
            IncompatibleWebs(_) => "incompatible_webs",
            Parse { .. } => "parse",
            Io(_) => "io",
        }
    }

    /// The offending configuration field, when there is one.
    pub fn field(&self) -> Option<&str> {
        match self {
            VortexError::InvalidParameter { field, .. } => Some(field),
            _ => None,
        }
    }
}
