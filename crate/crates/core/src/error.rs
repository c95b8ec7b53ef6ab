use num_complex::Complex64;
use thiserror::Error;

/// Every failure mode surfaced by the library.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid grid resolution: {0}")]
    InvalidResolution(String),

    #[error("degenerate critical point at {point} (|Φ''| = {second_derivative:.3e})")]
    DegenerateCriticalPoint {
        point: Complex64,
        second_derivative: f64,
    },

    #[error("critical point {point} lies within {margin} of the unit circle")]
    BoundaryCriticalPoint { point: Complex64, margin: f64 },

    #[error("critical points {0} and {1} coincide")]
    CoincidentCriticalPoints(Complex64, Complex64),

    #[error("critical points collided while following the probe family at ε = {eps}")]
    CriticalPointCollision { eps: f64 },

    #[error("normal-derivative sign conditions cannot be met: {0}")]
    SignConditionUnsatisfiable(String),

    #[error("Hermite interpolation system is singular: {0}")]
    InterpolationSingular(String),

    #[error("phase data would overflow the exponent budget ({0:.3e})")]
    OverflowRisk(f64),

    #[error("conductivity must be positive, found {0:.3e}")]
    NonpositiveConductivity(f64),

    #[error("linear system is near resonance (condition estimate {0:.3e})")]
    NearResonance(f64),

    #[error("boundary input does not vanish on Γ₋ (max |f| = {0:.3e})")]
    InputNotVanishingOnGammaMinus(f64),

    #[error("inadmissible phase: {0}")]
    InadmissiblePhase(String),

    #[error("boundary trace constraint is infeasible: {0}")]
    ConstraintInfeasible(String),

    #[error("cut-off supports infeasible: {0}")]
    SupportInfeasible(String),

    #[error("degenerate phase: {0}")]
    DegeneratePhase(String),

    #[error("τ mismatch between solutions ({0} vs {1})")]
    MismatchedTau(f64, f64),

    #[error("grid under-resolves the phase: {radians_per_cell:.3} rad per cell exceeds budget {budget:.3}")]
    ResolutionInsufficient { radians_per_cell: f64, budget: f64 },

    #[error("coefficient fit is ill conditioned (condition {0:.3e})")]
    IllConditionedFit(f64),

    #[error("normal system is singular: {0}")]
    SingularNormalSystem(String),

    #[error("continuation stalled with boundary misfit {misfit:.3e}")]
    NoConvergence { misfit: f64 },

    #[error("configuration error: {0}")]
    ConfigError(String),

    #[error("{stage} failed: {source}")]
    PipelineError {
        stage: String,
        #[source]
        source: Box<LabError>,
    },

    #[error("i/o error: {0}")]
    IoError(String),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::IoError(e.to_string())
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::ConfigError(e.to_string())
    }
}

impl LabError {
    pub fn in_stage(self, stage: &str) -> Self {
        LabError::PipelineError {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
