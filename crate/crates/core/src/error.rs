use thiserror::Error;

/// Errors raised by the numeric engines.
///
/// Every variant carries enough context to tell *which* guard tripped; the
/// CLI maps variant names into its JSON error report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("pivot singular: |det(H_perp - E)| = {det:.3e} below threshold {tol:.3e}")]
    PivotSingular { det: f64, tol: f64 },

    #[error("level crossing at sample {sample}: eigenvalue gap {gap:.3e} below gap_tol {tol:.3e}")]
    LevelCrossing { gap: f64, tol: f64, sample: usize },

    #[error("connection samples belong to different levels or pivots")]
    LevelMismatch,

    #[error("loop sample within {dist:.3e} of the projection pole (tolerance {tol:.3e})")]
    PoleCrossing { dist: f64, tol: f64 },

    #[error("degenerate minor: |Delta_0| = {value:.3e} vanishes on the loop")]
    DegenerateMinor { value: f64 },

    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("degenerate spectrum: gap {gap:.3e} at the evaluation point")]
    DegenerateSpectrum { gap: f64 },

    #[error("multiplicity drift at sample {sample}: gap to adjacent level {gap:.3e} below {tol:.3e}")]
    MultiplicityDrift { gap: f64, tol: f64, sample: usize },

    #[error("frame discontinuity: successor overlap {overlap:.3} below 0.5")]
    FrameDiscontinuity { overlap: f64 },

    #[error("gauge path not closed: ||U(T) - U(0)|| = {defect:.3e}")]
    NonClosedGauge { defect: f64 },

    #[error("echo mismatch: dynamic phases differ by {delta:.3e} (tolerance {tol:.3e})")]
    EchoMismatch { delta: f64, tol: f64 },

    #[error("step too coarse: ||H||*T/steps = {value:.3} exceeds the 0.1 stability bound")]
    StepTooCoarse { value: f64 },

    #[error("population leakage {leakage:.3e} exceeds leak_tol {tol:.3e}")]
    LeakageExceeded { leakage: f64, tol: f64 },

    #[error("degenerate loop: {0}")]
    DegenerateLoop(String),

    #[error("loop not closed: |R(T) - R(0)| = {defect:.3e} exceeds closure_tol {tol:.3e}")]
    LoopNotClosed { defect: f64, tol: f64 },

    #[error("eigenvalue drift {drift:.3e} along the loop; levels are assumed stationary")]
    EnergyDrift { drift: f64 },

    #[error("matrix not Hermitian: residual {residual:.3e}")]
    NotHermitian { residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Stable machine-readable name of the variant, used in CLI reports.
    pub fn name(&self) -> &'static str {
        match self {
            Error::PivotSingular { .. } => "PivotSingular",
            Error::LevelCrossing { .. } => "LevelCrossing",
            Error::LevelMismatch => "LevelMismatch",
            Error::PoleCrossing { .. } => "PoleCrossing",
            Error::DegenerateMinor { .. } => "DegenerateMinor",
            Error::DomainViolation(_) => "DomainViolation",
            Error::DegenerateSpectrum { .. } => "DegenerateSpectrum",
            Error::MultiplicityDrift { .. } => "MultiplicityDrift",
            Error::FrameDiscontinuity { .. } => "FrameDiscontinuity",
            Error::NonClosedGauge { .. } => "NonClosedGauge",
            Error::EchoMismatch { .. } => "EchoMismatch",
            Error::StepTooCoarse { .. } => "StepTooCoarse",
            Error::LeakageExceeded { .. } => "LeakageExceeded",
            Error::DegenerateLoop(_) => "DegenerateLoop",
            Error::LoopNotClosed { .. } => "LoopNotClosed",
            Error::EnergyDrift { .. } => "EnergyDrift",
            Error::NotHermitian { .. } => "NotHermitian",
            Error::InvalidArgument(_) => "InvalidArgument",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
