use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("right-hand side violates the periodic compatibility condition (mean {mean:.3e}, norm {norm:.3e})")]
    CompatibilityViolated { mean: f64, norm: f64 },

    #[error("iterative solver hit the iteration cap ({iterations}) with relative residual {residual:.3e}")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("inner linear solve diverged: {0}")]
    InnerSolveDiverged(String),

    #[error("renormalization defect {defect:.3e} exceeds 0.1 (time step too large)")]
    RenormalizationDefectTooLarge { defect: f64 },

    #[error("energy increased by {increase:.3e} at step {step}, above the logged bound {bound:.3e}")]
    EnergyIncrease { step: usize, increase: f64, bound: f64 },

    #[error("stray field requested but no demagnetizing kernel was supplied")]
    MissingKernel,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("time mismatch: {0}")]
    TimeMismatch(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("need at least {needed} valid points for a rate fit, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("line {line}: key '{key}': {message}")]
    Parse { line: usize, key: String, message: String },

    #[error("{}constraint violated: {constraint}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Validation { line: Option<usize>, constraint: String },

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("malformed container: {0}")]
    Container(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
