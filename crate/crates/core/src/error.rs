use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what} must be non-negative, got {value}")]
    NegativeTime { what: &'static str, value: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("ground energies are required for the Boltzmann branch")]
    MissingEnergies,

    #[error("populations do not decrease with energy; spin temperature is negative or undefined")]
    UndefinedTemperature,

    #[error("rate-equation integration failed to reach tolerance at t = {time:e} s")]
    StepSize { time: f64 },

    #[error(
        "hole width {hole:e} Hz is below twice the laser width {laser:e} Hz (laser-limited hole)"
    )]
    LaserLimited { hole: f64, laser: f64 },

    #[error(
        "effective linewidth {gamma_eff:e} Hz is below the homogeneous linewidth {gamma_h:e} Hz"
    )]
    NegativeSpectralDiffusion { gamma_eff: f64, gamma_h: f64 },

    #[error("hole centre {center:e} Hz lies outside the chirp span +/-{half_span:e} Hz")]
    HoleOutsideSpan { center: f64, half_span: f64 },

    #[error("trace is not uniformly sampled (sample {index})")]
    NonUniformSampling { index: usize },

    #[error("chirp parameters do not match the trace: {0}")]
    ChirpMismatch(String),

    #[error("trace kind {kind} is not accepted by the {adapter} model")]
    IncompatibleTrace { kind: String, adapter: String },

    #[error("degenerate parameter combination: {0}")]
    SingularJacobian(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("metadata mismatch: {0}")]
    MetadataMismatch(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_time(what: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 {
        Ok(())
    } else {
        Err(Error::NegativeTime { what, value })
    }
}
