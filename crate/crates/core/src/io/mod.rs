//! File formats and synthetic data.

pub mod config;
pub mod json;
pub mod synthetic;
pub mod trace_csv;

pub use config::RunConfig;
pub use json::{fit_result_json, fit_result_value};
pub use synthetic::{
    default_abscissa, default_trace_kind, generate_synthetic, Abscissa, NoiseKind, SyntheticSpec,
    TruthRecord,
};
pub use trace_csv::{format_trace, parse_trace, read_trace, write_trace};
