//! Seeded synthetic traces for round-trip tests.
//!
//! Noise comes from `ChaCha8Rng::seed_from_u64(seed)` (rand_chacha) through
//! rand_distr's `StandardNormal`, so fixtures are reproducible on every
//! platform.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{AdapterKind, ModelAdapter};
use crate::model::{DecayTrace, Sample, TraceKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NoiseKind {
    /// Standard deviation is `noise * max|y|` for every sample.
    #[default]
    PeakFraction,
    /// Standard deviation is `noise * |y_i|`.
    Proportional,
}

/// Where to sample the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Abscissa {
    Points(Vec<f64>),
    Linear {
        start: f64,
        end: f64,
        n_points: usize,
    },
}

impl Abscissa {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Abscissa::Points(v) => v.clone(),
            Abscissa::Linear {
                start,
                end,
                n_points,
            } => match n_points {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..*n)
                    .map(|i| start + (end - start) * i as f64 / (*n - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub model: AdapterKind,
    /// Values overriding the adapter defaults.
    pub truth: BTreeMap<String, f64>,
    /// Relative noise level, e.g. 0.01 for 1 %.
    pub noise: f64,
    pub noise_kind: NoiseKind,
    pub abscissa: Abscissa,
    pub temperature: f64,
    /// Defaults to the first kind the model accepts.
    pub kind: Option<TraceKind>,
}

/// Everything needed to score a later fit against the generating values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub model: String,
    pub params: BTreeMap<String, f64>,
    pub noise: f64,
    pub noise_kind: NoiseKind,
    pub seed: u64,
    pub n_points: usize,
    #[serde(rename = "temperature_K")]
    pub temperature: Option<f64>,
}

/// Sampling grid used when a configuration does not give one.
pub fn default_abscissa(model: AdapterKind) -> Abscissa {
    let lin = |start: f64, end: f64, n_points: usize| Abscissa::Linear {
        start,
        end,
        n_points,
    };
    match model {
        AdapterKind::FFHoleDecay
        | AdapterKind::SLRHoleDecay
        | AdapterKind::SLR3PE
        | AdapterKind::OffsetExponential => lin(0.0, 10e-3, 101),
        AdapterKind::Echo2P => lin(0.0, 200e-6, 101),
        AdapterKind::PowerLawRate | AdapterKind::GammaHvsT => lin(2.0, 20.0, 37),
        AdapterKind::EchoTrainCorrection => lin(1.0, 200.0, 200),
        AdapterKind::LorentzianProfile => lin(-500e3, 500e3, 201),
    }
}

pub fn default_trace_kind(model: AdapterKind) -> TraceKind {
    TraceKind::ALL
        .into_iter()
        .find(|&k| model.accepts(k))
        .expect("every model accepts some trace kind")
}

/// Samples the model at the truth values and adds Gaussian noise. With
/// `noise > 0` every sample carries its standard deviation as `sigma`.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<(DecayTrace, TruthRecord)> {
    if !(spec.noise >= 0.0) || !spec.noise.is_finite() {
        return Err(Error::InvalidParams(format!(
            "noise must be >= 0, got {}",
            spec.noise
        )));
    }
    let mut adapter = ModelAdapter::new(spec.model);
    for (name, &v) in &spec.truth {
        adapter = adapter.with_value(name, v)?;
    }
    let kind = spec.kind.unwrap_or_else(|| default_trace_kind(spec.model));
    if !spec.model.accepts(kind) {
        return Err(Error::IncompatibleTrace {
            kind: kind.to_string(),
            adapter: spec.model.to_string(),
        });
    }
    let values = adapter.values();
    let xs = spec.abscissa.values();
    if xs.is_empty() {
        return Err(Error::InvalidParams("no sample points requested".into()));
    }
    let clean: Vec<f64> = xs.iter().map(|&x| adapter.evaluate(&values, x)).collect();
    if let Some(i) = clean.iter().position(|y| !y.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "{} is not finite at x = {} for these parameters",
            spec.model, xs[i]
        )));
    }
    let peak = clean.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = xs
        .iter()
        .zip(&clean)
        .map(|(&t, &y)| {
            if spec.noise == 0.0 {
                return Sample { t, y, sigma: None };
            }
            let sd = match spec.noise_kind {
                NoiseKind::PeakFraction => spec.noise * peak,
                NoiseKind::Proportional => spec.noise * y.abs(),
            };
            let z: f64 = StandardNormal.sample(&mut rng);
            Sample {
                t,
                y: y + sd * z,
                sigma: (sd > 0.0).then_some(sd),
            }
        })
        .collect();
    let mut trace = DecayTrace::new(kind, spec.temperature, samples)?;
    trace.metadata.insert("seed".into(), seed.to_string());
    trace
        .metadata
        .insert("model".into(), spec.model.to_string());
    let record = TruthRecord {
        model: spec.model.to_string(),
        params: adapter
            .params
            .iter()
            .map(|p| (p.name.clone(), p.value))
            .collect(),
        noise: spec.noise,
        noise_kind: spec.noise_kind,
        seed,
        n_points: xs.len(),
        temperature: spec.temperature.is_finite().then_some(spec.temperature),
    };
    Ok((trace, record))
}
