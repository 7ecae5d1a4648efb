#![allow(dead_code)]

use std::collections::BTreeMap;

use spinrelax::fitting::AdapterKind;
use spinrelax::io::{generate_synthetic, Abscissa, NoiseKind, SyntheticSpec};
use spinrelax::model::{DecayTrace, TraceKind};

/// Seed shared by every synthetic fixture in the test suites.
pub const SEED: u64 = 1;

pub fn synthetic(
    model: AdapterKind,
    truth: &[(&str, f64)],
    x: Vec<f64>,
    noise: f64,
    noise_kind: NoiseKind,
    temperature: f64,
    seed: u64,
) -> DecayTrace {
    let spec = SyntheticSpec {
        model,
        truth: truth
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect::<BTreeMap<_, _>>(),
        noise,
        noise_kind,
        abscissa: Abscissa::Points(x),
        temperature,
        kind: None,
    };
    generate_synthetic(&spec, seed)
        .expect("valid synthetic spec")
        .0
}

pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| start + (end - start) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Zero followed by `n - 1` log-spaced delays from `first` to `last`.
pub fn delays(first: f64, last: f64, n: usize) -> Vec<f64> {
    let mut v = vec![0.0];
    let r = (last / first).ln();
    v.extend((0..n - 1).map(|i| first * (r * i as f64 / (n - 2) as f64).exp()));
    v
}

pub fn trace_kind(model: AdapterKind) -> TraceKind {
    spinrelax::io::default_trace_kind(model)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}
