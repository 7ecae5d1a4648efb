//! Least-squares fits of the paper's models to traces.

pub mod adapters;
pub mod lm;

use std::collections::BTreeMap;

pub use adapters::{AdapterKind, ModelAdapter};
pub use lm::{minimize, LmOptions, LmReport, ParamSpec, Transform};

use crate::error::{Error, Result};
use crate::model::{DecayTrace, FitResult, ParamEstimate};

/// Correction above which an echo train is flagged.
pub const ECHO_TRAIN_WARN_FRACTION: f64 = 0.30;

/// Fits `adapter` to `trace`. Free parameters not named in `init` start
/// from a data-driven guess; named ones start from the given value.
pub fn fit(adapter: &ModelAdapter, trace: &DecayTrace, init: &[(&str, f64)]) -> Result<FitResult> {
    fit_with_options(adapter, trace, init, &LmOptions::default())
}

pub fn fit_with_options(
    adapter: &ModelAdapter,
    trace: &DecayTrace,
    init: &[(&str, f64)],
    opts: &LmOptions,
) -> Result<FitResult> {
    adapter.check_trace(trace)?;
    trace.validate()?;
    let mut params = adapter.params.clone();
    let guess = adapter.guess(trace);
    for (p, g) in params.iter_mut().zip(guess) {
        p.value = g;
    }
    for &(name, value) in init {
        let p = params.iter_mut().find(|p| p.name == name).ok_or_else(|| {
            Error::InvalidParams(format!(
                "{adapter_name} has no parameter {name}",
                adapter_name = adapter.name()
            ))
        })?;
        p.value = value;
    }
    let xs = trace.t();
    let ys = trace.y();
    let w: Vec<f64> = trace
        .samples
        .iter()
        .map(|s| 1.0 / s.sigma.unwrap_or(1.0))
        .collect();
    let residuals = |v: &[f64]| -> Vec<f64> {
        xs.iter()
            .zip(&ys)
            .zip(&w)
            .map(|((&x, &y), &wi)| (y - adapter.evaluate(v, x)) * wi)
            .collect()
    };
    let report = minimize(residuals, &params, xs.len(), opts)?;
    Ok(to_fit_result(adapter.name(), &params, &report))
}

fn to_fit_result(model: &str, params: &[ParamSpec], report: &LmReport) -> FitResult {
    let estimates = params
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let stderr = report
                .free
                .iter()
                .position(|&j| j == i)
                .map(|k| report.covariance[(k, k)].max(0.0).sqrt())
                .unwrap_or(0.0);
            ParamEstimate {
                name: p.name.clone(),
                value: report.values[i],
                stderr,
                free: p.free,
            }
        })
        .collect();
    let nf = report.free.len();
    let covariance = (0..nf)
        .map(|i| (0..nf).map(|j| report.covariance[(i, j)]).collect())
        .collect();
    FitResult {
        model: model.to_string(),
        params: estimates,
        covariance,
        chi2: report.chi2,
        dof: report.dof,
        converged: report.converged,
        n_iter: report.n_iter,
    }
}

/// Fits every trace independently, one worker thread per trace.
pub fn fit_many(
    adapter: &ModelAdapter,
    traces: &[DecayTrace],
    init: &[(&str, f64)],
) -> Vec<Result<FitResult>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = traces
            .iter()
            .map(|trace| s.spawn(move || fit(adapter, trace, init)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("fit worker panicked"))
            .collect()
    })
}

/// `rate = coefficient * T^exponent`, fitted as a straight line in log-log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub coefficient: f64,
    pub exponent: f64,
    /// Covariance of (coefficient, exponent).
    pub covariance: [[f64; 2]; 2],
}

impl PowerLawFit {
    pub fn coefficient_stderr(&self) -> f64 {
        self.covariance[0][0].sqrt()
    }

    pub fn exponent_stderr(&self) -> f64 {
        self.covariance[1][1].sqrt()
    }
}

pub fn fit_power_law_exponent(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "power law needs at least 4 points, got {}",
            points.len()
        )));
    }
    if let Some(&(t, r)) = points.iter().find(|(t, r)| !(*t > 0.0) || !(*r > 0.0)) {
        return Err(Error::InvalidParams(format!(
            "power law needs positive T and rate, got ({t}, {r})"
        )));
    }
    let n = points.len() as f64;
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - xm).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::SingularJacobian("all temperatures are equal".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(xi, yi)| (xi - xm) * (yi - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = x
        .iter()
        .zip(&y)
        .map(|(xi, yi)| (yi - intercept - slope * xi).powi(2))
        .sum();
    let s2 = rss / (n - 2.0);
    let var_slope = s2 / sxx;
    let var_icpt = s2 * (1.0 / n + xm * xm / sxx);
    let cov_is = -s2 * xm / sxx;
    let coefficient = intercept.exp();
    // Delta method for coefficient = exp(intercept).
    let covariance = [
        [coefficient * coefficient * var_icpt, coefficient * cov_is],
        [coefficient * cov_is, var_slope],
    ];
    Ok(PowerLawFit {
        coefficient,
        exponent: slope,
        covariance,
    })
}

/// Echo-train peaks corrected for accumulated pumping.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoTrainCorrection {
    pub corrected: Vec<(f64, f64)>,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Largest `1 - P(inf)/P(n)` over the train.
    pub max_correction: f64,
    pub warning: Option<String>,
    /// Set when the identity correction was applied.
    pub note: Option<String>,
}

/// Fits `P(n) = a + b exp(-n/c)` and rescales each peak by `P(inf)/P(n)`.
pub fn correct_echo_train(peaks: &[(f64, f64)]) -> Result<EchoTrainCorrection> {
    if peaks.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "echo train needs at least 5 peaks, got {}",
            peaks.len()
        )));
    }
    let n: Vec<f64> = peaks.iter().map(|p| p.0).collect();
    let y: Vec<f64> = peaks.iter().map(|p| p.1).collect();
    let trace = DecayTrace::from_xy(crate::model::TraceKind::EchoTrain, f64::NAN, &n, &y)?;
    let adapter = ModelAdapter::new(AdapterKind::EchoTrainCorrection);
    let identity = |a: f64, b: f64, c: f64, note: String| EchoTrainCorrection {
        corrected: peaks.to_vec(),
        a,
        b,
        c,
        max_correction: 0.0,
        warning: None,
        note: Some(note),
    };
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let res = match fit(&adapter, &trace, &[]) {
        Ok(r) => r,
        Err(Error::SingularJacobian(msg)) => {
            return Ok(identity(
                mean,
                0.0,
                0.0,
                format!("no pumping decay resolved ({msg})"),
            ));
        }
        Err(e) => return Err(e),
    };
    let (a, b, c) = (
        res.get("a").unwrap(),
        res.get("b").unwrap(),
        res.get("c").unwrap(),
    );
    if !(c > 0.0) {
        return Ok(identity(
            a,
            b,
            c,
            format!("fitted c = {c} <= 0, no pumping decay"),
        ));
    }
    if !(a > 0.0) {
        return Ok(identity(a, b, c, format!("fitted asymptote a = {a} <= 0")));
    }
    let mut max_correction = 0.0f64;
    let corrected = peaks
        .iter()
        .map(|&(ni, yi)| {
            let factor = a / (a + b * (-ni / c).exp());
            max_correction = max_correction.max((1.0 - factor).abs());
            (ni, yi * factor)
        })
        .collect();
    let warning = (max_correction > ECHO_TRAIN_WARN_FRACTION).then(|| {
        format!(
            "correction reaches {:.1}%, above {:.0}%",
            100.0 * max_correction,
            100.0 * ECHO_TRAIN_WARN_FRACTION
        )
    });
    Ok(EchoTrainCorrection {
        corrected,
        a,
        b,
        c,
        max_correction,
        warning,
        note: None,
    })
}

/// Result of a two-stage fit sharing one amplitude across traces.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedScaleFit {
    pub scale: f64,
    pub scale_stderr: f64,
    pub reference_fit: FitResult,
    /// One fit per input trace, all with `scale` frozen.
    pub fits: Vec<FitResult>,
}

fn burn_metadata(trace: &DecayTrace) -> BTreeMap<&str, &str> {
    trace
        .metadata
        .iter()
        .filter(|(k, _)| k.starts_with("burn_"))
        .map(|(k, v)| (k.as_str(), v.as_str()))
        .collect()
}

/// Fits `scale` on `traces[reference]`, then each trace's remaining free
/// parameters with that scale frozen. All traces must carry identical
/// `burn_*` metadata.
pub fn shared_scale_fit(
    adapter: &ModelAdapter,
    traces: &[DecayTrace],
    reference: usize,
) -> Result<SharedScaleFit> {
    if traces.len() < 2 {
        return Err(Error::InsufficientData(
            "shared scale fit needs at least 2 traces".into(),
        ));
    }
    let reference_trace = traces
        .get(reference)
        .ok_or_else(|| Error::InvalidParams(format!("reference index {reference} out of range")))?;
    if adapter.param("scale").is_none() {
        return Err(Error::InvalidParams(format!(
            "{} has no scale parameter",
            adapter.name()
        )));
    }
    let burn = burn_metadata(reference_trace);
    for (i, t) in traces.iter().enumerate() {
        adapter.check_trace(t)?;
        let other = burn_metadata(t);
        if other != burn {
            return Err(Error::MetadataMismatch(format!(
                "trace {i} burn parameters {other:?} differ from reference {burn:?}"
            )));
        }
    }
    let stage1 = adapter.clone().thaw("scale")?;
    let reference_fit = fit(&stage1, reference_trace, &[])?;
    let scale = reference_fit.get("scale").unwrap();
    let scale_stderr = reference_fit.stderr("scale").unwrap();
    let stage2 = adapter.clone().fix("scale", scale)?;
    let fits = fit_many(&stage2, traces, &[])
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(SharedScaleFit {
        scale,
        scale_stderr,
        reference_fit,
        fits,
    })
}
