//! Chirped readout of a spectral hole.
//!
//! A linear chirp swept faster than the hole's inverse width excites a free
//! induction decay that beats with the chirp. The forward model propagates
//! the chirped field through the hole's complex transfer function. The
//! inverse recovers the medium response from the detected intensity with a
//! quadratic-phase kernel that depends only on the chirp rate.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::fitting::{fit, AdapterKind, ModelAdapter};
use crate::model::{DecayTrace, FitResult, Sample, TraceKind};

/// Ringing above which a deconvolution is treated as a chirp mismatch.
pub const RINGING_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChirpReadout {
    /// Hz
    pub span: f64,
    /// s
    pub duration: f64,
    /// Size of the simulation grid, which covers twice the chirp duration.
    pub n_samples: usize,
}

impl ChirpReadout {
    /// Picks a grid sampling at least four times the span.
    pub fn new(span: f64, duration: f64) -> Result<Self> {
        let want = (8.0 * span * duration).max(1024.0);
        if !want.is_finite() || want > (1u64 << 30) as f64 {
            return Err(Error::InvalidParams(format!(
                "chirp span {span} Hz over {duration} s needs too many samples"
            )));
        }
        Self::with_samples(span, duration, (want.ceil() as usize).next_power_of_two())
    }

    pub fn with_samples(span: f64, duration: f64, n_samples: usize) -> Result<Self> {
        let c = ChirpReadout {
            span,
            duration,
            n_samples,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.span > 0.0) || !self.span.is_finite() {
            return Err(Error::InvalidParams(format!(
                "chirp span must be positive, got {}",
                self.span
            )));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::InvalidParams(format!(
                "chirp duration must be positive, got {}",
                self.duration
            )));
        }
        if self.n_samples < 1024 || !self.n_samples.is_power_of_two() {
            return Err(Error::InvalidParams(format!(
                "n_samples must be a power of two >= 1024, got {}",
                self.n_samples
            )));
        }
        Ok(())
    }

    /// Hz/s
    pub fn rate(&self) -> f64 {
        self.span / self.duration
    }

    pub fn sample_interval(&self) -> f64 {
        2.0 * self.duration / self.n_samples as f64
    }

    /// Instantaneous frequency at the start of the sweep, relative to its centre.
    pub fn start_frequency(&self) -> f64 {
        -0.5 * self.span
    }

    /// Instantaneous frequency at time `t` after the sweep starts.
    pub fn frequency_at(&self, t: f64) -> f64 {
        self.start_frequency() + self.rate() * t
    }
}

/// Lorentzian transparency burnt into an absorbing line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoleProfile {
    /// Hz, relative to the chirp centre.
    pub center: f64,
    /// Hz
    pub fwhm: f64,
    /// Fraction of the absorption removed at the centre.
    pub depth: f64,
    /// Optical depth away from the hole.
    pub baseline_absorption: f64,
}

impl HoleProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.fwhm > 0.0) {
            return Err(Error::InvalidParams(format!(
                "hole fwhm must be positive, got {}",
                self.fwhm
            )));
        }
        if !(self.depth > 0.0 && self.depth <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "hole depth must be in (0, 1], got {}",
                self.depth
            )));
        }
        if !(self.baseline_absorption >= 0.0) || !self.baseline_absorption.is_finite() {
            return Err(Error::InvalidParams(format!(
                "baseline absorption must be finite and >= 0, got {}",
                self.baseline_absorption
            )));
        }
        if !self.center.is_finite() {
            return Err(Error::InvalidParams("hole centre must be finite".into()));
        }
        Ok(())
    }

    /// Complex amplitude transmission. The Lorentzian susceptibility carries
    /// the dispersive phase, so the response is causal.
    pub fn transfer(&self, f: f64) -> Complex64 {
        let chi = Complex64::new(1.0, 2.0 * (f - self.center) / self.fwhm).inv();
        (-(self.baseline_absorption / 2.0) * (1.0 - self.depth * chi)).exp()
    }

    pub fn absorption(&self, f: f64) -> f64 {
        let x = 2.0 * (f - self.center) / self.fwhm;
        self.baseline_absorption * (1.0 - self.depth / (1.0 + x * x))
    }

    /// Intensity transmission for a vanishingly slow sweep.
    pub fn static_transmission(&self, f: f64) -> f64 {
        (-self.absorption(f)).exp()
    }
}

/// Chirp rate over the squared hole width; beats dominate when it exceeds 1.
pub fn distortion_ratio(hole: &HoleProfile, chirp: &ChirpReadout) -> f64 {
    chirp.rate() / (hole.fwhm * hole.fwhm)
}

fn fft(buf: &mut [Complex64]) {
    FftPlanner::new().plan_fft_forward(buf.len()).process(buf);
}

fn ifft(buf: &mut [Complex64]) {
    let n = buf.len() as f64;
    FftPlanner::new().plan_fft_inverse(buf.len()).process(buf);
    buf.iter_mut().for_each(|x| *x /= n);
}

fn fft_frequency(j: usize, n: usize, dt: f64) -> f64 {
    let k = if j < n.div_ceil(2) {
        j as f64
    } else {
        j as f64 - n as f64
    };
    k / (n as f64 * dt)
}

/// Detected intensity while the chirp sweeps across the hole. The abscissa
/// is time since the start of the sweep; the metadata records the chirp and
/// the distortion ratio.
pub fn simulate_chirped_transmission(
    hole: &HoleProfile,
    chirp: &ChirpReadout,
) -> Result<DecayTrace> {
    hole.validate()?;
    chirp.validate()?;
    let half_span = chirp.span / 2.0;
    if hole.center.abs() > half_span {
        return Err(Error::HoleOutsideSpan {
            center: hole.center,
            half_span,
        });
    }
    let n = chirp.n_samples;
    let m = n / 2;
    let dt = chirp.sample_interval();
    let (f0, r) = (chirp.start_frequency(), chirp.rate());
    let mut field: Vec<Complex64> = (0..n)
        .map(|k| {
            if k < m {
                let t = k as f64 * dt;
                Complex64::from_polar(1.0, 2.0 * PI * (f0 * t + 0.5 * r * t * t))
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    fft(&mut field);
    for (j, x) in field.iter_mut().enumerate() {
        *x *= hole.transfer(fft_frequency(j, n, dt));
    }
    ifft(&mut field);
    let samples = field[..m]
        .iter()
        .enumerate()
        .map(|(k, e)| Sample {
            t: k as f64 * dt,
            y: e.norm_sqr(),
            sigma: None,
        })
        .collect();
    let ratio = distortion_ratio(hole, chirp);
    Ok(DecayTrace::new(TraceKind::HoleProfile, f64::NAN, samples)?
        .with_meta("axis", "time")
        .with_meta("chirp_span_Hz", chirp.span)
        .with_meta("chirp_duration_s", chirp.duration)
        .with_meta("chirp_rate_Hz_per_s", r)
        .with_meta("distortion_ratio", ratio)
        .with_meta("distorted", ratio > 1.0))
}

/// Multiplies a spectrum over the sweep-time conjugate variable `nu` by the
/// unit-magnitude correction `exp(-i pi nu^2 / rate)`.
pub fn apply_correction_kernel(spectrum: &mut [Complex64], dt: f64, rate: f64) {
    let n = spectrum.len();
    for (j, x) in spectrum.iter_mut().enumerate() {
        let nu = fft_frequency(j, n, dt);
        *x *= Complex64::from_polar(1.0, -PI * nu * nu / rate);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeconvolutionOptions {
    /// +1 for an up-chirp; -1 applies the kernel for the opposite sweep.
    pub rate_sign: f64,
    pub ringing_threshold: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for DeconvolutionOptions {
    fn default() -> Self {
        DeconvolutionOptions {
            rate_sign: 1.0,
            ringing_threshold: RINGING_THRESHOLD,
            max_iter: 200,
            tol: 1e-13,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChirpDeconvolution {
    /// Absorption against frequency relative to the chirp centre.
    pub profile: DecayTrace,
    pub ringing: f64,
    /// Median detected intensity, taken as the off-hole transmission.
    pub baseline_transmission: f64,
    pub iterations: usize,
}

/// Excess variation of the central 80% of `y` over a single monotone dip:
/// zero for a clean hole, larger the more it oscillates.
pub fn ringing_metric(y: &[f64]) -> f64 {
    let m = y.len();
    let core = &y[m / 10..m - m / 10];
    if core.len() < 2 {
        return 0.0;
    }
    let lo = core.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = core.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 1e-12 * hi.abs().max(lo.abs()).max(1e-300)) {
        return 0.0;
    }
    let tv: f64 = core.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    tv / (2.0 * range) - 1.0
}

fn check_sampling(trace: &DecayTrace) -> Result<f64> {
    if trace.len() < 16 {
        return Err(Error::InsufficientData(format!(
            "chirp trace has {} samples, need at least 16",
            trace.len()
        )));
    }
    let t = trace.t();
    let dt = t[1] - t[0];
    for (k, w) in t.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt {
            return Err(Error::NonUniformSampling { index: k + 1 });
        }
    }
    Ok(dt)
}

fn check_chirp_metadata(trace: &DecayTrace, chirp: &ChirpReadout, dt: f64) -> Result<()> {
    for (key, want) in [
        ("chirp_span_Hz", chirp.span),
        ("chirp_duration_s", chirp.duration),
    ] {
        if let Some(v) = trace.metadata.get(key) {
            let got: f64 = v
                .parse()
                .map_err(|_| Error::ChirpMismatch(format!("{key} = {v} is not a number")))?;
            if (got - want).abs() > 1e-6 * want.abs() {
                return Err(Error::ChirpMismatch(format!(
                    "trace has {key} = {got}, expected {want}"
                )));
            }
        }
    }
    let covered = trace.len() as f64 * dt;
    if (covered - chirp.duration).abs() > 0.01 * chirp.duration + dt {
        return Err(Error::ChirpMismatch(format!(
            "trace covers {covered} s but the chirp lasts {} s",
            chirp.duration
        )));
    }
    Ok(())
}

pub fn deconvolve_chirp(trace: &DecayTrace, chirp: &ChirpReadout) -> Result<ChirpDeconvolution> {
    deconvolve_chirp_with(trace, chirp, &DeconvolutionOptions::default())
}

/// Recovers the static absorption profile from a beat-distorted trace.
///
/// With `u = I/I_b - 1` the detected excess, `u = 2 Re P + |P|^2` where the
/// inverse transform of `P` is causal. The causal part is isolated
/// iteratively, the quadratic chirp phase removed, and the transform taken
/// back to frequency.
pub fn deconvolve_chirp_with(
    trace: &DecayTrace,
    chirp: &ChirpReadout,
    opts: &DeconvolutionOptions,
) -> Result<ChirpDeconvolution> {
    chirp.validate()?;
    let dt = check_sampling(trace)?;
    check_chirp_metadata(trace, chirp, dt)?;
    let y = trace.y();
    let m = y.len();
    let n = (2 * m).next_power_of_two();
    let mut sorted = y.clone();
    sorted.sort_by(f64::total_cmp);
    let ib = sorted[m / 2];
    if !(ib > 0.0) {
        return Err(Error::InvalidParams(
            "median detected intensity must be positive".into(),
        ));
    }
    let u: Vec<f64> = y.iter().map(|v| v / ib - 1.0).collect();
    let weight = |j: usize| -> f64 {
        if j == 0 {
            0.5
        } else if j < n / 2 {
            1.0
        } else {
            0.0
        }
    };

    let mut p = vec![Complex64::new(0.0, 0.0); n];
    let mut big_p = vec![Complex64::new(0.0, 0.0); n];
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        iterations = it;
        for k in 0..n {
            p[k] = if k < m {
                Complex64::new(u[k] - big_p[k].norm_sqr(), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        ifft(&mut p);
        for (j, x) in p.iter_mut().enumerate() {
            *x *= weight(j);
        }
        let mut next = p.clone();
        fft(&mut next);
        next[m..]
            .iter_mut()
            .for_each(|x| *x = Complex64::new(0.0, 0.0));
        let change = next
            .iter()
            .zip(&big_p)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        big_p = next;
        if change < opts.tol {
            break;
        }
    }

    apply_correction_kernel(&mut p, dt, opts.rate_sign * chirp.rate());
    fft(&mut p);
    let samples: Vec<Sample> = (0..m)
        .map(|k| Sample {
            t: chirp.frequency_at(k as f64 * dt),
            y: -(ib * (Complex64::new(1.0, 0.0) + p[k]).norm_sqr()).ln(),
            sigma: None,
        })
        .collect();
    let ringing = ringing_metric(&samples.iter().map(|s| s.y).collect::<Vec<_>>());
    if ringing > opts.ringing_threshold {
        return Err(Error::ChirpMismatch(format!(
            "residual ringing {ringing:.3} exceeds {}",
            opts.ringing_threshold
        )));
    }
    let mut profile = DecayTrace::new(TraceKind::HoleProfile, trace.temperature, samples)?;
    profile.metadata = trace.metadata.clone();
    let profile = profile.with_meta("axis", "frequency");
    Ok(ChirpDeconvolution {
        profile,
        ringing,
        baseline_transmission: ib,
        iterations,
    })
}

/// Lorentzian fit to an absorption profile, restricted to ten guessed
/// widths around the hole.
pub fn fit_hole_profile(profile: &DecayTrace) -> Result<FitResult> {
    let adapter = ModelAdapter::new(AdapterKind::LorentzianProfile);
    adapter.check_trace(profile)?;
    let guess = adapter.guess(profile);
    let (center, width) = (guess[2], guess[3]);
    let window: Vec<Sample> = profile
        .samples
        .iter()
        .filter(|s| (s.t - center).abs() <= 10.0 * width)
        .copied()
        .collect();
    let windowed = DecayTrace::new(TraceKind::HoleProfile, profile.temperature, window)?;
    fit(&adapter, &windowed, &[])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn appendix_hole() -> HoleProfile {
        HoleProfile {
            center: 0.0,
            fwhm: 56.6e3,
            depth: 0.5,
            baseline_absorption: 0.3,
        }
    }

    #[test]
    fn grid_choice() {
        let c = ChirpReadout::new(2e6, 60e-6).unwrap();
        assert_eq!(c.n_samples, 1024);
        assert!((c.rate() - 2e6 / 60e-6).abs() < 1e-3);
        assert!(1.0 / c.sample_interval() >= 4.0 * c.span);
        assert!(ChirpReadout::with_samples(2e6, 60e-6, 1000).is_err());
        assert!(ChirpReadout::new(-1.0, 60e-6).is_err());
    }

    #[test]
    fn transfer_is_causal_lorentzian() {
        let h = appendix_hole();
        for f in [-1e6, -3e4, 0.0, 2e4, 5e5] {
            assert!((h.transfer(f).norm_sqr() - h.static_transmission(f)).abs() < 1e-12);
        }
    }

    #[test]
    fn infinitely_wide_hole_is_flat() {
        let h = HoleProfile {
            fwhm: f64::INFINITY,
            ..appendix_hole()
        };
        let tr =
            simulate_chirped_transmission(&h, &ChirpReadout::new(2e6, 60e-6).unwrap()).unwrap();
        let want = (-0.3f64 * 0.5).exp();
        assert!(tr.y().iter().all(|&y| (y - want).abs() < 1e-12));
    }

    #[test]
    fn outside_span_is_rejected() {
        let h = HoleProfile {
            center: 1.1e6,
            ..appendix_hole()
        };
        let c = ChirpReadout::new(2e6, 60e-6).unwrap();
        assert!(matches!(
            simulate_chirped_transmission(&h, &c),
            Err(Error::HoleOutsideSpan { .. })
        ));
    }

    #[test]
    fn appendix_trace_is_flagged_distorted() {
        let c = ChirpReadout::new(2e6, 60e-6).unwrap();
        let tr = simulate_chirped_transmission(&appendix_hole(), &c).unwrap();
        assert_eq!(tr.metadata["distorted"], "true");
        let ratio: f64 = tr.metadata["distortion_ratio"].parse().unwrap();
        assert!((ratio - 3.333e10 / 3.2036e9).abs() < 0.01);
    }

    #[test]
    fn flat_trace_gives_flat_profile() {
        let c = ChirpReadout::new(2e6, 60e-6).unwrap();
        let dt = c.sample_interval();
        let t: Vec<f64> = (0..c.n_samples / 2).map(|k| k as f64 * dt).collect();
        let y = vec![0.8; t.len()];
        let tr = DecayTrace::from_xy(TraceKind::HoleProfile, 1.8, &t, &y).unwrap();
        let d = deconvolve_chirp(&tr, &c).unwrap();
        let want = -(0.8f64).ln();
        assert!(d.profile.y().iter().all(|&a| (a - want).abs() < 1e-12));
        assert_eq!(d.ringing, 0.0);
    }

    #[test]
    fn non_uniform_sampling_is_rejected() {
        let c = ChirpReadout::new(2e6, 60e-6).unwrap();
        let dt = c.sample_interval();
        let mut t: Vec<f64> = (0..c.n_samples / 2).map(|k| k as f64 * dt).collect();
        t[100] += 0.3 * dt;
        let tr = DecayTrace::from_xy(TraceKind::HoleProfile, 1.8, &t, &vec![1.0; t.len()]).unwrap();
        assert!(matches!(
            deconvolve_chirp(&tr, &c),
            Err(Error::NonUniformSampling { index: 100 })
        ));
    }

    #[test]
    fn metadata_mismatch_is_rejected() {
        let c = ChirpReadout::new(2e6, 60e-6).unwrap();
        let tr = simulate_chirped_transmission(&appendix_hole(), &c).unwrap();
        let other = ChirpReadout::new(2e6, 61e-6).unwrap();
        assert!(matches!(
            deconvolve_chirp(&tr, &other),
            Err(Error::ChirpMismatch(_))
        ));
    }

    #[test]
    fn ringing_metric_values() {
        assert_eq!(ringing_metric(&[1.0; 20]), 0.0);
        let dip: Vec<f64> = (0..51)
            .map(|i| -1.0 / (1.0 + ((i as f64 - 25.0) / 3.0).powi(2)))
            .collect();
        assert!(ringing_metric(&dip).abs() < 1e-12);
        let wave: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        assert!(ringing_metric(&wave) > 5.0);
    }
}
