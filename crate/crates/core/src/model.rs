//! Domain types shared by the rest of the crate.
//!
//! Units are fixed crate-wide: times in seconds, rates and linewidths in Hz,
//! linewidths are FWHM, temperatures in kelvin, energies in joules.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Measured optical lifetime of the 4g-1e transition, seconds.
pub const DEFAULT_T_OPT: f64 = 1.3e-3;

/// Coherence time of a transition with FWHM homogeneous linewidth `gamma_h`.
pub fn coherence_time(gamma_h: f64) -> f64 {
    1.0 / (PI * gamma_h)
}

/// FWHM homogeneous linewidth corresponding to a coherence time `t2`.
pub fn linewidth_from_t2(t2: f64) -> f64 {
    1.0 / (PI * t2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SiteLabel {
    SiteI,
    SiteII,
}

/// Branching ratios `beta[i][j]` for optical decay from excited sublevel
/// `(i+1)e` to ground sublevel `(j+1)g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BranchingRatios(pub [[f64; 4]; 4]);

impl BranchingRatios {
    /// Matrix whose first row carries the flip-flop model scalars; the
    /// remaining rows are uniform.
    pub fn from_ff_scalars(beta14: f64, beta11_plus_12: f64) -> Self {
        let half = beta11_plus_12 / 2.0;
        let beta13 = 1.0 - beta11_plus_12 - beta14;
        BranchingRatios([
            [half, half, beta13, beta14],
            [0.25; 4],
            [0.25; 4],
            [0.25; 4],
        ])
    }

    /// Matrix reproducing `beta14` and the mean decay `beta_bar` from 2e..4e
    /// into 4g; all other destinations share the remainder equally.
    pub fn from_slr_scalars(beta14: f64, beta_bar: f64) -> Self {
        let r1 = (1.0 - beta14) / 3.0;
        let rb = (1.0 - beta_bar) / 3.0;
        BranchingRatios([
            [r1, r1, r1, beta14],
            [rb, rb, rb, beta_bar],
            [rb, rb, rb, beta_bar],
            [rb, rb, rb, beta_bar],
        ])
    }

    pub fn beta14(&self) -> f64 {
        self.0[0][3]
    }

    pub fn beta11_plus_12(&self) -> f64 {
        self.0[0][0] + self.0[0][1]
    }

    /// `(beta24 + beta34 + beta44) / 3`
    pub fn beta_bar(&self) -> f64 {
        (self.0[1][3] + self.0[2][3] + self.0[3][3]) / 3.0
    }
}

/// Level structure of one crystallographic site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperfineSystem {
    pub site_label: SiteLabel,
    pub t_opt: f64,
    pub beta: BranchingRatios,
    /// Energies of 1g..4g, strictly increasing. Only the Boltzmann branch of
    /// the equilibrium calculation needs them.
    #[serde(default)]
    pub ground_energies: Option<[f64; 4]>,
    #[serde(default = "default_n_total")]
    pub n_total: f64,
}

fn default_n_total() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

const ROW_SUM_TOL: f64 = 1e-9;

/// Lists every invariant of `sys` that does not hold.
pub fn validate_system(sys: &HyperfineSystem) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |field: String, rule: String| out.push(Violation { field, rule });

    if !(sys.t_opt > 0.0) || !sys.t_opt.is_finite() {
        push("t_opt".into(), format!("must be > 0, got {}", sys.t_opt));
    }
    for (i, row) in sys.beta.0.iter().enumerate() {
        for (j, &b) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&b) {
                push(
                    format!("beta[{}e][{}g]", i + 1, j + 1),
                    format!("must lie in [0, 1], got {b}"),
                );
            }
        }
        let sum: f64 = row.iter().sum();
        if !((sum - 1.0).abs() <= ROW_SUM_TOL) {
            push(
                format!("beta row {}e", i + 1),
                format!("must sum to 1, sums to {sum}"),
            );
        }
    }
    if let Some(e) = sys.ground_energies {
        if e.iter().any(|x| !x.is_finite()) || e.windows(2).any(|w| !(w[1] > w[0])) {
            push(
                "ground_energies".into(),
                "must be finite and strictly increasing (1g..4g)".into(),
            );
        }
    }
    if !(sys.n_total > 0.0) || !sys.n_total.is_finite() {
        push(
            "n_total".into(),
            format!("must be > 0, got {}", sys.n_total),
        );
    }
    out
}

/// Populations of the laser-resonant subclass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationState {
    pub t: f64,
    pub n_g: [f64; 4],
    pub n_e: [f64; 4],
}

impl PopulationState {
    pub fn total(&self) -> f64 {
        self.n_g.iter().chain(self.n_e.iter()).sum()
    }
}

/// Parameters of the low-temperature model where the 3g-4g flip-flop is the
/// only ground-state relaxation channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FFParams {
    pub t_ff: f64,
    pub n0: f64,
    pub beta14: f64,
    pub beta11_plus_12: f64,
    pub t_opt: f64,
    /// Proportionality between hole area and 4g population deficit.
    pub scale_c: f64,
}

impl FFParams {
    /// Branching values used for the 10 ppm site II fits.
    pub const BETA14: f64 = 0.72;
    pub const BETA11_PLUS_12: f64 = 0.21;

    pub fn new(t_ff: f64, t_opt: f64) -> Self {
        FFParams {
            t_ff,
            n0: 1.0,
            beta14: Self::BETA14,
            beta11_plus_12: Self::BETA11_PLUS_12,
            t_opt,
            scale_c: 1.0,
        }
    }

    pub fn from_system(sys: &HyperfineSystem, t_ff: f64, n0: f64) -> Self {
        FFParams {
            t_ff,
            n0,
            beta14: sys.beta.beta14(),
            beta11_plus_12: sys.beta.beta11_plus_12(),
            t_opt: sys.t_opt,
            scale_c: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.t_ff > 0.0
            && self.n0 > 0.0
            && self.t_opt > 0.0
            && (0.0..=1.0).contains(&self.beta14)
            && (0.0..=1.0).contains(&self.beta11_plus_12)
            && self.beta14 + self.beta11_plus_12 <= 1.0 + 1e-12;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("{self:?}")))
        }
    }
}

/// Parameters of the high-temperature model: uniform spin-lattice
/// relaxation at overall rate `1/t_s` in both manifolds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SLRParams {
    pub t_s: f64,
    pub n0: f64,
    pub beta14: f64,
    pub beta_bar: f64,
    pub t_opt: f64,
}

impl SLRParams {
    /// Polarization-averaged branching values.
    pub const BETA14: f64 = 0.54;
    pub const BETA_BAR: f64 = 0.153;

    pub fn new(t_s: f64, t_opt: f64) -> Self {
        SLRParams {
            t_s,
            n0: 1.0,
            beta14: Self::BETA14,
            beta_bar: Self::BETA_BAR,
            t_opt,
        }
    }

    pub fn from_system(sys: &HyperfineSystem, t_s: f64, n0: f64) -> Self {
        SLRParams {
            t_s,
            n0,
            beta14: sys.beta.beta14(),
            beta_bar: sys.beta.beta_bar(),
            t_opt: sys.t_opt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        // t_s = inf is the no-relaxation limit and is allowed.
        let ok = self.t_s > 0.0
            && self.n0 > 0.0
            && self.t_opt > 0.0
            && self.t_opt.is_finite()
            && (0.0..=1.0).contains(&self.beta14)
            && (0.0..=1.0).contains(&self.beta_bar);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("{self:?}")))
        }
    }
}

/// Coefficients of the direct + Raman + Orbach spin-lattice rate law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateLawParams {
    /// Hz/K
    pub alpha_d: f64,
    /// Hz/K^9
    pub alpha_r: f64,
    /// Hz
    pub alpha_o: f64,
    /// Crystal-field gap, joules.
    pub delta: f64,
    /// Validity range, kelvin.
    pub t_min: f64,
    pub t_max: f64,
}

impl RateLawParams {
    pub fn raman(alpha_r: f64) -> Self {
        RateLawParams {
            alpha_d: 0.0,
            alpha_r,
            alpha_o: 0.0,
            delta: 0.0,
            t_min: 0.0,
            t_max: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha_d >= 0.0
            && self.alpha_r >= 0.0
            && self.alpha_o >= 0.0
            && (self.alpha_o == 0.0 || self.delta > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("{self:?}")))
        }
    }
}

/// `gamma_h(T) = gamma_h0 + gamma_r * T^9`, FWHM in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinewidthModel {
    pub gamma_h0: f64,
    pub gamma_r: f64,
}

impl LinewidthModel {
    /// Site II, 2 ppm, two-pulse echo.
    pub const PPM2: LinewidthModel = LinewidthModel {
        gamma_h0: 350.0,
        gamma_r: 2.57e-5,
    };
    /// Site II, 10 ppm, two-pulse echo.
    pub const PPM10: LinewidthModel = LinewidthModel {
        gamma_h0: 1030.0,
        gamma_r: 3.45e-5,
    };

    pub fn validate(&self) -> Result<()> {
        if self.gamma_h0 >= 0.0 && self.gamma_r >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TraceKind {
    HoleArea,
    Echo2P,
    Echo3PvsTW,
    Echo3PvsTau,
    HoleProfile,
    /// Spin-lattice rate against temperature; the abscissa is kelvin.
    RateVsTemperature,
    /// Homogeneous linewidth against temperature; the abscissa is kelvin.
    LinewidthVsTemperature,
    /// Echo peak against sequence index; the abscissa is dimensionless.
    EchoTrain,
}

impl TraceKind {
    pub const ALL: [TraceKind; 8] = [
        TraceKind::HoleArea,
        TraceKind::Echo2P,
        TraceKind::Echo3PvsTW,
        TraceKind::Echo3PvsTau,
        TraceKind::HoleProfile,
        TraceKind::RateVsTemperature,
        TraceKind::LinewidthVsTemperature,
        TraceKind::EchoTrain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TraceKind::HoleArea => "HoleArea",
            TraceKind::Echo2P => "Echo2P",
            TraceKind::Echo3PvsTW => "Echo3P_vs_TW",
            TraceKind::Echo3PvsTau => "Echo3P_vs_tau",
            TraceKind::HoleProfile => "HoleProfile",
            TraceKind::RateVsTemperature => "RateVsTemperature",
            TraceKind::LinewidthVsTemperature => "LinewidthVsTemperature",
            TraceKind::EchoTrain => "EchoTrain",
        }
    }

    pub fn parse(s: &str) -> Option<TraceKind> {
        TraceKind::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Header of the abscissa column, including its unit suffix.
    pub fn abscissa_column(self) -> &'static str {
        match self {
            TraceKind::RateVsTemperature | TraceKind::LinewidthVsTemperature => "T_K",
            TraceKind::EchoTrain => "n",
            _ => "t_s",
        }
    }
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub y: f64,
    pub sigma: Option<f64>,
}

/// Ordered samples of one measured or simulated signal.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayTrace {
    pub samples: Vec<Sample>,
    /// kelvin
    pub temperature: f64,
    pub kind: TraceKind,
    pub metadata: BTreeMap<String, String>,
}

impl DecayTrace {
    pub fn new(kind: TraceKind, temperature: f64, samples: Vec<Sample>) -> Result<Self> {
        let trace = DecayTrace {
            samples,
            temperature,
            kind,
            metadata: BTreeMap::new(),
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn from_xy(kind: TraceKind, temperature: f64, t: &[f64], y: &[f64]) -> Result<Self> {
        if t.len() != y.len() {
            return Err(Error::InvalidParams("t and y lengths differ".into()));
        }
        let samples = t
            .iter()
            .zip(y)
            .map(|(&t, &y)| Sample { t, y, sigma: None })
            .collect();
        Self::new(kind, temperature, samples)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            if !s.t.is_finite() || !s.y.is_finite() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "non-finite sample".into(),
                });
            }
            if let Some(sig) = s.sigma {
                if !(sig > 0.0) || !sig.is_finite() {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: format!("sigma_y must be positive, got {sig}"),
                    });
                }
            }
            if i > 0 && !(s.t > self.samples[i - 1].t) {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "abscissa not strictly increasing".into(),
                });
            }
        }
        Ok(())
    }

    pub fn t(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn y(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.y).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamEstimate {
    pub name: String,
    pub value: f64,
    /// Zero for frozen parameters.
    pub stderr: f64,
    pub free: bool,
}

/// Outcome of one least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: String,
    pub params: Vec<ParamEstimate>,
    /// Covariance of the free parameters, in the order they appear in
    /// `params`.
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub dof: usize,
    pub converged: bool,
    pub n_iter: usize,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.name == name).map(|p| p.value)
    }

    pub fn stderr(&self, name: &str) -> Option<f64> {
        self.params
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.stderr)
    }

    pub fn reduced_chi2(&self) -> f64 {
        self.chi2 / self.dof.max(1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_system() -> HyperfineSystem {
        HyperfineSystem {
            site_label: SiteLabel::SiteII,
            t_opt: 1.3e-3,
            beta: BranchingRatios::from_ff_scalars(0.72, 0.21),
            ground_energies: None,
            n_total: 1.0,
        }
    }

    #[test]
    fn valid_system_has_no_violations() {
        assert!(validate_system(&paper_system()).is_empty());
        let mut s = paper_system();
        s.beta = BranchingRatios::from_slr_scalars(0.54, 0.153);
        assert!(validate_system(&s).is_empty());
    }

    #[test]
    fn bad_row_sum_names_the_row() {
        let mut s = paper_system();
        s.beta.0[2] = [0.3, 0.3, 0.2, 0.1];
        let v = validate_system(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "beta row 3e");
    }

    #[test]
    fn zero_lifetime_is_one_violation() {
        let mut s = paper_system();
        s.t_opt = 0.0;
        let v = validate_system(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "t_opt");
    }

    #[test]
    fn non_increasing_energies_flagged() {
        let mut s = paper_system();
        s.ground_energies = Some([0.0, 1.0, 1.0, 2.0]);
        let v = validate_system(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "ground_energies");
    }

    #[test]
    fn validation_is_idempotent() {
        let mut s = paper_system();
        s.t_opt = -1.0;
        s.beta.0[0][0] = 1.5;
        let a = validate_system(&s);
        let b = validate_system(&s);
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
    }

    #[test]
    fn scalar_adapters() {
        let ff = BranchingRatios::from_ff_scalars(0.72, 0.21);
        assert!((ff.beta14() - 0.72).abs() < 1e-15);
        assert!((ff.beta11_plus_12() - 0.21).abs() < 1e-15);
        let slr = BranchingRatios::from_slr_scalars(0.54, 0.153);
        assert!((slr.beta_bar() - 0.153).abs() < 1e-15);
    }

    #[test]
    fn t2_conversion() {
        // 320 Hz is a coherence time of about 1 ms.
        let t2 = coherence_time(320.0);
        assert!((t2 - 0.99472e-3).abs() < 1e-7);
        assert!((linewidth_from_t2(t2) - 320.0).abs() < 1e-9);
    }

    #[test]
    fn trace_rejects_non_monotonic_time() {
        let err = DecayTrace::from_xy(TraceKind::HoleArea, 2.0, &[0.0, 2.0, 1.0], &[1.0; 3]);
        assert!(matches!(err, Err(Error::Parse { line: 3, .. })));
    }
}
