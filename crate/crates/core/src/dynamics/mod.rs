//! Population dynamics of the laser-resonant subclass after a burn.
//!
//! Two closed-form regimes are provided. Below ~5 K the 3g-4g flip-flop is
//! the only ground-state relaxation channel; above ~6 K a uniform
//! spin-lattice rate acts in both manifolds. Both are checked against a
//! direct numerical integration of the underlying rate equations in
//! [`rate_equations`].

pub mod rate_equations;

pub use rate_equations::{integrate_rate_equations, RateEquationOptions};

use crate::error::{check_time, Error, Result};
use crate::model::{FFParams, HyperfineSystem, SLRParams, BOLTZMANN};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegimeModel {
    FlipFlopLT(FFParams),
    SLRHT(SLRParams),
}

impl RegimeModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            RegimeModel::FlipFlopLT(p) => p.validate(),
            RegimeModel::SLRHT(p) => p.validate(),
        }
    }

    pub fn n0(&self) -> f64 {
        match self {
            RegimeModel::FlipFlopLT(p) => p.n0,
            RegimeModel::SLRHT(p) => p.n0,
        }
    }

    /// `n4g_eq - n4g(t)`
    pub fn deficit(&self, t: f64) -> Result<f64> {
        match self {
            RegimeModel::FlipFlopLT(p) => ff_population_deficit(p, t),
            RegimeModel::SLRHT(p) => slr_population_deficit(p, t),
        }
    }

    /// Shortest and longest relaxation time constants of the model.
    pub fn timescales(&self) -> (f64, f64) {
        let (a, b) = match self {
            RegimeModel::FlipFlopLT(p) => (p.t_opt, p.t_ff),
            RegimeModel::SLRHT(p) => (p.t_opt, p.t_s),
        };
        let finite_max = if b.is_finite() { a.max(b) } else { a };
        (a.min(b), finite_max)
    }
}

/// `(exp(-a t) - exp(-c t)) / (c - a)`, continuous through `a == c` where
/// it tends to `t exp(-a t)`.
pub(crate) fn exp_diff_quotient(a: f64, c: f64, t: f64) -> f64 {
    let d = c - a;
    let scale = a.abs().max(c.abs());
    if d.abs() <= 1e-9 * scale {
        let x = d * t;
        return t * (-a * t).exp() * (1.0 - x / 2.0 + x * x / 6.0);
    }
    if (d * t).abs() > 1.0 {
        ((-a * t).exp() - (-c * t).exp()) / d
    } else {
        -(-a * t).exp() * (-d * t).exp_m1() / d
    }
}

/// Flip-flop regime: `n4g_eq - n4g(t)`.
///
/// Solves `dD/dt = -2D/T_ff + N b/T_ff - N e^{-t/T_opt} (b14/T_opt + (b - 1)/T_ff)`
/// with `D(0) = N`, where `b = beta11 + beta12`.
pub fn ff_population_deficit(p: &FFParams, t: f64) -> Result<f64> {
    check_time("t", t)?;
    p.validate()?;
    let a = 1.0 / p.t_opt;
    let c = 2.0 / p.t_ff;
    let b = p.beta11_plus_12;
    let decay = (-c * t).exp();
    let drive = (1.0 - b) / p.t_ff - p.beta14 / p.t_opt;
    let d = decay + drive * exp_diff_quotient(a, c, t) + 0.5 * b * (1.0 - decay);
    Ok(p.n0 * d)
}

/// High-temperature regime: population of 1e.
pub fn slr_population_1e(p: &SLRParams, t: f64) -> Result<f64> {
    check_time("t", t)?;
    p.validate()?;
    let k = 4.0 / (3.0 * p.t_s);
    Ok(0.25 * p.n0 * (-t / p.t_opt).exp() * (3.0 * (-k * t).exp() + 1.0))
}

/// High-temperature regime: `n4g_eq - n4g(t)`.
///
/// Three-term form `N(e^{-kt} + A' e^{-kt}(1 - e^{-t/T_opt}) + B'(e^{-t/T_opt} - e^{-kt}))`
/// with `k = 4/(3 T_S)`, `A' = -3(b14 - b_bar)/4` and
/// `B' = 3 T_opt T_S/(4 T_opt - 3 T_S) * (1/(3 T_S) - (b14 + 3 b_bar)/(4 T_opt))`.
pub fn slr_population_deficit(p: &SLRParams, t: f64) -> Result<f64> {
    check_time("t", t)?;
    p.validate()?;
    let k = 4.0 / (3.0 * p.t_s);
    let a = 1.0 / p.t_opt;
    let ek = (-k * t).exp();
    let a_prime = -0.75 * (p.beta14 - p.beta_bar);
    // B' (e^{-t/T_opt} - e^{-kt}) == drive * (e^{-at} - e^{-kt}) / (k - a)
    let drive = 1.0 / (3.0 * p.t_s) - (p.beta14 + 3.0 * p.beta_bar) / (4.0 * p.t_opt);
    let d = ek + a_prime * ek * (-(-a * t).exp_m1()) + drive * exp_diff_quotient(a, k, t);
    Ok(p.n0 * d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumBranch {
    /// Equal distribution at or above 1 K, Boltzmann below.
    Auto,
    EqualDistribution,
    Boltzmann,
}

/// Temperature above which the ground sublevels are taken as equally populated.
pub const EQUAL_DISTRIBUTION_ABOVE_K: f64 = 1.0;

/// Thermal populations of 1g..4g.
pub fn equilibrium_populations(
    sys: &HyperfineSystem,
    temperature: f64,
    branch: EquilibriumBranch,
) -> Result<[f64; 4]> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidParams(format!(
            "temperature must be > 0 K, got {temperature}"
        )));
    }
    let boltzmann = match branch {
        EquilibriumBranch::EqualDistribution => false,
        EquilibriumBranch::Boltzmann => true,
        EquilibriumBranch::Auto => temperature < EQUAL_DISTRIBUTION_ABOVE_K,
    };
    if !boltzmann {
        return Ok([sys.n_total / 4.0; 4]);
    }
    let e = sys.ground_energies.ok_or(Error::MissingEnergies)?;
    let kt = BOLTZMANN * temperature;
    let e_min = e.iter().cloned().fold(f64::INFINITY, f64::min);
    let w = e.map(|ei| (-(ei - e_min) / kt).exp());
    let z: f64 = w.iter().sum();
    Ok(w.map(|wi| sys.n_total * wi / z))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpinTemperature {
    Kelvin(f64),
    /// Equal populations: the Boltzmann fit is unbounded.
    Infinite,
}

impl SpinTemperature {
    pub fn kelvin(self) -> f64 {
        match self {
            SpinTemperature::Kelvin(t) => t,
            SpinTemperature::Infinite => f64::INFINITY,
        }
    }
}

/// Temperature of the Boltzmann distribution closest (least squares on log
/// populations) to `populations`.
pub fn estimate_spin_temperature(
    populations: [f64; 4],
    energies: [f64; 4],
) -> Result<SpinTemperature> {
    if populations.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(Error::InvalidParams("populations must be positive".into()));
    }
    if energies.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParams(
            "energies must be strictly increasing".into(),
        ));
    }
    if populations.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12)) {
        return Err(Error::UndefinedTemperature);
    }
    // ln p_i = c - E_i / kT: ordinary least squares for the slope.
    let logs = populations.map(f64::ln);
    let e_mean = energies.iter().sum::<f64>() / 4.0;
    let l_mean = logs.iter().sum::<f64>() / 4.0;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (e, l) in energies.iter().zip(&logs) {
        sxy += (e - e_mean) * (l - l_mean);
        sxx += (e - e_mean) * (e - e_mean);
    }
    let slope = sxy / sxx;
    let span = energies[3] - energies[0];
    if (slope * span).abs() < 1e-12 {
        return Ok(SpinTemperature::Infinite);
    }
    if slope > 0.0 {
        return Err(Error::UndefinedTemperature);
    }
    Ok(SpinTemperature::Kelvin(-1.0 / (BOLTZMANN * slope)))
}
