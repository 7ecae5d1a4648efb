//! Measured quantities derived from the population dynamics and the
//! coherence parameters.

use std::f64::consts::PI;

use crate::dynamics::{slr_population_1e, slr_population_deficit, RegimeModel};
use crate::error::{check_time, Error, Result};
use crate::model::{LinewidthModel, RateLawParams, SLRParams, BOLTZMANN};

/// Laser linewidth used for hole-width conversion unless overridden, Hz.
pub const DEFAULT_LASER_FWHM: f64 = 28e3;

/// Three-pulse echo timing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchoSequence {
    pub tau_d: f64,
    pub t_w: f64,
    pub i0: f64,
    /// When set, the intensity is multiplied by `exp(-4 pi tau_d gamma_eff)`.
    pub gamma_eff: Option<f64>,
}

impl EchoSequence {
    pub fn new(tau_d: f64, t_w: f64, i0: f64) -> Self {
        EchoSequence {
            tau_d,
            t_w,
            i0,
            gamma_eff: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tau_d > 0.0) || !(self.t_w >= 0.0) {
            return Err(Error::InvalidParams(format!("{self:?}")));
        }
        Ok(())
    }
}

/// Hole area `c (n4g_eq - n4g(t))`.
pub fn hole_area(model: &RegimeModel, scale_c: f64, t: f64) -> Result<f64> {
    Ok(scale_c * model.deficit(t)?)
}

/// Three-pulse echo intensity against waiting time, spectral diffusion
/// neglected unless `seq.gamma_eff` is set.
pub fn echo3_intensity(p: &SLRParams, seq: &EchoSequence) -> Result<f64> {
    seq.validate()?;
    let s = slr_population_1e(p, seq.t_w)? + slr_population_deficit(p, seq.t_w)?;
    let mut i = 0.25 * seq.i0 * s * s;
    if let Some(g) = seq.gamma_eff {
        i *= (-4.0 * PI * seq.tau_d * g).exp();
    }
    Ok(i)
}

/// Two-pulse echo decay `i0 exp(-4 pi tau_d gamma_h)`.
pub fn echo2_intensity(gamma_h: f64, tau_d: f64, i0: f64) -> Result<f64> {
    if !(gamma_h >= 0.0) {
        return Err(Error::InvalidParams(format!("gamma_h = {gamma_h}")));
    }
    check_time("tau_d", tau_d)?;
    Ok(i0 * (-4.0 * PI * tau_d * gamma_h).exp())
}

/// Overall spin-lattice rate `1/T_S`, Hz.
pub fn slr_rate(p: &RateLawParams, temperature: f64) -> Result<f64> {
    p.validate()?;
    if !(temperature > 0.0) {
        return Err(Error::InvalidParams(format!(
            "temperature must be > 0 K, got {temperature}"
        )));
    }
    let mut rate = p.alpha_d * temperature + p.alpha_r * temperature.powi(9);
    if p.alpha_o > 0.0 {
        let x = p.delta / (BOLTZMANN * temperature);
        // exp_m1 overflows to inf beyond ~709, which correctly drops the term.
        let orbach = p.alpha_o / x.exp_m1();
        if orbach.is_finite() {
            rate += orbach;
        }
    }
    Ok(rate)
}

/// `gamma_h0 + gamma_r T^9`, Hz FWHM.
pub fn gamma_h_of_t(m: &LinewidthModel, temperature: f64) -> Result<f64> {
    m.validate()?;
    if !(temperature >= 0.0) {
        return Err(Error::InvalidParams(format!("temperature = {temperature}")));
    }
    Ok(m.gamma_h0 + m.gamma_r * temperature.powi(9))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Flip-flop dominated; the spin lifetime is `T_ff`.
    LowTemperature,
    /// Spin-lattice dominated; the spin lifetime is `T_S`.
    HighTemperature,
}

/// Lifetime-limited (T1-type) part of the homogeneous linewidth, Hz FWHM.
/// An infinite `t_spin` leaves the radiative limit.
pub fn direct_contribution(regime: Regime, t_opt: f64, t_spin: f64) -> Result<f64> {
    if !(t_opt > 0.0) || !(t_spin > 0.0) {
        return Err(Error::InvalidParams("lifetimes must be > 0".into()));
    }
    let spin = match regime {
        Regime::LowTemperature => 1.0 / t_spin,
        // Both 4g and 1e relax at 1/T_S.
        Regime::HighTemperature => 2.0 / t_spin,
    };
    Ok((1.0 / t_opt + spin) / (2.0 * PI))
}

/// Homogeneous linewidth from a burnt hole width: `(hole - 2 laser) / 2`.
pub fn hole_width_to_gamma_h(hole_fwhm: f64, laser_fwhm: f64) -> Result<f64> {
    let g = (hole_fwhm - 2.0 * laser_fwhm) / 2.0;
    // Accept round-off at the laser-limited floor.
    if g < -1e-9 * hole_fwhm.abs().max(1.0) || !g.is_finite() {
        return Err(Error::LaserLimited {
            hole: hole_fwhm,
            laser: laser_fwhm,
        });
    }
    Ok(g.max(0.0))
}

/// Spectral-diffusion part `gamma_eff - gamma_h`.
pub fn effective_linewidth_decompose(gamma_eff: f64, gamma_h: f64) -> Result<f64> {
    let sd = gamma_eff - gamma_h;
    if !(sd >= 0.0) {
        return Err(Error::NegativeSpectralDiffusion { gamma_eff, gamma_h });
    }
    Ok(sd)
}

/// One row of the linewidth budget at a given temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinewidthBudget {
    pub temperature: f64,
    pub gamma_h: f64,
    /// Radiative plus spin-lifetime broadening.
    pub gamma_direct: f64,
    /// `1 / (2 pi T_opt)`
    pub gamma_radiative: f64,
    /// Part of the T^9 broadening not explained by spin lifetimes.
    pub gamma_elastic_raman: f64,
    /// `gamma_h - gamma_direct - gamma_elastic_raman`
    pub residual: f64,
}

impl LinewidthBudget {
    /// Share of the Raman broadening `gamma_r T^9` due to spin lifetimes.
    pub fn direct_raman_fraction(&self) -> f64 {
        let direct = self.gamma_direct - self.gamma_radiative;
        let raman = direct + self.gamma_elastic_raman;
        if raman > 0.0 {
            direct / raman
        } else {
            0.0
        }
    }
}

/// High-temperature linewidth budget: total from `lw`, direct part from the
/// spin-lattice rate law, elastic Raman as the rest of the `T^9` term.
pub fn linewidth_budget(
    lw: &LinewidthModel,
    rates: &RateLawParams,
    t_opt: f64,
    temperature: f64,
) -> Result<LinewidthBudget> {
    let gamma_h = gamma_h_of_t(lw, temperature)?;
    let rate = slr_rate(rates, temperature)?;
    let t_s = if rate > 0.0 {
        1.0 / rate
    } else {
        f64::INFINITY
    };
    let gamma_direct = direct_contribution(Regime::HighTemperature, t_opt, t_s)?;
    let raman_total = lw.gamma_r * temperature.powi(9);
    let gamma_radiative = 1.0 / (2.0 * PI * t_opt);
    let gamma_elastic_raman = raman_total - (gamma_direct - gamma_radiative);
    Ok(LinewidthBudget {
        temperature,
        gamma_h,
        gamma_direct,
        gamma_radiative,
        gamma_elastic_raman,
        residual: gamma_h - gamma_direct - gamma_elastic_raman,
    })
}

/// `alpha_R / (pi gamma_R)`: fraction of the `T^9` optical broadening
/// carried by the inelastic spin-lattice process.
pub fn direct_raman_fraction(alpha_r: f64, gamma_r: f64) -> f64 {
    alpha_r / (PI * gamma_r)
}
