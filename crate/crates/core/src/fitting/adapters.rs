//! Bindings between fit models and traces.

use std::f64::consts::PI;
use std::fmt;

use super::lm::ParamSpec;
use crate::dynamics::{ff_population_deficit, slr_population_1e, slr_population_deficit};
use crate::error::{Error, Result};
use crate::model::{DecayTrace, FFParams, SLRParams, TraceKind, DEFAULT_T_OPT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AdapterKind {
    FFHoleDecay,
    SLRHoleDecay,
    SLR3PE,
    Echo2P,
    OffsetExponential,
    PowerLawRate,
    GammaHvsT,
    EchoTrainCorrection,
    LorentzianProfile,
}

impl AdapterKind {
    pub const ALL: [AdapterKind; 9] = [
        AdapterKind::FFHoleDecay,
        AdapterKind::SLRHoleDecay,
        AdapterKind::SLR3PE,
        AdapterKind::Echo2P,
        AdapterKind::OffsetExponential,
        AdapterKind::PowerLawRate,
        AdapterKind::GammaHvsT,
        AdapterKind::EchoTrainCorrection,
        AdapterKind::LorentzianProfile,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AdapterKind::FFHoleDecay => "FFHoleDecay",
            AdapterKind::SLRHoleDecay => "SLRHoleDecay",
            AdapterKind::SLR3PE => "SLR3PE",
            AdapterKind::Echo2P => "Echo2P",
            AdapterKind::OffsetExponential => "OffsetExponential",
            AdapterKind::PowerLawRate => "PowerLawRate",
            AdapterKind::GammaHvsT => "GammaHvsT",
            AdapterKind::EchoTrainCorrection => "EchoTrainCorrection",
            AdapterKind::LorentzianProfile => "LorentzianProfile",
        }
    }

    pub fn parse(s: &str) -> Option<AdapterKind> {
        AdapterKind::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn accepts(self, kind: TraceKind) -> bool {
        use TraceKind::*;
        match self {
            AdapterKind::FFHoleDecay
            | AdapterKind::SLRHoleDecay
            | AdapterKind::OffsetExponential => kind == HoleArea,
            AdapterKind::SLR3PE => kind == Echo3PvsTW,
            AdapterKind::Echo2P => matches!(kind, Echo2P | Echo3PvsTau),
            AdapterKind::PowerLawRate => kind == RateVsTemperature,
            AdapterKind::GammaHvsT => kind == LinewidthVsTemperature,
            AdapterKind::EchoTrainCorrection => kind == EchoTrain,
            AdapterKind::LorentzianProfile => kind == HoleProfile,
        }
    }

    /// Default parameter table: free parameters first, then frozen ones.
    fn default_params(self) -> Vec<ParamSpec> {
        use ParamSpec as P;
        match self {
            AdapterKind::FFHoleDecay => vec![
                P::positive("t_ff", 2e-3),
                P::positive("scale", 1.0),
                P::fixed("t_opt", DEFAULT_T_OPT),
                P::fixed("beta14", FFParams::BETA14),
                P::fixed("beta11_plus_12", FFParams::BETA11_PLUS_12),
            ],
            AdapterKind::SLRHoleDecay | AdapterKind::SLR3PE => vec![
                P::positive("t_s", 1e-3),
                P::positive("scale", 1.0),
                P::fixed("t_opt", DEFAULT_T_OPT),
                P::fixed("beta14", SLRParams::BETA14),
                P::fixed("beta_bar", SLRParams::BETA_BAR),
            ],
            AdapterKind::Echo2P => vec![P::free("i0", 1.0), P::positive("gamma_h", 1e3)],
            AdapterKind::OffsetExponential => vec![
                P::free("a", 0.0),
                P::free("b", 1.0),
                P::fixed("t_opt", DEFAULT_T_OPT),
            ],
            AdapterKind::PowerLawRate => {
                vec![P::positive("alpha", 1e-5), P::fixed("exponent", 9.0)]
            }
            AdapterKind::GammaHvsT => vec![
                P::positive("gamma_h0", 300.0),
                P::positive("gamma_r", 1e-5),
                P::fixed("exponent", 9.0),
            ],
            AdapterKind::EchoTrainCorrection => {
                vec![P::free("a", 1.0), P::free("b", 0.1), P::free("c", 10.0)]
            }
            AdapterKind::LorentzianProfile => vec![
                P::free("baseline", 1.0),
                P::free("amplitude", 0.5),
                P::free("center", 0.0),
                P::positive("fwhm", 1e4),
            ],
        }
    }
}

impl fmt::Display for AdapterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A model with its parameter table (bounds, frozen flags, values).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelAdapter {
    pub kind: AdapterKind,
    pub params: Vec<ParamSpec>,
}

impl ModelAdapter {
    pub fn new(kind: AdapterKind) -> Self {
        ModelAdapter {
            kind,
            params: kind.default_params(),
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.params
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| Error::InvalidParams(format!("{} has no parameter {name}", self.kind)))
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn param_mut(&mut self, name: &str) -> Result<&mut ParamSpec> {
        let i = self.index(name)?;
        Ok(&mut self.params[i])
    }

    /// Freezes `name` at `value`.
    pub fn fix(mut self, name: &str, value: f64) -> Result<Self> {
        let p = self.param_mut(name)?;
        p.value = value;
        p.free = false;
        Ok(self)
    }

    pub fn thaw(mut self, name: &str) -> Result<Self> {
        self.param_mut(name)?.free = true;
        Ok(self)
    }

    pub fn with_bounds(mut self, name: &str, lower: f64, upper: f64) -> Result<Self> {
        let p = self.param_mut(name)?;
        p.lower = lower;
        p.upper = upper;
        Ok(self)
    }

    pub fn with_value(mut self, name: &str, value: f64) -> Result<Self> {
        self.param_mut(name)?.value = value;
        Ok(self)
    }

    pub fn values(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.value).collect()
    }

    pub fn check_trace(&self, trace: &DecayTrace) -> Result<()> {
        if self.kind.accepts(trace.kind) {
            Ok(())
        } else {
            Err(Error::IncompatibleTrace {
                kind: trace.kind.to_string(),
                adapter: self.kind.to_string(),
            })
        }
    }

    /// Model value at abscissa `x` for the full parameter vector `v`
    /// (ordered as `self.params`). Invalid parameter combinations give NaN.
    pub fn evaluate(&self, v: &[f64], x: f64) -> f64 {
        eval(self.kind, v, x).unwrap_or(f64::NAN)
    }

    /// Data-driven starting values for every parameter.
    pub fn guess(&self, trace: &DecayTrace) -> Vec<f64> {
        let mut v = self.values();
        let t = trace.t();
        let y = trace.y();
        if t.is_empty() {
            return v;
        }
        let set = |v: &mut Vec<f64>, name: &str, val: f64| {
            if let Some(i) = self.params.iter().position(|p| p.name == name) {
                if self.params[i].free && val.is_finite() {
                    v[i] = val;
                }
            }
        };
        let (y0, yn) = (y[0], y[y.len() - 1]);
        let e_fold = |level: f64| -> f64 {
            t.iter()
                .zip(&y)
                .find(|(_, &yy)| yy <= level)
                .map(|(&tt, _)| tt)
                .unwrap_or(t[t.len() - 1])
                .max(t[1.min(t.len() - 1)])
        };
        match self.kind {
            AdapterKind::FFHoleDecay => {
                set(&mut v, "scale", y0);
                let floor = 0.105 * y0;
                set(
                    &mut v,
                    "t_ff",
                    2.0 * e_fold(floor + (y0 - floor) / std::f64::consts::E),
                );
            }
            AdapterKind::SLRHoleDecay => {
                set(&mut v, "scale", y0);
                set(&mut v, "t_s", e_fold(y0 / std::f64::consts::E));
            }
            AdapterKind::SLR3PE => {
                set(&mut v, "scale", y0 / 4.0);
                set(
                    &mut v,
                    "t_s",
                    2.0 * e_fold(y0 / (std::f64::consts::E * std::f64::consts::E)),
                );
            }
            AdapterKind::Echo2P => {
                set(&mut v, "i0", y0);
                let k = t.iter().zip(&y).rposition(|(_, &yy)| yy > 0.0 && y0 > 0.0);
                if let Some(k) = k.filter(|&k| k > 0) {
                    let g = (y0 / y[k]).ln() / (4.0 * PI * (t[k] - t[0]));
                    set(&mut v, "gamma_h", g.max(1e-3));
                }
            }
            AdapterKind::OffsetExponential => {
                set(&mut v, "a", yn);
                set(&mut v, "b", y0 - yn);
            }
            AdapterKind::PowerLawRate => {
                let e = v[self
                    .params
                    .iter()
                    .position(|p| p.name == "exponent")
                    .unwrap()];
                let pts: Vec<f64> = t
                    .iter()
                    .zip(&y)
                    .filter(|(&tt, &yy)| tt > 0.0 && yy > 0.0)
                    .map(|(&tt, &yy)| yy.ln() - e * tt.ln())
                    .collect();
                if !pts.is_empty() {
                    set(
                        &mut v,
                        "alpha",
                        (pts.iter().sum::<f64>() / pts.len() as f64).exp(),
                    );
                }
            }
            AdapterKind::GammaHvsT => {
                let e = v[self
                    .params
                    .iter()
                    .position(|p| p.name == "exponent")
                    .unwrap()];
                let ymin = y.iter().cloned().fold(f64::INFINITY, f64::min);
                let ymax = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let tmax = t[t.len() - 1];
                set(&mut v, "gamma_h0", ymin.max(1e-3));
                set(&mut v, "gamma_r", ((ymax - ymin) / tmax.powf(e)).max(1e-30));
            }
            AdapterKind::EchoTrainCorrection => {
                set(&mut v, "a", yn);
                set(&mut v, "b", y0 - yn);
                let target = yn + (y0 - yn) / std::f64::consts::E;
                let c = if y0 >= yn {
                    e_fold(target)
                } else {
                    t.iter()
                        .zip(&y)
                        .find(|(_, &yy)| yy >= target)
                        .map(|(&tt, _)| tt)
                        .unwrap_or(t[t.len() - 1])
                };
                set(&mut v, "c", (c - t[0]).max(1.0));
            }
            AdapterKind::LorentzianProfile => {
                let mut sorted = y.clone();
                sorted.sort_by(f64::total_cmp);
                let base = sorted[sorted.len() / 2];
                let (k, _) = y
                    .iter()
                    .enumerate()
                    .max_by(|a, b| (a.1 - base).abs().total_cmp(&(b.1 - base).abs()))
                    .unwrap();
                let amp = base - y[k];
                let half = base - amp / 2.0;
                let inside = |yy: f64| if amp > 0.0 { yy <= half } else { yy >= half };
                let mut lo = k;
                while lo > 0 && inside(y[lo - 1]) {
                    lo -= 1;
                }
                let mut hi = k;
                while hi + 1 < y.len() && inside(y[hi + 1]) {
                    hi += 1;
                }
                let dx = if t.len() > 1 { t[1] - t[0] } else { 1.0 };
                set(&mut v, "baseline", base);
                set(&mut v, "amplitude", amp);
                set(&mut v, "center", t[k]);
                set(&mut v, "fwhm", (t[hi] - t[lo] + dx).max(dx));
            }
        }
        v
    }
}

fn get(v: &[f64], i: usize) -> f64 {
    v[i]
}

fn eval(kind: AdapterKind, v: &[f64], x: f64) -> Result<f64> {
    Ok(match kind {
        AdapterKind::FFHoleDecay => {
            let p = FFParams {
                t_ff: get(v, 0),
                n0: 1.0,
                t_opt: get(v, 2),
                beta14: get(v, 3),
                beta11_plus_12: get(v, 4),
                scale_c: 1.0,
            };
            get(v, 1) * ff_population_deficit(&p, x)?
        }
        AdapterKind::SLRHoleDecay => get(v, 1) * slr_population_deficit(&slr(v), x)?,
        AdapterKind::SLR3PE => {
            let p = slr(v);
            let s = slr_population_1e(&p, x)? + slr_population_deficit(&p, x)?;
            get(v, 1) * s * s
        }
        AdapterKind::Echo2P => get(v, 0) * (-4.0 * PI * x * get(v, 1)).exp(),
        AdapterKind::OffsetExponential => get(v, 0) + get(v, 1) * (-x / get(v, 2)).exp(),
        AdapterKind::PowerLawRate => get(v, 0) * x.powf(get(v, 1)),
        AdapterKind::GammaHvsT => get(v, 0) + get(v, 1) * x.powf(get(v, 2)),
        AdapterKind::EchoTrainCorrection => get(v, 0) + get(v, 1) * (-x / get(v, 2)).exp(),
        AdapterKind::LorentzianProfile => {
            let hw = 0.5 * get(v, 3);
            let d = x - get(v, 2);
            get(v, 0) - get(v, 1) * hw * hw / (d * d + hw * hw)
        }
    })
}

fn slr(v: &[f64]) -> SLRParams {
    SLRParams {
        t_s: get(v, 0),
        n0: 1.0,
        t_opt: get(v, 2),
        beta14: get(v, 3),
        beta_bar: get(v, 4),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compatibility_table() {
        let ff = ModelAdapter::new(AdapterKind::FFHoleDecay);
        let hole = DecayTrace::from_xy(TraceKind::HoleArea, 1.8, &[0.0, 1.0], &[1.0, 0.5]).unwrap();
        let echo = DecayTrace::from_xy(TraceKind::Echo2P, 1.8, &[0.0, 1.0], &[1.0, 0.5]).unwrap();
        assert!(ff.check_trace(&hole).is_ok());
        assert!(matches!(
            ff.check_trace(&echo),
            Err(Error::IncompatibleTrace { .. })
        ));
        assert!(AdapterKind::Echo2P.accepts(TraceKind::Echo3PvsTau));
        for k in AdapterKind::ALL {
            assert_eq!(AdapterKind::parse(k.name()), Some(k));
            assert!(TraceKind::ALL.iter().any(|&t| k.accepts(t)));
        }
    }

    #[test]
    fn every_adapter_has_a_free_parameter_and_ordered_bounds() {
        for k in AdapterKind::ALL {
            let a = ModelAdapter::new(k);
            assert!(a.params.iter().any(|p| p.free), "{k}");
            assert!(a.params.iter().all(|p| p.lower < p.upper));
        }
    }

    #[test]
    fn fix_and_thaw() {
        let a = ModelAdapter::new(AdapterKind::SLRHoleDecay)
            .fix("scale", 0.45)
            .unwrap()
            .thaw("beta14")
            .unwrap();
        assert!(!a.param("scale").unwrap().free);
        assert!(a.param("beta14").unwrap().free);
        assert!(ModelAdapter::new(AdapterKind::Echo2P)
            .fix("nope", 1.0)
            .is_err());
    }

    #[test]
    fn invalid_combination_evaluates_to_nan() {
        let a = ModelAdapter::new(AdapterKind::FFHoleDecay);
        let mut v = a.values();
        v[3] = 0.9;
        v[4] = 0.5;
        assert!(a.evaluate(&v, 1e-3).is_nan());
    }
}
