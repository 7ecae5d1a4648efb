//! TOML run configuration.
//!
//! ```toml
//! seed = 42
//! out_dir = "out"
//!
//! [system]
//! site_label = "SiteII"
//! t_opt = 1.3e-3
//! beta = [[0.105, 0.105, 0.07, 0.72], ...]
//!
//! [model]
//! name = "FFHoleDecay"
//! fixed = { t_opt = 1.3e-3 }
//! free = ["beta14"]
//! init = { t_ff = 2e-3 }
//!
//! [chirp]
//! span_Hz = 2e6
//! duration_s = 60e-6
//!
//! [synthetic]
//! truth = { t_ff = 1.91e-3 }
//! noise = 0.01
//! abscissa = { start = 0.0, end = 6e-3, n_points = 50 }
//! temperature_K = 1.8
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synthetic::{Abscissa, NoiseKind, SyntheticSpec};
use crate::chirp::ChirpReadout;
use crate::error::{Error, Result};
use crate::fitting::{AdapterKind, ModelAdapter};
use crate::model::{validate_system, HyperfineSystem, TraceKind};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
    #[serde(default)]
    pub free: Vec<String>,
    #[serde(default)]
    pub init: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChirpConfig {
    #[serde(rename = "span_Hz")]
    pub span: f64,
    #[serde(rename = "duration_s")]
    pub duration: f64,
    #[serde(default)]
    pub n_samples: Option<usize>,
}

impl ChirpConfig {
    pub fn readout(&self) -> Result<ChirpReadout> {
        match self.n_samples {
            Some(n) => ChirpReadout::with_samples(self.span, self.duration, n),
            None => ChirpReadout::new(self.span, self.duration),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    #[serde(default)]
    pub truth: BTreeMap<String, f64>,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub noise_kind: NoiseKind,
    pub abscissa: Abscissa,
    #[serde(rename = "temperature_K", default = "nan")]
    pub temperature: f64,
    #[serde(default)]
    pub kind: Option<String>,
}

fn nan() -> f64 {
    f64::NAN
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub system: Option<HyperfineSystem>,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub chirp: Option<ChirpConfig>,
    #[serde(default)]
    pub synthetic: Option<SyntheticConfig>,
}

impl RunConfig {
    /// Parses and validates a configuration.
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(sys) = &self.system {
            let v = validate_system(sys);
            if !v.is_empty() {
                let msg: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                return Err(Error::InvalidParams(format!("system: {}", msg.join("; "))));
            }
        }
        if self.model.is_some() {
            self.adapter()?;
        }
        if let Some(c) = &self.chirp {
            c.readout()?;
        }
        if self.synthetic.is_some() {
            self.synthetic_spec()?;
        }
        Ok(())
    }

    pub fn model_kind(&self) -> Result<AdapterKind> {
        let m = self
            .model
            .as_ref()
            .ok_or_else(|| Error::Config("no [model] section".into()))?;
        AdapterKind::parse(&m.name)
            .ok_or_else(|| Error::Config(format!("unknown model {:?}", m.name)))
    }

    /// The configured adapter. Values from `[system]` fill `t_opt` and the
    /// branching scalars unless `[model.fixed]` overrides them.
    pub fn adapter(&self) -> Result<ModelAdapter> {
        let kind = self.model_kind()?;
        let m = self.model.as_ref().expect("checked by model_kind");
        let mut a = ModelAdapter::new(kind);
        if let Some(sys) = &self.system {
            let from_system = [
                ("t_opt", sys.t_opt),
                ("beta14", sys.beta.beta14()),
                ("beta11_plus_12", sys.beta.beta11_plus_12()),
                ("beta_bar", sys.beta.beta_bar()),
            ];
            for (name, v) in from_system {
                if a.param(name).is_some() {
                    a = a.with_value(name, v)?;
                }
            }
        }
        for (name, &v) in &m.fixed {
            a = a.fix(name, v)?;
        }
        for name in &m.free {
            a = a.thaw(name)?;
        }
        if let Some(name) = m.init.keys().find(|n| a.param(n).is_none()) {
            return Err(Error::Config(format!(
                "init names unknown parameter {name:?}"
            )));
        }
        if !a.params.iter().any(|p| p.free) {
            return Err(Error::Config(format!("{} has no free parameter", a.name())));
        }
        Ok(a)
    }

    pub fn init(&self) -> Vec<(&str, f64)> {
        self.model
            .as_ref()
            .map(|m| m.init.iter().map(|(k, &v)| (k.as_str(), v)).collect())
            .unwrap_or_default()
    }

    pub fn synthetic_spec(&self) -> Result<SyntheticSpec> {
        let s = self
            .synthetic
            .as_ref()
            .ok_or_else(|| Error::Config("no [synthetic] section".into()))?;
        let adapter = self.adapter()?;
        let kind = match &s.kind {
            None => None,
            Some(k) => Some(
                TraceKind::parse(k)
                    .ok_or_else(|| Error::Config(format!("unknown trace kind {k:?}")))?,
            ),
        };
        let mut truth: BTreeMap<String, f64> = adapter
            .params
            .iter()
            .map(|p| (p.name.clone(), p.value))
            .collect();
        for (k, &v) in &s.truth {
            if !truth.contains_key(k) {
                return Err(Error::Config(format!(
                    "truth names unknown parameter {k:?}"
                )));
            }
            truth.insert(k.clone(), v);
        }
        if !(s.noise >= 0.0) {
            return Err(Error::Config(format!(
                "noise must be >= 0, got {}",
                s.noise
            )));
        }
        Ok(SyntheticSpec {
            model: adapter.kind,
            truth,
            noise: s.noise,
            noise_kind: s.noise_kind,
            abscissa: s.abscissa.clone(),
            temperature: s.temperature,
            kind,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CFG: &str = r#"
seed = 42

[system]
site_label = "SiteII"
t_opt = 1.3e-3
beta = [[0.105, 0.105, 0.07, 0.72], [0.25, 0.25, 0.25, 0.25], [0.25, 0.25, 0.25, 0.25], [0.25, 0.25, 0.25, 0.25]]

[model]
name = "FFHoleDecay"
free = ["beta14"]
init = { t_ff = 2e-3 }

[synthetic]
truth = { t_ff = 1.91e-3 }
noise = 0.01
abscissa = { start = 0.0, end = 6e-3, n_points = 50 }
temperature_K = 1.8
"#;

    #[test]
    fn parses_and_builds_adapter() {
        let c = RunConfig::from_toml_str(CFG).unwrap();
        assert_eq!(c.seed, 42);
        let a = c.adapter().unwrap();
        assert!(a.param("beta14").unwrap().free);
        assert_eq!(a.param("beta14").unwrap().value, 0.72);
        assert_eq!(c.init(), vec![("t_ff", 2e-3)]);
        let s = c.synthetic_spec().unwrap();
        assert_eq!(s.truth["t_ff"], 1.91e-3);
        assert_eq!(s.abscissa.values().len(), 50);
    }

    #[test]
    fn bad_row_sum_is_a_validation_error() {
        let bad = CFG.replace("[0.105, 0.105, 0.07, 0.72]", "[0.2, 0.105, 0.07, 0.72]");
        match RunConfig::from_toml_str(&bad) {
            Err(Error::InvalidParams(msg)) => assert!(msg.contains("beta row 1e")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(RunConfig::from_toml_str(&CFG.replace("seed = 42", "sed = 42")).is_err());
        assert!(RunConfig::from_toml_str(&CFG.replace("\"beta14\"", "\"beta99\"")).is_err());
        assert!(RunConfig::from_toml_str(&CFG.replace("FFHoleDecay", "Nope")).is_err());
        assert!(RunConfig::from_toml_str(&CFG.replace("truth = { t_ff", "truth = { t_x")).is_err());
    }

    #[test]
    fn empty_config_is_valid() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }
}
