//! Scenario configuration files.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::RunError;
use crate::diffusion::{presets, DiffusionModel};
use crate::feedback::{ControlPolicy, PolicyKind};
use crate::grid::Grid1D;
use crate::metrics::EnsembleConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    pub run: RunSection,
    pub policy: Option<PolicySection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: String,
    /// Required: there is no clock-based default.
    pub seed: Option<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

/// Preset name plus its numeric parameters; unused parameters are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub preset: String,
    pub a: Option<f64>,
    pub c: Option<f64>,
    pub sigma: Option<f64>,
    pub scale: Option<f64>,
    pub obs_gain: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub n_cells: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub dt: f64,
    pub horizon: f64,
    pub ensemble: usize,
    pub sample_stride: usize,
    #[serde(default)]
    pub x0_mean: f64,
    pub x0_var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub kind: String,
    pub gain: Option<f64>,
    pub threshold: Option<f64>,
    pub level: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub snapshots: bool,
}

fn config_err(msg: impl Into<String>) -> RunError {
    RunError::Config(msg.into())
}

fn need(value: Option<f64>, preset: &str, key: &str) -> Result<f64, RunError> {
    match value {
        Some(v) if v.is_finite() => Ok(v),
        Some(v) => Err(config_err(format!("model.{key} = {v} is not finite"))),
        None => Err(config_err(format!("preset {preset:?} requires model.{key}"))),
    }
}

fn reject(value: Option<f64>, preset: &str, key: &str) -> Result<(), RunError> {
    match value {
        Some(_) => Err(config_err(format!("preset {preset:?} takes no model.{key}"))),
        None => Ok(()),
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn seed(&self) -> Result<u64, RunError> {
        self.scenario.seed.ok_or_else(|| config_err("scenario.seed is required"))
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<(), RunError> {
        self.seed()?;
        let r = &self.run;
        if !(r.dt > 0.0 && r.dt.is_finite()) {
            return Err(config_err(format!("run.dt must be positive, got {}", r.dt)));
        }
        if !(r.horizon >= 10.0 * r.dt) {
            return Err(config_err(format!("run.horizon must be at least 10·dt, got {}", r.horizon)));
        }
        if r.ensemble == 0 {
            return Err(config_err("run.ensemble must be at least 1"));
        }
        if r.sample_stride == 0 {
            return Err(config_err("run.sample_stride must be positive"));
        }
        if !(r.x0_var > 0.0) {
            return Err(config_err("run.x0_var must be positive"));
        }
        let model = self.model()?;
        self.grid(&model)?;
        self.policy()?;
        self.ensemble_config(&model)?.validate().map_err(|e| config_err(e.to_string()))?;
        Ok(())
    }

    pub fn model(&self) -> Result<DiffusionModel, RunError> {
        let m = &self.model;
        let p = m.preset.as_str();
        match p {
            "brownian" => {
                reject(m.a, p, "a")?;
                reject(m.c, p, "c")?;
                reject(m.scale, p, "scale")?;
                Ok(presets::brownian(need(m.sigma, p, "sigma")?, need(m.obs_gain, p, "obs_gain")?))
            }
            "ou" => {
                reject(m.c, p, "c")?;
                reject(m.scale, p, "scale")?;
                Ok(presets::ou(need(m.a, p, "a")?, need(m.sigma, p, "sigma")?, need(m.obs_gain, p, "obs_gain")?))
            }
            "lqg" => {
                reject(m.scale, p, "scale")?;
                reject(m.obs_gain, p, "obs_gain")?;
                Ok(presets::lqg_scalar(need(m.a, p, "a")?, need(m.sigma, p, "sigma")?, need(m.c, p, "c")?))
            }
            "double_well" => {
                reject(m.a, p, "a")?;
                reject(m.c, p, "c")?;
                Ok(presets::double_well(
                    need(m.scale, p, "scale")?,
                    need(m.sigma, p, "sigma")?,
                    need(m.obs_gain, p, "obs_gain")?,
                ))
            }
            other => Err(config_err(format!("unknown preset {other:?}; expected brownian, ou, lqg or double_well"))),
        }
        .and_then(|model| {
            if let Some(s) = m.sigma {
                if !(s > 0.0) {
                    return Err(config_err("model.sigma must be positive"));
                }
            }
            Ok(model)
        })
    }

    /// Grid box defaults to the model's domain, cells default to 512.
    pub fn grid(&self, model: &DiffusionModel) -> Result<Grid1D, RunError> {
        let (lo, hi) = model.domain()[0];
        Grid1D::new(self.grid.x_min.unwrap_or(lo), self.grid.x_max.unwrap_or(hi), self.grid.n_cells.unwrap_or(512))
            .map_err(|e| config_err(e.to_string()))
    }

    pub fn policy(&self) -> Result<Option<ControlPolicy>, RunError> {
        let Some(p) = &self.policy else { return Ok(None) };
        let kind = match p.kind.as_str() {
            "zero" => PolicyKind::Zero,
            "linear_gain" => {
                PolicyKind::LinearGain { gain: p.gain.ok_or_else(|| config_err("policy linear_gain requires gain"))? }
            }
            "bang_bang" => PolicyKind::BangBang {
                threshold: p.threshold.ok_or_else(|| config_err("policy bang_bang requires threshold"))?,
                level: p.level.ok_or_else(|| config_err("policy bang_bang requires level"))?,
            },
            other => {
                return Err(config_err(format!("unknown policy {other:?}; expected zero, linear_gain or bang_bang")))
            }
        };
        ControlPolicy::new(kind, p.lower.unwrap_or(f64::NEG_INFINITY), p.upper.unwrap_or(f64::INFINITY))
            .map(Some)
            .map_err(|e| config_err(e.to_string()))
    }

    pub fn ensemble_config(&self, model: &DiffusionModel) -> Result<EnsembleConfig, RunError> {
        Ok(EnsembleConfig {
            grid: self.grid(model)?,
            dt: self.run.dt,
            horizon: self.run.horizon,
            n_traj: self.run.ensemble,
            seed: self.seed()?,
            sample_stride: self.run.sample_stride,
            x0_mean: self.run.x0_mean,
            x0_var: self.run.x0_var,
            keep_final_posteriors: false,
            keep_mean_posteriors: self.output.snapshots,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[scenario]
name = "t"
seed = 1
output_dir = "out"

[model]
preset = "lqg"
a = -1.0
sigma = 2.0
c = 1.0

[run]
dt = 0.001
horizon = 1.0
ensemble = 10
sample_stride = 100
x0_var = 0.25
"#;

    #[test]
    fn parses_and_validates() {
        let cfg = ScenarioConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.grid(&cfg.model().unwrap()).unwrap().n_cells(), 512);
    }

    #[test]
    fn rejects_bad_values() {
        for (from, to) in [
            ("dt = 0.001", "dt = 0.0"),
            ("dt = 0.001", "dt = -1.0"),
            ("seed = 1\n", ""),
            ("preset = \"lqg\"", "preset = \"nope\""),
            ("c = 1.0", ""),
            ("horizon = 1.0", "horizon = 0.005"),
            ("ensemble = 10", "ensemble = 0"),
        ] {
            let text = BASE.replacen(from, to, 1);
            assert!(matches!(ScenarioConfig::from_toml(&text), Err(RunError::Config(_))), "{from} -> {to}");
        }
    }
}
