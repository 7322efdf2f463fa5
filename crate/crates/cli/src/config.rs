use std::path::{Path, PathBuf};

use carma_core::{CarmaModel, Driver, ModelSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    SampleArma,
    Alpha,
    Riemann,
    Recover,
    KernelStudy,
}

/// A model given inline, by file path, or by one of the study presets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Inline(ModelSpec),
    Named(String),
}

pub const PRESETS: [&str; 3] = ["carma21", "car2", "car3"];

pub fn preset(name: &str) -> Option<CarmaModel> {
    let m = match name {
        "carma21" => CarmaModel::from_real(&[-0.7, -1.2], &[3.0], 1.0),
        "car2" => CarmaModel::from_real(&[-0.7, -1.2], &[], 1.0),
        "car3" => CarmaModel::from_real(&[-0.7, -1.2, -2.6], &[], 1.0),
        _ => return None,
    };
    m.ok()
}

impl ModelSource {
    pub fn load(&self) -> CliResult<CarmaModel> {
        match self {
            ModelSource::Inline(spec) => Ok(CarmaModel::try_from(spec.clone())?),
            ModelSource::Named(name) => {
                let path = Path::new(name);
                if path.is_file() {
                    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                    let spec: ModelSpec = serde_json::from_str(&text).map_err(|e| {
                        CliError::Config(format!("model file {name} is not a valid model: {e}"))
                    })?;
                    Ok(CarmaModel::try_from(spec)?)
                } else if let Some(m) = preset(name) {
                    Ok(m)
                } else {
                    Err(CliError::Config(format!(
                        "model `{name}` is neither a readable file nor a preset ({})",
                        PRESETS.join(", ")
                    )))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Zero,
    #[default]
    Stationary,
    BurnIn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    #[default]
    Theoretical,
    /// Simulated Brownian path with the AR part from modified Yule-Walker.
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub drivers: Vec<Driver>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub h: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Path length for `simulate` and empirical kernel studies; order for `alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pq: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subgrid: Option<usize>,
    #[serde(default)]
    pub init: InitKind,
    #[serde(default)]
    pub states: bool,
    #[serde(default)]
    pub asymptotic: bool,
    #[serde(default)]
    pub kernel_mode: KernelMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            kind,
            model: None,
            deltas: None,
            drivers: Vec::new(),
            seed: 0,
            paths: None,
            h: Vec::new(),
            t: None,
            n: None,
            pq: None,
            subgrid: None,
            init: InitKind::default(),
            states: false,
            asymptotic: false,
            kernel_mode: KernelMode::default(),
            out: None,
        }
    }

    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn model(&self) -> CliResult<CarmaModel> {
        self.model
            .as_ref()
            .ok_or_else(|| self.missing("model"))?
            .load()
    }

    pub fn deltas(&self) -> CliResult<Vec<f64>> {
        match &self.deltas {
            Some(d) => Ok(d.clone()),
            None if self.kind == ExperimentKind::KernelStudy => Ok(vec![0.25, 2f64.powi(-6)]),
            None => Err(self.missing("deltas")),
        }
    }

    pub fn drivers(&self) -> Vec<Driver> {
        if self.drivers.is_empty() {
            vec![Driver::BrownianMotion]
        } else {
            self.drivers.clone()
        }
    }

    fn missing(&self, field: &str) -> CliError {
        CliError::Config(format!(
            "`{field}` is required for {} experiments",
            serde_json::to_string(&self.kind).unwrap_or_default().trim_matches('"')
        ))
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if let Some(d) = &self.deltas {
            if d.is_empty() {
                return bad("`deltas` must list at least one sampling step".into());
            }
            if let Some(v) = d.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return bad(format!("sampling steps must be positive and finite, got {v}"));
            }
        }
        for drv in &self.drivers {
            drv.validate()?;
        }
        if let Some(h) = self.h.iter().find(|h| !(0.0..=1.0).contains(*h)) {
            return bad(format!("offsets h must lie in [0, 1], got {h}"));
        }
        if self.subgrid == Some(0) {
            return bad("`subgrid` must be at least 1".into());
        }
        match self.kind {
            ExperimentKind::Simulate => {
                self.model()?;
                self.deltas()?;
                if self.n.unwrap_or(0) == 0 {
                    return Err(self.missing("n (path length, at least 1)"));
                }
            }
            ExperimentKind::SampleArma => {
                self.model()?;
                self.deltas()?;
            }
            ExperimentKind::Alpha => {
                if self.n.is_none() {
                    return Err(self.missing("n"));
                }
            }
            ExperimentKind::Riemann => match self.pq {
                Some(pq) if !(1..=3).contains(&pq) => {
                    return bad(format!("matching rules exist for p - q in 1..=3, got {pq}"));
                }
                Some(_) => {}
                None => {
                    self.model()?;
                    self.deltas()?;
                    if self.h.is_empty() {
                        return Err(self.missing("h"));
                    }
                }
            },
            ExperimentKind::Recover => {
                self.model()?;
                self.deltas()?;
                match self.t {
                    Some(t) if t > 0.0 && t.is_finite() => {}
                    _ => return Err(self.missing("t (positive horizon)")),
                }
                if self.paths.unwrap_or(0) < 2 {
                    return Err(self.missing("paths (at least 2)"));
                }
            }
            ExperimentKind::KernelStudy => {
                self.deltas()?;
                if self.kernel_mode == KernelMode::Empirical && self.n.unwrap_or(0) == 0 {
                    return Err(self.missing("n (simulated path length)"));
                }
                if let Some(m) = &self.model {
                    m.load()?;
                }
            }
        }
        Ok(())
    }
}
