use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::control::{design_lqr, design_pole_placement, Controller};
use crate::error::{Error, Result};
use crate::lti::{presets, StateSpaceModel};

/// Which experiment a config describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    #[default]
    ErrorVsN,
    ControllerSweep,
}

/// Batch estimator applied to every prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Iv,
    Ls,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Iv => "iv",
            Estimator::Ls => "ls",
        }
    }
}

/// Stabilizing controller used to collect the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerSpec {
    Zero,
    /// LQR with `Q = q·I`, `R = r·I`.
    Lqr {
        #[serde(default = "one")]
        q: f64,
        #[serde(default = "one")]
        r: f64,
    },
    /// Closed-loop poles as `[re, im]` pairs, single-input plants only.
    PolePlacement { poles: Vec<[f64; 2]> },
    /// A controller JSON document.
    File { path: PathBuf },
}

impl Default for ControllerSpec {
    fn default() -> Self {
        ControllerSpec::Lqr { q: 1.0, r: 1.0 }
    }
}

fn one() -> f64 {
    1.0
}

impl ControllerSpec {
    pub fn label(&self) -> String {
        match self {
            ControllerSpec::Zero => "open_loop".into(),
            ControllerSpec::Lqr { .. } => "lqr".into(),
            ControllerSpec::PolePlacement { .. } => "pole_placement".into(),
            ControllerSpec::File { path } => {
                path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "file".into())
            }
        }
    }

    pub fn build(&self, model: &StateSpaceModel) -> Result<Controller> {
        match self {
            ControllerSpec::Zero => Ok(Controller::Zero),
            ControllerSpec::Lqr { q, r } => lqr(model, *q, *r),
            ControllerSpec::PolePlacement { poles } => {
                let targets: Vec<Complex64> = poles.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
                design_pole_placement(model, &targets)
            }
            ControllerSpec::File { path } => {
                let ctrl = Controller::load(path)?;
                ctrl.validate(model)?;
                Ok(ctrl)
            }
        }
    }
}

fn lqr(model: &StateSpaceModel, q: f64, r: f64) -> Result<Controller> {
    let qm = nalgebra::DMatrix::identity(model.n(), model.n()) * q;
    let rm = nalgebra::DMatrix::identity(model.p(), model.p()) * r;
    design_lqr(model, &qm, &rm)
}

/// Pole-placement family of the controller sweep: `count` designs with
/// `ρ_cl` evenly spaced on `[rho_min, rho_max]`, remaining poles at
/// `ratios · ρ_cl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "default_rho_min")]
    pub rho_min: f64,
    #[serde(default = "default_rho_max")]
    pub rho_max: f64,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_ratios")]
    pub ratios: Vec<f64>,
    /// Include the LQR design (`Q = I`, `R = I`) as the first controller.
    #[serde(default = "default_true")]
    pub include_lqr: bool,
}

fn default_rho_min() -> f64 {
    0.5
}
fn default_rho_max() -> f64 {
    0.96
}
fn default_count() -> usize {
    7
}
fn default_ratios() -> Vec<f64> {
    vec![0.9, 0.8]
}
fn default_true() -> bool {
    true
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            rho_min: default_rho_min(),
            rho_max: default_rho_max(),
            count: default_count(),
            ratios: default_ratios(),
            include_lqr: true,
        }
    }
}

impl SweepSpec {
    pub fn rho_values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.rho_min],
            n => (0..n)
                .map(|i| self.rho_min + (self.rho_max - self.rho_min) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }

    /// Named controllers of the sweep, LQR first.
    pub fn controllers(&self, model: &StateSpaceModel) -> Result<Vec<(String, Controller)>> {
        if !(0.0 < self.rho_min && self.rho_min <= self.rho_max && self.rho_max < 1.0) {
            return Err(Error::Config(format!(
                "sweep needs 0 < rho_min <= rho_max < 1, got [{}, {}]",
                self.rho_min, self.rho_max
            )));
        }
        if self.ratios.len() + 1 != model.n() {
            return Err(Error::Config(format!(
                "sweep places {} poles but the plant has order {}",
                self.ratios.len() + 1,
                model.n()
            )));
        }
        let mut out = Vec::new();
        if self.include_lqr {
            out.push(("lqr".to_string(), lqr(model, 1.0, 1.0)?));
        }
        for rho in self.rho_values() {
            let mut targets = vec![Complex64::new(rho, 0.0)];
            targets.extend(self.ratios.iter().map(|f| Complex64::new(f * rho, 0.0)));
            out.push((format!("pp_{rho:.2}"), design_pole_placement(model, &targets)?));
        }
        Ok(out)
    }
}

/// A Monte-Carlo identification experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: ExperimentKind,
    /// `"example1"`, `"example4"`, `"stable_siso"` or a path to a model JSON file.
    pub plant: String,
    #[serde(default)]
    pub controller: ControllerSpec,
    /// Output signal-to-noise ratios `var(y_clean)/σ_v²`; `inf` disables `v`.
    pub snr: Vec<f64>,
    #[serde(default = "one")]
    pub sigma_c: f64,
    #[serde(default)]
    pub sigma_w: f64,
    pub n_grid: Vec<usize>,
    pub r: usize,
    pub d: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Estimator>,
    #[serde(default)]
    pub sweep: SweepSpec,
}

fn default_trials() -> usize {
    20
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}
fn default_estimators() -> Vec<Estimator> {
    vec![Estimator::Iv, Estimator::Ls]
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid[0] == 0 {
            return Err(Error::Config("n_grid must be non-empty and positive".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("n_grid must be strictly increasing, got {:?}", self.n_grid)));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.snr.is_empty() || self.snr.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("snr levels must be positive".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("at least one estimator is required".into()));
        }
        for (name, v) in [("sigma_c", self.sigma_c), ("sigma_w", self.sigma_w)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        if self.sigma_c == 0.0 {
            return Err(Error::Config("sigma_c must be positive".into()));
        }
        Ok(())
    }

    pub fn plant_model(&self) -> Result<StateSpaceModel> {
        resolve_plant(&self.plant)
    }

    /// Parses TOML or JSON (chosen by extension, TOML otherwise), applies
    /// `key=value` overrides and validates.
    pub fn load(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Self::parse(&text, is_json, overrides)
    }

    pub fn parse(text: &str, is_json: bool, overrides: &[String]) -> Result<Self> {
        let mut tree = parse_tree(text, is_json)?;
        for ov in overrides {
            apply_override(&mut tree, ov)?;
        }
        let cfg: ExperimentConfig = tree.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Named preset or model JSON path.
pub fn resolve_plant(spec: &str) -> Result<StateSpaceModel> {
    match spec {
        "example1" => Ok(presets::example1()),
        "example4" => Ok(presets::example4()),
        "stable_siso" => Ok(presets::stable_siso()),
        path => StateSpaceModel::load(path),
    }
}

/// Reads a TOML or JSON document into a TOML value tree.
pub(crate) fn parse_tree(text: &str, is_json: bool) -> Result<toml::Value> {
    if is_json {
        let json: serde_json::Value = serde_json::from_str(text)?;
        toml::Value::try_from(json).map_err(|e| Error::Config(e.to_string()))
    } else {
        text.parse::<toml::Table>()
            .map(toml::Value::Table)
            .map_err(|e| Error::Config(e.to_string()))
    }
}

/// Sets a (possibly dotted) key. The value is read as a TOML literal and
/// falls back to a bare string.
pub(crate) fn apply_override(tree: &mut toml::Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let (key, raw) = (key.trim(), raw.trim());
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key `{key}`")));
    }
    let mut node = tree;
    for part in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}` descends into a non-table")))?;
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    node.as_table_mut()
        .ok_or_else(|| Error::Config(format!("override `{key}` descends into a non-table")))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
