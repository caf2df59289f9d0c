//! Scenario files.
//!
//! A scenario is a TOML document. Top-level keys pick the noise model and the
//! tasks; tables describe the problem and configure each task. Unknown keys
//! are rejected, so a typo is an error rather than a silently ignored
//! setting. See the guide's command-line chapter for the full grammar.

use std::path::PathBuf;

use serde::Deserialize;

use noisy_ibc::classify;
use noisy_ibc::cost::{CostModel, CostTable, Growth, Interpolation, TableEnvelope};
use noisy_ibc::gaussian::WaBoundConfig;
use noisy_ibc::spectra::SpectrumModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Noise {
    Bounded,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Complexity,
    Allocate,
    Design,
    Rotate,
    Classify,
    Simulate,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Complexity => "complexity",
            Task::Allocate => "allocate",
            Task::Design => "design",
            Task::Rotate => "rotate",
            Task::Classify => "classify",
            Task::Simulate => "simulate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SpectrumSpec {
    Explicit {
        values: Option<Vec<f64>>,
        per_dim: Option<Vec<Vec<f64>>>,
    },
    Polynomial {
        scale: f64,
        #[serde(default)]
        dim_power: f64,
        decay: f64,
    },
    Fitted {
        c: f64,
        q: f64,
        p: f64,
    },
    Tensor {
        factors: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowthSpec {
    Polynomial,
    Subexponential,
    Exponential,
}

impl From<GrowthSpec> for Growth {
    fn from(g: GrowthSpec) -> Growth {
        match g {
            GrowthSpec::Polynomial => Growth::Polynomial,
            GrowthSpec::Subexponential => Growth::SubExponential,
            GrowthSpec::Exponential => Growth::Exponential,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeSpec {
    pub sigma: GrowthSpec,
    pub dim: GrowthSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterpolationSpec {
    #[default]
    Conservative,
    Loglinear,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CostSpec {
    Polynomial {
        #[serde(rename = "D")]
        d_coef: f64,
        t: f64,
        s: f64,
    },
    Step {
        sigma0: f64,
    },
    Exact,
    Table {
        sigmas: Vec<f64>,
        rows: Vec<Vec<f64>>,
        #[serde(default)]
        interpolation: InterpolationSpec,
        envelope: Option<EnvelopeSpec>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub eps: Option<Vec<f64>>,
    pub d: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSpec {
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_sigma0")]
    pub sigma0: f64,
}

fn default_c() -> f64 {
    WaBoundConfig::default().c
}

fn default_sigma0() -> f64 {
    WaBoundConfig::default().sigma0
}

impl Default for GaussianSpec {
    fn default() -> Self {
        GaussianSpec {
            c: default_c(),
            sigma0: default_sigma0(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocateSpec {
    pub eps: Vec<f64>,
    pub d: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    pub lambda: Vec<f64>,
    /// Precisions; leading zeros are exact observations.
    pub sigma: Option<Vec<f64>>,
    /// `sigma^-2`; `inf` marks an exact observation.
    pub sigma_inv2: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotateSpec {
    pub s: Vec<f64>,
    pub eps: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CondweakSpec {
    pub p: f64,
    /// `kappa(d) = kappa_scale * d^kappa_power`.
    #[serde(default)]
    pub kappa_power: f64,
    #[serde(default = "one")]
    pub kappa_scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifySpec {
    #[serde(default = "yes")]
    pub fit: bool,
    pub diagonal_eps: Option<Vec<f64>>,
    pub diagonal_d: Option<Vec<u32>>,
    #[serde(default = "default_curse_eps")]
    pub curse_eps: f64,
    pub curse_d: Option<Vec<u32>>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    pub condweak: Option<CondweakSpec>,
}

fn yes() -> bool {
    true
}

fn default_curse_eps() -> f64 {
    0.1
}

fn default_threshold() -> f64 {
    classify::DEFAULT_THRESHOLD
}

impl Default for ClassifySpec {
    fn default() -> Self {
        ClassifySpec {
            fit: true,
            diagonal_eps: None,
            diagonal_d: None,
            curse_eps: default_curse_eps(),
            curse_d: None,
            threshold: default_threshold(),
            condweak: None,
        }
    }
}

/// `d = 1, 2, 4, ..., 512`.
pub fn default_curse_grid() -> Vec<u32> {
    (0..10).map(|k| 1 << k).collect()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    /// `lambda_1, ..., lambda_{n+1}`.
    pub lambda: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Eigen-coordinates of the input; defaults to the first basis vector.
    pub f: Option<Vec<f64>>,
    #[serde(default = "default_samples")]
    pub samples: u64,
}

fn default_samples() -> u64 {
    100_000
}

/// A parsed scenario file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: Option<String>,
    pub noise: Noise,
    pub tasks: Vec<Task>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub spectrum: Option<SpectrumSpec>,
    pub cost: Option<CostSpec>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub gaussian: GaussianSpec,
    pub allocate: Option<AllocateSpec>,
    pub design: Option<DesignSpec>,
    pub rotate: Option<RotateSpec>,
    #[serde(default)]
    pub classify: ClassifySpec,
    pub simulate: Option<SimulateSpec>,
}

/// Problem in a scenario file, with the offending key.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("`{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.to_string(),
    }
}

impl SpectrumSpec {
    pub fn model(&self) -> Result<SpectrumModel, ConfigError> {
        let model = match self {
            SpectrumSpec::Explicit { values, per_dim } => match (values, per_dim) {
                (Some(v), None) => SpectrumModel::explicit(v.clone()),
                (None, Some(p)) => SpectrumModel::explicit_per_dim(p.clone()),
                _ => return Err(invalid("spectrum", "give exactly one of `values` and `per_dim`")),
            },
            SpectrumSpec::Polynomial { scale, dim_power, decay } => {
                SpectrumModel::polynomial_in_dim(*scale, *dim_power, *decay)
            }
            SpectrumSpec::Fitted { c, q, p } => SpectrumModel::fitted(*c, *q, *p),
            SpectrumSpec::Tensor { factors } => SpectrumModel::tensor(factors.clone()),
        };
        model.map_err(|e| invalid("spectrum", e))
    }
}

impl CostSpec {
    pub fn model(&self) -> Result<CostModel, ConfigError> {
        let model = match self {
            CostSpec::Polynomial { d_coef, t, s } => CostModel::polynomial(*d_coef, *t, *s),
            CostSpec::Step { sigma0 } => CostModel::step(*sigma0),
            CostSpec::Exact => Ok(CostModel::Exact),
            CostSpec::Table {
                sigmas,
                rows,
                interpolation,
                envelope,
            } => CostTable::new(
                sigmas.clone(),
                rows.clone(),
                match interpolation {
                    InterpolationSpec::Conservative => Interpolation::Conservative,
                    InterpolationSpec::Loglinear => Interpolation::LogLinear,
                },
                envelope.map(|e| TableEnvelope {
                    sigma: e.sigma.into(),
                    dim: e.dim.into(),
                }),
            )
            .map(CostModel::Table),
        };
        model.map_err(|e| invalid("cost", e))
    }
}

impl DesignSpec {
    /// `(lambda, sigma, n0)`.
    pub fn resolve(&self) -> Result<(Vec<f64>, Vec<f64>, usize), ConfigError> {
        let sigma = match (&self.sigma, &self.sigma_inv2) {
            (Some(s), None) => s.clone(),
            (None, Some(inv)) => {
                if inv.iter().any(|v| !(*v > 0.0)) {
                    return Err(invalid("design.sigma_inv2", "entries must be positive (inf for exact)"));
                }
                inv.iter().map(|v| if v.is_infinite() { 0.0 } else { v.powf(-0.5) }).collect()
            }
            _ => return Err(invalid("design", "give exactly one of `sigma` and `sigma_inv2`")),
        };
        let n0 = sigma.iter().take_while(|s| **s == 0.0).count();
        Ok((self.lambda.clone(), sigma, n0))
    }
}

fn check_eps_list(field: &str, eps: &[f64]) -> Result<(), ConfigError> {
    if eps.is_empty() {
        return Err(invalid(field, "must not be empty"));
    }
    if eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return Err(invalid(field, "every eps must lie in (0, 1)"));
    }
    Ok(())
}

fn check_d_list(field: &str, d: &[u32]) -> Result<(), ConfigError> {
    if d.is_empty() {
        return Err(invalid(field, "must not be empty"));
    }
    if d.contains(&0) {
        return Err(invalid(field, "dimensions start at 1"));
    }
    Ok(())
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn eps_grid(&self) -> Vec<f64> {
        self.grid.eps.clone().unwrap_or_else(classify::default_eps_grid)
    }

    pub fn d_grid(&self) -> Vec<u32> {
        self.grid.d.clone().unwrap_or_else(classify::default_d_grid)
    }

    pub fn diagonal(&self) -> Vec<(f64, u32)> {
        match (&self.classify.diagonal_eps, &self.classify.diagonal_d) {
            (Some(e), Some(d)) => e.iter().copied().zip(d.iter().copied()).collect(),
            _ => classify::default_diagonal(),
        }
    }

    pub fn curse_grid(&self) -> Vec<u32> {
        self.classify.curse_d.clone().unwrap_or_else(default_curse_grid)
    }

    pub fn spectrum_model(&self) -> Result<SpectrumModel, ConfigError> {
        self.spectrum
            .as_ref()
            .ok_or_else(|| invalid("spectrum", "required by the selected tasks"))?
            .model()
    }

    pub fn cost_model(&self) -> Result<CostModel, ConfigError> {
        self.cost
            .as_ref()
            .ok_or_else(|| invalid("cost", "required by the selected tasks"))?
            .model()
    }

    pub fn wa_config(&self) -> Result<WaBoundConfig, ConfigError> {
        WaBoundConfig::new(self.gaussian.c, self.gaussian.sigma0).map_err(|e| invalid("gaussian", e))
    }

    /// Checks that every block a task needs is present and well formed.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.tasks.is_empty() {
            return Err(invalid("tasks", "at least one task is required"));
        }
        let needs = |t: Task| self.tasks.contains(&t);
        if let Some(e) = &self.grid.eps {
            check_eps_list("grid.eps", e)?;
        }
        if let Some(d) = &self.grid.d {
            check_d_list("grid.d", d)?;
        }
        if needs(Task::Complexity) || needs(Task::Classify) || needs(Task::Allocate) {
            self.spectrum_model()?;
            self.cost_model()?;
        }
        if needs(Task::Complexity) || needs(Task::Classify) {
            self.wa_config()?;
        }
        if needs(Task::Allocate) {
            let a = self.allocate.as_ref().ok_or_else(|| invalid("allocate", "required by the allocate task"))?;
            check_eps_list("allocate.eps", &a.eps)?;
            check_d_list("allocate.d", &a.d)?;
            if !matches!(self.cost_model()?, CostModel::Polynomial { s, .. } if s > 0.0) {
                return Err(invalid("cost", "the allocate task needs a polynomial cost with s > 0"));
            }
        }
        if needs(Task::Design) {
            let d = self.design.as_ref().ok_or_else(|| invalid("design", "required by the design task"))?;
            let (lambda, sigma, _) = d.resolve()?;
            if lambda.is_empty() || sigma.len() < lambda.len() {
                return Err(invalid("design", "needs at least as many precisions as eigenvalues"));
            }
        }
        if needs(Task::Rotate) {
            let r = self.rotate.as_ref().ok_or_else(|| invalid("rotate", "required by the rotate task"))?;
            if r.s.is_empty() || r.s.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                return Err(invalid("rotate.s", "must be a non-empty list of positive numbers"));
            }
            check_eps_list("rotate.eps", &r.eps)?;
        }
        if needs(Task::Classify) {
            let c = &self.classify;
            match (&c.diagonal_eps, &c.diagonal_d) {
                (None, None) => {}
                (Some(e), Some(d)) => {
                    check_eps_list("classify.diagonal_eps", e)?;
                    check_d_list("classify.diagonal_d", d)?;
                    if e.len() != d.len() {
                        return Err(invalid("classify", "`diagonal_eps` and `diagonal_d` differ in length"));
                    }
                }
                _ => return Err(invalid("classify", "give both `diagonal_eps` and `diagonal_d` or neither")),
            }
            if !(c.curse_eps > 0.0 && c.curse_eps < 1.0) {
                return Err(invalid("classify.curse_eps", "must lie in (0, 1)"));
            }
            if let Some(d) = &c.curse_d {
                check_d_list("classify.curse_d", d)?;
            }
            if !(c.threshold > 0.0) {
                return Err(invalid("classify.threshold", "must be positive"));
            }
            if let Some(cw) = &c.condweak {
                if !(cw.p > 0.0 && cw.kappa_scale >= 1.0 && cw.kappa_power >= 0.0) {
                    return Err(invalid("classify.condweak", "need p > 0, kappa_scale >= 1, kappa_power >= 0"));
                }
            }
        }
        if needs(Task::Simulate) {
            if self.seed.is_none() {
                return Err(invalid("seed", "required by the simulate task"));
            }
            let s = self.simulate.as_ref().ok_or_else(|| invalid("simulate", "required by the simulate task"))?;
            if s.lambda.len() != s.sigma.len() + 1 {
                return Err(invalid("simulate.lambda", "needs exactly one entry more than `sigma`"));
            }
        }
        Ok(())
    }
}
