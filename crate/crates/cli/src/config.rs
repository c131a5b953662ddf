//! Experiment configuration files.

use std::path::Path;

use bvfrac::asymptotics::Functional;
use bvfrac::constants::MAX_DIM;
use bvfrac::fields::catalog::{catalog, CatalogField, NAMES};
use bvfrac::fields::{Aabb, Domain};
use bvfrac::kernel::{KernelSpec, Mollifier};
use bvfrac::mollify::ResolutionPolicy;
use bvfrac::perturbation::Potential;
use bvfrac::seminorm::ShiftConfig;
use bvfrac::Schedule;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Constants,
    Mollify,
    Seminorm,
    Verify,
    Perturb,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Constants => "constants",
            Self::Mollify => "mollify",
            Self::Seminorm => "seminorm",
            Self::Verify => "verify",
            Self::Perturb => "perturb",
        }
    }
}

/// A catalog entry and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub params: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub eps_max: f64,
    pub eps_min: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    pub dims: Vec<usize>,
    pub mc_samples: usize,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        Self { dims: vec![1, 2, 3], mc_samples: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbConfig {
    pub potential: Potential<f64>,
    pub rhos: Vec<f64>,
}

/// Output file names, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "default_report")]
    pub report: String,
    #[serde(default = "default_csv")]
    pub csv: String,
    #[serde(default = "default_plot")]
    pub plot: String,
    /// Write the SVG plot even without `--plot`.
    #[serde(default)]
    pub plot_enabled: bool,
}

fn default_report() -> String {
    "report.json".into()
}
fn default_csv() -> String {
    "series.csv".into()
}
fn default_plot() -> String {
    "plot.svg".into()
}

impl Default for Outputs {
    fn default() -> Self {
        Self { report: default_report(), csv: default_csv(), plot: default_plot(), plot_enabled: false }
    }
}

/// One experiment. Sections that the experiment does not use are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// Replaces the catalog domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional: Option<Functional>,
    /// Single scale for `mollify` and `seminorm`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Evaluation points for `mollify`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturb: Option<PerturbConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<ResolutionPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<ShiftConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub outputs: Outputs,
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::InvalidConfig { field: field.into(), message: message.into() }
}

impl ExperimentConfig {
    /// Defaults for experiments that need no input data.
    pub fn bare(kind: ExperimentKind) -> Self {
        Self {
            experiment: kind,
            description: None,
            field: None,
            kernel: None,
            q: None,
            domain: None,
            functional: None,
            epsilon: None,
            points: Vec::new(),
            schedule: None,
            tolerance: None,
            constants: None,
            perturb: None,
            resolution: None,
            shift: None,
            seed: 0,
            threads: None,
            outputs: Outputs::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::InvalidConfig {
            field: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::InvalidConfig { field, message } => {
                CliError::InvalidConfig { field: format!("{}: {field}", path.display()), message }
            }
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every field the experiment uses.
    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(t) = self.threads {
            if t == 0 {
                return Err(invalid("threads", "must be at least 1"));
            }
        }
        if let Some(p) = &self.resolution {
            p.validate().map_err(|e| invalid("resolution", e.to_string()))?;
        }
        if let Some(s) = &self.shift {
            if s.radii_per_decade < 4 || s.directions_2d < 4 || s.polar_3d < 2 || s.azimuth_3d < 4 || !(s.h_min_factor > 0.0 && s.h_min_factor <= 1.0) {
                return Err(invalid("shift", "radii_per_decade >= 4, directions_2d >= 4, polar_3d >= 2, azimuth_3d >= 4 and 0 < h_min_factor <= 1 required"));
            }
        }
        match self.experiment {
            ExperimentKind::Constants => {
                let c = self.constants.clone().unwrap_or_default();
                if c.dims.is_empty() || c.dims.iter().any(|&n| !(1..=MAX_DIM).contains(&n)) {
                    return Err(invalid("constants.dims", format!("dimensions must lie in 1..={MAX_DIM}")));
                }
                if !(1000..=1_000_000_000).contains(&c.mc_samples) {
                    return Err(invalid("constants.mc_samples", "must lie in 1000..=1e9"));
                }
            }
            ExperimentKind::Mollify => {
                let (c, _) = self.field_and_kernel()?;
                self.check_epsilon()?;
                if let Some(p) = self.points.iter().find(|p| p.len() != c.field.dim()) {
                    return Err(invalid("points", format!("point {p:?} does not have dimension {}", c.field.dim())));
                }
            }
            ExperimentKind::Seminorm => {
                self.field_and_kernel()?;
                self.check_q()?;
                self.check_epsilon()?;
            }
            ExperimentKind::Verify => {
                self.field_and_kernel()?;
                self.check_q()?;
                self.schedule()?;
                self.check_tolerance()?;
            }
            ExperimentKind::Perturb => {
                self.field_and_kernel()?;
                self.check_q()?;
                self.schedule()?;
                self.check_tolerance()?;
                let p = self.perturb.as_ref().ok_or_else(|| invalid("perturb", "missing section"))?;
                p.potential.validate().map_err(|e| invalid("perturb.potential", e.to_string()))?;
                if p.rhos.len() < 3 || p.rhos.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
                    return Err(invalid("perturb.rhos", "at least three values in (0, 1] required"));
                }
                if p.rhos.windows(2).any(|w| !(w[1] < w[0])) {
                    return Err(invalid("perturb.rhos", "values must decrease strictly"));
                }
                if self.schedule.map(|s| s.count).unwrap_or(0) < 6 {
                    return Err(invalid("schedule.count", "the double limit needs at least 6 scales"));
                }
            }
        }
        Ok(())
    }

    fn check_q(&self) -> Result<(), CliError> {
        match self.q {
            None => Err(invalid("q", "missing; an exponent q > 1 is required")),
            Some(q) if !(q > 1.0 && q.is_finite()) => Err(invalid("q", format!("q = {q} is not allowed: the energies require q > 1"))),
            Some(_) => Ok(()),
        }
    }

    fn check_epsilon(&self) -> Result<(), CliError> {
        match self.epsilon {
            Some(e) if e > 0.0 && e < 1.0 => Ok(()),
            Some(e) => Err(invalid("epsilon", format!("{e} is outside (0, 1)"))),
            None => Err(invalid("epsilon", "missing")),
        }
    }

    fn check_tolerance(&self) -> Result<(), CliError> {
        match self.tolerance {
            Some(t) if t > 0.0 && t < 1.0 => Ok(()),
            Some(t) => Err(invalid("tolerance", format!("{t} is outside (0, 1)"))),
            None => Err(invalid("tolerance", "missing")),
        }
    }

    pub fn q(&self) -> f64 {
        self.q.unwrap_or(2.0)
    }

    pub fn schedule(&self) -> Result<Schedule, CliError> {
        let s = self.schedule.ok_or_else(|| invalid("schedule", "missing section"))?;
        Schedule::between(s.eps_max, s.eps_min, s.count).map_err(|e| invalid("schedule", e.to_string()))
    }

    /// Catalog field with the configured domain, and the kernel built in its dimension.
    pub fn field_and_kernel(&self) -> Result<(CatalogField<f64>, Mollifier<f64>), CliError> {
        let fc = self.field.as_ref().ok_or_else(|| invalid("field", "missing section"))?;
        if !NAMES.contains(&fc.name.as_str()) {
            return Err(invalid("field.name", format!("unknown catalog entry `{}` (known: {})", fc.name, NAMES.join(", "))));
        }
        let mut c = catalog::<f64>(&fc.name, &fc.params).map_err(|e| invalid("field.params", e.to_string()))?;
        if let Some(d) = &self.domain {
            let check = |b: &Aabb<f64>| Aabb::new(b.lo.clone(), b.hi.clone());
            let omega = check(&d.omega).map_err(|e| invalid("domain.omega", e.to_string()))?;
            let ambient = check(&d.ambient).map_err(|e| invalid("domain.ambient", e.to_string()))?;
            c.domain = Domain::new(omega, ambient).map_err(|e| invalid("domain", e.to_string()))?;
            if c.domain.dim() != c.field.dim() {
                return Err(invalid("domain", "dimension differs from the field"));
            }
            c.field.check_boundary(&c.domain.omega).map_err(|e| invalid("domain", e.to_string()))?;
        }
        let spec = self.kernel.as_ref().ok_or_else(|| invalid("kernel", "missing section"))?;
        let eta = spec.build::<f64>(c.field.dim()).map_err(|e| invalid("kernel", e.to_string()))?;
        Ok((c, eta))
    }

    pub fn policy(&self) -> ResolutionPolicy {
        self.resolution.unwrap_or_default()
    }

    pub fn shift_config(&self) -> ShiftConfig {
        self.shift.unwrap_or_default()
    }
}
