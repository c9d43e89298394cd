use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cross_section::{CrossSection, ThresholdMethod};
use crate::discretization::GridSpec;
use crate::error::{Error, Result};
use crate::geometry::{EndMetric, GeometryConfig};
use crate::resolvent::{AnalyticVector, MuGrid};
use crate::scaling::{check_lambda, Ramp, ScalingProfile};
use crate::spectral::Window;

type C = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Thresholds,
    Portrait,
    Resonances,
    SweepLambda,
    SweepProfile,
    Trace,
    Selftest,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Thresholds,
        Command::Portrait,
        Command::Resonances,
        Command::SweepLambda,
        Command::SweepProfile,
        Command::Trace,
        Command::Selftest,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Thresholds => "thresholds",
            Command::Portrait => "portrait",
            Command::Resonances => "resonances",
            Command::SweepLambda => "sweep-lambda",
            Command::SweepProfile => "sweep-profile",
            Command::Trace => "trace",
            Command::Selftest => "selftest",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown command {s:?}")))
    }
}

/// One complex value or a list, each written `[re, im]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    One([f64; 2]),
    Many(Vec<[f64; 2]>),
}

impl LambdaSpec {
    pub fn values(&self) -> Vec<C> {
        match self {
            LambdaSpec::One(v) => vec![C::new(v[0], v[1])],
            LambdaSpec::Many(v) => v.iter().map(|v| C::new(v[0], v[1])).collect(),
        }
    }
}

impl Default for LambdaSpec {
    fn default() -> Self {
        LambdaSpec::One([0.0, 0.0])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    #[serde(rename = "R")]
    pub onset: f64,
    pub w: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp: Option<Ramp>,
    #[serde(default)]
    pub lambda: LambdaSpec,
    /// Profiles for `sweep-profile`; defaults to the stock `w = 2` and `w = 6`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profiles: Option<Vec<ScalingProfile>>,
}

impl ScalingConfig {
    pub fn profile(&self) -> ScalingProfile {
        ScalingProfile { onset: self.onset, width: self.w, ramp: self.ramp.clone().unwrap_or(Ramp::Quintic) }
    }

    pub fn sweep_profiles(&self) -> Vec<ScalingProfile> {
        self.profiles.clone().unwrap_or_else(|| ScalingProfile::stock(self.onset).to_vec())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMethodConfig {
    Auto,
    FiniteDifference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    #[serde(default = "three")]
    pub count: usize,
    #[serde(default = "four_hundred")]
    pub grid_n: usize,
    #[serde(default = "auto_method")]
    pub method: ThresholdMethodConfig,
}

fn three() -> usize {
    3
}
fn four_hundred() -> usize {
    400
}
fn auto_method() -> ThresholdMethodConfig {
    ThresholdMethodConfig::Auto
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self { count: 3, grid_n: 400, method: ThresholdMethodConfig::Auto }
    }
}

impl ThresholdConfig {
    pub fn method(&self) -> ThresholdMethod {
        match self.method {
            ThresholdMethodConfig::Auto => ThresholdMethod::Auto,
            ThresholdMethodConfig::FiniteDifference => ThresholdMethod::FiniteDifference,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethodConfig {
    ShiftInvert,
    Dense,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenConfig {
    #[serde(default = "si")]
    pub method: EigenMethodConfig,
    /// Defaults to a point on the first ray, 2 units from its origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<[f64; 2]>,
    #[serde(default = "twenty")]
    pub count: usize,
    #[serde(default = "tol")]
    pub tol: f64,
    #[serde(default = "sixty")]
    pub max_iter: usize,
}

fn si() -> EigenMethodConfig {
    EigenMethodConfig::ShiftInvert
}
fn twenty() -> usize {
    20
}
fn tol() -> f64 {
    1e-10
}
fn sixty() -> usize {
    60
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self { method: EigenMethodConfig::ShiftInvert, shift: None, count: 20, tol: 1e-10, max_iter: 60 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    #[serde(rename = "F")]
    pub f: AnalyticVector,
    #[serde(rename = "G")]
    pub g: AnalyticVector,
    pub mu_grid: MuGrid,
    /// Also evaluate on the twice-refined grid for a discretization estimate.
    #[serde(default)]
    pub refine: bool,
    /// Number of eigenvalues near the grid center used for exclusion and
    /// pole matching.
    #[serde(default = "ten")]
    pub eig_count: usize,
}

fn ten() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "p05")]
    pub ray_tol: f64,
    #[serde(default = "p05")]
    pub thresh_tol: f64,
    #[serde(default = "milli")]
    pub drift_tol: f64,
    #[serde(default = "centi")]
    pub match_tol: f64,
    #[serde(default = "tenth")]
    pub ray_margin: f64,
    #[serde(default = "thousand")]
    pub sector_samples: usize,
}

fn p05() -> f64 {
    0.05
}
fn milli() -> f64 {
    1e-3
}
fn centi() -> f64 {
    1e-2
}
fn tenth() -> f64 {
    0.1
}
fn thousand() -> usize {
    1000
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { ray_tol: 0.05, thresh_tol: 0.05, drift_tol: 1e-3, match_tol: 1e-2, ray_margin: 0.1, sector_samples: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    pub geometry: GeometryConfig,
    pub cross_section: CrossSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub thresholds: ThresholdConfig,
    #[serde(default)]
    pub eigen: EigenConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Window>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub dump_matrices: bool,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn scaling(&self) -> Result<&ScalingConfig> {
        self.scaling.as_ref().ok_or_else(|| Error::Config("scaling block is required".into()))
    }

    pub fn grid(&self) -> Result<&GridSpec> {
        self.grid.as_ref().ok_or_else(|| Error::Config("grid block is required".into()))
    }

    pub fn window(&self) -> Result<&Window> {
        self.window.as_ref().ok_or_else(|| Error::Config("window block is required".into()))
    }

    pub fn trace(&self) -> Result<&TraceConfig> {
        self.trace.as_ref().ok_or_else(|| Error::Config("trace block is required".into()))
    }

    pub fn lambdas(&self) -> Result<Vec<C>> {
        let l = self.scaling()?.lambda.values();
        if l.is_empty() {
            return Err(Error::Config("scaling.lambda must not be empty".into()));
        }
        Ok(l)
    }

    /// Static checks that do not need any numerics beyond the thresholds.
    pub fn validate(&self, command: Command) -> Result<EndMetric> {
        if let Some(c) = self.command {
            if c != command {
                return Err(Error::Config(format!(
                    "command: config says {:?} but {:?} was requested",
                    c.name(),
                    command.name()
                )));
            }
        }
        let t = &self.tolerances;
        for (key, v) in [
            ("tolerances.ray_tol", t.ray_tol),
            ("tolerances.thresh_tol", t.thresh_tol),
            ("tolerances.drift_tol", t.drift_tol),
            ("tolerances.match_tol", t.match_tol),
            ("tolerances.ray_margin", t.ray_margin),
            ("eigen.tol", self.eigen.tol),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{key} must be positive, got {v}")));
            }
        }
        if t.sector_samples == 0 {
            return Err(Error::Config("tolerances.sector_samples must be positive".into()));
        }
        self.cross_section.validate()?;
        let geom = self.geometry.build(&self.cross_section)?;
        if matches!(command, Command::Thresholds | Command::Selftest) {
            return Ok(geom);
        }
        let scaling = self.scaling()?;
        scaling.profile().validate()?;
        let grid = self.grid()?;
        for lambda in self.lambdas()? {
            check_lambda(lambda, geom.alpha()).map_err(|e| Error::Config(format!("scaling.lambda: {e}")))?;
            if lambda != C::new(0.0, 0.0) {
                let need = scaling.profile().full() + 5.0;
                if !(grid.x_max > need) {
                    return Err(Error::Config(format!(
                        "grid.X_max = {} must exceed scaling.R + 1 + scaling.w + 5 = {need}",
                        grid.x_max
                    )));
                }
            }
        }
        match command {
            Command::SweepProfile => {
                for p in scaling.sweep_profiles() {
                    p.validate()?;
                    if !(grid.x_max > p.full() + 5.0) {
                        return Err(Error::Config(format!(
                            "grid.X_max = {} is too short for profile {}",
                            grid.x_max,
                            p.id()
                        )));
                    }
                }
                self.window()?.validate()?;
            }
            Command::SweepLambda => self.window()?.validate()?,
            Command::Trace => {
                let tr = self.trace()?;
                tr.mu_grid.validate()?;
                tr.f.validate()?;
                tr.g.validate()?;
            }
            _ => {}
        }
        Ok(geom)
    }
}
