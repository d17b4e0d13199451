//! Run configuration: a flat JSON object, validated field by field.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;
use twocrack_core::direct::GridSpec;
use twocrack_core::lattice::{ComplexFrequency, CrackGeometry, IncidentWave, PASS_BAND_EDGE};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config:\n{}", .0.iter().map(|(f, m)| format!("  {f}: {m}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<(String, String)>),
}

/// Incident amplitude given either as a real number or as `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Amplitude {
    Real(f64),
    Complex([f64; 2]),
}

impl Default for Amplitude {
    fn default() -> Self {
        Amplitude::Real(1.0)
    }
}

impl Amplitude {
    pub fn value(&self) -> Complex64 {
        match *self {
            Amplitude::Real(a) => Complex64::new(a, 0.0),
            Amplitude::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

fn default_omega2() -> f64 {
    1e-3
}
fn default_delta_off() -> f64 {
    twocrack_core::contour::DEFAULT_DELTA_OFF
}
fn default_ngrid() -> usize {
    GridSpec::desk_scale().n_grid
}
fn default_npml() -> usize {
    GridSpec::desk_scale().n_pml
}
fn default_sigma() -> f64 {
    GridSpec::desk_scale().sigma_max
}
fn default_radius() -> f64 {
    GridSpec::desk_scale().circle_radius
}
fn default_step() -> f64 {
    1.0
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Parameters that a sweep may vary.
pub const SWEEPABLE: [&str; 8] = ["omega1", "omega2", "ThetaDeg", "N", "M", "nodeCount", "Ngrid", "Npml"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub omega1: f64,
    #[serde(default = "default_omega2")]
    pub omega2: f64,
    #[serde(rename = "ThetaDeg")]
    pub theta_deg: f64,
    #[serde(rename = "A", default)]
    pub amplitude: Amplitude,
    #[serde(rename = "N")]
    pub n: i64,
    #[serde(rename = "M")]
    pub m: i64,
    #[serde(rename = "nodeCount", default)]
    pub node_count: Option<usize>,
    #[serde(rename = "deltaOff", default = "default_delta_off")]
    pub delta_off: f64,
    #[serde(rename = "Ngrid", default = "default_ngrid")]
    pub n_grid: usize,
    #[serde(rename = "Npml", default = "default_npml")]
    pub n_pml: usize,
    #[serde(rename = "sigmaMax", default = "default_sigma")]
    pub sigma_max: f64,
    #[serde(rename = "circleRadius", default = "default_radius")]
    pub circle_radius: f64,
    #[serde(rename = "thetaStepDeg", default = "default_step")]
    pub theta_step_deg: f64,
    #[serde(rename = "outputDir", default = "default_out")]
    pub output_dir: PathBuf,
    /// Sweep lists, keyed by parameter name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub vary: BTreeMap<String, Vec<f64>>,
}

/// Physical objects built from a validated configuration.
#[derive(Debug, Clone)]
pub struct Physics {
    pub omega: ComplexFrequency,
    pub wave: IncidentWave,
    pub geometry: CrackGeometry,
    pub grid: GridSpec,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_owned(), source })?;
        Self::from_json(&text)
    }

    /// Checks every field and reports all problems at once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs: Vec<(String, String)> = Vec::new();
        let mut bad = |f: &str, m: String| errs.push((f.to_owned(), m));
        if !(self.omega1 > 0.0 && self.omega1 < PASS_BAND_EDGE) {
            bad("omega1", format!("must lie in the pass band (0, 2√2), got {}", self.omega1));
        }
        if !(self.omega2 > 0.0 && self.omega2 <= 0.1) {
            bad("omega2", format!("must lie in (0, 0.1], got {}", self.omega2));
        }
        if !(self.theta_deg > -180.0 && self.theta_deg <= 180.0) {
            bad("ThetaDeg", format!("must lie in (−180, 180], got {}", self.theta_deg));
        }
        let a = self.amplitude.value();
        if !(a.re.is_finite() && a.im.is_finite()) {
            bad("A", "must be finite".into());
        }
        if self.n < 2 {
            bad("N", format!("row separation must be at least 2, got {}", self.n));
        }
        if self.m.abs() > 1000 {
            bad("M", format!("offset must satisfy |M| ≤ 1000, got {}", self.m));
        }
        if let Some(n) = self.node_count {
            if n < twocrack_core::contour::MIN_NODES || !n.is_power_of_two() || n > twocrack_core::kernel::MAX_NODES {
                bad("nodeCount", format!("must be a power of two in [256, 2^22], got {n}"));
            }
        }
        if !(self.delta_off > 0.0 && self.delta_off <= 0.1) {
            bad("deltaOff", format!("must lie in (0, 0.1], got {}", self.delta_off));
        }
        if let Err(e) = GridSpec::new(self.n_grid, self.n_pml, self.sigma_max, self.circle_radius) {
            bad("Ngrid/Npml/sigmaMax/circleRadius", e.to_string());
        }
        if !(self.theta_step_deg > 0.0 && self.theta_step_deg <= 90.0) || (360.0 / self.theta_step_deg).fract().abs() > 1e-9 {
            bad("thetaStepDeg", format!("must divide 360 and lie in (0, 90], got {}", self.theta_step_deg));
        }
        for key in self.vary.keys() {
            if !SWEEPABLE.contains(&key.as_str()) {
                bad("vary", format!("cannot sweep over '{key}'; allowed: {}", SWEEPABLE.join(", ")));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }

    pub fn physics(&self) -> Result<Physics, ConfigError> {
        self.validate()?;
        let wrap = |f: &str, e: String| ConfigError::Invalid(vec![(f.to_owned(), e)]);
        let omega = ComplexFrequency::new(self.omega1, self.omega2).map_err(|e| wrap("omega1", e.to_string()))?;
        let wave = IncidentWave::new(&omega, self.theta_deg.to_radians(), self.amplitude.value())
            .map_err(|e| wrap("ThetaDeg", e.to_string()))?;
        let geometry = CrackGeometry::new(self.n, self.m).map_err(|e| wrap("N", e.to_string()))?;
        let grid = GridSpec::new(self.n_grid, self.n_pml, self.sigma_max, self.circle_radius)
            .map_err(|e| wrap("Ngrid", e.to_string()))?;
        Ok(Physics { omega, wave, geometry, grid })
    }

    /// Hex SHA-256 of the canonical JSON of the configuration, without the
    /// output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Copy with one sweepable parameter replaced.
    pub fn with_parameter(&self, key: &str, value: f64) -> Result<Self, ConfigError> {
        let mut c = self.clone();
        c.vary.clear();
        let int = |v: f64| -> Result<i64, ConfigError> {
            if v.fract() == 0.0 {
                Ok(v as i64)
            } else {
                Err(ConfigError::Invalid(vec![(key.to_owned(), format!("expected an integer, got {v}"))]))
            }
        };
        match key {
            "omega1" => c.omega1 = value,
            "omega2" => c.omega2 = value,
            "ThetaDeg" => c.theta_deg = value,
            "N" => c.n = int(value)?,
            "M" => c.m = int(value)?,
            "nodeCount" => c.node_count = Some(int(value)? as usize),
            "Ngrid" => c.n_grid = int(value)? as usize,
            "Npml" => c.n_pml = int(value)? as usize,
            _ => return Err(ConfigError::Invalid(vec![("vary".into(), format!("unknown parameter '{key}'"))])),
        }
        c.validate()?;
        Ok(c)
    }

    /// Cartesian product of the `vary` lists; a single point when empty.
    pub fn sweep_points(&self) -> Vec<Vec<(String, f64)>> {
        let mut points: Vec<Vec<(String, f64)>> = vec![Vec::new()];
        for (key, values) in &self.vary {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push((key.clone(), v));
                        q
                    })
                })
                .collect();
        }
        points
    }
}
