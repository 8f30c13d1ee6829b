//! Experiment configuration, read from TOML.
//!
//! Every key is optional. Missing keys fall back to the defaults below, so an
//! empty file runs the standard fixtures: `lambda = 0.09`, `n_c = 5`,
//! SNR 0/3/5 dB, 200 000 departures per cell.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::accuracy::{CurveView, Dataset, Model};
use crate::controller::{ControllerConfig, Measurement, SignMode};
use crate::error::{Error, Result};
use crate::fixtures;

/// Which estimates a sweep produces.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    ClosedForm,
    Simulation,
    #[default]
    Both,
}

impl Mode {
    pub fn closed_form(self) -> bool {
        self != Mode::Simulation
    }

    pub fn simulation(self) -> bool {
        self != Mode::ClosedForm
    }
}

/// A dataset/model pair written as `"MNIST+CNN"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pair {
    pub dataset: Dataset,
    pub model: Model,
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}", self.dataset, self.model)
    }
}

impl FromStr for Pair {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (d, m) = s.split_once('+').ok_or_else(|| format!("expected DATASET+MODEL, got `{s}`"))?;
        Ok(Pair { dataset: d.parse()?, model: m.parse()? })
    }
}

impl Serialize for Pair {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Pair {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub horizon: u64,
    pub replications: u32,
    pub mode: Mode,
    /// `"synthetic"` for the shipped fixture curves, otherwise a path to an
    /// accuracy table (relative paths resolve against the config file).
    pub curves: String,
    pub curve_view: CurveView,
    pub pairs: Vec<Pair>,
    pub snr_db: Vec<f64>,
    /// Also write gnuplot data blocks next to the CSV files.
    pub gnuplot: bool,
    pub sweep_nc: SweepNc,
    pub sweep_lambda: SweepLambda,
    pub dynamic: Dynamic,
    pub validate: Validate,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            horizon: 200_000,
            replications: 1,
            mode: Mode::Both,
            curves: "synthetic".into(),
            curve_view: CurveView::Raw,
            pairs: fixtures::PAIRS.iter().map(|&(dataset, model)| Pair { dataset, model }).collect(),
            snr_db: fixtures::SNR_GRID_DB.to_vec(),
            gnuplot: false,
            sweep_nc: SweepNc::default(),
            sweep_lambda: SweepLambda::default(),
            dynamic: Dynamic::default(),
            validate: Validate::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepNc {
    pub lambda: Vec<f64>,
    pub n_c: Vec<u32>,
}

impl Default for SweepNc {
    fn default() -> Self {
        Self { lambda: vec![0.09], n_c: fixtures::grid() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepLambda {
    pub n_c: Vec<u32>,
    pub lambda: Vec<f64>,
}

impl Default for SweepLambda {
    fn default() -> Self {
        // 0.01..=0.25 in steps of 0.01; the top values are unstable for n_c = 5
        let lambda = (1..=25).map(|i| f64::from(i) / 100.0).collect();
        Self { n_c: vec![5], lambda }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Dynamic {
    pub fixed_n_c: u32,
    pub lambda: Vec<f64>,
    /// Lower the controller ceiling to the largest `n_c` with
    /// `lambda * n_c < 1` in each cell.
    pub cap_at_stability: bool,
    /// A `[dynamic.controller]` table replaces this whole default; keys it
    /// leaves out take the controller's own defaults.
    pub controller: ControllerConfig,
}

impl Default for Dynamic {
    fn default() -> Self {
        Self {
            fixed_n_c: 5,
            lambda: vec![0.02, 0.05, 0.08, 0.11, 0.14, 0.17, 0.19],
            cap_at_stability: true,
            controller: ControllerConfig {
                initial_nc: 5,
                n_c_min: 1,
                n_c_max: 16,
                measurement: Measurement::BlockMean { departures: 500 },
                sign_mode: SignMode::Descent,
                ..ControllerConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Validate {
    pub lambda: Vec<f64>,
    pub n_c: Vec<u32>,
    pub p_c: Vec<f64>,
    pub horizon: u64,
    pub replications: u32,
    /// Allowed distance from the closed form, in standard errors.
    pub tolerance_se: f64,
    /// Random draws for the closed-form identity check.
    pub identity_draws: u32,
    /// Extra service time added to every sample. Nonzero values break the
    /// model on purpose and must be reported as failures.
    pub service_padding: u32,
}

impl Default for Validate {
    fn default() -> Self {
        Self {
            lambda: vec![0.05, 0.09, 0.15],
            n_c: vec![1, 2, 4, 5],
            p_c: vec![0.5, 0.9, 1.0],
            horizon: 100_000,
            replications: 3,
            tolerance_se: 3.0,
            identity_draws: 10_000,
            service_padding: 0,
        }
    }
}

impl ExperimentConfig {
    /// Reads a config file. Relative curve paths are resolved against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::parse(&text)?;
        if config.curves != "synthetic" {
            let p = PathBuf::from(&config.curves);
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    config.curves = dir.join(p).to_string_lossy().into_owned();
                }
            }
        }
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks what every command needs. Command-specific grids are checked
    /// by the command itself.
    pub fn check_common(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        nonempty("pairs", &self.pairs)?;
        nonempty("snr_db", &self.snr_db)?;
        Ok(())
    }
}

pub(crate) fn nonempty<T>(name: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Config(format!("`{name}` grid is empty")));
    }
    Ok(())
}

pub(crate) fn positive_lambdas(name: &str, v: &[f64]) -> Result<()> {
    nonempty(name, v)?;
    if let Some(l) = v.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(Error::Config(format!("`{name}` contains non-positive rate {l}")));
    }
    Ok(())
}

pub(crate) fn positive_nc(name: &str, v: &[u32]) -> Result<()> {
    nonempty(name, v)?;
    if v.contains(&0) {
        return Err(Error::Config(format!("`{name}` contains n_c = 0")));
    }
    Ok(())
}
