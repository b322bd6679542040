use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::annotation::SimConfig;
use crate::coteach::CoteachConfig;
use crate::datagen::DataGenConfig;
use crate::error::{Error, Result};
use crate::inference::DsConfig;
use crate::perturb::PerturbConfig;
use crate::tabular::FeatureSchema;

pub const DEFAULT_TAU_GRID: [f64; 6] = [0.1, 0.2, 0.3, 0.45, 0.6, 0.8];
pub const DEFAULT_ALPHA_GRID: [f64; 5] = [0.01, 0.05, 0.11, 0.15, 0.2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// One network on the inferred labels.
    BaseClf,
    /// Co-teaching on the inferred labels.
    VCoteach,
    /// Co-teaching on uniformly perturbed rows.
    PCoteach,
    /// Co-teaching on certainty-weighted perturbed rows.
    Crowdteacher,
}

pub const ALL_METHODS: [Method; 4] = [
    Method::BaseClf,
    Method::VCoteach,
    Method::PCoteach,
    Method::Crowdteacher,
];

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::BaseClf => "base_clf",
            Method::VCoteach => "v_coteach",
            Method::PCoteach => "p_coteach",
            Method::Crowdteacher => "crowdteacher",
        }
    }

    pub fn perturbs(self) -> bool {
        matches!(self, Method::PCoteach | Method::Crowdteacher)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL_METHODS
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown method `{s}`")))
    }
}

/// Accepts either `method = "x"` or `method = ["x", "y"]`.
fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Method>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(Method),
        Many(Vec<Method>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(m) => vec![m],
        OneOrMany::Many(v) => v,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    pub schema: FeatureSchema,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Generated(DataGenConfig),
    Csv(CsvSource),
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Generated(DataGenConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthOptions {
    /// Synthetic pool size; defaults to the number of training rows.
    pub pool_size: Option<usize>,
    /// Redraw the pool and re-perturb at the start of every epoch.
    pub reperturb_each_epoch: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepAxes {
    /// Empty means the single value `annotation.tau`.
    pub tau: Vec<f64>,
    /// Empty means the single value `perturb.alpha`.
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub data: DataSource,
    #[serde(default = "ExperimentConfig::default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub annotation: SimConfig,
    #[serde(default)]
    pub inference: DsConfig,
    #[serde(default = "ExperimentConfig::default_methods", deserialize_with = "one_or_many")]
    pub method: Vec<Method>,
    #[serde(default)]
    pub perturb: PerturbConfig,
    #[serde(default)]
    pub coteach: CoteachConfig,
    /// Base classifier width; `None` means a quarter of the raw feature count.
    #[serde(default)]
    pub base_hidden: Option<usize>,
    #[serde(default)]
    pub synth: SynthOptions,
    #[serde(default)]
    pub sweep: SweepAxes,
    #[serde(default = "ExperimentConfig::default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "ExperimentConfig::default_output")]
    pub output: PathBuf,
    /// Fill the `wall_time` column. Off by default so reruns are byte-identical.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataSource::default(),
            test_fraction: Self::default_test_fraction(),
            annotation: SimConfig::default(),
            inference: DsConfig::default(),
            method: Self::default_methods(),
            perturb: PerturbConfig::default(),
            coteach: CoteachConfig::default(),
            base_hidden: None,
            synth: SynthOptions::default(),
            sweep: SweepAxes::default(),
            seeds: Self::default_seeds(),
            output: Self::default_output(),
            record_wall_time: false,
        }
    }
}

impl ExperimentConfig {
    fn default_test_fraction() -> f64 {
        0.2
    }

    fn default_methods() -> Vec<Method> {
        ALL_METHODS.to_vec()
    }

    fn default_seeds() -> Vec<u64> {
        (0..10).collect()
    }

    fn default_output() -> PathBuf {
        PathBuf::from("results")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn tau_grid(&self) -> Vec<f64> {
        if self.sweep.tau.is_empty() {
            vec![self.annotation.tau]
        } else {
            self.sweep.tau.clone()
        }
    }

    pub fn alpha_grid(&self) -> Vec<f64> {
        if self.sweep.alpha.is_empty() {
            vec![self.perturb.alpha]
        } else {
            self.sweep.alpha.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::config("test_fraction must lie in (0, 1)"));
        }
        if self.method.is_empty() {
            return Err(Error::config("at least one method is required"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if let DataSource::Generated(g) = &self.data {
            g.validate()?;
        }
        self.annotation.validate()?;
        self.coteach.validate()?;
        for tau in self.tau_grid() {
            SimConfig {
                tau,
                ..self.annotation.clone()
            }
            .validate()?;
        }
        for alpha in self.alpha_grid() {
            PerturbConfig {
                alpha,
                ..self.perturb
            }
            .validate()?;
        }
        if self.synth.pool_size == Some(0) {
            return Err(Error::config("pool_size must be positive"));
        }
        if self.base_hidden == Some(0) {
            return Err(Error::config("base_hidden must be positive"));
        }
        Ok(())
    }
}
