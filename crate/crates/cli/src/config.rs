//! Run configuration: one JSON object with a section per library module.
//!
//! Every section and every key is optional; missing values take the library
//! defaults. Unknown keys are rejected with their dotted path.

use std::path::Path;

use gmc::downstream::ProbeConfig;
use gmc::loss::{LossVariant, Temperature};
use gmc::model::{ModelConfig, TrainConfig};
use gmc::synthdata::SynthConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: SynthConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub probe: ProbeConfig,
    pub dca: DcaConfig,
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DcaConfig {
    /// Neighbours per vertex in the alignment graph.
    pub k: usize,
}

impl Default for DcaConfig {
    fn default() -> Self {
        DcaConfig {
            k: gmc::dca::DEFAULT_K,
        }
    }
}

/// Value lists for a grid sweep. An empty list keeps the base value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub tau: Vec<Temperature>,
    pub intermediate_dim: Vec<usize>,
    pub latent_dim: Vec<usize>,
    pub loss_variant: Vec<LossVariant>,
}

/// One point of a sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub tau: Temperature,
    pub intermediate_dim: usize,
    pub latent_dim: usize,
    pub loss_variant: LossVariant,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: RunConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::config(e.path().to_string(), e.inner().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Loads `path`, or the defaults when no path is given.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(RunConfig::default()), Self::load)
    }

    pub fn validate(&self) -> Result<()> {
        fn scoped(section: &str, r: gmc::Result<()>) -> Result<()> {
            r.map_err(|e| match e {
                gmc::Error::InvalidConfig { key, reason } => {
                    CliError::config(format!("{section}.{key}"), reason)
                }
                other => CliError::Core(other),
            })
        }
        scoped("data", self.data.validate())?;
        scoped("model", self.model.validate())?;
        scoped("train", self.train.validate())?;
        scoped("probe", self.probe.validate())?;
        if self.dca.k == 0 {
            return Err(CliError::config("dca.k", "must be positive"));
        }
        let dims = [
            ("intermediate_dim", &self.sweep.intermediate_dim),
            ("latent_dim", &self.sweep.latent_dim),
        ];
        for (name, list) in dims {
            if let Some(pos) = list.iter().position(|&d| d == 0) {
                return Err(CliError::config(
                    format!("sweep.{name}[{pos}]"),
                    "must be positive",
                ));
            }
        }
        Ok(())
    }

    /// Uses `seed` for data generation, initialisation, shuffling and the probe.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.data.seed = seed;
        self.train.seed = seed;
        self.probe.seed = seed;
        self
    }

    pub fn with_loss(mut self, variant: LossVariant) -> Self {
        self.train.loss_variant = variant;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Cartesian product of the sweep lists, `tau` varying slowest.
    pub fn grid(&self) -> Vec<GridPoint> {
        fn or_base<T: Copy>(list: &[T], base: T) -> Vec<T> {
            if list.is_empty() {
                vec![base]
            } else {
                list.to_vec()
            }
        }
        let taus = or_base(&self.sweep.tau, self.train.tau);
        let ds = or_base(&self.sweep.intermediate_dim, self.model.intermediate_dim);
        let ss = or_base(&self.sweep.latent_dim, self.model.latent_dim);
        let losses = or_base(&self.sweep.loss_variant, self.train.loss_variant);
        let mut grid = Vec::with_capacity(taus.len() * ds.len() * ss.len() * losses.len());
        for &tau in &taus {
            for &intermediate_dim in &ds {
                for &latent_dim in &ss {
                    for &loss_variant in &losses {
                        grid.push(GridPoint {
                            tau,
                            intermediate_dim,
                            latent_dim,
                            loss_variant,
                        });
                    }
                }
            }
        }
        grid
    }

    /// This configuration with one grid point applied.
    pub fn at(&self, point: &GridPoint) -> RunConfig {
        let mut c = self.clone();
        c.train.tau = point.tau;
        c.model.intermediate_dim = point.intermediate_dim;
        c.model.latent_dim = point.latent_dim;
        c.train.loss_variant = point.loss_variant;
        c.sweep = SweepConfig::default();
        c
    }

    /// Column label for a grid point, naming only the swept parameters.
    pub fn label(&self, point: &GridPoint) -> String {
        let mut parts = Vec::new();
        if !self.sweep.tau.is_empty() {
            parts.push(format!("tau={}", point.tau.get()));
        }
        if !self.sweep.intermediate_dim.is_empty() {
            parts.push(format!("d={}", point.intermediate_dim));
        }
        if !self.sweep.latent_dim.is_empty() {
            parts.push(format!("s={}", point.latent_dim));
        }
        if !self.sweep.loss_variant.is_empty() {
            parts.push(format!("loss={}", point.loss_variant));
        }
        if parts.is_empty() {
            "base".to_string()
        } else {
            parts.join(" ")
        }
    }
}
