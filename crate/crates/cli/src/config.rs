//! Run configuration: one strict JSON document with a section per stage.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wassdiff_core::grid::SyntheticPairConfig;
use wassdiff_core::metrics::MetricConfig;
use wassdiff_core::scorenet::Architecture;
use wassdiff_core::sde::{NoiseSchedule, SamplerConfig};
use wassdiff_core::tiled::TiledConfig;
use wassdiff_core::training::{BiasExperimentConfig, TrainConfig};
use wassdiff_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub num_samples: usize,
    pub synthetic: SyntheticPairConfig,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            num_samples: 32,
            synthetic: SyntheticPairConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub train_pairs: usize,
    pub eval_pairs: usize,
    pub baseline_alpha: f64,
    pub regularized_alpha: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let d = BiasExperimentConfig::default();
        Self {
            train_pairs: d.train_pairs,
            eval_pairs: d.eval_pairs,
            baseline_alpha: d.baseline_alpha,
            regularized_alpha: d.regularized_alpha,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub data_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub schedule: NoiseSchedule,
    pub model: Architecture,
    pub train: TrainConfig,
    pub sampler: SamplerConfig,
    pub metrics: MetricConfig,
    pub tiled: TiledConfig,
    pub experiment: ExperimentSection,
    pub paths: PathsSection,
}

impl RunConfig {
    /// Defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.data.synthetic.validate()?;
        self.schedule.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        self.sampler.validate()?;
        self.metrics.validate()?;
        Ok(())
    }

    pub fn bias_experiment(&self) -> BiasExperimentConfig {
        BiasExperimentConfig {
            data: self.data.synthetic.clone(),
            train_pairs: self.experiment.train_pairs,
            eval_pairs: self.experiment.eval_pairs,
            architecture: self.model,
            schedule: self.schedule,
            train: self.train,
            sampler: self.sampler,
            baseline_alpha: self.experiment.baseline_alpha,
            regularized_alpha: self.experiment.regularized_alpha,
        }
    }

    /// Writes the fully materialized config to `<dir>/effective-config.json`.
    pub fn write_effective(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let path = dir.join("effective-config.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(&path, text).map_err(|e| io_error(&path, e))
    }
}

pub fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}
