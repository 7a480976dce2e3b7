//! Reproducible Monte Carlo experiments and the statistical checks built on them.

pub mod covariance;
pub mod engine;
pub mod estimators;
pub mod lindeberg;
pub mod marginal;
pub mod moments_mc;
pub mod onedim;
pub mod report;
pub mod shat;
pub mod stats;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::ensembles::EnsembleKind;
use crate::error::{Error, Result};
use crate::processes::GridSpec;
use crate::rng::derive_seed;

pub use engine::{Engine, Merge};
pub use report::{Check, KS_ALPHA, Z_IDENTITY, Z_MOMENT};
pub use stats::{EstimateWithCI, KsResult, MeanVar};

fn default_workers() -> usize {
    1
}

/// Everything that determines an experiment's output. The worker count is
/// deliberately not serialized: it cannot change any result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub ensemble: EnsembleKind,
    pub n_values: Vec<usize>,
    pub replicas: u64,
    pub grid: GridSpec,
    pub seed: u64,
    #[serde(skip_serializing, default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(ensemble: EnsembleKind, n_values: Vec<usize>, replicas: u64, seed: u64) -> Self {
        Self {
            ensemble,
            n_values,
            replicas,
            grid: GridSpec::default_grid(),
            seed,
            workers: default_workers(),
            output_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::invalid("replicas must be at least 1"));
        }
        if self.n_values.is_empty() {
            return Err(Error::invalid("at least one n is required"));
        }
        if self.n_values.contains(&0) {
            return Err(Error::invalid("every n must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers must be at least 1"));
        }
        GridSpec::new(self.grid.s_points().to_vec(), self.grid.t_points().to_vec())?;
        Ok(())
    }

    pub fn engine(&self) -> Result<Engine> {
        self.validate()?;
        Engine::new(self.workers)
    }
}

/// Seed for one sub-experiment, keyed by a readable tag.
pub(crate) fn sub_seed(seed: u64, tag: impl AsRef<str>) -> u64 {
    derive_seed(seed, tag.as_ref())
}
