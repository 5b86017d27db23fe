//! Pipeline run configuration.
//!
//! One JSON file configures every stage; unknown keys are rejected so typos
//! fail loudly. Every field has a default, and the resolved configuration is
//! echoed into JSON outputs for provenance.
//!
//! All randomness flows from the master `seed`: each stage derives its own
//! seed as `stage_seed(master, stage_name)` (see `cltm::seed`). A stage
//! section may pin an explicit nonzero seed to decouple it.

use cltm::error::{Error, Result};
use cltm::kernel::{CondDistanceConfig, DistanceLimits};
use cltm::model::TrainConfig;
use cltm::seed::stage_seed;
use cltm::synthetic::SynthSpec;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub kernel: KernelSection,
    pub structure: StructureSection,
    pub train: TrainConfig,
    pub eval: EvalSection,
    pub synth: SynthSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSection {
    /// RBF bandwidth; omitted means the median heuristic.
    pub gamma: Option<f64>,
    pub lambda: f64,
    /// Solve `(K + lambda * n * I)` when true, `(K + lambda * I)` when false.
    pub scale_lambda_by_n: bool,
    /// Number of query points averaged; omitted means `min(n, 1000)`.
    pub query_subsample: Option<usize>,
    /// Nystrom landmark count; omitted means the exact solve.
    pub nystrom_landmarks: Option<usize>,
    pub det_floor: f64,
    pub clamp_ceiling: f64,
}

impl Default for KernelSection {
    fn default() -> Self {
        let limits = DistanceLimits::default();
        KernelSection {
            gamma: None,
            lambda: 1e-3,
            scale_lambda_by_n: true,
            query_subsample: None,
            nystrom_landmarks: None,
            det_floor: limits.det_floor,
            clamp_ceiling: limits.clamp_ceiling,
        }
    }
}

impl KernelSection {
    pub fn to_cond_distance_config(&self, master_seed: u64) -> CondDistanceConfig {
        CondDistanceConfig {
            gamma: self.gamma,
            lambda: self.lambda,
            scale_lambda_by_n: self.scale_lambda_by_n,
            query_subsample: self.query_subsample,
            landmarks: self.nystrom_landmarks,
            limits: DistanceLimits {
                det_floor: self.det_floor,
                clamp_ceiling: self.clamp_ceiling,
            },
            seed: stage_seed(master_seed, "distances"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StructureSection {
    /// Grouping tolerance; omitted means 5% of the median off-diagonal
    /// distance.
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Points in the PR threshold grid over [0, 1].
    pub threshold_grid_points: usize,
    /// Cluster count for the scene evaluation; omitted means the number of
    /// distinct scene ids.
    pub kmeans_k: Option<usize>,
    pub kmeans_restarts: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            threshold_grid_points: 101,
            kmeans_k: None,
            kmeans_restarts: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub spec: SynthSpec,
    pub n: usize,
    /// Leading fraction of samples marked as the training split.
    pub train_fraction: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            spec: SynthSpec::default(),
            n: 1000,
            train_fraction: 0.8,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let config: RunConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if !(self.synth.train_fraction > 0.0 && self.synth.train_fraction <= 1.0) {
            return Err(Error::InvalidInput("train_fraction must be in (0, 1]".into()));
        }
        if self.eval.threshold_grid_points < 2 {
            return Err(Error::InvalidInput("threshold grid needs >= 2 points".into()));
        }
        Ok(())
    }

    /// Train-stage config with the stage seed derived from the master seed
    /// (unless pinned explicitly).
    pub fn train_config(&self, stage: &str) -> TrainConfig {
        let mut config = self.train.clone();
        if config.seed == 0 {
            config.seed = stage_seed(self.seed, stage);
        }
        config
    }
}
