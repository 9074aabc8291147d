//! Configuration-driven experiment harness: learning curves, regulariser
//! selection by cross-validation and representation comparisons, written as
//! CSV tables.

mod compare;
mod config;
mod curve;
mod cv;
mod features;
mod stats;

pub use compare::{compare_representations, compare_variants, ComparisonRow};
pub use config::{ExperimentConfig, BETA_GRID};
pub use curve::{checkpoints, learning_curve, CurveRow, CurveTable, SummaryRow};
pub use cv::{cross_validate, select_by_cv, CvResult};
pub use features::{FeatureMatrix, Featurizer, Representation, ScopeVariant};
pub use stats::{mean_and_se, MeanSe};

use crate::envs::EnvKind;
use crate::error::Result;
use crate::seeds::named_seed;
use crate::trajectory::{compute_targets, generate, Dataset, LossMode};
use crate::value_eval::{GroundTruth, RolloutOptions};

/// Dataset used to learn representations for run `run`.
pub fn representation_data(cfg: &ExperimentConfig, run: usize) -> Result<Dataset> {
    let idx = if cfg.resample_representation { run } else { 0 };
    generate(cfg.env, cfg.policy, cfg.repr_samples, named_seed(cfg.seed, "repr", idx as u64))
}

/// Weight-fitting data for run `run`, shared by every representation.
pub fn weight_data(cfg: &ExperimentConfig, run: usize) -> Result<Dataset> {
    generate(cfg.env, cfg.policy, cfg.max_samples, named_seed(cfg.seed, "data", run as u64))
}

/// Test states from independent on-policy trajectories, with rollout values.
pub fn test_set(cfg: &ExperimentConfig) -> Result<GroundTruth> {
    let data = test_trajectories(cfg.env, cfg, cfg.test_states)?;
    let opts = RolloutOptions {
        n_rollouts: cfg.rollouts,
        gamma: 1.0,
        seed: named_seed(cfg.seed, "rollouts", 0),
        ..RolloutOptions::default()
    };
    GroundTruth::from_dataset(&data, cfg.test_states, &opts)
}

/// Enough test transitions that `n` of them carry a complete return.
fn test_trajectories(env: EnvKind, cfg: &ExperimentConfig, n: usize) -> Result<Dataset> {
    let seed = named_seed(cfg.seed, "test", 0);
    let mut len = n.max(1);
    loop {
        let data = generate(env, cfg.policy, len, seed)?;
        if compute_targets(&data, LossMode::Msre, 1.0)?.num_valid() >= n {
            return Ok(data);
        }
        len += len / 2 + 1;
    }
}
