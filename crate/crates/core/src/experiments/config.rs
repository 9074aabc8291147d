use std::path::{Path, PathBuf};

use super::features::Representation;
use crate::envs::{EnvKind, PolicyKind};
use crate::error::{Error, Result};
use crate::scope::{L1Power, ScopeConfig};
use crate::textio::read_to_string;
use crate::tilecoding::{TileSpec, DEFAULT_SWEEP};
use crate::trajectory::LossMode;

/// Regulariser grid: decades from 1e-5 to 1e-1, plus zero.
pub const BETA_GRID: [f64; 6] = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 0.0];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    pub policy: PolicyKind,
    /// Top-level seed; every job seed is derived from it.
    pub seed: u64,
    pub runs: usize,
    /// Largest weight-fitting sample count.
    pub max_samples: usize,
    /// Distance between learning-curve checkpoints.
    pub spacing: usize,
    /// Samples used to learn each sparse-coding representation.
    pub repr_samples: usize,
    pub test_states: usize,
    pub rollouts: usize,
    pub representations: Vec<Representation>,
    /// Settings shared by the sparse-coding variants (the betas for `B` and
    /// `w` come from cross-validation unless `beta` is set).
    pub scope: ScopeConfig,
    pub beta_grid: Vec<f64>,
    pub folds: usize,
    /// Fixed `beta_B = beta_w` for the sparse-coding variants, skipping
    /// cross-validation.
    pub beta: Option<f64>,
    /// Learn a fresh representation for every run instead of one shared one.
    pub resample_representation: bool,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(env: EnvKind) -> Self {
        let mut representations = vec![Representation::Scope(super::ScopeVariant::Supervised)];
        representations.extend(DEFAULT_SWEEP.iter().map(|&(d, n)| {
            Representation::Tiles(TileSpec {
                num_tilings: d,
                grid_size: n,
            })
        }));
        ExperimentConfig {
            env,
            policy: env.default_policy(),
            seed: 0,
            runs: 50,
            max_samples: 5000,
            spacing: 50,
            repr_samples: 5000,
            test_states: 5000,
            rollouts: 100,
            representations,
            scope: ScopeConfig {
                k: 100,
                beta_phi: 0.1,
                ..ScopeConfig::default()
            },
            beta_grid: BETA_GRID.to_vec(),
            folds: 5,
            beta: None,
            resample_representation: false,
            out_dir: PathBuf::from("out"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.policy.env() != self.env {
            return bad(format!("policy {} does not act in {}", self.policy, self.env));
        }
        if self.spacing == 0 || self.max_samples == 0 || self.max_samples % self.spacing != 0 {
            return bad(format!(
                "checkpoint spacing {} must divide the sample count {}",
                self.spacing, self.max_samples
            ));
        }
        if self.runs == 0 || self.rollouts == 0 || self.test_states == 0 || self.repr_samples < 2 {
            return bad("runs, rollouts, test_states and repr_samples must be positive".into());
        }
        if self.representations.is_empty() {
            return bad("no representations selected".into());
        }
        if self.beta_grid.is_empty() || self.beta_grid.iter().any(|b| !(*b >= 0.0)) {
            return bad("beta grid must be non-empty and non-negative".into());
        }
        if self.folds < 2 {
            return bad("cross-validation needs at least two folds".into());
        }
        self.scope.validate(self.env.obs_dim())
    }

    /// Apply one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn p<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("invalid value '{v}' for {key}")))
        }
        let value = value.trim();
        match key.trim() {
            "env" => {
                self.env = value.parse()?;
                self.policy = self.env.default_policy();
            }
            "policy" => self.policy = value.parse()?,
            "seed" => self.seed = p(key, value)?,
            "runs" => self.runs = p(key, value)?,
            "max_samples" => self.max_samples = p(key, value)?,
            "spacing" => self.spacing = p(key, value)?,
            "repr_samples" => self.repr_samples = p(key, value)?,
            "test_states" => self.test_states = p(key, value)?,
            "rollouts" => self.rollouts = p(key, value)?,
            "representations" => {
                self.representations = list(value).map(str::parse).collect::<Result<_>>()?;
            }
            "k" => self.scope.k = p(key, value)?,
            "beta_phi" => self.scope.beta_phi = p(key, value)?,
            "p" => self.scope.power = L1Power::from_u8(p(key, value)?)?,
            "loss" => self.scope.loss = value.parse::<LossMode>()?,
            "gamma" => self.scope.gamma = p(key, value)?,
            "max_outer_iters" => self.scope.max_outer_iters = p(key, value)?,
            "inner_iters" => self.scope.inner_iters = p(key, value)?,
            "tolerance" => self.scope.tolerance = p(key, value)?,
            "beta_grid" => self.beta_grid = list(value).map(|v| p(key, v)).collect::<Result<_>>()?,
            "folds" => self.folds = p(key, value)?,
            "beta" => {
                self.beta = match value {
                    "cv" | "" => None,
                    v => Some(p(key, v)?),
                }
            }
            "resample_representation" => self.resample_representation = p(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            other => return Err(Error::InvalidConfig(format!("unknown configuration key '{other}'"))),
        }
        Ok(())
    }

    /// Parse a flat `key = value` file on top of the defaults for its `env`
    /// (which must come first if present). `#` starts a comment.
    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = ExperimentConfig::new(EnvKind::MountainCar);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, i + 1, "expected key = value"))?;
            if k.trim() == "env" {
                let env: EnvKind = v.trim().parse().map_err(|e: Error| Error::parse(path, i + 1, e.to_string()))?;
                let out_dir = cfg.out_dir.clone();
                cfg = ExperimentConfig { out_dir, ..ExperimentConfig::new(env) };
                continue;
            }
            cfg.set(k, v).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        ExperimentConfig::from_text(&read_to_string(path)?, path)
    }

    /// Learning-curve sample counts.
    pub fn checkpoints(&self) -> Vec<usize> {
        super::curve::checkpoints(self.max_samples, self.spacing)
    }
}

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}
