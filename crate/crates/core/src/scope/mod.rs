//! Supervised sparse coding for policy evaluation.
//!
//! Jointly learns a dictionary `B` (`k x d`), a sparse code `Phi`
//! (`(t+1) x k`, one row per observation) and value weights `w` (`k`) by
//! minimising the sample objective
//!
//! ```text
//!   1/t sum_{i<t}  (y_i + g_i phi_{i+1} w - phi_i w)^2      supervised
//! + 1/t sum_{i<=t} |phi_i B - x_i|^2                        reconstruction
//! + beta_B |B|_F^2 + beta_w |w|^2 + beta_phi/t sum_i |phi_i|_1^p
//! ```
//!
//! with block coordinate descent: proximal gradient steps on `Phi`, and
//! gradient steps with backtracking on `w` and `B`.

mod encode;
mod fit;
mod io;
mod objective;
mod prox;

use std::ops::Range;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::trajectory::{compute_targets, Dataset, LossMode, TargetVector};

pub use encode::{encode_states, EncodeOptions};
pub use fit::{fit, fit_dataset, fit_from, init_model, update_b, update_phi, update_w, FitTrace, StepSizes, TraceEntry};
pub use io::{dump_phi, read_phi, write_trace};
pub use objective::{
    grad_b, grad_phi_smooth, grad_w, lipschitz_bound, objective, objective_joint_form, phi_lipschitz,
    ObjectiveBreakdown,
};
pub use prox::{prox_l1, prox_l1_squared, prox_rows};

/// Power on the per-row L1 penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum L1Power {
    One,
    Two,
}

impl L1Power {
    pub fn as_u8(self) -> u8 {
        match self {
            L1Power::One => 1,
            L1Power::Two => 2,
        }
    }

    pub fn from_u8(p: u8) -> Result<Self> {
        match p {
            1 => Ok(L1Power::One),
            2 => Ok(L1Power::Two),
            _ => Err(Error::InvalidConfig(format!("L1 power must be 1 or 2, got {p}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScopeConfig {
    /// Number of dictionary atoms; must exceed the observation dimension.
    pub k: usize,
    pub beta_b: f64,
    pub beta_w: f64,
    pub beta_phi: f64,
    pub power: L1Power,
    pub loss: LossMode,
    pub gamma: f64,
    pub max_outer_iters: usize,
    /// Steps taken on each block per outer iteration.
    pub inner_iters: usize,
    /// Stop once the relative objective decrease falls below this.
    pub tolerance: f64,
    pub seed: u64,
    /// Constrain `Phi >= 0`.
    pub nonneg: bool,
    /// Include the supervised loss (and learn `w`).
    pub supervised: bool,
    /// Include the reconstruction loss (and learn `B`).
    pub reconstruct: bool,
}

impl Default for ScopeConfig {
    fn default() -> Self {
        ScopeConfig {
            k: 100,
            beta_b: 1e-3,
            beta_w: 1e-3,
            beta_phi: 0.1,
            power: L1Power::One,
            loss: LossMode::Msre,
            gamma: 1.0,
            max_outer_iters: 500,
            inner_iters: 1,
            tolerance: 1e-6,
            seed: 0,
            nonneg: false,
            supervised: true,
            reconstruct: true,
        }
    }
}

impl ScopeConfig {
    /// Plain (unsupervised) sparse coding with the same regularisers.
    pub fn unsupervised(mut self) -> Self {
        self.supervised = false;
        self
    }

    pub fn validate(&self, obs_dim: usize) -> Result<()> {
        if self.k <= obs_dim {
            return Err(Error::InvalidConfig(format!(
                "inner dimension k={} must exceed the observation dimension {obs_dim}",
                self.k
            )));
        }
        for (name, v) in [("beta_b", self.beta_b), ("beta_w", self.beta_w), ("beta_phi", self.beta_phi)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("tolerance must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if self.inner_iters == 0 {
            return Err(Error::InvalidConfig("inner_iters must be at least 1".into()));
        }
        if !self.supervised && !self.reconstruct {
            return Err(Error::InvalidConfig("at least one of the two losses must be enabled".into()));
        }
        Ok(())
    }

    pub(crate) fn encode_options(&self) -> EncodeOptions {
        EncodeOptions {
            beta_phi: self.beta_phi,
            nonneg: self.nonneg,
            power: self.power,
            ..EncodeOptions::default()
        }
    }
}

/// A fitted dictionary, code and value weights, plus the settings used.
#[derive(Debug, Clone, PartialEq)]
pub struct ScopeModel {
    pub b: Array2<f64>,
    pub phi: Array2<f64>,
    pub w: Array1<f64>,
    pub config: ScopeConfig,
}

impl ScopeModel {
    pub fn k(&self) -> usize {
        self.b.nrows()
    }

    pub fn obs_dim(&self) -> usize {
        self.b.ncols()
    }

    /// Fraction of exactly-zero entries in `Phi`.
    pub fn phi_sparsity(&self) -> f64 {
        sparsity(&self.phi)
    }

    /// Sparse codes for new (normalised) observations against the learned dictionary.
    pub fn encode(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        encode_states(&self.b, x, &self.config.encode_options())
    }
}

pub(crate) fn sparsity(m: &Array2<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.iter().filter(|&&v| v == 0.0).count() as f64 / m.len() as f64
}

/// Observations plus the per-transition supervised terms they feed.
///
/// Row `i` of `x` is `x_i`; supervised term `i < t` couples rows `i` and
/// `i + 1` with discount `discount[i]` and is counted with `weight[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedSet {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub discount: Array1<f64>,
    pub weight: Array1<f64>,
}

impl SupervisedSet {
    pub fn new(x: Array2<f64>, y: Array1<f64>, discount: Array1<f64>, weight: Array1<f64>) -> Result<Self> {
        let t = x.nrows().saturating_sub(1);
        if x.nrows() < 2 {
            return Err(Error::Shape("need at least two observation rows".into()));
        }
        if y.len() != t || discount.len() != t || weight.len() != t {
            return Err(Error::Shape(format!(
                "{} observation rows need {t} targets, got y={} discount={} weight={}",
                x.nrows(),
                y.len(),
                discount.len(),
                weight.len()
            )));
        }
        Ok(SupervisedSet { x, y, discount, weight })
    }

    /// Observations only; every supervised term is switched off.
    pub fn unsupervised(x: Array2<f64>) -> Result<Self> {
        let t = x.nrows().saturating_sub(1);
        SupervisedSet::new(x, Array1::zeros(t), Array1::zeros(t), Array1::zeros(t))
    }

    pub fn from_dataset(data: &Dataset, targets: &TargetVector) -> Result<Self> {
        SupervisedSet::from_segments(data, targets, &[0..data.len()])
    }

    /// Concatenate transition ranges of a dataset. At a junction between
    /// ranges the successor row is not the true next observation, so the
    /// bootstrap discount is zeroed there and bootstrapped (BE) terms dropped.
    pub fn from_segments(data: &Dataset, targets: &TargetVector, ranges: &[Range<usize>]) -> Result<Self> {
        if targets.len() != data.len() {
            return Err(Error::Shape("targets do not match the dataset".into()));
        }
        let ranges: Vec<_> = ranges.iter().filter(|r| !r.is_empty()).cloned().collect();
        if ranges.is_empty() || ranges.iter().any(|r| r.end > data.len()) {
            return Err(Error::Shape("segment ranges are empty or out of bounds".into()));
        }
        let d = data.obs_dim();
        let t: usize = ranges.iter().map(|r| r.len()).sum();
        let trs = data.transitions();
        let mut x = Array2::zeros((t + 1, d));
        let mut y = Array1::zeros(t);
        let mut discount = Array1::zeros(t);
        let mut weight = Array1::zeros(t);
        let mut row = 0;
        for (ri, range) in ranges.iter().enumerate() {
            let last_range = ri + 1 == ranges.len();
            for i in range.clone() {
                data.env.normalize_into(&trs[i].obs, x.row_mut(row).as_slice_mut().unwrap());
                y[row] = targets.values[i];
                discount[row] = targets.discounts[i];
                weight[row] = if targets.valid[i] { 1.0 } else { 0.0 };
                if i + 1 == range.end && !last_range {
                    if discount[row] > 0.0 {
                        weight[row] = 0.0;
                    }
                    discount[row] = 0.0;
                }
                row += 1;
            }
            if last_range {
                let last = &trs[range.end - 1];
                data.env.normalize_into(&last.next_obs, x.row_mut(t).as_slice_mut().unwrap());
            }
        }
        SupervisedSet::new(x, y, discount, weight)
    }

    /// Number of transitions `t` (rows minus one).
    pub fn t(&self) -> usize {
        self.x.nrows() - 1
    }

    pub fn obs_dim(&self) -> usize {
        self.x.ncols()
    }

    /// Largest bootstrap discount over the supervised terms.
    pub fn gamma_max(&self) -> f64 {
        self.discount.iter().copied().fold(0.0, f64::max)
    }
}

/// Build the supervised set for a dataset under `cfg.loss` / `cfg.gamma`.
pub fn supervised_set(data: &Dataset, cfg: &ScopeConfig) -> Result<SupervisedSet> {
    let targets = compute_targets(data, cfg.loss, cfg.gamma)?;
    SupervisedSet::from_dataset(data, &targets)
}
