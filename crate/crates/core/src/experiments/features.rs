use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};

use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::scope::{ScopeConfig, ScopeModel};
use crate::tilecoding::{SparseBinary, TileCoder, TileCoderConfig, TileSpec};
use crate::value_eval::Features;

/// The four sparse-coding variants compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScopeVariant {
    /// Supervised and reconstruction losses together.
    Supervised,
    Unsupervised,
    NonnegUnsupervised,
    /// Supervised loss only; the dictionary stays at its initial value.
    SupervisedOnly,
}

impl ScopeVariant {
    pub const ALL: [ScopeVariant; 4] = [
        ScopeVariant::Supervised,
        ScopeVariant::Unsupervised,
        ScopeVariant::NonnegUnsupervised,
        ScopeVariant::SupervisedOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScopeVariant::Supervised => "scope",
            ScopeVariant::Unsupervised => "unsupervised",
            ScopeVariant::NonnegUnsupervised => "nonneg-unsupervised",
            ScopeVariant::SupervisedOnly => "supervised-only",
        }
    }

    /// `base` with this variant's loss switches and `beta_B = beta_w = beta`.
    pub fn config(self, base: &ScopeConfig, beta: f64) -> ScopeConfig {
        let mut cfg = ScopeConfig {
            beta_b: beta,
            beta_w: beta,
            ..base.clone()
        };
        match self {
            ScopeVariant::Supervised => {
                cfg.supervised = true;
                cfg.reconstruct = true;
            }
            ScopeVariant::Unsupervised => {
                cfg.supervised = false;
                cfg.reconstruct = true;
                cfg.nonneg = false;
            }
            ScopeVariant::NonnegUnsupervised => {
                cfg.supervised = false;
                cfg.reconstruct = true;
                cfg.nonneg = true;
            }
            ScopeVariant::SupervisedOnly => {
                cfg.supervised = true;
                cfg.reconstruct = false;
            }
        }
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Representation {
    Scope(ScopeVariant),
    Tiles(TileSpec),
}

impl Representation {
    pub fn name(&self) -> String {
        match self {
            Representation::Scope(v) => v.name().to_string(),
            Representation::Tiles(spec) => format!("tc-{spec}"),
        }
    }

    pub fn is_learned(&self) -> bool {
        matches!(self, Representation::Scope(_))
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(spec) = s.strip_prefix("tc-") {
            return Ok(Representation::Tiles(spec.parse()?));
        }
        ScopeVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .map(Representation::Scope)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown representation '{s}'")))
    }
}

/// A fixed map from normalised observations to features.
#[derive(Debug, Clone)]
pub enum Featurizer {
    Codes(Box<ScopeModel>),
    Tiles(TileCoder),
}

impl Featurizer {
    pub fn tiles(env: EnvKind, spec: TileSpec, seed: u64) -> Result<Self> {
        Ok(Featurizer::Tiles(TileCoder::new(TileCoderConfig::for_env(env, spec, seed)?)?))
    }

    pub fn features(&self, x: &Array2<f64>) -> Result<FeatureMatrix> {
        match self {
            Featurizer::Codes(model) => Ok(FeatureMatrix::Dense(model.encode(x)?)),
            Featurizer::Tiles(tc) => Ok(FeatureMatrix::Sparse(tc.feature_matrix(x.view())?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMatrix {
    Dense(Array2<f64>),
    Sparse(SparseBinary),
}

impl FeatureMatrix {
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        match self {
            FeatureMatrix::Dense(m) => FeatureMatrix::Dense(m.select(ndarray::Axis(0), rows)),
            FeatureMatrix::Sparse(s) => FeatureMatrix::Sparse(s.select_rows(rows)),
        }
    }
}

impl Features for FeatureMatrix {
    fn nrows(&self) -> usize {
        match self {
            FeatureMatrix::Dense(m) => m.nrows(),
            FeatureMatrix::Sparse(s) => s.nrows(),
        }
    }

    fn ncols(&self) -> usize {
        match self {
            FeatureMatrix::Dense(m) => m.ncols(),
            FeatureMatrix::Sparse(s) => s.ncols(),
        }
    }

    fn mul_vec(&self, w: &Array1<f64>) -> Array1<f64> {
        match self {
            FeatureMatrix::Dense(m) => m.dot(w),
            FeatureMatrix::Sparse(s) => s.mul_vec(w),
        }
    }

    fn t_mul_vec(&self, r: &Array1<f64>) -> Array1<f64> {
        match self {
            FeatureMatrix::Dense(m) => m.t().dot(r),
            FeatureMatrix::Sparse(s) => s.t_mul_vec(r),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for v in ScopeVariant::ALL {
            let r = Representation::Scope(v);
            assert_eq!(r.name().parse::<Representation>().unwrap(), r);
        }
        let tc: Representation = "tc-16-8".parse().unwrap();
        assert_eq!(tc, Representation::Tiles(TileSpec { num_tilings: 16, grid_size: 8 }));
        assert_eq!(tc.to_string(), "tc-16-8");
        assert!("sparse".parse::<Representation>().is_err());
    }

    #[test]
    fn variant_switches() {
        let base = ScopeConfig::default();
        let c = ScopeVariant::NonnegUnsupervised.config(&base, 0.01);
        assert!(!c.supervised && c.reconstruct && c.nonneg);
        assert_eq!((c.beta_b, c.beta_w), (0.01, 0.01));
        let c = ScopeVariant::SupervisedOnly.config(&base, 0.0);
        assert!(c.supervised && !c.reconstruct);
    }
}
