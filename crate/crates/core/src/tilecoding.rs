//! Hashed tile coding: `D` offset grids of `N^dim` cells over a box, with the
//! active tile indices hashed into a fixed-width binary feature vector.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2};

use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::seeds::mix64;

/// The six grid configurations swept by default, as `(tilings, grid size)`.
pub const DEFAULT_SWEEP: [(usize, usize); 6] = [(4, 4), (4, 8), (16, 4), (16, 8), (32, 4), (32, 8)];

#[derive(Debug, Clone, PartialEq)]
pub struct TileCoderConfig {
    pub grid_size: usize,
    pub num_tilings: usize,
    pub input_dim: usize,
    pub input_bounds: Vec<(f64, f64)>,
    pub hash_dim: usize,
    pub seed: u64,
}

impl TileCoderConfig {
    pub fn new(
        num_tilings: usize,
        grid_size: usize,
        input_bounds: Vec<(f64, f64)>,
        hash_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        let cfg = TileCoderConfig {
            grid_size,
            num_tilings,
            input_dim: input_bounds.len(),
            input_bounds,
            hash_dim,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Tile coder over observations already scaled to the unit box, hashed to
    /// the width used for `env`.
    pub fn for_env(env: EnvKind, spec: TileSpec, seed: u64) -> Result<Self> {
        TileCoderConfig::new(
            spec.num_tilings,
            spec.grid_size,
            vec![(0.0, 1.0); env.obs_dim()],
            env.tile_hash_dim(),
            seed,
        )
    }

    fn validate(&self) -> Result<()> {
        if self.grid_size == 0 || self.num_tilings == 0 || self.hash_dim == 0 || self.input_dim == 0 {
            return Err(Error::InvalidConfig(format!("degenerate tile coder {self:?}")));
        }
        if self.input_bounds.iter().any(|&(lo, hi)| !(hi > lo)) {
            return Err(Error::InvalidConfig("tile coder bounds must satisfy lo < hi".into()));
        }
        if self.raw_features_checked().is_none() {
            return Err(Error::InvalidConfig("raw tile count overflows".into()));
        }
        Ok(())
    }

    fn raw_features_checked(&self) -> Option<usize> {
        let mut cells: usize = 1;
        for _ in 0..self.input_dim {
            cells = cells.checked_mul(self.grid_size)?;
        }
        cells.checked_mul(self.num_tilings)
    }

    /// `D * N^dim`: the number of distinct tiles before hashing.
    pub fn raw_features(&self) -> usize {
        self.raw_features_checked().expect("validated")
    }

    /// Hashing only engages when the raw tiles do not fit in `hash_dim`.
    pub fn is_hashed(&self) -> bool {
        self.raw_features() > self.hash_dim
    }

    pub fn spec(&self) -> TileSpec {
        TileSpec {
            num_tilings: self.num_tilings,
            grid_size: self.grid_size,
        }
    }
}

/// A `"D-N"` tile-coding shorthand: `D` tilings of an `N`-per-dimension grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TileSpec {
    pub num_tilings: usize,
    pub grid_size: usize,
}

impl fmt::Display for TileSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.num_tilings, self.grid_size)
    }
}

impl FromStr for TileSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("tile spec '{s}' is not of the form D-N"));
        let (d, n) = s.trim().split_once('-').ok_or_else(bad)?;
        let num_tilings = d.trim().parse::<usize>().map_err(|_| bad())?;
        let grid_size = n.trim().parse::<usize>().map_err(|_| bad())?;
        if num_tilings == 0 || grid_size == 0 {
            return Err(bad());
        }
        Ok(TileSpec {
            num_tilings,
            grid_size,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TileCoder {
    cfg: TileCoderConfig,
}

impl TileCoder {
    pub fn new(cfg: TileCoderConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(TileCoder { cfg })
    }

    pub fn config(&self) -> &TileCoderConfig {
        &self.cfg
    }

    /// Output width of [`encode`](Self::encode).
    pub fn num_features(&self) -> usize {
        self.cfg.hash_dim
    }

    /// Grid cell of `x` in tiling `tiling`. Tiling `j` is shifted by `j / D`
    /// of a cell along every dimension.
    fn cells(&self, x: &[f64], tiling: usize, out: &mut Vec<usize>) {
        let n = self.cfg.grid_size;
        let offset = tiling as f64 / self.cfg.num_tilings as f64;
        out.clear();
        for (&v, &(lo, hi)) in x.iter().zip(&self.cfg.input_bounds) {
            let u = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
            let c = (u * n as f64 + offset).floor() as usize;
            out.push(c.min(n - 1));
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.cfg.input_dim {
            return Err(Error::Shape(format!(
                "tile coder expects {} inputs, got {}",
                self.cfg.input_dim,
                x.len()
            )));
        }
        Ok(())
    }

    /// One raw tile index per tiling, in `0 .. D * N^dim`.
    pub fn raw_tiles(&self, x: &[f64]) -> Result<Vec<usize>> {
        self.check_dim(x)?;
        let n = self.cfg.grid_size;
        let per_tiling = self.cfg.raw_features() / self.cfg.num_tilings;
        let mut cells = Vec::with_capacity(x.len());
        Ok((0..self.cfg.num_tilings)
            .map(|tiling| {
                self.cells(x, tiling, &mut cells);
                let flat = cells.iter().fold(0usize, |acc, &c| acc * n + c);
                tiling * per_tiling + flat
            })
            .collect())
    }

    fn hash(&self, tiling: usize, cells: &[usize]) -> usize {
        let mut h = mix64(self.cfg.seed ^ 0x5CA1_AB1E);
        h = mix64(h ^ tiling as u64);
        for &c in cells {
            h = mix64(h ^ c as u64);
        }
        (h % self.cfg.hash_dim as u64) as usize
    }

    /// Active feature indices (sorted, distinct) in `0 .. hash_dim`.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<usize>> {
        let mut active = if self.cfg.is_hashed() {
            self.check_dim(x)?;
            let mut cells = Vec::with_capacity(x.len());
            (0..self.cfg.num_tilings)
                .map(|tiling| {
                    self.cells(x, tiling, &mut cells);
                    self.hash(tiling, &cells)
                })
                .collect()
        } else {
            self.raw_tiles(x)?
        };
        active.sort_unstable();
        active.dedup();
        Ok(active)
    }

    /// Row-wise [`encode`](Self::encode).
    pub fn feature_matrix(&self, x: ArrayView2<f64>) -> Result<SparseBinary> {
        let mut indptr = Vec::with_capacity(x.nrows() + 1);
        let mut indices = Vec::with_capacity(x.nrows() * self.cfg.num_tilings);
        indptr.push(0);
        for row in x.rows() {
            let row = row.to_vec();
            indices.extend(self.encode(&row)?);
            indptr.push(indices.len());
        }
        Ok(SparseBinary {
            cols: self.cfg.hash_dim,
            indptr,
            indices,
        })
    }
}

/// Convenience wrapper for [`TileCoder::feature_matrix`].
pub fn feature_matrix(cfg: &TileCoderConfig, x: ArrayView2<f64>) -> Result<SparseBinary> {
    TileCoder::new(cfg.clone())?.feature_matrix(x)
}

/// Compressed-row binary matrix: every stored entry is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseBinary {
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
}

impl SparseBinary {
    pub fn nrows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.indices[self.indptr[i]..self.indptr[i + 1]]
    }

    /// The first `n` rows.
    pub fn head(&self, n: usize) -> SparseBinary {
        let n = n.min(self.nrows());
        SparseBinary {
            cols: self.cols,
            indptr: self.indptr[..=n].to_vec(),
            indices: self.indices[..self.indptr[n]].to_vec(),
        }
    }

    /// Keep only the listed rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> SparseBinary {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        for &r in rows {
            indices.extend_from_slice(self.row(r));
            indptr.push(indices.len());
        }
        SparseBinary {
            cols: self.cols,
            indptr,
            indices,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.nrows(), self.cols));
        for i in 0..self.nrows() {
            for &j in self.row(i) {
                out[[i, j]] = 1.0;
            }
        }
        out
    }

    pub fn mul_vec(&self, w: &Array1<f64>) -> Array1<f64> {
        Array1::from_iter((0..self.nrows()).map(|i| self.row(i).iter().map(|&j| w[j]).sum::<f64>()))
    }

    pub fn t_mul_vec(&self, r: &Array1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.cols);
        for i in 0..self.nrows() {
            let ri = r[i];
            if ri != 0.0 {
                for &j in self.row(i) {
                    out[j] += ri;
                }
            }
        }
        out
    }
}
