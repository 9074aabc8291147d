use std::ops::Range;

use ndarray::{Array1, Array2};

use super::features::ScopeVariant;
use crate::error::{Error, Result};
use crate::scope::{fit, ScopeConfig, SupervisedSet};
use crate::trajectory::{compute_targets, Dataset, LossMode};
use crate::value_eval::{fit_weights, msre, Features};

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub chosen: f64,
    /// Mean held-out error for each grid value, in grid order.
    pub scores: Vec<(f64, f64)>,
}

/// Contiguous, nearly equal blocks covering `0..n`.
pub fn fold_ranges(n: usize, folds: usize) -> Vec<Range<usize>> {
    (0..folds).map(|f| f * n / folds..(f + 1) * n / folds).collect()
}

/// Evaluate `score(beta, train_ranges, held_out)` on every fold and pick the
/// beta with the lowest mean. Scores within 1e-12 relative count as tied and
/// the larger beta wins.
pub fn select_by_cv<F>(n: usize, folds: usize, grid: &[f64], mut score: F) -> Result<CvResult>
where
    F: FnMut(f64, &[Range<usize>], Range<usize>) -> Result<f64>,
{
    if folds < 2 || n < folds {
        return Err(Error::InvalidConfig(format!("cannot split {n} samples into {folds} folds")));
    }
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty regulariser grid".into()));
    }
    let ranges = fold_ranges(n, folds);
    let mut scores = Vec::with_capacity(grid.len());
    for &beta in grid {
        let mut total = 0.0;
        for (f, held) in ranges.iter().enumerate() {
            let train: Vec<Range<usize>> = ranges
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .map(|(_, r)| r.clone())
                .collect();
            let s = score(beta, &train, held.clone())?;
            total += if s.is_finite() { s } else { f64::INFINITY };
        }
        scores.push((beta, total / folds as f64));
    }
    let mut best = scores[0];
    for &(beta, s) in &scores[1..] {
        let tied = (s - best.1).abs() <= 1e-12 * s.abs().max(best.1.abs());
        if s < best.1 && !tied || tied && beta > best.0 {
            best = (beta, s);
        }
    }
    Ok(CvResult { chosen: best.0, scores })
}

/// Choose `beta_B = beta_w` for a sparse-coding variant by contiguous k-fold
/// cross-validation. For each fold the representation is learned on the
/// other folds, weights are fitted to returns on the encoded training
/// observations, and the score is the return error on the encoded held-out
/// observations.
pub fn cross_validate(
    data: &Dataset,
    variant: ScopeVariant,
    base: &ScopeConfig,
    grid: &[f64],
    folds: usize,
) -> Result<CvResult> {
    let train_targets = compute_targets(data, base.loss, base.gamma)?;
    let returns = compute_targets(data, LossMode::Msre, 1.0)?;
    let x = data.observation_matrix();
    let rows_of = |ranges: &[Range<usize>]| -> Vec<usize> {
        ranges.iter().flat_map(|r| r.clone()).filter(|&i| returns.valid[i]).collect()
    };
    select_by_cv(data.len(), folds, grid, |beta, train, held| {
        let cfg = variant.config(base, beta);
        let set = SupervisedSet::from_segments(data, &train_targets, train)?;
        let model = match fit(&set, &cfg) {
            Ok((m, _)) => m,
            Err(Error::Divergence { .. }) => return Ok(f64::INFINITY),
            Err(e) => return Err(e),
        };
        let train_rows = rows_of(train);
        let held_rows = rows_of(std::slice::from_ref(&held));
        if train_rows.is_empty() || held_rows.is_empty() {
            return Ok(f64::INFINITY);
        }
        let encode = |rows: &[usize]| -> Result<Array2<f64>> { model.encode(&x.select(ndarray::Axis(0), rows)) };
        let target = |rows: &[usize]| -> Array1<f64> { rows.iter().map(|&i| returns.values[i]).collect() };
        let wfit = match fit_weights(&encode(&train_rows)?, &target(&train_rows), beta) {
            Ok(f) => f,
            Err(Error::Divergence { .. }) => return Ok(f64::INFINITY),
            Err(e) => return Err(e),
        };
        let pred = encode(&held_rows)?.mul_vec(&wfit.weights);
        Ok(msre(&pred, &target(&held_rows)))
    })
}
