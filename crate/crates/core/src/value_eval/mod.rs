//! Linear value fitting on a fixed representation, ground-truth values and
//! error measures.

mod rollout;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg;
use crate::tilecoding::SparseBinary;

pub use rollout::{
    rollout_values, true_values_rollout, EnvChain, GroundTruth, RolloutModel, RolloutOptions, RolloutValues, TabularChain,
    HORIZON_CUTOFF,
};

/// A feature matrix usable for linear value fitting.
pub trait Features: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `F w`
    fn mul_vec(&self, w: &Array1<f64>) -> Array1<f64>;
    /// `F^T r`
    fn t_mul_vec(&self, r: &Array1<f64>) -> Array1<f64>;
}

impl Features for Array2<f64> {
    fn nrows(&self) -> usize {
        Array2::nrows(self)
    }

    fn ncols(&self) -> usize {
        Array2::ncols(self)
    }

    fn mul_vec(&self, w: &Array1<f64>) -> Array1<f64> {
        self.dot(w)
    }

    fn t_mul_vec(&self, r: &Array1<f64>) -> Array1<f64> {
        self.t().dot(r)
    }
}

impl Features for SparseBinary {
    fn nrows(&self) -> usize {
        SparseBinary::nrows(self)
    }

    fn ncols(&self) -> usize {
        SparseBinary::ncols(self)
    }

    fn mul_vec(&self, w: &Array1<f64>) -> Array1<f64> {
        SparseBinary::mul_vec(self, w)
    }

    fn t_mul_vec(&self, r: &Array1<f64>) -> Array1<f64> {
        SparseBinary::t_mul_vec(self, r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueFit {
    pub weights: Array1<f64>,
    pub train_msre: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Stop once the gradient norm drops below this.
    pub grad_tolerance: f64,
    pub max_iters: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            grad_tolerance: 1e-6,
            max_iters: 200_000,
        }
    }
}

/// Mean squared error between predictions and targets.
pub fn msre(pred: &Array1<f64>, targets: &Array1<f64>) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    pred.iter().zip(targets).map(|(p, g)| (p - g).powi(2)).sum::<f64>() / pred.len() as f64
}

/// Minimise `(1/m) |g - F w|^2 + beta |w|^2` starting from zero.
pub fn fit_weights<F: Features + ?Sized>(features: &F, returns: &Array1<f64>, beta_w: f64) -> Result<ValueFit> {
    fit_weights_from(features, returns, beta_w, None, &FitOptions::default())
}

/// Conjugate-gradient descent: each step is an exact line search along a
/// direction conjugate to the previous ones, so the objective never
/// increases. Stops once the gradient norm is below the tolerance.
pub fn fit_weights_from<F: Features + ?Sized>(
    features: &F,
    returns: &Array1<f64>,
    beta_w: f64,
    start: Option<&Array1<f64>>,
    opts: &FitOptions,
) -> Result<ValueFit> {
    let m = features.nrows();
    if returns.len() != m {
        return Err(Error::Shape(format!("{m} feature rows but {} returns", returns.len())));
    }
    if !(beta_w >= 0.0) {
        return Err(Error::InvalidConfig(format!("beta_w must be >= 0, got {beta_w}")));
    }
    let n = features.ncols();
    let mut w = match start {
        Some(w0) if w0.len() == n => w0.clone(),
        Some(w0) => return Err(Error::Shape(format!("start has {} weights, expected {n}", w0.len()))),
        None => Array1::zeros(n),
    };
    if m == 0 {
        return Ok(ValueFit { weights: w, train_msre: 0.0, iterations: 0, converged: true });
    }
    let inv_m = 1.0 / m as f64;
    let objective = |resid: &Array1<f64>, w: &Array1<f64>| resid.dot(resid) * inv_m + beta_w * w.dot(w);
    let gradient = |resid: &Array1<f64>, w: &Array1<f64>| features.t_mul_vec(resid) * (2.0 * inv_m) + w * (2.0 * beta_w);

    let mut resid = features.mul_vec(&w) - returns;
    let mut f = objective(&resid, &w);
    let mut g = gradient(&resid, &w);
    let mut gg = g.dot(&g);
    let mut dir = -&g;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        if !f.is_finite() || !gg.is_finite() {
            return Err(Error::Divergence { block: "w", iteration: iterations });
        }
        if gg.sqrt() <= opts.grad_tolerance {
            converged = true;
            break;
        }
        // Exact minimiser of the quadratic along `dir`.
        let f_dir = features.mul_vec(&dir);
        let curvature = 2.0 * (f_dir.dot(&f_dir) * inv_m + beta_w * dir.dot(&dir));
        let slope = g.dot(&dir);
        if !(curvature > 0.0) || slope >= 0.0 {
            // Flat or rounding-dominated direction: nothing left to gain.
            converged = true;
            break;
        }
        let alpha = -slope / curvature;
        let w_next = &w + &(&dir * alpha);
        let resid_next = &resid + &(&f_dir * alpha);
        let f_next = objective(&resid_next, &w_next);
        iterations += 1;
        if !(f_next < f) {
            converged = f_next.is_finite();
            if !converged {
                return Err(Error::Divergence { block: "w", iteration: iterations });
            }
            break;
        }
        w = w_next;
        resid = resid_next;
        f = f_next;
        // Recompute the residual now and then so rounding does not accumulate.
        if iterations % 50 == 0 {
            resid = features.mul_vec(&w) - returns;
            f = objective(&resid, &w);
        }
        let g_next = gradient(&resid, &w);
        let gg_next = g_next.dot(&g_next);
        // Polak-Ribiere, restarted along the gradient when it turns negative.
        let beta_pr = ((gg_next - g_next.dot(&g)) / gg).max(0.0);
        dir = &dir * beta_pr - &g_next;
        g = g_next;
        gg = gg_next;
    }
    Ok(ValueFit {
        train_msre: resid.dot(&resid) * inv_m,
        weights: w,
        iterations,
        converged,
    })
}

/// Solve `V = r + gamma P V` directly.
pub fn tabular_solve(p: &Array2<f64>, r: &Array1<f64>, gamma: f64) -> Result<Array1<f64>> {
    let n = r.len();
    if p.dim() != (n, n) {
        return Err(Error::Shape(format!("transition matrix {:?} for {n} states", p.dim())));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidConfig(format!("gamma must be in [0, 1), got {gamma}")));
    }
    let a = Array2::from_shape_fn((n, n), |(i, j)| if i == j { 1.0 } else { 0.0 } - gamma * p[[i, j]]);
    linalg::solve(a.view(), r)
}

/// States with `|V*|` below this are left out of percentage errors.
pub const MAPVE_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mapve {
    pub value: f64,
    pub included: usize,
    pub excluded: usize,
}

/// Mean absolute percentage value error over states with `|V*| >= 1e-3`.
pub fn mapve(v_hat: &Array1<f64>, v_star: &Array1<f64>) -> Result<Mapve> {
    if v_hat.len() != v_star.len() {
        return Err(Error::Shape(format!("{} estimates for {} true values", v_hat.len(), v_star.len())));
    }
    let mut sum = 0.0;
    let mut included = 0;
    for (&a, &b) in v_hat.iter().zip(v_star) {
        if b.abs() >= MAPVE_THRESHOLD {
            sum += ((a - b) / b).abs();
            included += 1;
        }
    }
    if included == 0 {
        return Err(Error::AllExcluded { threshold: MAPVE_THRESHOLD });
    }
    Ok(Mapve {
        value: sum / included as f64,
        included,
        excluded: v_star.len() - included,
    })
}
