use std::time::{Duration, Instant};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::objective::{
    breakdown, grad_b_view, grad_phi_view, grad_w_view, phi_lipschitz, reconstruction_loss, supervised_loss,
    ObjectiveBreakdown,
};
use super::prox::prox_rows;
use super::{sparsity, supervised_set, ScopeConfig, ScopeModel, SupervisedSet};
use crate::error::{Error, Result};
use crate::trajectory::Dataset;

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 80;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub breakdown: ObjectiveBreakdown,
    pub objective: f64,
    pub phi_sparsity: f64,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitTrace {
    /// Entry 0 is the initial point; entry `i` follows outer iteration `i`.
    pub entries: Vec<TraceEntry>,
    pub converged: bool,
}

impl FitTrace {
    pub fn final_objective(&self) -> f64 {
        self.entries.last().map_or(f64::NAN, |e| e.objective)
    }

    pub fn iterations(&self) -> usize {
        self.entries.last().map_or(0, |e| e.iteration)
    }
}

/// Step sizes carried between block updates; each update first tries twice
/// the previous accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    pub w: f64,
    pub b: f64,
}

impl Default for StepSizes {
    fn default() -> Self {
        StepSizes { w: 1.0, b: 1.0 }
    }
}

/// Starting point: `B` rows drawn from `N(0, 1/d)` and scaled to unit norm,
/// `Phi = 0`, `w = 0`. Without the reconstruction term `(Phi, w) = (0, 0)` is
/// a stationary point, so `w` is then drawn from `N(0, 1/k)` instead.
pub fn init_model(set: &SupervisedSet, cfg: &ScopeConfig) -> Result<ScopeModel> {
    let d = set.obs_dim();
    cfg.validate(d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, (1.0 / d as f64).sqrt()).expect("valid normal");
    let mut b = Array2::from_shape_fn((cfg.k, d), |_| normal.sample(&mut rng));
    for mut row in b.axis_iter_mut(Axis(0)) {
        let n = row.dot(&row).sqrt();
        if n > 0.0 {
            row /= n;
        }
    }
    let w = if cfg.reconstruct {
        Array1::zeros(cfg.k)
    } else {
        let normal = Normal::new(0.0, (1.0 / cfg.k as f64).sqrt()).expect("valid normal");
        Array1::from_shape_fn(cfg.k, |_| normal.sample(&mut rng))
    };
    Ok(ScopeModel {
        b,
        phi: Array2::zeros((set.x.nrows(), cfg.k)),
        w,
        config: cfg.clone(),
    })
}

fn smooth_phi(b: ArrayView2<f64>, phi: ArrayView2<f64>, w: ArrayView1<f64>, set: &SupervisedSet, cfg: &ScopeConfig) -> f64 {
    let mut f = 0.0;
    if cfg.supervised {
        f += supervised_loss(phi, w, set);
    }
    if cfg.reconstruct {
        f += reconstruction_loss(phi, b, set.x.view());
    }
    f
}

fn divergence(block: &'static str) -> Error {
    Error::Divergence { block, iteration: 0 }
}

/// One proximal gradient step on `Phi`, all rows at once.
///
/// The step starts at the inverse of the per-row Lipschitz bound and is
/// halved until the smooth part satisfies the quadratic upper bound, which
/// the bound alone does not guarantee once neighbouring rows move together.
pub fn update_phi(model: &mut ScopeModel, set: &SupervisedSet, cfg: &ScopeConfig) -> Result<()> {
    let lip = phi_lipschitz(model, set, cfg);
    let mut step = if lip > 0.0 { 1.0 / lip } else { 1.0 };
    let t = set.t() as f64;
    let f0 = smooth_phi(model.b.view(), model.phi.view(), model.w.view(), set, cfg);
    let g = grad_phi_view(model.b.view(), model.phi.view(), model.w.view(), set, cfg);
    if !f0.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(divergence("phi"));
    }
    for _ in 0..MAX_HALVINGS {
        let mut z = &model.phi - &(&g * step);
        prox_rows(z.view_mut(), step * cfg.beta_phi / t, cfg.power, cfg.nonneg);
        let diff = &z - &model.phi;
        let f1 = smooth_phi(model.b.view(), z.view(), model.w.view(), set, cfg);
        let bound = f0 + (&g * &diff).sum() + diff.iter().map(|v| v * v).sum::<f64>() / (2.0 * step);
        if f1.is_finite() && f1 <= bound + 1e-12 * f0.abs().max(1e-300) {
            model.phi = z;
            return Ok(());
        }
        step *= 0.5;
    }
    Err(divergence("phi"))
}

fn armijo<F>(x: &mut Array1<f64>, g: &Array1<f64>, f0: f64, step: &mut f64, f: F, block: &'static str) -> Result<()>
where
    F: Fn(&Array1<f64>) -> f64,
{
    let gg = g.dot(g);
    if gg == 0.0 {
        return Ok(());
    }
    let mut s = *step * 2.0;
    for _ in 0..MAX_HALVINGS {
        let cand = &*x - &(g * s);
        let f1 = f(&cand);
        if f1.is_finite() && f1 <= f0 - ARMIJO_C * s * gg {
            *x = cand;
            *step = s;
            return Ok(());
        }
        s *= 0.5;
    }
    // No representable step decreases the objective: treat as stationary.
    if f0.is_finite() {
        Ok(())
    } else {
        Err(divergence(block))
    }
}

/// One gradient step with Armijo backtracking on `w`.
pub fn update_w(model: &mut ScopeModel, set: &SupervisedSet, cfg: &ScopeConfig, steps: &mut StepSizes) -> Result<()> {
    let phi = model.phi.view();
    let f = |w: &Array1<f64>| supervised_loss(phi, w.view(), set) + cfg.beta_w * w.dot(w);
    let f0 = f(&model.w);
    let g = grad_w_view(phi, model.w.view(), set, cfg);
    if !f0.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(divergence("w"));
    }
    let mut w = model.w.clone();
    armijo(&mut w, &g, f0, &mut steps.w, f, "w")?;
    model.w = w;
    Ok(())
}

/// One gradient step with Armijo backtracking on `B`.
pub fn update_b(model: &mut ScopeModel, set: &SupervisedSet, cfg: &ScopeConfig, steps: &mut StepSizes) -> Result<()> {
    let (k, d) = model.b.dim();
    let phi = model.phi.view();
    let x = set.x.view();
    let f = |flat: &Array1<f64>| {
        let b = flat.view().into_shape_with_order((k, d)).expect("shape");
        reconstruction_loss(phi, b, x) + cfg.beta_b * flat.dot(flat)
    };
    let mut flat = Array1::from_iter(model.b.iter().copied());
    let f0 = f(&flat);
    let g = grad_b_view(phi, model.b.view(), x, cfg);
    let g = Array1::from_iter(g.iter().copied());
    if !f0.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(divergence("B"));
    }
    armijo(&mut flat, &g, f0, &mut steps.b, f, "B")?;
    model.b = flat.into_shape_with_order((k, d)).expect("shape");
    Ok(())
}

fn with_iteration(e: Error, iteration: usize) -> Error {
    match e {
        Error::Divergence { block, .. } => Error::Divergence { block, iteration },
        e => e,
    }
}

fn entry(model: &ScopeModel, set: &SupervisedSet, cfg: &ScopeConfig, iteration: usize, start: Instant) -> TraceEntry {
    let br = breakdown(model.b.view(), model.phi.view(), model.w.view(), set, cfg);
    TraceEntry {
        iteration,
        objective: br.total(),
        breakdown: br,
        phi_sparsity: sparsity(&model.phi),
        elapsed: start.elapsed(),
    }
}

/// Block coordinate descent from [`init_model`]: `Phi`, then `w`, then `B`
/// each outer iteration, until the relative decrease drops below
/// `cfg.tolerance` or `cfg.max_outer_iters` is reached.
pub fn fit(set: &SupervisedSet, cfg: &ScopeConfig) -> Result<(ScopeModel, FitTrace)> {
    let model = init_model(set, cfg)?;
    fit_from(model, set, cfg)
}

/// Continue block coordinate descent from an existing model.
pub fn fit_from(mut model: ScopeModel, set: &SupervisedSet, cfg: &ScopeConfig) -> Result<(ScopeModel, FitTrace)> {
    cfg.validate(set.obs_dim())?;
    if model.phi.nrows() != set.x.nrows() || model.b.ncols() != set.obs_dim() || model.k() != cfg.k {
        return Err(Error::Shape("model does not match the data or config".into()));
    }
    model.config = cfg.clone();
    let start = Instant::now();
    let mut trace = FitTrace::default();
    trace.entries.push(entry(&model, set, cfg, 0, start));
    let mut steps = StepSizes::default();
    for it in 1..=cfg.max_outer_iters {
        for _ in 0..cfg.inner_iters {
            update_phi(&mut model, set, cfg).map_err(|e| with_iteration(e, it))?;
        }
        if cfg.supervised {
            for _ in 0..cfg.inner_iters {
                update_w(&mut model, set, cfg, &mut steps).map_err(|e| with_iteration(e, it))?;
            }
        }
        if cfg.reconstruct {
            for _ in 0..cfg.inner_iters {
                update_b(&mut model, set, cfg, &mut steps).map_err(|e| with_iteration(e, it))?;
            }
        }
        let e = entry(&model, set, cfg, it, start);
        if !e.objective.is_finite() {
            return Err(Error::Divergence { block: "objective", iteration: it });
        }
        let prev = trace.entries.last().expect("initial entry").objective;
        trace.entries.push(e);
        let cur = trace.final_objective();
        if (prev - cur).abs() <= cfg.tolerance * prev.abs().max(f64::MIN_POSITIVE) {
            trace.converged = true;
            break;
        }
    }
    Ok((model, trace))
}

/// Fit on a dataset, building targets from `cfg.loss` and `cfg.gamma`.
pub fn fit_dataset(data: &Dataset, cfg: &ScopeConfig) -> Result<(ScopeModel, FitTrace)> {
    let set = supervised_set(data, cfg)?;
    fit(&set, cfg)
}
