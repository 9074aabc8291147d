use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::{L1Power, ScopeConfig, ScopeModel, SupervisedSet};
use crate::linalg::spectral_norm_sq;

/// The five terms of the objective. Loss terms are averaged over `t`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObjectiveBreakdown {
    pub supervised: f64,
    pub reconstruction: f64,
    pub reg_b: f64,
    pub reg_w: f64,
    pub reg_phi: f64,
}

impl ObjectiveBreakdown {
    pub fn total(&self) -> f64 {
        self.supervised + self.reconstruction + self.reg_b + self.reg_w + self.reg_phi
    }
}

/// Supervised residuals `r_i = y_i + g_i u_{i+1} - u_i` for `u = Phi w`.
pub(crate) fn residuals(phi: ArrayView2<f64>, w: ArrayView1<f64>, set: &SupervisedSet) -> Array1<f64> {
    let u = phi.dot(&w);
    let t = set.t();
    Array1::from_shape_fn(t, |i| set.y[i] + set.discount[i] * u[i + 1] - u[i])
}

/// `v` such that the supervised gradient is `(2/t) Phi^T v` wrt `w` and
/// `(2/t) v w^T` wrt `Phi`.
fn residual_adjoint(r: &Array1<f64>, set: &SupervisedSet) -> Array1<f64> {
    let t = set.t();
    let mut v = Array1::zeros(t + 1);
    for i in 0..t {
        let s = set.weight[i] * r[i];
        v[i] -= s;
        v[i + 1] += set.discount[i] * s;
    }
    v
}

pub(crate) fn supervised_loss(phi: ArrayView2<f64>, w: ArrayView1<f64>, set: &SupervisedSet) -> f64 {
    let r = residuals(phi, w, set);
    let s: f64 = r.iter().zip(set.weight.iter()).map(|(r, m)| m * r * r).sum();
    s / set.t() as f64
}

pub(crate) fn reconstruction_loss(phi: ArrayView2<f64>, b: ArrayView2<f64>, x: ArrayView2<f64>) -> f64 {
    let t = (x.nrows() - 1) as f64;
    let r = phi.dot(&b) - x;
    r.iter().map(|v| v * v).sum::<f64>() / t
}

pub(crate) fn l1_penalty_row(row: ArrayView1<f64>, power: L1Power) -> f64 {
    let l1: f64 = row.iter().map(|v| v.abs()).sum();
    match power {
        L1Power::One => l1,
        L1Power::Two => l1 * l1,
    }
}

pub(crate) fn phi_penalty(phi: ArrayView2<f64>, cfg: &ScopeConfig) -> f64 {
    if cfg.beta_phi == 0.0 {
        return 0.0;
    }
    let t = (phi.nrows() - 1) as f64;
    let s: f64 = phi.axis_iter(Axis(0)).map(|r| l1_penalty_row(r, cfg.power)).sum();
    cfg.beta_phi * s / t
}

fn sq_norm<'a>(it: impl IntoIterator<Item = &'a f64>) -> f64 {
    it.into_iter().map(|v| v * v).sum()
}

pub(crate) fn breakdown(
    b: ArrayView2<f64>,
    phi: ArrayView2<f64>,
    w: ArrayView1<f64>,
    set: &SupervisedSet,
    cfg: &ScopeConfig,
) -> ObjectiveBreakdown {
    ObjectiveBreakdown {
        supervised: if cfg.supervised { supervised_loss(phi, w, set) } else { 0.0 },
        reconstruction: if cfg.reconstruct { reconstruction_loss(phi, b, set.x.view()) } else { 0.0 },
        reg_b: if cfg.reconstruct { cfg.beta_b * sq_norm(b.iter()) } else { 0.0 },
        reg_w: if cfg.supervised { cfg.beta_w * sq_norm(w.iter()) } else { 0.0 },
        reg_phi: phi_penalty(phi, cfg),
    }
}

/// Objective value and its terms at `model` under `cfg`.
pub fn objective(model: &ScopeModel, set: &SupervisedSet, cfg: &ScopeConfig) -> ObjectiveBreakdown {
    breakdown(model.b.view(), model.phi.view(), model.w.view(), set, cfg)
}

/// The same objective written as one least-squares problem on the stacked
/// matrix `[A Phi | Phi B]` against `[-m*y | X]`, where `A` maps codes to
/// weighted temporal differences. Used to cross-check [`objective`].
pub fn objective_joint_form(model: &ScopeModel, set: &SupervisedSet, cfg: &ScopeConfig) -> f64 {
    let t = set.t();
    // A is t x (t+1): row i has -m_i at i and m_i g_i at i+1 (m_i in {0,1}).
    let mut a = Array2::<f64>::zeros((t, t + 1));
    for i in 0..t {
        let m = set.weight[i].sqrt();
        a[[i, i]] = -m;
        a[[i, i + 1]] = m * set.discount[i];
    }
    let a_phi = a.dot(&model.phi);
    let target_sup: Array1<f64> = Array1::from_shape_fn(t, |i| -set.weight[i].sqrt() * set.y[i]);
    let mut total = 0.0;
    if cfg.supervised {
        let pred = a_phi.dot(&model.w);
        total += sq_norm((&pred - &target_sup).iter()) / t as f64;
        total += cfg.beta_w * sq_norm(model.w.iter());
    }
    if cfg.reconstruct {
        let pred = model.phi.dot(&model.b);
        total += sq_norm((&pred - &set.x).iter()) / t as f64;
        total += cfg.beta_b * sq_norm(model.b.iter());
    }
    total + phi_penalty(model.phi.view(), cfg)
}

pub(crate) fn grad_w_view(
    phi: ArrayView2<f64>,
    w: ArrayView1<f64>,
    set: &SupervisedSet,
    cfg: &ScopeConfig,
) -> Array1<f64> {
    let r = residuals(phi, w, set);
    let v = residual_adjoint(&r, set);
    let scale = 2.0 / set.t() as f64;
    phi.t().dot(&v) * scale + &w * (2.0 * cfg.beta_w)
}

/// Gradient of the objective with respect to `w`.
pub fn grad_w(model: &ScopeModel, set: &SupervisedSet, cfg: &ScopeConfig) -> Array1<f64> {
    grad_w_view(model.phi.view(), model.w.view(), set, cfg)
}

pub(crate) fn grad_b_view(
    phi: ArrayView2<f64>,
    b: ArrayView2<f64>,
    x: ArrayView2<f64>,
    cfg: &ScopeConfig,
) -> Array2<f64> {
    let t = (x.nrows() - 1) as f64;
    let r = phi.dot(&b) - x;
    phi.t().dot(&r) * (2.0 / t) + &b * (2.0 * cfg.beta_b)
}

/// Gradient of the objective with respect to `B`.
pub fn grad_b(model: &ScopeModel, set: &SupervisedSet, cfg: &ScopeConfig) -> Array2<f64> {
    grad_b_view(model.phi.view(), model.b.view(), set.x.view(), cfg)
}

pub(crate) fn grad_phi_view(
    b: ArrayView2<f64>,
    phi: ArrayView2<f64>,
    w: ArrayView1<f64>,
    set: &SupervisedSet,
    cfg: &ScopeConfig,
) -> Array2<f64> {
    let scale = 2.0 / set.t() as f64;
    let mut g = Array2::zeros(phi.raw_dim());
    if cfg.reconstruct {
        let r = phi.dot(&b) - &set.x;
        g += &(r.dot(&b.t()) * scale);
    }
    if cfg.supervised {
        let res = residuals(phi, w, set);
        let v = residual_adjoint(&res, set);
        for (mut row, &vi) in g.axis_iter_mut(Axis(0)).zip(v.iter()) {
            if vi != 0.0 {
                row.scaled_add(scale * vi, &w);
            }
        }
    }
    g
}

/// Gradient of the smooth (loss) part of the objective with respect to `Phi`.
pub fn grad_phi_smooth(model: &ScopeModel, set: &SupervisedSet, cfg: &ScopeConfig) -> Array2<f64> {
    grad_phi_view(model.b.view(), model.phi.view(), model.w.view(), set, cfg)
}

/// Per-row Lipschitz bound of the unaveraged smooth loss in `phi_i`:
/// `2 (1 + gamma^2) |w|^2 + 2 sigma_max(B)^2`.
pub fn lipschitz_bound(w: ArrayView1<f64>, b: ArrayView2<f64>, gamma_bar: f64) -> f64 {
    2.0 * (1.0 + gamma_bar * gamma_bar) * sq_norm(w.iter()) + 2.0 * spectral_norm_sq(b)
}

/// Per-row bound for the averaged objective with the disabled terms removed.
pub fn phi_lipschitz(model: &ScopeModel, set: &SupervisedSet, cfg: &ScopeConfig) -> f64 {
    let sup = if cfg.supervised {
        2.0 * (1.0 + set.gamma_max().powi(2)) * sq_norm(model.w.iter())
    } else {
        0.0
    };
    let rec = if cfg.reconstruct { 2.0 * spectral_norm_sq(model.b.view()) } else { 0.0 };
    (sup + rec) / set.t() as f64
}
