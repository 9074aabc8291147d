use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use super::L1Power;
use crate::error::{Error, Result};

/// Settings for coding observations against a fixed dictionary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodeOptions {
    pub beta_phi: f64,
    pub nonneg: bool,
    pub power: L1Power,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            beta_phi: 0.1,
            nonneg: false,
            power: L1Power::One,
        }
    }
}

/// Active constraints of the dual projection, kept with an orthonormal
/// basis of their normals (modified Gram-Schmidt, `n = q r`).
struct ActiveSet {
    idx: Vec<usize>,
    lambda: Vec<f64>,
    q: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
}

impl ActiveSet {
    fn new() -> Self {
        ActiveSet { idx: Vec::new(), lambda: Vec::new(), q: Vec::new(), r: Vec::new() }
    }

    /// Split `c` into its component `z` orthogonal to the active normals and
    /// coefficients `coef` with `c - z = N coef`.
    fn decompose(&self, c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut z = c.to_vec();
        let m = self.q.len();
        let mut proj = vec![0.0; m];
        for (i, qi) in self.q.iter().enumerate() {
            let a = dot(qi, &z);
            proj[i] = a;
            for (zv, qv) in z.iter_mut().zip(qi) {
                *zv -= a * qv;
            }
        }
        // Back-substitute r coef = proj (r upper triangular, column-major by constraint).
        let mut coef = vec![0.0; m];
        for i in (0..m).rev() {
            let mut s = proj[i];
            for j in i + 1..m {
                s -= self.r[j][i] * coef[j];
            }
            coef[i] = s / self.r[i][i];
        }
        (z, coef)
    }

    fn rebuild(&mut self, normals: &dyn Fn(usize) -> Vec<f64>) {
        self.q.clear();
        self.r.clear();
        for &c in &self.idx.clone() {
            self.push_basis(&normals(c));
        }
    }

    fn push_basis(&mut self, c: &[f64]) {
        let mut z = c.to_vec();
        let mut col = Vec::with_capacity(self.q.len() + 1);
        for qi in &self.q {
            let a = dot(qi, &z);
            col.push(a);
            for (zv, qv) in z.iter_mut().zip(qi) {
                *zv -= a * qv;
            }
        }
        let n = dot(&z, &z).sqrt();
        col.push(n);
        self.q.push(z.iter().map(|v| v / n).collect());
        self.r.push(col);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exact solution of `min |phi B - x|^2 + lambda |phi|_1` (optionally with
/// `phi >= 0`) through its dual: `u = x - phi B` is the Euclidean projection
/// of `x` onto `{u : |b_j . u| <= lambda / 2}`, and the multipliers of the
/// tight constraints are the code entries. The projection is found with a
/// dual active-set method, which only ever holds at most `d` constraints.
fn lasso_row(b: ArrayView2<f64>, x: ArrayView1<f64>, lambda: f64, nonneg: bool) -> Array1<f64> {
    let k = b.nrows();
    let n_cons = if nonneg { k } else { 2 * k };
    let h = lambda / 2.0;
    let normal = |c: usize| -> Vec<f64> {
        let row = b.row(c % k);
        if c < k {
            row.to_vec()
        } else {
            row.iter().map(|v| -v).collect()
        }
    };
    let xs: Vec<f64> = x.to_vec();
    let scale = 1.0 + xs.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut u = xs.clone();
    let mut act = ActiveSet::new();
    let viol_tol = 1e-14 * scale;
    let max_steps = 50 * n_cons + 100;
    let mut steps = 0;

    'outer: loop {
        // Most violated constraint, measured relative to the normal's length.
        let mut best: Option<(usize, f64)> = None;
        for c in 0..n_cons {
            if act.idx.contains(&c) {
                continue;
            }
            let nc = normal(c);
            let norm = dot(&nc, &nc).sqrt();
            if norm == 0.0 {
                continue;
            }
            let s = dot(&nc, &u) - h;
            if s > viol_tol * norm && best.is_none_or(|(_, bs)| s / norm > bs) {
                best = Some((c, s / norm));
            }
        }
        let Some((p, _)) = best else { break };
        let cp = normal(p);
        let mut lambda_p = 0.0;
        loop {
            steps += 1;
            if steps > max_steps {
                break 'outer;
            }
            let s = dot(&cp, &u) - h;
            let (z, coef) = act.decompose(&cp);
            let zz = dot(&z, &z);
            let independent = zz > 1e-24 * dot(&cp, &cp);
            // Largest step before an active multiplier reaches zero.
            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for (i, &ci) in coef.iter().enumerate() {
                if ci > 0.0 {
                    let ratio = act.lambda[i] / ci;
                    if ratio < t1 {
                        t1 = ratio;
                        drop = Some(i);
                    }
                }
            }
            let t2 = if independent { s / zz } else { f64::INFINITY };
            if !t1.is_finite() && !t2.is_finite() {
                // Infeasible direction; cannot occur for a polytope containing
                // the origin, so stop with the current point.
                break 'outer;
            }
            let t = t1.min(t2);
            if independent {
                for (uv, zv) in u.iter_mut().zip(&z) {
                    *uv -= t * zv;
                }
            }
            for (l, ci) in act.lambda.iter_mut().zip(&coef) {
                *l -= t * ci;
            }
            lambda_p += t;
            if t2 <= t1 {
                act.idx.push(p);
                act.lambda.push(lambda_p);
                act.push_basis(&cp);
                break;
            }
            let i = drop.expect("blocking constraint");
            act.idx.remove(i);
            act.lambda.remove(i);
            act.rebuild(&normal);
        }
    }

    let mut phi = Array1::zeros(k);
    for (&c, &l) in act.idx.iter().zip(&act.lambda) {
        let l = l.max(0.0);
        if c < k {
            phi[c] += l;
        } else {
            phi[c - k] -= l;
        }
    }
    phi
}

/// `min |phi B - x|^2 + beta |phi|_1^2` equals the plain L1 problem with
/// penalty `lambda = 2 beta |phi*|_1`. The L1 norm of the plain solution is
/// non-increasing and piecewise linear in its penalty, so the root of
/// `lambda - 2 beta |phi(lambda)|_1` is bracketed and found by regula falsi
/// (Illinois variant), which is exact once both ends share a linear piece.
fn squared_l1_row(b: ArrayView2<f64>, x: ArrayView1<f64>, beta: f64, nonneg: bool) -> Array1<f64> {
    if beta == 0.0 {
        return lasso_row(b, x, 0.0, nonneg);
    }
    let bx = b.dot(&x);
    let hi0 = 2.0 * bx.iter().fold(0.0_f64, |m, &v| m.max(if nonneg { v } else { v.abs() }));
    if hi0 == 0.0 {
        return Array1::zeros(b.nrows());
    }
    let solve = |lambda: f64| {
        let phi = lasso_row(b, x, lambda, nonneg);
        let g = lambda - 2.0 * beta * phi.iter().map(|v| v.abs()).sum::<f64>();
        (phi, g)
    };
    let (mut lo, mut hi) = (0.0, hi0);
    let (mut phi_lo, mut g_lo) = solve(lo);
    let (mut phi_hi, mut g_hi) = (Array1::zeros(b.nrows()), hi0);
    if g_lo >= 0.0 {
        return phi_lo;
    }
    let mut side = 0;
    for _ in 0..200 {
        let mut mid = lo - g_lo * (hi - lo) / (g_hi - g_lo);
        if !(mid > lo && mid < hi) {
            mid = 0.5 * (lo + hi);
        }
        if mid <= lo || mid >= hi {
            break;
        }
        let (phi, g) = solve(mid);
        if g == 0.0 {
            return phi;
        }
        if g > 0.0 {
            (hi, phi_hi, g_hi) = (mid, phi, g);
            if side == 1 {
                g_lo *= 0.5;
            }
            side = 1;
        } else {
            (lo, phi_lo, g_lo) = (mid, phi, g);
            if side == -1 {
                g_hi *= 0.5;
            }
            side = -1;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    if -g_lo < g_hi {
        phi_lo
    } else {
        phi_hi
    }
}

/// Sparse codes for each row of `x` against dictionary `b` (`k x d`), each
/// the minimiser of `|phi B - x_i|^2 + beta_phi |phi|_1^p`.
pub fn encode_states(b: &Array2<f64>, x: &Array2<f64>, opts: &EncodeOptions) -> Result<Array2<f64>> {
    if x.ncols() != b.ncols() {
        return Err(Error::Shape(format!(
            "observations have {} columns but the dictionary has {}",
            x.ncols(),
            b.ncols()
        )));
    }
    if !(opts.beta_phi >= 0.0) {
        return Err(Error::InvalidConfig(format!("beta_phi must be >= 0, got {}", opts.beta_phi)));
    }
    let rows: Vec<Array1<f64>> = (0..x.nrows())
        .into_par_iter()
        .map(|i| match opts.power {
            L1Power::One => lasso_row(b.view(), x.row(i), opts.beta_phi, opts.nonneg),
            L1Power::Two => squared_l1_row(b.view(), x.row(i), opts.beta_phi, opts.nonneg),
        })
        .collect();
    let mut out = Array2::zeros((x.nrows(), b.nrows()));
    for (mut dst, src) in out.rows_mut().into_iter().zip(rows) {
        dst.assign(&src);
    }
    Ok(out)
}
