use ndarray::{ArrayViewMut1, ArrayViewMut2, Axis};

use super::L1Power;

/// Soft threshold: the proximal map of `lambda |z|_1` (with `z >= 0` when
/// `nonneg`), applied in place.
pub fn prox_l1(mut v: ArrayViewMut1<f64>, lambda: f64, nonneg: bool) {
    v.mapv_inplace(|x| {
        if nonneg {
            (x - lambda).max(0.0)
        } else {
            x.signum() * (x.abs() - lambda).max(0.0)
        }
    });
}

/// Proximal map of `lambda |z|_1^2`, applied in place.
///
/// The minimiser of `1/2 |z - v|^2 + lambda |z|_1^2` is a soft threshold at
/// `tau = 2 lambda |z|_1`. With the magnitudes sorted, `u_1 >= u_2 >= ...`,
/// keeping the top `m` gives `tau_m = 2 lambda S_m / (1 + 2 lambda m)`; the
/// support is the largest `m` with `u_m > tau_m`.
pub fn prox_l1_squared(mut v: ArrayViewMut1<f64>, lambda: f64, nonneg: bool) {
    if lambda <= 0.0 {
        if nonneg {
            v.mapv_inplace(|x| x.max(0.0));
        }
        return;
    }
    let mag = |x: f64| if nonneg { x.max(0.0) } else { x.abs() };
    let mut u: Vec<f64> = v.iter().map(|&x| mag(x)).filter(|&x| x > 0.0).collect();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut tau = 0.0;
    let mut sum = 0.0;
    for (m, &um) in u.iter().enumerate() {
        sum += um;
        let cand = 2.0 * lambda * sum / (1.0 + 2.0 * lambda * (m + 1) as f64);
        if um > cand {
            tau = cand;
        } else {
            break;
        }
    }
    v.mapv_inplace(|x| {
        let shrunk = (mag(x) - tau).max(0.0);
        if nonneg {
            shrunk
        } else {
            x.signum() * shrunk
        }
    });
}

/// Row-wise proximal map of `lambda |phi_i|_1^p` over a code matrix.
pub fn prox_rows(mut phi: ArrayViewMut2<f64>, lambda: f64, power: L1Power, nonneg: bool) {
    for row in phi.axis_iter_mut(Axis(0)) {
        match power {
            L1Power::One => prox_l1(row, lambda, nonneg),
            L1Power::Two => prox_l1_squared(row, lambda, nonneg),
        }
    }
}
