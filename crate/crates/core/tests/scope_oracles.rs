//! Independent checks of the optimizer's objective, gradients, proximal
//! maps and encoder.

use approx::assert_relative_eq;
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scope_core::envs::{EnvKind, PolicyKind};
use scope_core::scope::{
    encode_states, fit, grad_b, grad_phi_smooth, grad_w, init_model, objective, objective_joint_form, prox_l1,
    prox_l1_squared, supervised_set, update_b, update_phi, update_w, EncodeOptions, L1Power, ScopeConfig,
    ScopeModel, StepSizes, SupervisedSet,
};
use scope_core::trajectory::{generate, LossMode};
use scope_core::Error;

fn random_problem(seed: u64, t: usize, d: usize, k: usize) -> (ScopeModel, SupervisedSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = |r, c| Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0));
    let x = m(t + 1, d).mapv(|v: f64| v.abs());
    let b = m(k, d);
    let mut phi = m(t + 1, k);
    phi.mapv_inplace(|v| if v.abs() < 0.3 { 0.0 } else { v });
    let w = m(k, 1).column(0).to_owned();
    let y = m(t, 1).column(0).to_owned() * 3.0;
    let discount = Array1::from_shape_fn(t, |i| if i % 4 == 3 { 0.0 } else { 0.9 });
    let weight = Array1::from_shape_fn(t, |i| if i % 5 == 2 { 0.0 } else { 1.0 });
    let set = SupervisedSet::new(x, y, discount, weight).unwrap();
    let config = ScopeConfig { k, ..ScopeConfig::default() };
    (ScopeModel { b, phi, w, config }, set)
}

fn cfg(k: usize, power: L1Power) -> ScopeConfig {
    ScopeConfig {
        k,
        beta_b: 0.07,
        beta_w: 0.03,
        beta_phi: 0.2,
        power,
        ..ScopeConfig::default()
    }
}

/// The objective summed term by term with explicit loops.
fn loop_objective(m: &ScopeModel, s: &SupervisedSet, c: &ScopeConfig) -> f64 {
    let t = s.x.nrows() - 1;
    let (k, d) = (m.b.nrows(), m.b.ncols());
    let v = |i: usize| (0..k).map(|j| m.phi[[i, j]] * m.w[j]).sum::<f64>();
    let mut sup = 0.0;
    for i in 0..t {
        let e = s.y[i] + s.discount[i] * v(i + 1) - v(i);
        sup += s.weight[i] * e * e;
    }
    let mut rec = 0.0;
    for i in 0..=t {
        for c in 0..d {
            let p: f64 = (0..k).map(|j| m.phi[[i, j]] * m.b[[j, c]]).sum();
            rec += (p - s.x[[i, c]]).powi(2);
        }
    }
    let mut pen = 0.0;
    for i in 0..=t {
        let l1: f64 = (0..k).map(|j| m.phi[[i, j]].abs()).sum();
        pen += if c.power == L1Power::Two { l1 * l1 } else { l1 };
    }
    let bb: f64 = m.b.iter().map(|v| v * v).sum();
    let ww: f64 = m.w.iter().map(|v| v * v).sum();
    let mut f = c.beta_phi * pen / t as f64;
    if c.supervised {
        f += sup / t as f64 + c.beta_w * ww;
    }
    if c.reconstruct {
        f += rec / t as f64 + c.beta_b * bb;
    }
    f
}

#[test]
fn objective_matches_loop_oracle() {
    for seed in 0..6 {
        for power in [L1Power::One, L1Power::Two] {
            let (model, set) = random_problem(seed, 9, 3, 5);
            for (sup, rec) in [(true, true), (false, true), (true, false)] {
                let c = ScopeConfig { supervised: sup, reconstruct: rec, ..cfg(5, power) };
                let got = objective(&model, &set, &c).total();
                assert_relative_eq!(got, loop_objective(&model, &set, &c), max_relative = 1e-12);
                assert_relative_eq!(got, objective_joint_form(&model, &set, &c), max_relative = 1e-12);
            }
        }
    }
}

fn check_fd(analytic: &[f64], numeric: &[f64]) {
    let scale = numeric.iter().fold(1e-3_f64, |m, v| m.max(v.abs()));
    for (a, n) in analytic.iter().zip(numeric) {
        assert!((a - n).abs() / scale < 1e-6, "analytic {a} vs numeric {n}");
    }
}

#[test]
fn gradients_match_finite_differences() {
    let h = 1e-5;
    for seed in 10..14 {
        let (model, set) = random_problem(seed, 8, 2, 4);
        let c = cfg(4, L1Power::One);
        let smooth = |m: &ScopeModel| {
            let br = objective(m, &set, &c);
            br.total() - br.reg_phi
        };

        let gw = grad_w(&model, &set, &c);
        let num: Vec<f64> = (0..model.w.len())
            .map(|j| {
                let (mut p, mut q) = (model.clone(), model.clone());
                p.w[j] += h;
                q.w[j] -= h;
                (smooth(&p) - smooth(&q)) / (2.0 * h)
            })
            .collect();
        check_fd(gw.as_slice().unwrap(), &num);

        let gb = grad_b(&model, &set, &c);
        let mut num = Vec::new();
        for idx in ndarray::indices(model.b.dim()) {
            let (mut p, mut q) = (model.clone(), model.clone());
            p.b[idx] += h;
            q.b[idx] -= h;
            num.push((smooth(&p) - smooth(&q)) / (2.0 * h));
        }
        check_fd(gb.as_slice().unwrap(), &num);

        let gp = grad_phi_smooth(&model, &set, &c);
        let mut num = Vec::new();
        for idx in ndarray::indices(model.phi.dim()) {
            let (mut p, mut q) = (model.clone(), model.clone());
            p.phi[idx] += h;
            q.phi[idx] -= h;
            num.push((smooth(&p) - smooth(&q)) / (2.0 * h));
        }
        check_fd(gp.as_slice().unwrap(), &num);
    }
}

fn prox_value(z: &[f64], v: &[f64], lambda: f64, power: L1Power) -> f64 {
    let q: f64 = z.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 2.0;
    let l1: f64 = z.iter().map(|a| a.abs()).sum();
    q + lambda * if power == L1Power::Two { l1 * l1 } else { l1 }
}

/// Squared-L1 prox by enumerating every support: on support `S` the KKT
/// conditions give `|z_j| = |v_j| - tau` with `tau = 2 lambda S_v / (1 + 2 lambda |S|)`.
fn prox_sq_enumerate(v: &[f64], lambda: f64, nonneg: bool) -> Vec<f64> {
    let n = v.len();
    let mut best = vec![0.0; n];
    let mut best_val = prox_value(&best, v, lambda, L1Power::Two);
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        let mag = |x: f64| if nonneg { x } else { x.abs() };
        let s: f64 = support.iter().map(|&j| mag(v[j])).sum();
        let tau = 2.0 * lambda * s / (1.0 + 2.0 * lambda * support.len() as f64);
        if support.iter().any(|&j| mag(v[j]) - tau <= 0.0) {
            continue;
        }
        let mut z = vec![0.0; n];
        for &j in &support {
            z[j] = if nonneg { v[j] - tau } else { v[j].signum() * (v[j].abs() - tau) };
        }
        let val = prox_value(&z, v, lambda, L1Power::Two);
        if val < best_val {
            best_val = val;
            best = z;
        }
    }
    best
}

#[test]
fn prox_squared_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..300 {
        let n = rng.random_range(1..7);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lambda = rng.random_range(0.01..2.0);
        for nonneg in [false, true] {
            let mut z = Array1::from(v.clone());
            prox_l1_squared(z.view_mut(), lambda, nonneg);
            let want = prox_sq_enumerate(&v, lambda, nonneg);
            for (a, b) in z.iter().zip(&want) {
                assert_relative_eq!(*a, *b, epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn prox_l1_matches_grid_search() {
    for &v in &[-1.3, -0.2, 0.0, 0.05, 0.4, 2.0] {
        for &lambda in &[0.0, 0.1, 0.5] {
            for nonneg in [false, true] {
                let mut z = Array1::from(vec![v]);
                prox_l1(z.view_mut(), lambda, nonneg);
                let lo = if nonneg { 0 } else { -300_000 };
                let best = (lo..=300_000)
                    .map(|i| i as f64 * 1e-5)
                    .min_by(|a, b| {
                        let f = |z: f64| 0.5 * (z - v).powi(2) + lambda * z.abs();
                        f(*a).total_cmp(&f(*b))
                    })
                    .unwrap();
                assert!((z[0] - best).abs() <= 1e-5, "v={v} lambda={lambda}: {} vs {best}", z[0]);
            }
        }
    }
}

proptest! {
    #[test]
    fn prox_output_beats_perturbations(
        v in proptest::collection::vec(-3.0f64..3.0, 1..8),
        lambda in 0.0f64..2.0,
        two in any::<bool>(),
        nonneg in any::<bool>(),
        delta in proptest::collection::vec(-0.05f64..0.05, 8),
    ) {
        let power = if two { L1Power::Two } else { L1Power::One };
        let mut z = Array1::from(v.clone());
        if two { prox_l1_squared(z.view_mut(), lambda, nonneg) } else { prox_l1(z.view_mut(), lambda, nonneg) }
        let z = z.to_vec();
        if nonneg { prop_assert!(z.iter().all(|&a| a >= 0.0)); }
        let base = prox_value(&z, &v, lambda, power);
        let pert: Vec<f64> = z.iter().zip(&delta).map(|(a, d)| if nonneg { (a + d).max(0.0) } else { a + d }).collect();
        prop_assert!(base <= prox_value(&pert, &v, lambda, power) + 1e-12);
    }

    #[test]
    fn objective_breakdown_is_nonnegative(seed in 0u64..1000, two in any::<bool>()) {
        let (model, set) = random_problem(seed, 6, 2, 3);
        let power = if two { L1Power::Two } else { L1Power::One };
        let br = objective(&model, &set, &cfg(3, power));
        for v in [br.supervised, br.reconstruction, br.reg_b, br.reg_w, br.reg_phi] {
            prop_assert!(v >= 0.0);
        }
    }
}

/// Minimiser of the `w` block: `(A^T A / t + beta I) w = -A^T m y / t` with
/// `A = D Phi` the weighted temporal-difference rows.
fn ridge_w_oracle(model: &ScopeModel, set: &SupervisedSet, c: &ScopeConfig) -> Vec<f64> {
    let t = set.t();
    let k = model.k();
    let mut a = nalgebra::DMatrix::<f64>::zeros(t, k);
    let mut rhs = nalgebra::DVector::<f64>::zeros(t);
    for i in 0..t {
        let m = set.weight[i].sqrt();
        for j in 0..k {
            a[(i, j)] = m * (set.discount[i] * model.phi[[i + 1, j]] - model.phi[[i, j]]);
        }
        rhs[i] = -m * set.y[i];
    }
    let lhs = a.transpose() * &a / t as f64 + nalgebra::DMatrix::identity(k, k) * c.beta_w;
    let r = a.transpose() * rhs / t as f64;
    lhs.lu().solve(&r).unwrap().iter().copied().collect()
}

fn ridge_b_oracle(model: &ScopeModel, set: &SupervisedSet, c: &ScopeConfig) -> Vec<f64> {
    let t = set.t() as f64;
    let p = nalgebra::DMatrix::from_fn(model.phi.nrows(), model.k(), |i, j| model.phi[[i, j]]);
    let x = nalgebra::DMatrix::from_fn(set.x.nrows(), set.x.ncols(), |i, j| set.x[[i, j]]);
    let lhs = p.transpose() * &p / t + nalgebra::DMatrix::identity(model.k(), model.k()) * c.beta_b;
    let b = lhs.lu().solve(&(p.transpose() * x / t)).unwrap();
    // Row-major to match ndarray.
    (0..b.nrows()).flat_map(|i| (0..b.ncols()).map(move |j| (i, j))).map(|(i, j)| b[(i, j)]).collect()
}

#[test]
fn block_updates_converge_to_ridge_solutions() {
    let (mut model, set) = random_problem(21, 30, 3, 6);
    let c = cfg(6, L1Power::One);
    let want_w = ridge_w_oracle(&model, &set, &c);
    let want_b = ridge_b_oracle(&model, &set, &c);
    let mut steps = StepSizes::default();
    for _ in 0..20_000 {
        update_w(&mut model, &set, &c, &mut steps).unwrap();
        update_b(&mut model, &set, &c, &mut steps).unwrap();
    }
    for (a, b) in model.w.iter().zip(&want_w) {
        assert_relative_eq!(*a, *b, epsilon = 1e-7);
    }
    for (a, b) in model.b.iter().zip(&want_b) {
        assert_relative_eq!(*a, *b, epsilon = 1e-7);
    }
}

#[test]
fn phi_step_never_increases_objective() {
    for seed in 30..36 {
        for power in [L1Power::One, L1Power::Two] {
            let (mut model, set) = random_problem(seed, 12, 2, 4);
            let c = ScopeConfig { nonneg: seed % 2 == 0, ..cfg(4, power) };
            if c.nonneg {
                model.phi.mapv_inplace(f64::abs);
            }
            let mut prev = objective(&model, &set, &c).total();
            for _ in 0..30 {
                update_phi(&mut model, &set, &c).unwrap();
                let cur = objective(&model, &set, &c).total();
                assert!(cur <= prev * (1.0 + 1e-12), "{cur} > {prev}");
                prev = cur;
            }
            if c.nonneg {
                assert!(model.phi.iter().all(|&v| v >= 0.0));
            }
        }
    }
}

/// Cyclic coordinate descent for `|phi B - x|^2 + beta |phi|_1`.
fn lasso_cd(b: &Array2<f64>, x: &[f64], beta: f64, nonneg: bool) -> Vec<f64> {
    let (k, d) = b.dim();
    let mut phi = vec![0.0; k];
    let mut r: Vec<f64> = x.iter().map(|v| -v).collect();
    for _ in 0..200_000 {
        let mut moved = 0.0_f64;
        for j in 0..k {
            let bj = b.row(j);
            let nn: f64 = bj.dot(&bj);
            if nn == 0.0 {
                continue;
            }
            let rho: f64 = (0..d).map(|c| bj[c] * (r[c] - phi[j] * bj[c])).sum();
            let raw = -rho;
            let new = if nonneg {
                ((raw - beta / 2.0) / nn).max(0.0)
            } else {
                raw.signum() * (raw.abs() - beta / 2.0).max(0.0) / nn
            };
            let delta = new - phi[j];
            if delta != 0.0 {
                for c in 0..d {
                    r[c] += delta * bj[c];
                }
                phi[j] = new;
                moved = moved.max(delta.abs());
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    phi
}

fn lasso_value(b: &Array2<f64>, x: &[f64], phi: &[f64], beta: f64) -> f64 {
    let p = Array1::from(phi.to_vec()).dot(b);
    let r: f64 = p.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum();
    r + beta * phi.iter().map(|v| v.abs()).sum::<f64>()
}

#[test]
fn encoder_matches_coordinate_descent() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (k, d) in [(5, 2), (12, 3), (30, 4)] {
        let b = Array2::from_shape_fn((k, d), |_| rng.random_range(-1.0..1.0));
        let x = Array2::from_shape_fn((20, d), |_| rng.random_range(0.0..1.0));
        for nonneg in [false, true] {
            let opts = EncodeOptions { beta_phi: 0.05, nonneg, ..EncodeOptions::default() };
            let codes = encode_states(&b, &x, &opts).unwrap();
            for i in 0..x.nrows() {
                let xi = x.row(i).to_vec();
                let oracle = lasso_cd(&b, &xi, opts.beta_phi, nonneg);
                let got = lasso_value(&b, &xi, codes.row(i).as_slice().unwrap(), opts.beta_phi);
                let want = lasso_value(&b, &xi, &oracle, opts.beta_phi);
                assert!((got - want).abs() <= 1e-8 * want.max(1e-3), "row {i}: {got} vs {want}");
            }
        }
    }
}

/// Accelerated proximal gradient run to a fixed, very large iteration count.
fn encode_fista(b: &Array2<f64>, x: &[f64], beta: f64, power: L1Power, nonneg: bool) -> Vec<f64> {
    let k = b.nrows();
    let xv = Array1::from(x.to_vec());
    let lip = 2.0 * scope_core::linalg::spectral_norm_sq(b.view());
    let mut z = Array1::<f64>::zeros(k);
    let mut y = z.clone();
    let mut tk = 1.0_f64;
    for _ in 0..200_000 {
        let r = y.dot(b) - &xv;
        let mut zn = &y - &(b.dot(&r) * (2.0 / lip));
        match power {
            L1Power::One => prox_l1(zn.view_mut(), beta / lip, nonneg),
            L1Power::Two => prox_l1_squared(zn.view_mut(), beta / lip, nonneg),
        }
        let step = &zn - &z;
        if (&y - &zn).dot(&step) > 0.0 {
            tk = 1.0;
            y = zn.clone();
        } else {
            let tn = (1.0 + (1.0 + 4.0 * tk * tk).sqrt()) / 2.0;
            y = &zn + &(&step * ((tk - 1.0) / tn));
            tk = tn;
        }
        z = zn;
    }
    z.to_vec()
}

fn coding_value(b: &Array2<f64>, x: &[f64], phi: &[f64], beta: f64, power: L1Power) -> f64 {
    let p = Array1::from(phi.to_vec()).dot(b);
    let r: f64 = p.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum();
    let l1: f64 = phi.iter().map(|v| v.abs()).sum();
    r + beta * if power == L1Power::Two { l1 * l1 } else { l1 }
}

#[test]
fn encoder_matches_proximal_gradient_all_modes() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (k, d) in [(6, 2), (10, 4)] {
        let b = Array2::from_shape_fn((k, d), |_| rng.random_range(-1.0..1.0));
        let x = Array2::from_shape_fn((6, d), |_| rng.random_range(0.0..1.0));
        for power in [L1Power::One, L1Power::Two] {
            for nonneg in [false, true] {
                let opts = EncodeOptions { beta_phi: 0.1, nonneg, power };
                let codes = encode_states(&b, &x, &opts).unwrap();
                for i in 0..x.nrows() {
                    let xi = x.row(i).to_vec();
                    let got = coding_value(&b, &xi, codes.row(i).as_slice().unwrap(), 0.1, power);
                    let oracle = encode_fista(&b, &xi, 0.1, power, nonneg);
                    let want = coding_value(&b, &xi, &oracle, 0.1, power);
                    assert!(got <= want * (1.0 + 1e-8), "{power:?} nonneg={nonneg}: {got} vs {want}");
                    assert!(got >= want * (1.0 - 1e-8), "{power:?} nonneg={nonneg}: {got} vs {want}");
                    if nonneg {
                        assert!(codes.row(i).iter().all(|&v| v >= 0.0));
                    }
                }
            }
        }
    }
}

/// Optimality of `|phi B - x|^2 + lambda |phi|_1`: with `g = 2 B (x - phi B)`,
/// `g_j = lambda sign(phi_j)` on the support and `|g_j| <= lambda` elsewhere
/// (`g_j <= lambda` when non-negative).
fn check_l1_kkt(b: &Array2<f64>, x: &[f64], phi: &[f64], lambda: f64, nonneg: bool) -> Result<(), String> {
    let r = Array1::from(x.to_vec()) - Array1::from(phi.to_vec()).dot(b);
    let g = b.dot(&r) * 2.0;
    let tol = 1e-9 * (1.0 + lambda);
    for (j, (&gj, &pj)) in g.iter().zip(phi).enumerate() {
        let ok = if pj != 0.0 {
            (gj - lambda * pj.signum()).abs() <= tol && (!nonneg || pj > 0.0)
        } else if nonneg {
            gj <= lambda + tol
        } else {
            gj.abs() <= lambda + tol
        };
        if !ok {
            return Err(format!("atom {j}: phi={pj} g={gj} lambda={lambda}"));
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn encoder_satisfies_optimality_conditions(
        seed in 0u64..10_000,
        k in 3usize..40,
        d in 1usize..5,
        spread in 0.001f64..1.0,
        beta in 0.0f64..0.5,
        nonneg in any::<bool>(),
        two in any::<bool>(),
    ) {
        // Atoms clustered around one direction, as learned dictionaries often are.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = Array2::from_shape_fn((k, d), |(_, c)| base[c] + spread * rng.random_range(-1.0..1.0));
        let x = Array2::from_shape_fn((3, d), |_| rng.random_range(0.0..1.0));
        let power = if two { L1Power::Two } else { L1Power::One };
        let codes = encode_states(&b, &x, &EncodeOptions { beta_phi: beta, nonneg, power }).unwrap();
        for i in 0..3 {
            let phi = codes.row(i).to_vec();
            let lambda = match power {
                L1Power::One => beta,
                L1Power::Two => 2.0 * beta * phi.iter().map(|v| v.abs()).sum::<f64>(),
            };
            prop_assert!(check_l1_kkt(&b, x.row(i).as_slice().unwrap(), &phi, lambda, nonneg).is_ok(),
                "{:?}", check_l1_kkt(&b, x.row(i).as_slice().unwrap(), &phi, lambda, nonneg));
        }
    }
}

#[test]
fn encoder_realizable_and_degenerate_cases() {
    let b = Array2::from_shape_vec((3, 2), vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
    let x = Array2::from_shape_vec((1, 2), vec![0.3, 0.0]).unwrap();
    let tiny = EncodeOptions { beta_phi: 1e-12, ..EncodeOptions::default() };
    let phi = encode_states(&b, &x, &tiny).unwrap();
    let resid = &phi.dot(&b) - &x;
    assert!(resid.iter().all(|v| v.abs() < 1e-8));
    let huge = EncodeOptions { beta_phi: 1e6, ..EncodeOptions::default() };
    assert!(encode_states(&b, &x, &huge).unwrap().iter().all(|&v| v == 0.0));
    for power in [L1Power::One, L1Power::Two] {
        let zero = Array2::zeros((2, 2));
        let opts = EncodeOptions { power, ..EncodeOptions::default() };
        assert!(encode_states(&b, &zero, &opts).unwrap().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn encoder_rejects_dimension_mismatch() {
    let b = Array2::zeros((4, 2));
    let x = Array2::zeros((3, 3));
    assert!(matches!(encode_states(&b, &x, &EncodeOptions::default()), Err(Error::Shape(_))));
}

fn small_mc_set(n: usize, c: &ScopeConfig) -> SupervisedSet {
    let data = generate(EnvKind::MountainCar, PolicyKind::EnergyPumping10, n, 4).unwrap();
    supervised_set(&data, c).unwrap()
}

#[test]
fn fit_descends_monotonically_and_records_trace() {
    for (loss, gamma, power) in [(LossMode::Msre, 1.0, L1Power::One), (LossMode::Be, 0.99, L1Power::Two)] {
        let c = ScopeConfig {
            k: 10,
            loss,
            gamma,
            power,
            beta_phi: 0.01,
            max_outer_iters: 150,
            ..ScopeConfig::default()
        };
        let set = small_mc_set(200, &c);
        let (model, trace) = fit(&set, &c).unwrap();
        assert_eq!(trace.entries[0].iteration, 0);
        for pair in trace.entries.windows(2) {
            assert!(pair[1].objective <= pair[0].objective * (1.0 + 1e-12));
            assert_eq!(pair[1].iteration, pair[0].iteration + 1);
        }
        assert!(trace.final_objective() < trace.entries[0].objective);
        assert_eq!(model.phi.dim(), (201, 10));
        let s = trace.entries.last().unwrap().phi_sparsity;
        assert!((0.0..=1.0).contains(&s));
        assert_relative_eq!(s, model.phi_sparsity());
    }
}

#[test]
fn unsupervised_fit_leaves_w_at_zero() {
    let c = ScopeConfig { k: 8, max_outer_iters: 40, ..ScopeConfig::default() }.unsupervised();
    let set = small_mc_set(100, &c);
    let (model, trace) = fit(&set, &c).unwrap();
    assert!(model.w.iter().all(|&v| v == 0.0));
    assert!(trace.entries.iter().all(|e| e.breakdown.supervised == 0.0));
}

#[test]
fn supervised_only_fit_keeps_dictionary() {
    let c = ScopeConfig { k: 8, max_outer_iters: 40, reconstruct: false, ..ScopeConfig::default() };
    let set = small_mc_set(400, &c);
    assert!(set.weight.sum() > 0.0);
    let init = init_model(&set, &c).unwrap();
    let (model, trace) = fit(&set, &c).unwrap();
    assert_eq!(model.b, init.b);
    // The random start for w lets the code leave the zero stationary point.
    assert!(model.phi_sparsity() < 1.0);
    let first = trace.entries.first().unwrap().breakdown.supervised;
    let last = trace.entries.last().unwrap().breakdown.supervised;
    assert!(last < 0.5 * first, "supervised loss {first} -> {last}");
}

#[test]
fn fit_is_deterministic_per_seed() {
    let c = ScopeConfig { k: 6, max_outer_iters: 30, seed: 9, ..ScopeConfig::default() };
    let set = small_mc_set(80, &c);
    let (a, _) = fit(&set, &c).unwrap();
    let (b, _) = fit(&set, &c).unwrap();
    assert_eq!(a, b);
    let (other, _) = fit(&set, &ScopeConfig { seed: 10, ..c }).unwrap();
    assert_ne!(a.b, other.b);
}

#[test]
fn non_finite_data_reports_divergence() {
    let c = ScopeConfig { k: 4, ..ScopeConfig::default() };
    let mut set = small_mc_set(20, &c);
    set.x[[3, 0]] = f64::NAN;
    match fit(&set, &c) {
        Err(Error::Divergence { block, iteration }) => {
            assert_eq!(block, "phi");
            assert_eq!(iteration, 1);
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn k_not_above_obs_dim_is_rejected() {
    let c = ScopeConfig { k: 2, ..ScopeConfig::default() };
    let set = small_mc_set(20, &ScopeConfig::default());
    assert!(matches!(fit(&set, &c), Err(Error::InvalidConfig(_))));
}
