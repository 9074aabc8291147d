//! Acrobot: a two-link under-actuated pendulum with torque on the middle joint.
//! Observation is `(theta1, theta2, dtheta1, dtheta2)`; the episode ends when
//! the tip swings above one link length over the pivot.

use std::f64::consts::PI;

use rand::Rng;

use super::MAX_OBS_DIM;

pub const LINK_LENGTH_1: f64 = 1.0;
pub const LINK_MASS_1: f64 = 1.0;
pub const LINK_MASS_2: f64 = 1.0;
pub const LINK_COM_1: f64 = 0.5;
pub const LINK_COM_2: f64 = 0.5;
pub const LINK_MOI: f64 = 1.0;
pub const GRAVITY: f64 = 9.8;
pub const DT: f64 = 0.2;
pub const MAX_VEL_1: f64 = 4.0 * PI;
pub const MAX_VEL_2: f64 = 9.0 * PI;
pub const TORQUES: [f64; 3] = [-1.0, 0.0, 1.0];
pub const START_NOISE: f64 = 0.1;
pub const STEP_REWARD: f64 = -1.0;
/// Terminal once the tip height `-cos(t1) - cos(t1 + t2)` exceeds this.
pub const GOAL_HEIGHT: f64 = 1.0;

pub const BOUNDS: [(f64, f64); 4] = [(-PI, PI), (-PI, PI), (-MAX_VEL_1, MAX_VEL_1), (-MAX_VEL_2, MAX_VEL_2)];

pub(crate) fn start<R: Rng + ?Sized>(rng: &mut R) -> [f64; MAX_OBS_DIM] {
    let mut s = [0.0; MAX_OBS_DIM];
    for v in s.iter_mut() {
        *v = rng.random_range(-START_NOISE..START_NOISE);
    }
    s
}

pub fn tip_height(obs: &[f64]) -> f64 {
    -obs[0].cos() - (obs[0] + obs[1]).cos()
}

pub(crate) fn at_goal(obs: &[f64]) -> bool {
    tip_height(obs) > GOAL_HEIGHT
}

fn wrap(angle: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut a = (angle + PI) % two_pi;
    if a < 0.0 {
        a += two_pi;
    }
    a - PI
}

/// Time derivative of `(t1, t2, dt1, dt2)` under `torque`.
fn derivatives(s: &[f64; 4], torque: f64) -> [f64; 4] {
    let (m1, m2) = (LINK_MASS_1, LINK_MASS_2);
    let (l1, lc1, lc2) = (LINK_LENGTH_1, LINK_COM_1, LINK_COM_2);
    let (i1, i2) = (LINK_MOI, LINK_MOI);
    let g = GRAVITY;
    let [t1, t2, dt1, dt2] = *s;

    let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * t2.cos()) + i1 + i2;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * t2.cos()) + i2;
    let phi2 = m2 * lc2 * g * (t1 + t2 - PI / 2.0).cos();
    let phi1 = -m2 * l1 * lc2 * dt2 * dt2 * t2.sin() - 2.0 * m2 * l1 * lc2 * dt2 * dt1 * t2.sin()
        + (m1 * lc1 + m2 * l1) * g * (t1 - PI / 2.0).cos()
        + phi2;
    let ddt2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dt1 * dt1 * t2.sin() - phi2)
        / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    let ddt1 = -(d2 * ddt2 + phi1) / d1;
    [dt1, dt2, ddt1, ddt2]
}

fn rk4(s: &[f64; 4], torque: f64, h: f64) -> [f64; 4] {
    let add = |a: &[f64; 4], k: &[f64; 4], c: f64| -> [f64; 4] {
        [a[0] + c * k[0], a[1] + c * k[1], a[2] + c * k[2], a[3] + c * k[3]]
    };
    let k1 = derivatives(s, torque);
    let k2 = derivatives(&add(s, &k1, h / 2.0), torque);
    let k3 = derivatives(&add(s, &k2, h / 2.0), torque);
    let k4 = derivatives(&add(s, &k3, h), torque);
    let mut out = *s;
    for i in 0..4 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Actions index [`TORQUES`].
pub(crate) fn dynamics(obs: &[f64; MAX_OBS_DIM], action: usize) -> ([f64; MAX_OBS_DIM], f64, bool) {
    let s = rk4(obs, TORQUES[action], DT);
    let next = [
        wrap(s[0]),
        wrap(s[1]),
        s[2].clamp(-MAX_VEL_1, MAX_VEL_1),
        s[3].clamp(-MAX_VEL_2, MAX_VEL_2),
    ];
    (next, STEP_REWARD, at_goal(&next))
}
