//! Mountain Car: an underpowered car in a valley must rock back and forth to
//! reach the goal at the right edge. Observation is `(position, velocity)`.

use rand::Rng;

use super::MAX_OBS_DIM;

pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.5;
pub const GOAL_POSITION: f64 = 0.5;
pub const MAX_SPEED: f64 = 0.07;
pub const THRUST: f64 = 0.001;
pub const GRAVITY: f64 = 0.0025;
pub const START_RANGE: (f64, f64) = (-0.6, -0.4);
pub const STEP_REWARD: f64 = -1.0;

pub const BOUNDS: [(f64, f64); 2] = [(MIN_POSITION, MAX_POSITION), (-MAX_SPEED, MAX_SPEED)];

pub(crate) fn start<R: Rng + ?Sized>(rng: &mut R) -> [f64; MAX_OBS_DIM] {
    let position = rng.random_range(START_RANGE.0..START_RANGE.1);
    [position, 0.0, 0.0, 0.0]
}

pub(crate) fn at_goal(obs: &[f64]) -> bool {
    obs[0] >= GOAL_POSITION
}

/// Actions: 0 = full throttle left, 1 = coast, 2 = full throttle right.
pub(crate) fn dynamics(obs: &[f64; MAX_OBS_DIM], action: usize) -> ([f64; MAX_OBS_DIM], f64, bool) {
    let throttle = action as f64 - 1.0;
    let mut velocity = obs[1] + THRUST * throttle - GRAVITY * (3.0 * obs[0]).cos();
    velocity = velocity.clamp(-MAX_SPEED, MAX_SPEED);
    let mut position = obs[0] + velocity;
    if position <= MIN_POSITION {
        position = MIN_POSITION;
        if velocity < 0.0 {
            velocity = 0.0;
        }
    }
    position = position.min(MAX_POSITION);
    let next = [position, velocity, 0.0, 0.0];
    (next, STEP_REWARD, at_goal(&next))
}
