//! Puddle World: a point agent in the unit square must reach the top-right
//! corner while avoiding two capsule-shaped puddles. Observation is `(x, y)`.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::MAX_OBS_DIM;

pub const STEP_SIZE: f64 = 0.05;
pub const NOISE_STD: f64 = 0.01;
/// Motion noise is Gaussian clipped to this magnitude per component.
pub const NOISE_CLIP: f64 = 0.03;
pub const STEP_REWARD: f64 = -1.0;
pub const PUDDLE_RADIUS: f64 = 0.1;
pub const PUDDLE_COST: f64 = 400.0;
/// Terminal once `x + y >= GOAL_SUM`.
pub const GOAL_SUM: f64 = 1.9;
/// Start states are uniform on `[0, START_EXTENT]^2`.
pub const START_EXTENT: f64 = 0.1;

/// Puddle centre-line segments `((x0, y0), (x1, y1))`.
pub const PUDDLES: [((f64, f64), (f64, f64)); 2] = [((0.1, 0.75), (0.45, 0.75)), ((0.45, 0.4), (0.45, 0.8))];

pub const BOUNDS: [(f64, f64); 2] = [(0.0, 1.0), (0.0, 1.0)];

pub const NORTH: usize = 0;
pub const SOUTH: usize = 1;
pub const EAST: usize = 2;
pub const WEST: usize = 3;

pub(crate) fn start<R: Rng + ?Sized>(rng: &mut R) -> [f64; MAX_OBS_DIM] {
    let x = rng.random_range(0.0..START_EXTENT);
    let y = rng.random_range(0.0..START_EXTENT);
    [x, y, 0.0, 0.0]
}

pub(crate) fn at_goal(obs: &[f64]) -> bool {
    obs[0] + obs[1] >= GOAL_SUM
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let u = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a.0 + u * dx, a.1 + u * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// Penalty (non-positive) for standing at `(x, y)`.
pub fn puddle_penalty(x: f64, y: f64) -> f64 {
    PUDDLES
        .iter()
        .map(|&(a, b)| {
            let depth = PUDDLE_RADIUS - segment_distance((x, y), a, b);
            if depth > 0.0 {
                -PUDDLE_COST * depth
            } else {
                0.0
            }
        })
        .sum()
}

pub(crate) fn dynamics<R: Rng + ?Sized>(
    obs: &[f64; MAX_OBS_DIM],
    action: usize,
    rng: &mut R,
) -> ([f64; MAX_OBS_DIM], f64, bool) {
    let (dx, dy) = match action {
        NORTH => (0.0, STEP_SIZE),
        SOUTH => (0.0, -STEP_SIZE),
        EAST => (STEP_SIZE, 0.0),
        _ => (-STEP_SIZE, 0.0),
    };
    let noise = Normal::new(0.0, NOISE_STD).expect("valid std");
    let nx = noise.sample(rng).clamp(-NOISE_CLIP, NOISE_CLIP);
    let ny = noise.sample(rng).clamp(-NOISE_CLIP, NOISE_CLIP);
    let x = (obs[0] + dx + nx).clamp(0.0, 1.0);
    let y = (obs[1] + dy + ny).clamp(0.0, 1.0);
    let reward = STEP_REWARD + puddle_penalty(x, y);
    let next = [x, y, 0.0, 0.0];
    (next, reward, at_goal(&next))
}

#[cfg(test)]
mod tests {
    use super::super::{reset, step, EnvKind, EnvState};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn starts_in_lower_left_corner() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let s = reset(EnvKind::PuddleWorld, &mut rng);
            let o = s.observation();
            assert!(o[0] < START_EXTENT && o[1] < START_EXTENT);
        }
    }

    #[test]
    fn east_moves_right_by_step_plus_bounded_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = EnvState::from_observation(EnvKind::PuddleWorld, &[0.5, 0.5]).unwrap();
        for _ in 0..500 {
            let (next, _) = step(&s, EAST, &mut rng).unwrap();
            let o = next.observation();
            assert!((o[0] - 0.5 - STEP_SIZE).abs() <= NOISE_CLIP + 1e-15);
            assert!((o[1] - 0.5).abs() <= NOISE_CLIP + 1e-15);
        }
    }

    #[test]
    fn penalty_inside_puddle() {
        assert_eq!(puddle_penalty(0.9, 0.1), 0.0);
        // on the centre line of the horizontal puddle
        assert!((puddle_penalty(0.2, 0.75) + PUDDLE_COST * PUDDLE_RADIUS).abs() < 1e-12);
        // 0.05 away from the vertical puddle's end point (0.45, 0.4)
        assert!((puddle_penalty(0.45, 0.35) + PUDDLE_COST * 0.05).abs() < 1e-9);
    }

    #[test]
    fn goal_corner_terminates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = EnvState::from_observation(EnvKind::PuddleWorld, &[1.0, 0.8]).unwrap();
        assert!(!s.terminal);
        for _ in 0..20 {
            if s.terminal {
                break;
            }
            s = step(&s, NORTH, &mut rng).unwrap().0;
        }
        assert!(s.terminal);
        assert!(s.observation()[0] + s.observation()[1] >= GOAL_SUM);
    }
}
