use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scope_core::envs::{self, puddle_world, EnvKind, PolicyKind};

const DRAWS: usize = 100_000;

#[test]
fn north_east_policy_splits_evenly_between_two_actions() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let state = envs::reset(EnvKind::PuddleWorld, &mut rng);
    let mut north = 0;
    for _ in 0..DRAWS {
        let a = envs::sample_action(PolicyKind::NorthEast5050, &state, &mut rng);
        assert!(a == puddle_world::NORTH || a == puddle_world::EAST, "action {a}");
        north += (a == puddle_world::NORTH) as usize;
    }
    let freq = north as f64 / DRAWS as f64;
    assert!((freq - 0.5).abs() < 0.01, "north frequency {freq}");
}

#[test]
fn energy_pumping_explores_one_step_in_ten() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let state = envs::reset(EnvKind::MountainCar, &mut rng);
    let mut explored = 0;
    let mut counts = [0usize; 3];
    for _ in 0..DRAWS {
        let d = envs::sample_decision(PolicyKind::EnergyPumping10, &state, &mut rng);
        if d.exploratory {
            explored += 1;
            counts[d.action] += 1;
        }
    }
    let freq = explored as f64 / DRAWS as f64;
    assert!((freq - 0.10).abs() < 0.01, "exploration frequency {freq}");
    // Random branch is uniform over the three actions.
    for c in counts {
        let share = c as f64 / explored as f64;
        assert!((share - 1.0 / 3.0).abs() < 0.02, "share {share}");
    }
}

#[test]
fn energy_pumping_greedy_action_follows_velocity_sign() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for (velocity, expected) in [(0.01, 2), (-0.01, 0)] {
        let state = envs::EnvState::from_observation(EnvKind::MountainCar, &[-0.5, velocity]).unwrap();
        for _ in 0..1000 {
            let d = envs::sample_decision(PolicyKind::EnergyPumping10, &state, &mut rng);
            if !d.exploratory {
                assert_eq!(d.action, expected);
            }
        }
    }
}
