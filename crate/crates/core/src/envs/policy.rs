use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::{puddle_world, EnvKind, EnvState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    /// Mountain Car: throttle in the direction of motion, uniform-random 10% of the time.
    EnergyPumping10,
    /// Puddle World: North or East with equal probability.
    NorthEast5050,
    /// Acrobot: energy-pumping swing-up heuristic (see [`acrobot_torque`]).
    AcrobotNearOptimal,
}

/// Probability of a uniformly random action under [`PolicyKind::EnergyPumping10`].
pub const ENERGY_PUMPING_EPSILON: f64 = 0.1;
/// Probability of a uniformly random action under [`PolicyKind::AcrobotNearOptimal`].
pub const ACROBOT_EPSILON: f64 = 0.05;

/// An action together with whether it came from the uniform-random branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub action: usize,
    pub exploratory: bool,
}

impl PolicyKind {
    pub fn env(self) -> EnvKind {
        match self {
            PolicyKind::EnergyPumping10 => EnvKind::MountainCar,
            PolicyKind::NorthEast5050 => EnvKind::PuddleWorld,
            PolicyKind::AcrobotNearOptimal => EnvKind::Acrobot,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::EnergyPumping10 => "energy-pumping-10",
            PolicyKind::NorthEast5050 => "north-east-50-50",
            PolicyKind::AcrobotNearOptimal => "acrobot-near-optimal",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match key.as_str() {
            "energypumping10" | "energypumping" => Ok(PolicyKind::EnergyPumping10),
            "northeast5050" | "northeast" => Ok(PolicyKind::NorthEast5050),
            "acrobotnearoptimal" | "nearoptimal" => Ok(PolicyKind::AcrobotNearOptimal),
            _ => Err(Error::InvalidConfig(format!("unknown policy '{s}'"))),
        }
    }
}

/// Deterministic part of the Acrobot controller: push the second joint with
/// its angular velocity, which maximises the rate of energy injection.
pub fn acrobot_torque(obs: &[f64]) -> usize {
    if obs[3] > 0.0 {
        2
    } else if obs[3] < 0.0 {
        0
    } else {
        1
    }
}

pub fn sample_decision<R: Rng + ?Sized>(policy: PolicyKind, state: &EnvState, rng: &mut R) -> Decision {
    let obs = state.observation();
    match policy {
        PolicyKind::EnergyPumping10 => {
            if rng.random::<f64>() < ENERGY_PUMPING_EPSILON {
                Decision {
                    action: rng.random_range(0..3),
                    exploratory: true,
                }
            } else {
                let action = if obs[1] >= 0.0 { 2 } else { 0 };
                Decision {
                    action,
                    exploratory: false,
                }
            }
        }
        PolicyKind::NorthEast5050 => {
            let action = if rng.random::<bool>() {
                puddle_world::NORTH
            } else {
                puddle_world::EAST
            };
            Decision {
                action,
                exploratory: false,
            }
        }
        PolicyKind::AcrobotNearOptimal => {
            if rng.random::<f64>() < ACROBOT_EPSILON {
                Decision {
                    action: rng.random_range(0..3),
                    exploratory: true,
                }
            } else {
                Decision {
                    action: acrobot_torque(obs),
                    exploratory: false,
                }
            }
        }
    }
}

pub fn sample_action<R: Rng + ?Sized>(policy: PolicyKind, state: &EnvState, rng: &mut R) -> usize {
    sample_decision(policy, state, rng).action
}
