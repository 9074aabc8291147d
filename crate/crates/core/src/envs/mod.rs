//! Benchmark control domains and the behaviour policies used to collect data.
//!
//! Every domain is a small value-like state machine: [`step`] takes a state by
//! reference and returns the successor, so many independent instances can be
//! simulated in parallel as long as each owns its random stream. All physical
//! constants live in the per-domain submodules and are tabulated in
//! `docs/domains.md`.

pub mod acrobot;
pub mod mountain_car;
mod policy;
pub mod puddle_world;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

pub use policy::{sample_action, sample_decision, Decision, PolicyKind};

/// Largest observation dimension across the supported domains.
pub const MAX_OBS_DIM: usize = 4;

/// Episodes longer than this are cut off and treated as truncated.
pub const EPISODE_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    MountainCar,
    PuddleWorld,
    Acrobot,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::MountainCar, EnvKind::PuddleWorld, EnvKind::Acrobot];

    pub fn obs_dim(self) -> usize {
        match self {
            EnvKind::MountainCar | EnvKind::PuddleWorld => 2,
            EnvKind::Acrobot => 4,
        }
    }

    pub fn num_actions(self) -> usize {
        match self {
            EnvKind::MountainCar | EnvKind::Acrobot => 3,
            EnvKind::PuddleWorld => 4,
        }
    }

    /// Per-component `(lo, hi)` bounds of the observation vector.
    pub fn bounds(self) -> &'static [(f64, f64)] {
        match self {
            EnvKind::MountainCar => &mountain_car::BOUNDS,
            EnvKind::PuddleWorld => &puddle_world::BOUNDS,
            EnvKind::Acrobot => &acrobot::BOUNDS,
        }
    }

    /// The data-collection policy paired with this domain.
    pub fn default_policy(self) -> PolicyKind {
        match self {
            EnvKind::MountainCar => PolicyKind::EnergyPumping10,
            EnvKind::PuddleWorld => PolicyKind::NorthEast5050,
            EnvKind::Acrobot => PolicyKind::AcrobotNearOptimal,
        }
    }

    /// Hashed tile-coding width used for this domain's baselines.
    pub fn tile_hash_dim(self) -> usize {
        match self {
            EnvKind::MountainCar | EnvKind::PuddleWorld => 1024,
            EnvKind::Acrobot => 4096,
        }
    }

    /// Scale each component into `[0, 1]` using the domain bounds.
    pub fn normalize_into(self, obs: &[f64], out: &mut [f64]) {
        for ((o, &x), &(lo, hi)) in out.iter_mut().zip(obs).zip(self.bounds()) {
            *o = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
        }
    }

    pub fn normalize(self, obs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.obs_dim()];
        self.normalize_into(obs, &mut out);
        out
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::MountainCar => "mountain-car",
            EnvKind::PuddleWorld => "puddle-world",
            EnvKind::Acrobot => "acrobot",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match key.as_str() {
            "mountaincar" | "mc" => Ok(EnvKind::MountainCar),
            "puddleworld" | "pw" => Ok(EnvKind::PuddleWorld),
            "acrobot" => Ok(EnvKind::Acrobot),
            _ => Err(Error::InvalidConfig(format!("unknown environment '{s}'"))),
        }
    }
}

/// A domain state. The observation is the full Markov state for all three
/// domains, so a state can be rebuilt from a recorded observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvState {
    kind: EnvKind,
    obs: [f64; MAX_OBS_DIM],
    pub terminal: bool,
}

impl EnvState {
    /// Rebuild a state from an observation, clipping it into the domain bounds.
    pub fn from_observation(kind: EnvKind, obs: &[f64]) -> Result<Self> {
        if obs.len() != kind.obs_dim() {
            return Err(Error::Shape(format!(
                "{kind} observations have {} components, got {}",
                kind.obs_dim(),
                obs.len()
            )));
        }
        let mut state = EnvState {
            kind,
            obs: [0.0; MAX_OBS_DIM],
            terminal: false,
        };
        state.obs[..obs.len()].copy_from_slice(obs);
        state.clip();
        state.terminal = match kind {
            EnvKind::MountainCar => mountain_car::at_goal(&state.obs),
            EnvKind::PuddleWorld => puddle_world::at_goal(&state.obs),
            EnvKind::Acrobot => acrobot::at_goal(&state.obs),
        };
        Ok(state)
    }

    pub(crate) fn raw(kind: EnvKind, obs: [f64; MAX_OBS_DIM], terminal: bool) -> Self {
        let mut state = EnvState {
            kind,
            obs,
            terminal,
        };
        state.clip();
        state
    }

    pub fn kind(&self) -> EnvKind {
        self.kind
    }

    pub fn observation(&self) -> &[f64] {
        &self.obs[..self.kind.obs_dim()]
    }

    fn clip(&mut self) {
        for (x, &(lo, hi)) in self.obs.iter_mut().zip(self.kind.bounds()) {
            *x = x.clamp(lo, hi);
        }
    }
}

/// Draw a start state from the domain's start distribution.
pub fn reset<R: Rng + ?Sized>(kind: EnvKind, rng: &mut R) -> EnvState {
    let obs = match kind {
        EnvKind::MountainCar => mountain_car::start(rng),
        EnvKind::PuddleWorld => puddle_world::start(rng),
        EnvKind::Acrobot => acrobot::start(rng),
    };
    EnvState::raw(kind, obs, false)
}

/// Advance one step. Returns the successor state and the reward.
pub fn step<R: Rng + ?Sized>(state: &EnvState, action: usize, rng: &mut R) -> Result<(EnvState, f64)> {
    if state.terminal {
        return Err(Error::TerminalStep);
    }
    let kind = state.kind;
    if action >= kind.num_actions() {
        return Err(Error::InvalidAction {
            env: kind.name(),
            action,
            num_actions: kind.num_actions(),
        });
    }
    let (obs, reward, terminal) = match kind {
        EnvKind::MountainCar => mountain_car::dynamics(&state.obs, action),
        EnvKind::PuddleWorld => puddle_world::dynamics(&state.obs, action, rng),
        EnvKind::Acrobot => acrobot::dynamics(&state.obs, action),
    };
    Ok((EnvState::raw(kind, obs, terminal), reward))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dimensions_match_domains() {
        assert_eq!(EnvKind::MountainCar.obs_dim(), 2);
        assert_eq!(EnvKind::PuddleWorld.obs_dim(), 2);
        assert_eq!(EnvKind::Acrobot.obs_dim(), 4);
        for kind in EnvKind::ALL {
            assert_eq!(kind.bounds().len(), kind.obs_dim());
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("MountainCar".parse::<EnvKind>().unwrap(), EnvKind::MountainCar);
        assert_eq!("puddle-world".parse::<EnvKind>().unwrap(), EnvKind::PuddleWorld);
        assert_eq!("ACROBOT".parse::<EnvKind>().unwrap(), EnvKind::Acrobot);
        assert!("cartpole".parse::<EnvKind>().is_err());
    }

    #[test]
    fn reset_is_deterministic() {
        for kind in EnvKind::ALL {
            let a = reset(kind, &mut ChaCha8Rng::seed_from_u64(3));
            let b = reset(kind, &mut ChaCha8Rng::seed_from_u64(3));
            assert_eq!(a, b);
            assert!(!a.terminal);
        }
    }

    #[test]
    fn terminal_state_cannot_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let goal = EnvState::from_observation(EnvKind::MountainCar, &[0.5, 0.01]).unwrap();
        assert!(goal.terminal);
        assert!(matches!(step(&goal, 1, &mut rng), Err(Error::TerminalStep)));
    }

    #[test]
    fn invalid_action_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = reset(EnvKind::MountainCar, &mut rng);
        assert!(matches!(
            step(&s, 3, &mut rng),
            Err(Error::InvalidAction { action: 3, .. })
        ));
    }

    #[test]
    fn normalization_maps_bounds_to_unit_interval() {
        for kind in EnvKind::ALL {
            let lo: Vec<f64> = kind.bounds().iter().map(|b| b.0).collect();
            let hi: Vec<f64> = kind.bounds().iter().map(|b| b.1).collect();
            assert!(kind.normalize(&lo).iter().all(|&v| v == 0.0));
            assert!(kind.normalize(&hi).iter().all(|&v| v == 1.0));
        }
    }
}
