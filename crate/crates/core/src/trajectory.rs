//! Experience datasets: generation, sample returns and plain-text persistence.
//!
//! A [`Dataset`] is one ordered stream of transitions made of concatenated
//! episodes. Episodes end in one of three ways (see [`EpisodeEnd`]); only
//! terminated episodes have well-defined undiscounted returns.

use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::envs::{self, EnvKind, PolicyKind, EPISODE_CAP};
use crate::error::{Error, Result};
use crate::textio::fmt_f64;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub terminal: bool,
    /// The episode hit the step cap on this transition.
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodeEnd {
    /// Reached a terminal state.
    Terminated,
    /// Cut off by the episode step cap.
    Truncated,
    /// The dataset ends before the episode does.
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Episode {
    pub index: usize,
    pub range: Range<usize>,
    pub end: EpisodeEnd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub env: EnvKind,
    pub policy: PolicyKind,
    pub seed: u64,
    transitions: Vec<Transition>,
    episode_starts: Vec<usize>,
}

impl Dataset {
    /// Assemble a dataset, checking the structural invariants.
    pub fn new(
        env: EnvKind,
        policy: PolicyKind,
        seed: u64,
        transitions: Vec<Transition>,
        episode_starts: Vec<usize>,
    ) -> Result<Self> {
        let data = Dataset {
            env,
            policy,
            seed,
            transitions,
            episode_starts,
        };
        data.validate()?;
        Ok(data)
    }

    fn validate(&self) -> Result<()> {
        let d = self.env.obs_dim();
        if self.transitions.is_empty() {
            return Err(Error::Shape("a dataset needs at least one transition".into()));
        }
        if self.episode_starts.first() != Some(&0) {
            return Err(Error::Shape("episode_starts must begin at 0".into()));
        }
        if self.episode_starts.windows(2).any(|w| w[0] >= w[1])
            || *self.episode_starts.last().unwrap() >= self.transitions.len()
        {
            return Err(Error::Shape("episode_starts must be strictly increasing and in range".into()));
        }
        for (i, tr) in self.transitions.iter().enumerate() {
            if tr.obs.len() != d || tr.next_obs.len() != d {
                return Err(Error::Shape(format!("transition {i} does not have dimension {d}")));
            }
            if tr.terminal && tr.truncated {
                return Err(Error::Shape(format!("transition {i} is both terminal and truncated")));
            }
        }
        for ep in self.episodes() {
            let inner = ep.range.start..ep.range.end - 1;
            if let Some(i) = inner.clone().find(|&i| self.transitions[i].terminal || self.transitions[i].truncated) {
                return Err(Error::Shape(format!(
                    "transition {i} ends episode {} before its last transition",
                    ep.index
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn obs_dim(&self) -> usize {
        self.env.obs_dim()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn episode_starts(&self) -> &[usize] {
        &self.episode_starts
    }

    pub fn episodes(&self) -> Vec<Episode> {
        let n = self.transitions.len();
        self.episode_starts
            .iter()
            .enumerate()
            .map(|(index, &start)| {
                let end_idx = self.episode_starts.get(index + 1).copied().unwrap_or(n);
                let last = &self.transitions[end_idx - 1];
                let end = if last.terminal {
                    EpisodeEnd::Terminated
                } else if last.truncated {
                    EpisodeEnd::Truncated
                } else {
                    EpisodeEnd::Incomplete
                };
                Episode {
                    index,
                    range: start..end_idx,
                    end,
                }
            })
            .collect()
    }

    /// Raw observations `x_0 .. x_t`: every transition's observation followed
    /// by the final transition's next observation.
    pub fn raw_observations(&self) -> Array2<f64> {
        let d = self.obs_dim();
        let t = self.len();
        let mut x = Array2::zeros((t + 1, d));
        for (i, tr) in self.transitions.iter().enumerate() {
            for (j, &v) in tr.obs.iter().enumerate() {
                x[[i, j]] = v;
            }
        }
        for (j, &v) in self.transitions[t - 1].next_obs.iter().enumerate() {
            x[[t, j]] = v;
        }
        x
    }

    /// Observation matrix `X` with `t + 1` rows, scaled into `[0, 1]`.
    pub fn observation_matrix(&self) -> Array2<f64> {
        normalize_rows(self.env, &self.raw_observations())
    }

    /// The first `n` transitions. The last episode becomes incomplete if it is cut.
    pub fn prefix(&self, n: usize) -> Result<Dataset> {
        if n == 0 || n > self.len() {
            return Err(Error::Shape(format!("prefix length {n} outside 1..={}", self.len())));
        }
        let starts = self.episode_starts.iter().copied().filter(|&s| s < n).collect();
        Dataset::new(self.env, self.policy, self.seed, self.transitions[..n].to_vec(), starts)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Dataset::from_text(&text, path)
    }

    pub fn to_text(&self) -> String {
        let d = self.obs_dim();
        let mut out = String::new();
        writeln!(out, "# env={}", self.env).unwrap();
        writeln!(out, "# policy={}", self.policy).unwrap();
        writeln!(out, "# seed={}", self.seed).unwrap();
        writeln!(out, "# d={d}").unwrap();
        let mut header = vec!["episode_start".to_string()];
        header.extend((0..d).map(|j| format!("obs_{j}")));
        header.extend(["action".to_string(), "reward".to_string()]);
        header.extend((0..d).map(|j| format!("next_obs_{j}")));
        header.extend(["terminal".to_string(), "truncated".to_string()]);
        writeln!(out, "{}", header.join(",")).unwrap();

        let mut starts = self.episode_starts.iter().peekable();
        for (i, tr) in self.transitions.iter().enumerate() {
            let start = if starts.peek() == Some(&&i) {
                starts.next();
                1
            } else {
                0
            };
            let mut fields = vec![start.to_string()];
            fields.extend(tr.obs.iter().map(|&v| fmt_f64(v)));
            fields.push(tr.action.to_string());
            fields.push(fmt_f64(tr.reward));
            fields.extend(tr.next_obs.iter().map(|&v| fmt_f64(v)));
            fields.push((tr.terminal as u8).to_string());
            fields.push((tr.truncated as u8).to_string());
            writeln!(out, "{}", fields.join(",")).unwrap();
        }
        out
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Dataset> {
        let mut env = None;
        let mut policy = None;
        let mut seed = None;
        let mut dim = None;
        let mut header_seen = false;
        let mut transitions = Vec::new();
        let mut episode_starts = Vec::new();

        for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let Some((key, value)) = meta.split_once('=') else {
                    continue;
                };
                let value = value.trim();
                let bad = |what: &str| Error::parse(path, lineno, format!("bad {what} '{value}'"));
                match key.trim() {
                    "env" => env = Some(value.parse::<EnvKind>().map_err(|_| bad("env"))?),
                    "policy" => policy = Some(value.parse::<PolicyKind>().map_err(|_| bad("policy"))?),
                    "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad("seed"))?),
                    "d" => dim = Some(value.parse::<usize>().map_err(|_| bad("d"))?),
                    _ => {}
                }
                continue;
            }
            let (Some(env), Some(d)) = (env, dim) else {
                return Err(Error::parse(path, lineno, "data before the env/d metadata"));
            };
            if d != env.obs_dim() {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("d={d} does not match {env} (d={})", env.obs_dim()),
                ));
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let expected = 2 * d + 5;
            if !header_seen {
                if fields.first() != Some(&"episode_start") || fields.len() != expected {
                    return Err(Error::parse(path, lineno, "missing or malformed header row"));
                }
                header_seen = true;
                continue;
            }
            if fields.len() != expected {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected {expected} fields for d={d}, found {}", fields.len()),
                ));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(path, lineno, format!("not a number: '{s}'")))
            };
            let flag = |s: &str| -> Result<bool> {
                match s {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    _ => Err(Error::parse(path, lineno, format!("not a 0/1 flag: '{s}'"))),
                }
            };
            if flag(fields[0])? {
                episode_starts.push(transitions.len());
            }
            let obs = fields[1..1 + d].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
            let action = fields[1 + d]
                .parse::<usize>()
                .map_err(|_| Error::parse(path, lineno, format!("bad action '{}'", fields[1 + d])))?;
            let reward = num(fields[2 + d])?;
            let next_obs = fields[3 + d..3 + 2 * d].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
            let terminal = flag(fields[3 + 2 * d])?;
            let truncated = flag(fields[4 + 2 * d])?;
            transitions.push(Transition {
                obs,
                action,
                reward,
                next_obs,
                terminal,
                truncated,
            });
        }

        let last_line = text.lines().count().max(1);
        let env = env.ok_or_else(|| Error::parse(path, last_line, "missing '# env=' metadata"))?;
        let policy = policy.ok_or_else(|| Error::parse(path, last_line, "missing '# policy=' metadata"))?;
        let seed = seed.ok_or_else(|| Error::parse(path, last_line, "missing '# seed=' metadata"))?;
        if transitions.is_empty() {
            return Err(Error::parse(path, last_line, "no transitions"));
        }
        Dataset::new(env, policy, seed, transitions, episode_starts)
            .map_err(|e| Error::parse(path, last_line, e.to_string()))
    }
}

/// Scale each row of raw observations into `[0, 1]` by the domain bounds.
pub fn normalize_rows(env: EnvKind, raw: &Array2<f64>) -> Array2<f64> {
    let mut out = raw.clone();
    for mut row in out.rows_mut() {
        for (v, &(lo, hi)) in row.iter_mut().zip(env.bounds()) {
            *v = ((*v - lo) / (hi - lo)).clamp(0.0, 1.0);
        }
    }
    out
}

/// 17 significant digits: enough to round-trip every `f64` exactly.
/// Roll out `policy` in `env` for exactly `n` transitions, starting a new
/// episode whenever one terminates or hits [`EPISODE_CAP`].
pub fn generate(env: EnvKind, policy: PolicyKind, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidConfig("sample count must be at least 1".into()));
    }
    if policy.env() != env {
        return Err(Error::InvalidConfig(format!("policy {policy} does not act in {env}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transitions = Vec::with_capacity(n);
    let mut episode_starts = vec![0];
    let mut state = envs::reset(env, &mut rng);
    let mut steps = 0usize;
    while transitions.len() < n {
        let action = envs::sample_action(policy, &state, &mut rng);
        let (next, reward) = envs::step(&state, action, &mut rng)?;
        steps += 1;
        let truncated = !next.terminal && steps >= EPISODE_CAP;
        transitions.push(Transition {
            obs: state.observation().to_vec(),
            action,
            reward,
            next_obs: next.observation().to_vec(),
            terminal: next.terminal,
            truncated,
        });
        if next.terminal || truncated {
            state = envs::reset(env, &mut rng);
            steps = 0;
            if transitions.len() < n {
                episode_starts.push(transitions.len());
            }
        } else {
            state = next;
        }
    }
    Dataset::new(env, policy, seed, transitions, episode_starts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    /// Sample Bellman error: targets are rewards, bootstrapped with gamma.
    Be,
    /// Mean-squared return error: targets are within-episode returns.
    Msre,
}

impl std::str::FromStr for LossMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "be" => Ok(LossMode::Be),
            "msre" => Ok(LossMode::Msre),
            _ => Err(Error::InvalidConfig(format!("unknown loss '{s}' (expected be or msre)"))),
        }
    }
}

impl std::fmt::Display for LossMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossMode::Be => "be",
            LossMode::Msre => "msre",
        })
    }
}

/// Supervised targets for the transitions of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetVector {
    pub mode: LossMode,
    /// `y_i` for each transition.
    pub values: Vec<f64>,
    /// Nominal bootstrap discount: `gamma` for BE, 0 for MSRE.
    pub gamma_bar: f64,
    /// Per-transition bootstrap discount; 0 on terminal transitions.
    pub discounts: Vec<f64>,
    /// Whether transition `i` carries a usable supervised term.
    pub valid: Vec<bool>,
    /// Episodes whose transitions were (partly) excluded.
    pub flagged_episodes: Vec<usize>,
}

impl TargetVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_valid(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// Returns shorter than this fraction of the full discounted tail are kept
/// when an unfinished episode is cut off (`gamma < 1` only).
const NEGLIGIBLE_TAIL: f64 = 1e-8;

pub fn compute_targets(data: &Dataset, mode: LossMode, gamma: f64) -> Result<TargetVector> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidConfig(format!("gamma {gamma} outside [0, 1]")));
    }
    let t = data.len();
    let trs = data.transitions();
    let mut values = vec![0.0; t];
    let mut discounts = vec![0.0; t];
    let mut valid = vec![true; t];
    let mut flagged = Vec::new();

    match mode {
        LossMode::Be => {
            for (i, tr) in trs.iter().enumerate() {
                values[i] = tr.reward;
                discounts[i] = if tr.terminal { 0.0 } else { gamma };
                // the successor row of a cap-truncated transition belongs to the next episode
                if tr.truncated && i + 1 < t {
                    valid[i] = false;
                }
            }
            for ep in data.episodes() {
                if ep.end == EpisodeEnd::Truncated && ep.range.end < t {
                    flagged.push(ep.index);
                }
            }
        }
        LossMode::Msre => {
            for ep in data.episodes() {
                if ep.end == EpisodeEnd::Truncated && gamma == 1.0 {
                    return Err(Error::TruncatedEpisode { episode: ep.index });
                }
                let mut g = 0.0;
                for i in ep.range.clone().rev() {
                    g = trs[i].reward + gamma * g;
                    values[i] = g;
                }
                if ep.end != EpisodeEnd::Terminated {
                    flagged.push(ep.index);
                    let len = ep.range.len();
                    for (offset, i) in ep.range.clone().enumerate() {
                        let remaining = (len - offset) as i32;
                        valid[i] = gamma < 1.0 && gamma.powi(remaining) < NEGLIGIBLE_TAIL;
                    }
                }
            }
        }
    }

    Ok(TargetVector {
        mode,
        values,
        gamma_bar: match mode {
            LossMode::Be => gamma,
            LossMode::Msre => 0.0,
        },
        discounts,
        valid,
        flagged_episodes: flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(reward: f64, terminal: bool) -> Transition {
        Transition {
            obs: vec![0.0, 0.0],
            action: 1,
            reward,
            next_obs: vec![0.0, 0.0],
            terminal,
            truncated: false,
        }
    }

    fn manual(rewards: &[(f64, bool)], starts: Vec<usize>) -> Dataset {
        let trs = rewards.iter().map(|&(r, term)| tr(r, term)).collect();
        Dataset::new(EnvKind::MountainCar, PolicyKind::EnergyPumping10, 0, trs, starts).unwrap()
    }

    #[test]
    fn geometric_return() {
        let data = manual(&[(1.0, false), (1.0, false), (1.0, true)], vec![0]);
        let y = compute_targets(&data, LossMode::Msre, 0.5).unwrap();
        assert_eq!(y.values, vec![1.75, 1.5, 1.0]);
        assert_eq!(y.gamma_bar, 0.0);
        assert!(y.valid.iter().all(|&v| v));
    }

    #[test]
    fn be_targets_are_rewards() {
        let data = manual(&[(-2.0, false), (3.0, true)], vec![0]);
        let y = compute_targets(&data, LossMode::Be, 0.9).unwrap();
        assert_eq!(y.values, vec![-2.0, 3.0]);
        assert_eq!(y.gamma_bar, 0.9);
        assert_eq!(y.discounts, vec![0.9, 0.0]);
    }

    #[test]
    fn returns_do_not_bleed_across_episodes() {
        let data = manual(&[(1.0, false), (1.0, true), (1.0, true)], vec![0, 2]);
        let y = compute_targets(&data, LossMode::Msre, 1.0).unwrap();
        assert_eq!(y.values, vec![2.0, 1.0, 1.0]);
    }

    #[test]
    fn incomplete_tail_is_excluded_and_flagged() {
        let data = manual(&[(1.0, true), (1.0, false), (1.0, false)], vec![0, 1]);
        let y = compute_targets(&data, LossMode::Msre, 1.0).unwrap();
        assert_eq!(y.valid, vec![true, false, false]);
        assert_eq!(y.flagged_episodes, vec![1]);
    }

    #[test]
    fn cap_truncation_with_unit_gamma_is_an_error() {
        let mut trs = vec![tr(1.0, false), tr(1.0, true)];
        trs[0].truncated = true;
        let data = Dataset::new(EnvKind::MountainCar, PolicyKind::EnergyPumping10, 0, trs, vec![0, 1]).unwrap();
        match compute_targets(&data, LossMode::Msre, 1.0) {
            Err(Error::TruncatedEpisode { episode }) => assert_eq!(episode, 0),
            other => panic!("expected truncation error, got {other:?}"),
        }
        // discounted returns are fine; the short truncated episode is simply excluded
        let y = compute_targets(&data, LossMode::Msre, 0.5).unwrap();
        assert_eq!(y.valid, vec![false, true]);
        // the BE pair across the cap boundary is masked
        let y = compute_targets(&data, LossMode::Be, 0.5).unwrap();
        assert_eq!(y.valid, vec![false, true]);
    }

    #[test]
    fn invalid_structure_rejected() {
        let trs = vec![tr(1.0, true), tr(1.0, false)];
        assert!(Dataset::new(EnvKind::MountainCar, PolicyKind::EnergyPumping10, 0, trs.clone(), vec![0]).is_err());
        assert!(Dataset::new(EnvKind::MountainCar, PolicyKind::EnergyPumping10, 0, trs.clone(), vec![1]).is_err());
        assert!(Dataset::new(EnvKind::MountainCar, PolicyKind::EnergyPumping10, 0, vec![], vec![0]).is_err());
    }

    #[test]
    fn single_sample() {
        let data = generate(EnvKind::PuddleWorld, PolicyKind::NorthEast5050, 1, 4).unwrap();
        assert_eq!(data.len(), 1);
        assert_eq!(data.episode_starts(), &[0]);
        assert_eq!(data.observation_matrix().nrows(), 2);
    }

    #[test]
    fn prefix_cuts_last_episode() {
        let data = generate(EnvKind::MountainCar, PolicyKind::EnergyPumping10, 500, 2).unwrap();
        let p = data.prefix(150).unwrap();
        assert_eq!(p.len(), 150);
        assert_eq!(p.transitions(), &data.transitions()[..150]);
        assert!(p.episode_starts().iter().all(|&s| s < 150));
    }

    #[test]
    fn mismatched_policy_rejected() {
        assert!(generate(EnvKind::Acrobot, PolicyKind::NorthEast5050, 10, 0).is_err());
    }
}
