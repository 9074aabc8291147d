use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::envs::{self, EnvKind, EnvState, PolicyKind, EPISODE_CAP};
use crate::error::{Error, Result};
use crate::seeds::derive_seed;
use crate::textio::{fmt_f64, fmt_row, parse_row, read_to_string, write_atomic};
use crate::trajectory::{compute_targets, Dataset, LossMode};

/// Rollouts stop once the remaining discount weight falls below this.
pub const HORIZON_CUTOFF: f64 = 1e-12;

/// A Markov chain with rewards: an environment already paired with a policy.
pub trait RolloutModel: Sync {
    type State: Clone + Send + Sync;

    /// Sample the successor, the reward, and whether the episode ended.
    fn step(&self, state: &Self::State, rng: &mut ChaCha8Rng) -> Result<(Self::State, f64, bool)>;

    fn is_terminal(&self, _state: &Self::State) -> bool {
        false
    }
}

/// One of the simulated domains under a fixed policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvChain {
    pub policy: PolicyKind,
}

impl RolloutModel for EnvChain {
    type State = EnvState;

    fn step(&self, state: &EnvState, rng: &mut ChaCha8Rng) -> Result<(EnvState, f64, bool)> {
        let a = envs::sample_action(self.policy, state, rng);
        let (next, r) = envs::step(state, a, rng)?;
        let done = next.terminal;
        Ok((next, r, done))
    }

    fn is_terminal(&self, state: &EnvState) -> bool {
        state.terminal
    }
}

/// A finite chain: from state `s` collect `r[s]`, then move by row `s` of `p`.
/// States listed in `terminal` end the episode on entry.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularChain {
    pub p: Array2<f64>,
    pub r: Array1<f64>,
    pub terminal: Vec<bool>,
}

impl TabularChain {
    pub fn new(p: Array2<f64>, r: Array1<f64>) -> Result<Self> {
        let n = r.len();
        if p.dim() != (n, n) {
            return Err(Error::Shape(format!("transition matrix {:?} for {n} states", p.dim())));
        }
        for (i, row) in p.rows().into_iter().enumerate() {
            let s: f64 = row.sum();
            if row.iter().any(|&v| v < 0.0) || (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidConfig(format!("row {i} of the transition matrix is not a distribution")));
            }
        }
        Ok(TabularChain { p, r, terminal: vec![false; n] })
    }
}

impl RolloutModel for TabularChain {
    type State = usize;

    fn step(&self, &s: &usize, rng: &mut ChaCha8Rng) -> Result<(usize, f64, bool)> {
        let u: f64 = rng.random();
        let row = self.p.row(s);
        let mut acc = 0.0;
        let mut next = row.len() - 1;
        for (j, &pj) in row.iter().enumerate() {
            acc += pj;
            if u < acc {
                next = j;
                break;
            }
        }
        Ok((next, self.r[s], self.terminal[next]))
    }

    fn is_terminal(&self, &s: &usize) -> bool {
        self.terminal[s]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutOptions {
    pub n_rollouts: usize,
    pub gamma: f64,
    pub seed: u64,
    /// Steps after which a rollout is cut off and counted as truncated.
    pub cap: usize,
}

impl Default for RolloutOptions {
    fn default() -> Self {
        RolloutOptions {
            n_rollouts: 100,
            gamma: 1.0,
            seed: 0,
            cap: EPISODE_CAP,
        }
    }
}

/// Mean discounted return per start state, its standard error, and the
/// number of rollouts that hit the step cap.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutValues {
    pub values: Array1<f64>,
    pub std_errors: Array1<f64>,
    pub truncated: usize,
}

fn one_rollout<M: RolloutModel>(model: &M, start: &M::State, opts: &RolloutOptions, rng: &mut ChaCha8Rng) -> Result<(f64, bool)> {
    if model.is_terminal(start) {
        return Ok((0.0, false));
    }
    let mut s = start.clone();
    let mut ret = 0.0;
    let mut disc = 1.0;
    for _ in 0..opts.cap {
        let (next, r, done) = model.step(&s, rng)?;
        ret += disc * r;
        if done {
            return Ok((ret, false));
        }
        disc *= opts.gamma;
        if disc < HORIZON_CUTOFF {
            return Ok((ret, false));
        }
        s = next;
    }
    Ok((ret, true))
}

/// Monte Carlo values for each start state. Rollout `j` from state `i` uses
/// its own random stream, so results do not depend on scheduling.
pub fn rollout_values<M: RolloutModel>(model: &M, starts: &[M::State], opts: &RolloutOptions) -> Result<RolloutValues> {
    if opts.n_rollouts == 0 {
        return Err(Error::InvalidConfig("n_rollouts must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&opts.gamma) {
        return Err(Error::InvalidConfig(format!("gamma {} outside [0, 1]", opts.gamma)));
    }
    let per_state: Vec<(f64, f64, usize)> = starts
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            let mut truncated = 0;
            for j in 0..opts.n_rollouts {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, &[i as u64, j as u64]));
                let (g, cut) = one_rollout(model, s, opts, &mut rng)?;
                sum += g;
                sum_sq += g * g;
                truncated += cut as usize;
            }
            let n = opts.n_rollouts as f64;
            let mean = sum / n;
            let se = if opts.n_rollouts > 1 {
                ((sum_sq - n * mean * mean).max(0.0) / (n - 1.0) / n).sqrt()
            } else {
                0.0
            };
            Ok((mean, se, truncated))
        })
        .collect::<Result<_>>()?;
    Ok(RolloutValues {
        values: per_state.iter().map(|p| p.0).collect(),
        std_errors: per_state.iter().map(|p| p.1).collect(),
        truncated: per_state.iter().map(|p| p.2).sum(),
    })
}

/// Test states with rollout values and the return observed along the
/// trajectory each state was sampled from.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub env: EnvKind,
    pub policy: PolicyKind,
    /// Raw observations, one row per test state.
    pub states: Array2<f64>,
    pub values: Array1<f64>,
    pub std_errors: Array1<f64>,
    pub returns: Array1<f64>,
    pub n_rollouts: usize,
    pub gamma: f64,
    pub seed: u64,
    pub truncated: usize,
}

/// Rollout values under `policy` from each row of `states` (raw observations).
pub fn true_values_rollout(
    policy: PolicyKind,
    states: &Array2<f64>,
    returns: Array1<f64>,
    opts: &RolloutOptions,
) -> Result<GroundTruth> {
    let env = policy.env();
    if returns.len() != states.nrows() {
        return Err(Error::Shape(format!("{} returns for {} states", returns.len(), states.nrows())));
    }
    let starts: Vec<EnvState> = states
        .rows()
        .into_iter()
        .map(|row| EnvState::from_observation(env, &row.to_vec()))
        .collect::<Result<_>>()?;
    let rv = rollout_values(&EnvChain { policy }, &starts, opts)?;
    Ok(GroundTruth {
        env,
        policy,
        states: states.clone(),
        values: rv.values,
        std_errors: rv.std_errors,
        returns,
        n_rollouts: opts.n_rollouts,
        gamma: opts.gamma,
        seed: opts.seed,
        truncated: rv.truncated,
    })
}

impl GroundTruth {
    /// Ground truth for the first `max_states` transitions of `data` that
    /// have a complete observed return.
    pub fn from_dataset(data: &Dataset, max_states: usize, opts: &RolloutOptions) -> Result<GroundTruth> {
        let targets = compute_targets(data, LossMode::Msre, opts.gamma)?;
        let keep: Vec<usize> = (0..data.len()).filter(|&i| targets.valid[i]).take(max_states).collect();
        let d = data.obs_dim();
        let trs = data.transitions();
        let states = Array2::from_shape_fn((keep.len(), d), |(r, c)| trs[keep[r]].obs[c]);
        let returns = keep.iter().map(|&i| targets.values[i]).collect();
        true_values_rollout(data.policy, &states, returns, opts)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Test states scaled to the unit box.
    pub fn normalized_states(&self) -> Array2<f64> {
        crate::trajectory::normalize_rows(self.env, &self.states)
    }

    pub fn to_text(&self) -> String {
        let d = self.states.ncols();
        let mut out = format!(
            "# env={}\n# policy={}\n# rollouts={}\n# gamma={}\n# seed={}\n# truncated={}\n",
            self.env,
            self.policy,
            self.n_rollouts,
            fmt_f64(self.gamma),
            self.seed,
            self.truncated
        );
        let mut header: Vec<String> = (0..d).map(|j| format!("obs_{j}")).collect();
        header.extend(["v_star", "std_error", "return"].map(String::from));
        out.push_str(&header.join(","));
        out.push('\n');
        for i in 0..self.len() {
            let mut row: Vec<f64> = self.states.row(i).to_vec();
            row.extend([self.values[i], self.std_errors[i], self.returns[i]]);
            out.push_str(&fmt_row(row.iter()));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<GroundTruth> {
        GroundTruth::from_text(&read_to_string(path)?, path)
    }

    pub fn from_text(text: &str, path: &Path) -> Result<GroundTruth> {
        let mut meta = std::collections::HashMap::new();
        let mut header_seen = false;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut width = 0;
        for (i, line) in text.lines().enumerate() {
            let no = i + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(kv) = line.strip_prefix('#') {
                let (k, v) = kv.trim().split_once('=').ok_or_else(|| Error::parse(path, no, "expected key=value"))?;
                meta.insert(k.trim().to_string(), (no, v.trim().to_string()));
            } else if !header_seen {
                width = line.split(',').count();
                if width < 4 || !line.ends_with("v_star,std_error,return") {
                    return Err(Error::parse(path, no, "bad column header"));
                }
                header_seen = true;
            } else {
                let row = parse_row(line, path, no)?;
                if row.len() != width {
                    return Err(Error::parse(path, no, format!("expected {width} values, found {}", row.len())));
                }
                rows.push(row);
            }
        }
        let get = |k: &str| -> Result<(usize, String)> {
            meta.get(k).cloned().ok_or_else(|| Error::parse(path, 0, format!("missing '# {k}=' line")))
        };
        fn num<T: std::str::FromStr>(path: &Path, (no, v): (usize, String)) -> Result<T> {
            v.parse().map_err(|_| Error::parse(path, no, format!("invalid value '{v}'")))
        }
        let (env_line, env) = get("env")?;
        let env: EnvKind = env.parse().map_err(|e: Error| Error::parse(path, env_line, e.to_string()))?;
        let (pol_line, policy) = get("policy")?;
        let policy: PolicyKind = policy.parse().map_err(|e: Error| Error::parse(path, pol_line, e.to_string()))?;
        let d = width.saturating_sub(3);
        if d != env.obs_dim() {
            return Err(Error::parse(path, 0, format!("{env} needs {} observation columns, found {d}", env.obs_dim())));
        }
        let n = rows.len();
        let col = |c: usize| -> Array1<f64> { rows.iter().map(|r| r[c]).collect() };
        Ok(GroundTruth {
            env,
            policy,
            states: Array2::from_shape_fn((n, d), |(r, c)| rows[r][c]),
            values: col(d),
            std_errors: col(d + 1),
            returns: col(d + 2),
            n_rollouts: num(path, get("rollouts")?)?,
            gamma: num(path, get("gamma")?)?,
            seed: num(path, get("seed")?)?,
            truncated: num(path, get("truncated")?)?,
        })
    }
}
