use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ndarray::Array1;

use scope_core::envs::{EnvKind, PolicyKind};
use scope_core::experiments::{
    compare_representations, cross_validate, learning_curve, ExperimentConfig, Featurizer, Representation,
    ScopeVariant,
};
use scope_core::scope::{dump_phi, fit, supervised_set, write_trace, L1Power, ScopeConfig, ScopeModel};
use scope_core::tilecoding::TileSpec;
use scope_core::trajectory::{compute_targets, generate, Dataset, LossMode};
use scope_core::value_eval::{fit_weights, mapve, msre, Features, GroundTruth, RolloutOptions};

#[derive(Parser)]
#[command(name = "scope", version, about = "Supervised sparse coding for policy evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a trajectory dataset from a domain under its data policy.
    Gen(GenArgs),
    /// Learn a dictionary, sparse code and value weights from a dataset.
    Train(TrainArgs),
    /// Rollout ground-truth values for test states taken from a dataset.
    Truth(TruthArgs),
    /// Fit value weights on a representation and score them on a truth file.
    Eval(EvalArgs),
    /// Learning curves for sparse-coding and tile-coding representations.
    Curve(ExperimentArgs),
    /// Choose beta_B = beta_w by contiguous k-fold cross-validation.
    Cv(CvArgs),
    /// Compare supervised, unsupervised, non-negative and supervised-only coding.
    Compare(ExperimentArgs),
    /// Write the code matrix of a model as CSV.
    DumpPhi(DumpPhiArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    env: EnvKind,
    /// Defaults to the domain's data-collection policy.
    #[arg(long)]
    policy: Option<PolicyKind>,
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScopeArgs {
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long, default_value_t = 1e-3)]
    beta_b: f64,
    #[arg(long, default_value_t = 1e-3)]
    beta_w: f64,
    #[arg(long, default_value_t = 0.1)]
    beta_phi: f64,
    /// Power on the per-row L1 penalty (1 or 2).
    #[arg(long, default_value_t = 1)]
    p: u8,
    #[arg(long, default_value = "msre")]
    loss: LossMode,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long)]
    nonneg: bool,
    /// Drop the supervised loss.
    #[arg(long, conflicts_with = "supervised_only")]
    unsupervised: bool,
    /// Drop the reconstruction loss.
    #[arg(long)]
    supervised_only: bool,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long, default_value_t = 1)]
    inner_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ScopeArgs {
    fn config(&self) -> Result<ScopeConfig> {
        Ok(ScopeConfig {
            k: self.k,
            beta_b: self.beta_b,
            beta_w: self.beta_w,
            beta_phi: self.beta_phi,
            power: L1Power::from_u8(self.p)?,
            loss: self.loss,
            gamma: self.gamma,
            max_outer_iters: self.max_iters,
            inner_iters: self.inner_iters,
            tolerance: self.tolerance,
            seed: self.seed,
            nonneg: self.nonneg,
            supervised: !self.unsupervised,
            reconstruct: !self.supervised_only,
        })
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    scope: ScopeArgs,
    #[arg(long)]
    out_model: PathBuf,
    #[arg(long)]
    out_trace: Option<PathBuf>,
}

#[derive(Args)]
struct TruthArgs {
    /// Dataset whose transitions (with complete returns) supply the test states.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 5000)]
    states: usize,
    #[arg(long, default_value_t = 100)]
    rollouts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    truth: PathBuf,
    /// Weight-fitting dataset.
    #[arg(long)]
    data: PathBuf,
    /// Sparse-coding model; test and training observations are encoded against its dictionary.
    #[arg(long, conflicts_with = "tiles", required_unless_present = "tiles")]
    model: Option<PathBuf>,
    /// Tile coding as D-N (tilings-grid size).
    #[arg(long)]
    tiles: Option<TileSpec>,
    #[arg(long, default_value_t = 0)]
    tile_seed: u64,
    #[arg(long, default_value_t = 0.0)]
    beta_w: f64,
    /// Use only the first n samples of the dataset.
    #[arg(long)]
    n: Option<usize>,
    /// Also write the result as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key (repeatable), e.g. --set runs=10.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    env: Option<EnvKind>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "SCOPE_OUT_DIR")]
    out_dir: Option<PathBuf>,
}

impl ExperimentArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::new(EnvKind::MountainCar),
        };
        if let Some(env) = self.env {
            cfg.set("env", env.name())?;
        }
        for kv in &self.overrides {
            let (k, v) = kv.split_once('=').with_context(|| format!("override '{kv}' is not KEY=VALUE"))?;
            cfg.set(k, v)?;
        }
        if let Some(r) = self.runs {
            cfg.runs = r;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = &self.out_dir {
            cfg.out_dir = d.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "scope")]
    variant: String,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Comma-separated regulariser grid.
    #[arg(long, default_value = "1e-5,1e-4,1e-3,1e-2,1e-1,0")]
    beta_grid: String,
    #[command(flatten)]
    scope: ScopeArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DumpPhiArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn gen(a: &GenArgs) -> Result<()> {
    let policy = a.policy.unwrap_or(a.env.default_policy());
    let data = generate(a.env, policy, a.n, a.seed)?;
    data.save(&a.out)?;
    println!("wrote {} transitions ({} episodes) to {}", data.len(), data.episodes().len(), a.out.display());
    Ok(())
}

fn train(a: &TrainArgs) -> Result<()> {
    let data = Dataset::load(&a.data)?;
    let cfg = a.scope.config()?;
    let set = supervised_set(&data, &cfg)?;
    let (model, trace) = fit(&set, &cfg)?;
    model.save(&a.out_model)?;
    if let Some(path) = &a.out_trace {
        write_trace(path, &trace)?;
    }
    let last = trace.entries.last().expect("trace has an initial entry");
    println!(
        "iterations {} converged {} objective {:.6e} phi sparsity {:.4} ({:.2?})",
        last.iteration, trace.converged, last.objective, last.phi_sparsity, last.elapsed
    );
    Ok(())
}

fn truth(a: &TruthArgs) -> Result<()> {
    let data = Dataset::load(&a.data)?;
    let opts = RolloutOptions {
        n_rollouts: a.rollouts,
        seed: a.seed,
        ..RolloutOptions::default()
    };
    let gt = GroundTruth::from_dataset(&data, a.states, &opts)?;
    if gt.len() < a.states {
        eprintln!("only {} of {} requested states have complete returns", gt.len(), a.states);
    }
    gt.save(&a.out)?;
    println!("wrote {} states ({} truncated rollouts) to {}", gt.len(), gt.truncated, a.out.display());
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let truth = GroundTruth::load(&a.truth)?;
    let mut data = Dataset::load(&a.data)?;
    if data.env != truth.env {
        bail!("dataset is from {} but the truth file is from {}", data.env, truth.env);
    }
    if let Some(n) = a.n {
        data = data.prefix(n)?;
    }
    let (name, feat) = match (&a.model, a.tiles) {
        (Some(path), _) => ("model".to_string(), Featurizer::Codes(Box::new(ScopeModel::load(path)?))),
        (None, Some(spec)) => (format!("tc-{spec}"), Featurizer::tiles(truth.env, spec, a.tile_seed)?),
        (None, None) => bail!("either --model or --tiles is required"),
    };
    let targets = compute_targets(&data, LossMode::Msre, 1.0)?;
    let keep: Vec<usize> = (0..data.len()).filter(|&i| targets.valid[i]).collect();
    if keep.is_empty() {
        bail!("no transition in the dataset has a complete return");
    }
    let x = data.observation_matrix().select(ndarray::Axis(0), &keep);
    let y: Array1<f64> = keep.iter().map(|&i| targets.values[i]).collect();
    let w = fit_weights(&feat.features(&x)?, &y, a.beta_w)?;
    let pred = feat.features(&truth.normalized_states())?.mul_vec(&w.weights);
    let m = mapve(&pred, &truth.values)?;
    let e = msre(&pred, &truth.returns);
    println!(
        "{name}: mapve {:.6} test msre {:.6} train msre {:.6} ({} states, {} excluded)",
        m.value, e, w.train_msre, m.included, m.excluded
    );
    if let Some(out) = &a.out {
        let text = format!(
            "representation,samples,beta_w,mapve,test_msre,train_msre,included,excluded\n{name},{},{},{},{},{},{},{}\n",
            keep.len(),
            fmt(a.beta_w),
            fmt(m.value),
            fmt(e),
            fmt(w.train_msre),
            m.included,
            m.excluded
        );
        write_file(out, &text)?;
    }
    Ok(())
}

fn curve(a: &ExperimentArgs) -> Result<()> {
    let cfg = a.config()?;
    let table = learning_curve(&cfg)?;
    for (rep, run, msg) in &table.errors {
        eprintln!("run {run} of {rep} failed: {msg}");
    }
    for rep in &cfg.representations {
        if let Some(last) = table.selected(&rep.name()).last() {
            println!(
                "{:<22} beta {:<8} n {:<5} mapve {:.4} ± {:.4}  msre {:.3} ± {:.3}",
                rep.name(),
                last.beta,
                last.n_samples,
                last.mapve.mean,
                last.mapve.se,
                last.test_msre.mean,
                last.test_msre.se
            );
        }
    }
    println!("tables written to {}", cfg.out_dir.display());
    Ok(())
}

fn compare(a: &ExperimentArgs) -> Result<()> {
    let cfg = a.config()?;
    let rows = compare_representations(&cfg)?;
    for v in ScopeVariant::ALL {
        let sel: Vec<_> = rows.iter().filter(|r| r.variant == v).collect();
        if sel.is_empty() {
            continue;
        }
        let n = sel.len() as f64;
        let mean = |f: fn(&&scope_core::experiments::ComparisonRow) -> f64| sel.iter().map(f).sum::<f64>() / n;
        println!(
            "{:<20} beta {:<8} mapve {:.4}  test msre {:.3}  phi sparsity {:.3}",
            v.name(),
            sel[0].beta,
            mean(|r| r.mapve),
            mean(|r| r.test_msre),
            mean(|r| r.phi_sparsity)
        );
    }
    println!("tables written to {}", cfg.out_dir.display());
    Ok(())
}

fn cv(a: &CvArgs) -> Result<()> {
    let data = Dataset::load(&a.data)?;
    let Representation::Scope(variant) = a.variant.parse::<Representation>()? else {
        bail!("cross-validation applies to the sparse-coding variants only");
    };
    let grid: Vec<f64> = a
        .beta_grid
        .split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("invalid grid value '{s}'")))
        .collect::<Result<_>>()?;
    let res = cross_validate(&data, variant, &a.scope.config()?, &grid, a.folds)?;
    let mut text = format!("# chosen={}\nbeta,heldout_msre\n", fmt(res.chosen));
    for (b, s) in &res.scores {
        println!("beta {b:<8} held-out msre {s:.6}");
        text.push_str(&format!("{},{}\n", fmt(*b), fmt(*s)));
    }
    println!("chosen beta {}", res.chosen);
    if let Some(out) = &a.out {
        write_file(out, &text)?;
    }
    Ok(())
}

fn dump(a: &DumpPhiArgs) -> Result<()> {
    let model = ScopeModel::load(&a.model)?;
    dump_phi(&a.out, &model.phi)?;
    println!(
        "wrote {}x{} code matrix (sparsity {:.4}) to {}",
        model.phi.nrows(),
        model.phi.ncols(),
        model.phi_sparsity(),
        a.out.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Train(a) => train(a),
        Command::Truth(a) => truth(a),
        Command::Eval(a) => eval(a),
        Command::Curve(a) => curve(a),
        Command::Cv(a) => cv(a),
        Command::Compare(a) => compare(a),
        Command::DumpPhi(a) => dump(a),
    }
}
