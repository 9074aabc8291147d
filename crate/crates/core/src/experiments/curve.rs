use std::collections::HashMap;
use std::path::{Path, PathBuf};

use ndarray::{s, Array1, Array2};

use super::config::ExperimentConfig;
use super::cv::cross_validate;
use super::features::{Featurizer, Representation};
use super::stats::{mean_and_se, MeanSe};
use super::{representation_data, test_set, weight_data};
use crate::error::{Error, Result};
use crate::scope::{fit, supervised_set, ScopeModel};
use crate::seeds::named_seed;
use crate::textio::{fmt_f64, parse_f64, read_to_string, write_atomic};
use crate::trajectory::{compute_targets, Dataset, LossMode};
use crate::value_eval::{fit_weights_from, mapve, msre, FitOptions, Features, GroundTruth};

/// `spacing, 2 spacing, ..., max`.
pub fn checkpoints(max: usize, spacing: usize) -> Vec<usize> {
    if spacing == 0 {
        return Vec::new();
    }
    (1..=max / spacing).map(|i| i * spacing).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub representation: String,
    pub beta: f64,
    pub run: usize,
    pub n_samples: usize,
    pub mapve: f64,
    pub test_msre: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub representation: String,
    pub beta: f64,
    /// Whether this beta had the lowest cumulative error for the representation.
    pub selected: bool,
    pub n_samples: usize,
    pub mapve: MeanSe,
    pub test_msre: MeanSe,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CurveTable {
    pub rows: Vec<CurveRow>,
    pub summary: Vec<SummaryRow>,
    /// `(representation, run, message)` for jobs that failed.
    pub errors: Vec<(String, usize, String)>,
}

impl CurveTable {
    /// Summary rows for the selected beta of one representation.
    pub fn selected(&self, representation: &str) -> Vec<&SummaryRow> {
        self.summary
            .iter()
            .filter(|r| r.selected && r.representation == representation)
            .collect()
    }
}

const CURVE_HEADER: &str = "representation,beta,run,n_samples,mapve,test_msre";

fn row_line(r: &CurveRow) -> String {
    format!(
        "{},{},{},{},{},{}\n",
        r.representation,
        fmt_f64(r.beta),
        r.run,
        r.n_samples,
        fmt_f64(r.mapve),
        fmt_f64(r.test_msre)
    )
}

fn parse_rows(text: &str, path: &Path) -> Result<Vec<CurveRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let no = i + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(Error::parse(path, no, "expected 6 fields"));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| Error::parse(path, no, format!("invalid integer '{s}'")));
        rows.push(CurveRow {
            representation: f[0].to_string(),
            beta: parse_f64(f[1], path, no)?,
            run: int(f[2])?,
            n_samples: int(f[3])?,
            mapve: parse_f64(f[4], path, no)?,
            test_msre: parse_f64(f[5], path, no)?,
        });
    }
    Ok(rows)
}

/// Ground truth cached in the output directory, rebuilt if it does not match.
pub(crate) fn cached_test_set(cfg: &ExperimentConfig) -> Result<GroundTruth> {
    let path = cfg.out_dir.join("truth.csv");
    if path.exists() {
        let gt = GroundTruth::load(&path)?;
        if gt.env == cfg.env
            && gt.policy == cfg.policy
            && gt.n_rollouts == cfg.rollouts
            && gt.seed == named_seed(cfg.seed, "rollouts", 0)
            && gt.len() == cfg.test_states
        {
            return Ok(gt);
        }
    }
    let gt = test_set(cfg)?;
    gt.save(&path)?;
    Ok(gt)
}

/// `beta_B = beta_w` for a learned representation: fixed in the config, or
/// chosen by cross-validation on the representation data (cached on disk).
pub(crate) fn representation_beta(cfg: &ExperimentConfig, rep: &Representation, data: &Dataset) -> Result<f64> {
    let Representation::Scope(variant) = rep else {
        return Ok(0.0);
    };
    if let Some(b) = cfg.beta {
        return Ok(b);
    }
    let path = cfg.out_dir.join("cv").join(format!("{}.csv", rep.name()));
    if path.exists() {
        let text = read_to_string(&path)?;
        if let Some((no, line)) = text.lines().enumerate().find(|(_, l)| l.starts_with("# chosen=")) {
            return parse_f64(&line["# chosen=".len()..], &path, no + 1);
        }
    }
    let res = cross_validate(data, *variant, &cfg.scope, &cfg.beta_grid, cfg.folds)?;
    let mut out = format!("# chosen={}\nbeta,heldout_msre\n", fmt_f64(res.chosen));
    for (b, s) in &res.scores {
        out.push_str(&format!("{},{}\n", fmt_f64(*b), fmt_f64(*s)));
    }
    write_atomic(&path, &out)?;
    Ok(res.chosen)
}

/// Learn (or reload) the representation used for `run`.
pub(crate) fn learned_model(cfg: &ExperimentConfig, rep: &Representation, run: usize, beta: f64) -> Result<ScopeModel> {
    let Representation::Scope(variant) = rep else {
        return Err(Error::InvalidConfig(format!("{rep} is not learned")));
    };
    let idx = if cfg.resample_representation { run } else { 0 };
    let path = model_path(&cfg.out_dir, rep, idx);
    let mut scope = variant.config(&cfg.scope, beta);
    scope.seed = named_seed(cfg.seed, &rep.name(), idx as u64);
    if path.exists() {
        let model = ScopeModel::load(&path)?;
        if model.config == scope {
            return Ok(model);
        }
    }
    let data = representation_data(cfg, idx)?;
    let set = supervised_set(&data, &scope)?;
    let (model, _) = fit(&set, &scope)?;
    model.save(&path)?;
    Ok(model)
}

fn model_path(out: &Path, rep: &Representation, idx: usize) -> PathBuf {
    out.join("models").join(format!("{}-{idx}.model", rep.name()))
}

pub(crate) fn featurizer(cfg: &ExperimentConfig, rep: &Representation, run: usize, beta: f64) -> Result<Featurizer> {
    match rep {
        Representation::Scope(_) => Ok(Featurizer::Codes(Box::new(learned_model(cfg, rep, run, beta)?))),
        Representation::Tiles(spec) => Featurizer::tiles(cfg.env, *spec, named_seed(cfg.seed, &rep.name(), 0)),
    }
}

/// Normalised observations of a dataset's transitions (one row each).
pub(crate) fn transition_observations(data: &Dataset) -> Array2<f64> {
    let x = data.observation_matrix();
    x.slice(s![..data.len(), ..]).to_owned()
}

/// Errors on the test set after fitting weights to each prefix of the data.
#[allow(clippy::too_many_arguments)]
fn run_job(
    cfg: &ExperimentConfig,
    rep: &Representation,
    run: usize,
    betas: &[f64],
    feat: &Featurizer,
    data: &Dataset,
    truth: &GroundTruth,
    test_x: &Array2<f64>,
) -> Result<Vec<CurveRow>> {
    let train = feat.features(&transition_observations(data))?;
    let test = feat.features(test_x)?;
    let mut rows = Vec::new();
    let opts = FitOptions::default();
    for &beta in betas {
        let mut w: Option<Array1<f64>> = None;
        for n in cfg.checkpoints() {
            let targets = compute_targets(&data.prefix(n)?, LossMode::Msre, 1.0)?;
            let keep: Vec<usize> = (0..n).filter(|&i| targets.valid[i]).collect();
            let y: Array1<f64> = keep.iter().map(|&i| targets.values[i]).collect();
            let fitted = fit_weights_from(&train.select_rows(&keep), &y, beta, w.as_ref(), &opts)?;
            let pred = test.mul_vec(&fitted.weights);
            rows.push(CurveRow {
                representation: rep.name(),
                beta,
                run,
                n_samples: n,
                mapve: mapve(&pred, &truth.values)?.value,
                test_msre: msre(&pred, &truth.returns),
            });
            w = Some(fitted.weights);
        }
    }
    Ok(rows)
}

/// Learning curves for every configured representation: for each run and
/// checkpoint `n`, weights are fitted on the first `n` samples and scored on
/// the shared test set. Finished `(representation, run)` jobs are stored
/// under `out_dir/jobs` and skipped when the harness is re-run.
pub fn learning_curve(cfg: &ExperimentConfig) -> Result<CurveTable> {
    cfg.validate()?;
    let truth = cached_test_set(cfg)?;
    let test_x = truth.normalized_states();
    let repr_data = if cfg.representations.iter().any(Representation::is_learned) && cfg.beta.is_none() {
        Some(representation_data(cfg, 0)?)
    } else {
        None
    };

    // Weight regularisers tried for each representation.
    let mut betas: HashMap<String, Vec<f64>> = HashMap::new();
    for rep in &cfg.representations {
        let list = match rep {
            Representation::Scope(_) => match (&repr_data, cfg.beta) {
                (_, Some(b)) => vec![b],
                (Some(d), None) => vec![representation_beta(cfg, rep, d)?],
                (None, None) => unreachable!("representation data prepared above"),
            },
            Representation::Tiles(_) => cfg.beta_grid.clone(),
        };
        betas.insert(rep.name(), list);
    }

    let mut table = CurveTable::default();
    let mut shared: HashMap<String, Featurizer> = HashMap::new();
    for run in 0..cfg.runs {
        let mut data: Option<Dataset> = None;
        for rep in &cfg.representations {
            let name = rep.name();
            let path = cfg.out_dir.join("jobs").join(&name).join(format!("run-{run}.csv"));
            if path.exists() {
                table.rows.extend(parse_rows(&read_to_string(&path)?, &path)?);
                continue;
            }
            let rep_betas = &betas[&name];
            let result = (|| -> Result<Vec<CurveRow>> {
                if data.is_none() {
                    data = Some(weight_data(cfg, run)?);
                }
                let feat = if cfg.resample_representation && rep.is_learned() {
                    featurizer(cfg, rep, run, rep_betas[0])?
                } else {
                    if !shared.contains_key(&name) {
                        shared.insert(name.clone(), featurizer(cfg, rep, run, rep_betas[0])?);
                    }
                    shared[&name].clone()
                };
                run_job(cfg, rep, run, rep_betas, &feat, data.as_ref().unwrap(), &truth, &test_x)
            })();
            match result {
                Ok(rows) => {
                    let mut text = format!("{CURVE_HEADER}\n");
                    rows.iter().for_each(|r| text.push_str(&row_line(r)));
                    write_atomic(&path, &text)?;
                    table.rows.extend(rows);
                }
                Err(e) => table.errors.push((name, run, e.to_string())),
            }
        }
    }

    // Stable order: representation (config order), beta, run, checkpoint.
    let order: HashMap<String, usize> = cfg.representations.iter().enumerate().map(|(i, r)| (r.name(), i)).collect();
    let beta_pos = |rep: &str, b: f64| betas[rep].iter().position(|&x| x.to_bits() == b.to_bits()).unwrap_or(usize::MAX);
    table.rows.retain(|r| order.contains_key(&r.representation));
    table.rows.sort_by_key(|r| (order[&r.representation], beta_pos(&r.representation, r.beta), r.run, r.n_samples));
    table.summary = summarize(cfg, &table.rows, &betas);
    write_outputs(cfg, &table)?;
    Ok(table)
}

fn summarize(cfg: &ExperimentConfig, rows: &[CurveRow], betas: &HashMap<String, Vec<f64>>) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for rep in &cfg.representations {
        let name = rep.name();
        let mut per_beta = Vec::new();
        for &beta in &betas[&name] {
            let mut summ = Vec::new();
            for n in cfg.checkpoints() {
                let cell: Vec<&CurveRow> = rows
                    .iter()
                    .filter(|r| r.representation == name && r.beta.to_bits() == beta.to_bits() && r.n_samples == n)
                    .collect();
                if cell.is_empty() {
                    continue;
                }
                let m: Vec<f64> = cell.iter().map(|r| r.mapve).collect();
                let e: Vec<f64> = cell.iter().map(|r| r.test_msre).collect();
                summ.push(SummaryRow {
                    representation: name.clone(),
                    beta,
                    selected: false,
                    n_samples: n,
                    mapve: mean_and_se(&m),
                    test_msre: mean_and_se(&e),
                });
            }
            let cumulative: f64 = summ.iter().map(|s| s.mapve.mean).sum();
            per_beta.push((beta, cumulative, summ));
        }
        // Lowest cumulative error; ties go to the larger beta.
        let best = per_beta
            .iter()
            .filter(|(_, c, s)| !s.is_empty() && c.is_finite())
            .fold(None::<(f64, f64)>, |acc, &(b, c, _)| match acc {
                None => Some((b, c)),
                Some((bb, bc)) => {
                    let tied = (c - bc).abs() <= 1e-12 * c.abs().max(bc.abs());
                    if (c < bc && !tied) || (tied && b > bb) {
                        Some((b, c))
                    } else {
                        Some((bb, bc))
                    }
                }
            });
        for (beta, _, mut summ) in per_beta {
            let sel = best.is_some_and(|(b, _)| b.to_bits() == beta.to_bits());
            summ.iter_mut().for_each(|s| s.selected = sel);
            out.extend(summ);
        }
    }
    out
}

fn write_outputs(cfg: &ExperimentConfig, table: &CurveTable) -> Result<()> {
    let mut curve = format!("{CURVE_HEADER}\n");
    table.rows.iter().for_each(|r| curve.push_str(&row_line(r)));
    write_atomic(&cfg.out_dir.join("curve.csv"), &curve)?;

    let mut summary = String::from("representation,beta,selected,n_samples,runs,mapve_mean,mapve_se,msre_mean,msre_se\n");
    for s in &table.summary {
        summary.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            s.representation,
            fmt_f64(s.beta),
            s.selected,
            s.n_samples,
            s.mapve.n,
            fmt_f64(s.mapve.mean),
            fmt_f64(s.mapve.se),
            fmt_f64(s.test_msre.mean),
            fmt_f64(s.test_msre.se)
        ));
    }
    write_atomic(&cfg.out_dir.join("summary.csv"), &summary)?;

    let errors_path = cfg.out_dir.join("errors.csv");
    if table.errors.is_empty() {
        if errors_path.exists() {
            std::fs::remove_file(&errors_path).map_err(|e| Error::io(&errors_path, e))?;
        }
    } else {
        let mut text = String::from("representation,run,message\n");
        for (rep, run, msg) in &table.errors {
            text.push_str(&format!("{rep},{run},\"{}\"\n", msg.replace('"', "'")));
        }
        write_atomic(&errors_path, &text)?;
    }
    Ok(())
}
