use ndarray::Array1;

use super::config::ExperimentConfig;
use super::curve::{cached_test_set, representation_beta, transition_observations};
use super::features::{Representation, ScopeVariant};
use super::stats::{mean_and_se, MeanSe};
use super::{representation_data, weight_data};
use crate::error::{Error, Result};
use crate::scope::{dump_phi, fit, supervised_set};
use crate::seeds::named_seed;
use crate::textio::{fmt_f64, parse_f64, read_to_string, write_atomic};
use crate::trajectory::{compute_targets, LossMode};
use crate::value_eval::{fit_weights, mapve, msre, Features};

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub variant: ScopeVariant,
    pub run: usize,
    pub beta: f64,
    pub mapve: f64,
    pub test_msre: f64,
    pub phi_sparsity: f64,
    pub objective: f64,
}

impl ComparisonRow {
    fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}\n",
            self.variant.name(),
            self.run,
            fmt_f64(self.beta),
            fmt_f64(self.mapve),
            fmt_f64(self.test_msre),
            fmt_f64(self.phi_sparsity),
            fmt_f64(self.objective)
        )
    }
}

const HEADER: &str = "variant,run,beta,mapve,test_msre,phi_sparsity,objective";

fn parse_line(line: &str, variant: ScopeVariant, path: &std::path::Path) -> Result<ComparisonRow> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 7 {
        return Err(Error::parse(path, 2, "expected 7 fields"));
    }
    Ok(ComparisonRow {
        variant,
        run: f[1].parse().map_err(|_| Error::parse(path, 2, "invalid run"))?,
        beta: parse_f64(f[2], path, 2)?,
        mapve: parse_f64(f[3], path, 2)?,
        test_msre: parse_f64(f[4], path, 2)?,
        phi_sparsity: parse_f64(f[5], path, 2)?,
        objective: parse_f64(f[6], path, 2)?,
    })
}

/// Per-variant means over runs.
pub fn summarize(rows: &[ComparisonRow]) -> Vec<(ScopeVariant, f64, MeanSe, MeanSe, MeanSe)> {
    ScopeVariant::ALL
        .into_iter()
        .filter_map(|v| {
            let sel: Vec<&ComparisonRow> = rows.iter().filter(|r| r.variant == v).collect();
            let first = sel.first()?;
            let col = |f: fn(&ComparisonRow) -> f64| mean_and_se(&sel.iter().map(|r| f(r)).collect::<Vec<_>>());
            Some((v, first.beta, col(|r| r.mapve), col(|r| r.test_msre), col(|r| r.phi_sparsity)))
        })
        .collect()
}

/// The four sparse-coding variants on identical data. Each run is a full
/// replication: its own representation data, initialisation and weight data.
/// `beta_B = beta_w` per variant comes from the config or from
/// cross-validation on the first run's representation data.
pub fn compare_representations(cfg: &ExperimentConfig) -> Result<Vec<ComparisonRow>> {
    compare_variants(cfg, &ScopeVariant::ALL)
}

/// [`compare_representations`] restricted to some of the variants.
pub fn compare_variants(cfg: &ExperimentConfig, variants: &[ScopeVariant]) -> Result<Vec<ComparisonRow>> {
    cfg.validate()?;
    if variants.is_empty() {
        return Err(Error::InvalidConfig("no variants to compare".into()));
    }
    let truth = cached_test_set(cfg)?;
    let test_x = truth.normalized_states();
    let mut rows = Vec::new();
    for &variant in variants {
        let rep = Representation::Scope(variant);
        let beta = match cfg.beta {
            Some(b) => b,
            None => representation_beta(cfg, &rep, &representation_data(cfg, 0)?)?,
        };
        for run in 0..cfg.runs {
            let path = cfg.out_dir.join("compare").join(format!("{}-run-{run}.csv", variant.name()));
            if path.exists() {
                let text = read_to_string(&path)?;
                let line = text.lines().nth(1).ok_or_else(|| Error::parse(&path, 2, "missing row"))?;
                rows.push(parse_line(line, variant, &path)?);
                continue;
            }
            let mut scope = variant.config(&cfg.scope, beta);
            scope.seed = named_seed(cfg.seed, &rep.name(), run as u64);
            let repr = crate::trajectory::generate(
                cfg.env,
                cfg.policy,
                cfg.repr_samples,
                named_seed(cfg.seed, "repr", run as u64),
            )?;
            let set = supervised_set(&repr, &scope)?;
            let (model, trace) = fit(&set, &scope)?;
            if run == 0 {
                dump_phi(&cfg.out_dir.join("phi").join(format!("{}.csv", variant.name())), &model.phi)?;
            }

            let data = weight_data(cfg, run)?;
            let targets = compute_targets(&data, LossMode::Msre, 1.0)?;
            let keep: Vec<usize> = (0..data.len()).filter(|&i| targets.valid[i]).collect();
            let y: Array1<f64> = keep.iter().map(|&i| targets.values[i]).collect();
            let x = transition_observations(&data).select(ndarray::Axis(0), &keep);
            let w = fit_weights(&model.encode(&x)?, &y, beta)?;
            let pred = model.encode(&test_x)?.mul_vec(&w.weights);
            let row = ComparisonRow {
                variant,
                run,
                beta,
                mapve: mapve(&pred, &truth.values)?.value,
                test_msre: msre(&pred, &truth.returns),
                phi_sparsity: model.phi_sparsity(),
                objective: trace.final_objective(),
            };
            write_atomic(&path, &format!("{HEADER}\n{}", row.to_line()))?;
            rows.push(row);
        }
    }
    let mut all = format!("{HEADER}\n");
    rows.iter().for_each(|r| all.push_str(&r.to_line()));
    write_atomic(&cfg.out_dir.join("compare.csv"), &all)?;
    let mut summary = String::from("variant,beta,runs,mapve_mean,mapve_se,msre_mean,msre_se,phi_sparsity_mean\n");
    for (v, beta, m, e, s) in summarize(&rows) {
        summary.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            v.name(),
            fmt_f64(beta),
            m.n,
            fmt_f64(m.mean),
            fmt_f64(m.se),
            fmt_f64(e.mean),
            fmt_f64(e.se),
            fmt_f64(s.mean)
        ));
    }
    write_atomic(&cfg.out_dir.join("compare_summary.csv"), &summary)?;
    Ok(rows)
}
