use std::path::Path;

use ndarray::{Array1, Array2};

use super::{sparsity, FitTrace, L1Power, ScopeConfig, ScopeModel};
use crate::error::{Error, Result};
use crate::textio::{fmt_f64, push_matrix, read_to_string, write_atomic, Lines};

const MODEL_MAGIC: &str = "# scope-model";

fn config_lines(cfg: &ScopeConfig) -> Vec<(&'static str, String)> {
    vec![
        ("k", cfg.k.to_string()),
        ("beta_b", fmt_f64(cfg.beta_b)),
        ("beta_w", fmt_f64(cfg.beta_w)),
        ("beta_phi", fmt_f64(cfg.beta_phi)),
        ("power", cfg.power.as_u8().to_string()),
        ("loss", cfg.loss.to_string()),
        ("gamma", fmt_f64(cfg.gamma)),
        ("max_outer_iters", cfg.max_outer_iters.to_string()),
        ("inner_iters", cfg.inner_iters.to_string()),
        ("tolerance", fmt_f64(cfg.tolerance)),
        ("seed", cfg.seed.to_string()),
        ("nonneg", cfg.nonneg.to_string()),
        ("supervised", cfg.supervised.to_string()),
        ("reconstruct", cfg.reconstruct.to_string()),
    ]
}

fn set_config_key(cfg: &mut ScopeConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    fn p<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
        v.parse().map_err(|_| format!("invalid value '{v}'"))
    }
    match key {
        "k" => cfg.k = p(value)?,
        "beta_b" => cfg.beta_b = p(value)?,
        "beta_w" => cfg.beta_w = p(value)?,
        "beta_phi" => cfg.beta_phi = p(value)?,
        "power" => cfg.power = L1Power::from_u8(p(value)?).map_err(|e| e.to_string())?,
        "loss" => cfg.loss = value.parse().map_err(|e: Error| e.to_string())?,
        "gamma" => cfg.gamma = p(value)?,
        "max_outer_iters" => cfg.max_outer_iters = p(value)?,
        "inner_iters" => cfg.inner_iters = p(value)?,
        "tolerance" => cfg.tolerance = p(value)?,
        "seed" => cfg.seed = p(value)?,
        "nonneg" => cfg.nonneg = p(value)?,
        "supervised" => cfg.supervised = p(value)?,
        "reconstruct" => cfg.reconstruct = p(value)?,
        _ => return Err(format!("unknown key '{key}'")),
    }
    Ok(())
}

fn block_header(lines: &mut Lines<'_>, name: &str) -> Result<(usize, usize)> {
    let (no, line) = lines.next_line(name)?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(&format!("[{name}]")[..]) {
        return Err(Error::parse(lines.path, no, format!("expected [{name}] block, found '{line}'")));
    }
    let mut dim = || -> Result<usize> {
        parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(lines.path, no, format!("bad dimensions in [{name}] header")))
    };
    Ok((dim()?, dim()?))
}

impl ScopeModel {
    pub fn to_text(&self) -> String {
        let mut out = String::from(MODEL_MAGIC);
        out.push('\n');
        for (k, v) in config_lines(&self.config) {
            out.push_str(&format!("# {k}={v}\n"));
        }
        let (k, d) = self.b.dim();
        out.push_str(&format!("[B] {k} {d}\n"));
        push_matrix(&mut out, &self.b);
        out.push_str(&format!("[w] {} 1\n", self.w.len()));
        for v in &self.w {
            out.push_str(&fmt_f64(*v));
            out.push('\n');
        }
        out.push_str(&format!("[Phi] {} {}\n", self.phi.nrows(), self.phi.ncols()));
        push_matrix(&mut out, &self.phi);
        out
    }

    pub fn from_text(text: &str, path: &Path) -> Result<ScopeModel> {
        let mut lines = Lines::new(text, path);
        let (no, first) = lines.next_line("model header")?;
        if first != MODEL_MAGIC {
            return Err(Error::parse(path, no, "not a model file"));
        }
        let mut config = ScopeConfig::default();
        while let Some(&(no, line)) = lines.peek() {
            let Some(kv) = line.strip_prefix('#') else { break };
            lines.next();
            let (key, value) = kv
                .trim()
                .split_once('=')
                .ok_or_else(|| Error::parse(path, no, "expected key=value"))?;
            set_config_key(&mut config, key.trim(), value.trim()).map_err(|m| Error::parse(path, no, m))?;
        }
        let (k, d) = block_header(&mut lines, "B")?;
        let b = lines.matrix(k, d)?;
        let (kw, one) = block_header(&mut lines, "w")?;
        if kw != k || one != 1 {
            return Err(Error::Shape(format!("w block is {kw}x{one}, expected {k}x1")));
        }
        let w: Array1<f64> = lines.matrix(k, 1)?.column(0).to_owned();
        let (rows, kp) = block_header(&mut lines, "Phi")?;
        if kp != k {
            return Err(Error::Shape(format!("Phi has {kp} columns, expected {k}")));
        }
        let phi = lines.matrix(rows, k)?;
        if config.k != k {
            return Err(Error::Shape(format!("header says k={} but B has {k} rows", config.k)));
        }
        Ok(ScopeModel { b, phi, w, config })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<ScopeModel> {
        ScopeModel::from_text(&read_to_string(path)?, path)
    }
}

/// Write `Phi` as CSV with a `# rows= cols= sparsity=` header line.
pub fn dump_phi(path: &Path, phi: &Array2<f64>) -> Result<()> {
    let mut out = format!(
        "# rows={} cols={} sparsity={}\n",
        phi.nrows(),
        phi.ncols(),
        fmt_f64(sparsity(phi))
    );
    push_matrix(&mut out, phi);
    write_atomic(path, &out)
}

pub fn read_phi(path: &Path) -> Result<Array2<f64>> {
    let text = read_to_string(path)?;
    let mut lines = Lines::new(&text, path);
    let (no, header) = lines.next_line("header")?;
    let mut rows = None;
    let mut cols = None;
    for field in header.trim_start_matches('#').split_whitespace() {
        match field.split_once('=') {
            Some(("rows", v)) => rows = v.parse::<usize>().ok(),
            Some(("cols", v)) => cols = v.parse::<usize>().ok(),
            _ => {}
        }
    }
    let (Some(rows), Some(cols)) = (rows, cols) else {
        return Err(Error::parse(path, no, "missing rows=/cols= in header"));
    };
    let m = lines.matrix(rows, cols)?;
    if let Some((no, _)) = lines.next() {
        return Err(Error::parse(path, no, "trailing data after matrix"));
    }
    Ok(m)
}

/// Per-iteration objective terms as CSV. Wall time is left out so that
/// repeated runs produce identical files.
pub fn write_trace(path: &Path, trace: &FitTrace) -> Result<()> {
    let mut out = String::from("iteration,objective,supervised,reconstruction,reg_b,reg_w,reg_phi,phi_sparsity\n");
    for e in &trace.entries {
        let b = &e.breakdown;
        let fields = [e.objective, b.supervised, b.reconstruction, b.reg_b, b.reg_w, b.reg_phi, e.phi_sparsity];
        out.push_str(&e.iteration.to_string());
        for v in fields {
            out.push(',');
            out.push_str(&fmt_f64(v));
        }
        out.push('\n');
    }
    write_atomic(path, &out)
}
