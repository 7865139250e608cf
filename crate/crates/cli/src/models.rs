//! On-disk formats for fitted `g` models.
//!
//! Piecewise model (`g_hat.csv`), one row per cell:
//! `bin, left_0, right_0, ..., left_{k-1}, right_{k-1}, mu, n_used`.
//!
//! Boosted model (`model.csv`): a `# eta=<eta> k=<k>` line, then one row per
//! round: `round, j1, j2, j3, b1, ..., b6`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use lik_core::{gest, pvel, BoostedModel, DMatrix, LinearLearner, PartitionSpec, PiecewiseG};

use crate::{CliError, CliResult};

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_piecewise(g: &PiecewiseG) -> String {
    let mut out = String::new();
    for (j, (mu, used)) in g.mu.iter().zip(&g.n_used).enumerate() {
        write!(out, "{j}").unwrap();
        for (lo, hi) in g.partition.cell_bounds(j) {
            write!(out, ",{},{}", num(lo), num(hi)).unwrap();
        }
        writeln!(out, ",{},{used}", num(*mu)).unwrap();
    }
    out
}

fn bad(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Core(lik_core::Error::Parse(format!("{path}: {msg}")))
}

pub fn parse_piecewise(text: &str, path: &str) -> CliResult<PiecewiseG> {
    let rows: Vec<Vec<&str>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::trim).collect())
        .collect();
    let width = rows.first().map_or(0, Vec::len);
    if width < 5 || (width - 3) % 2 != 0 || rows.iter().any(|r| r.len() != width) {
        return Err(bad(path, "not a piecewise model table"));
    }
    let k = (width - 3) / 2;
    let f = |s: &str| s.parse::<f64>().map_err(|_| bad(path, format!("bad number '{s}'")));
    let mut axes = vec![Vec::new(); k];
    let mut mu = Vec::with_capacity(rows.len());
    let mut n_used = Vec::with_capacity(rows.len());
    for (j, r) in rows.iter().enumerate() {
        if r[0].parse::<usize>().ok() != Some(j) {
            return Err(bad(path, format!("row {} has bin index '{}'", j + 1, r[0])));
        }
        for (a, axis) in axes.iter_mut().enumerate() {
            axis.push(f(r[1 + 2 * a])?);
            axis.push(f(r[2 + 2 * a])?);
        }
        mu.push(f(r[width - 2])?);
        n_used.push(r[width - 1].parse().map_err(|_| bad(path, "bad n_used"))?);
    }
    for axis in &mut axes {
        axis.sort_by(f64::total_cmp);
        axis.dedup();
    }
    let partition = PartitionSpec::from_axes(axes)?;
    if partition.ell() != mu.len() {
        return Err(bad(path, "cell edges do not form a grid"));
    }
    let g = PiecewiseG { partition, mu, c_threshold: f64::NAN, n_used };
    // the rows must list the cells in grid order
    let reparsed = format_piecewise(&g);
    if reparsed.lines().count() != rows.len() {
        return Err(bad(path, "cell edges do not form a grid"));
    }
    for (j, r) in rows.iter().enumerate() {
        for (a, (lo, hi)) in g.partition.cell_bounds(j).into_iter().enumerate() {
            if f(r[1 + 2 * a])? != lo || f(r[2 + 2 * a])? != hi {
                return Err(bad(path, format!("row {} is out of grid order", j + 1)));
            }
        }
    }
    Ok(g)
}

pub fn format_boosted(m: &BoostedModel) -> String {
    let mut out = format!("# eta={} k={}\n", num(m.eta), m.k);
    for (round, l) in m.learners.iter().enumerate() {
        write!(out, "{},{},{},{}", round + 1, l.idx[0], l.idx[1], l.idx[2]).unwrap();
        for b in l.beta {
            write!(out, ",{}", num(b)).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_boosted(text: &str, path: &str) -> CliResult<BoostedModel> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let head = lines.next().ok_or_else(|| bad(path, "empty model file"))?;
    let head = head.strip_prefix('#').ok_or_else(|| bad(path, "missing '# eta=.. k=..' line"))?;
    let (mut eta, mut k) = (None, None);
    for tok in head.split_whitespace() {
        match tok.split_once('=') {
            Some(("eta", v)) => eta = v.parse::<f64>().ok(),
            Some(("k", v)) => k = v.parse::<usize>().ok(),
            _ => {}
        }
    }
    let (Some(eta), Some(k)) = (eta, k) else {
        return Err(bad(path, "header needs eta and k"));
    };
    let mut learners = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 10 || f[0].parse::<usize>().ok() != Some(i + 1) {
            return Err(bad(path, format!("bad learner row {}", i + 1)));
        }
        let mut idx = [0; 3];
        for (slot, s) in idx.iter_mut().zip(&f[1..4]) {
            *slot = s.parse().map_err(|_| bad(path, format!("bad index '{s}'")))?;
            if *slot >= k {
                return Err(bad(path, format!("feature index {slot} out of range for k={k}")));
            }
        }
        let mut beta = [0.0; 6];
        for (slot, s) in beta.iter_mut().zip(&f[4..]) {
            *slot = s.parse().map_err(|_| bad(path, format!("bad coefficient '{s}'")))?;
        }
        learners.push(LinearLearner { idx, beta });
    }
    if learners.is_empty() {
        return Err(bad(path, "model has no rounds"));
    }
    Ok(BoostedModel { learners, eta, k })
}

/// Either kind of fitted model.
#[derive(Debug, Clone)]
pub enum FittedG {
    Piecewise(PiecewiseG),
    Boosted(BoostedModel),
}

impl FittedG {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| lik_core::Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        let name = path.display().to_string();
        if text.trim_start().starts_with('#') {
            Ok(FittedG::Boosted(parse_boosted(&text, &name)?))
        } else {
            Ok(FittedG::Piecewise(parse_piecewise(&text, &name)?))
        }
    }

    pub fn to_text(&self) -> String {
        match self {
            FittedG::Piecewise(g) => format_piecewise(g),
            FittedG::Boosted(m) => format_boosted(m),
        }
    }

    pub fn predict(&self, features: &[DMatrix<f64>], k_hat: &DMatrix<f64>) -> CliResult<DMatrix<f64>> {
        Ok(match self {
            FittedG::Piecewise(g) => gest::predict_piecewise(g, features, k_hat)?,
            FittedG::Boosted(m) => pvel::predict(m, features, k_hat)?,
        })
    }
}
