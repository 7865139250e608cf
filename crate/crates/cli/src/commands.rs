//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use lik_core::evalkit::{self, EvalConfig, EvalReport, ForecastSet};
use lik_core::io::{self, PanelMeta};
use lik_core::kestim::{self, GramEstimate, HintSet};
use lik_core::{gest, pvel, synth, DMatrix, LearnerForm, PanelData};

use crate::config::{DeltaChoice, ExperimentConfig, NUMERIC_KEYS};
use crate::models::FittedG;
use crate::{CliError, CliResult};

/// Draws per partition cell when measuring the true cell means in `sweep`.
const CELL_MEAN_DRAWS: usize = 20_000;
/// How many times `fit-g --method nparam` halves `c` when cells report no signal.
const MAX_C_HALVINGS: usize = 4;

#[derive(Parser, Debug)]
#[command(name = "lik", version, about = "Additive influence model: estimate K, learn g, evaluate forecasts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw a synthetic panel (train rows, plus test/ when n_test > 0).
    Generate {
        #[command(flatten)]
        opts: Overrides,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate K from Y.csv; writes K_hat.csv and spectrum.csv.
    EstimateK {
        #[command(flatten)]
        opts: Overrides,
        #[arg(long)]
        panel: PathBuf,
        /// Output directory (defaults to the panel directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit g on a panel given K_hat; writes the model and an in-sample report.
    FitG {
        #[command(flatten)]
        opts: Overrides,
        #[arg(long)]
        panel: PathBuf,
        /// Path to a d x d matrix, or `identity` for the univariate mode.
        #[arg(long = "k-hat")]
        k_hat: String,
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        out: PathBuf,
    },
    /// Forecast Y for a panel's features with a fitted model.
    Predict {
        #[command(flatten)]
        opts: Overrides,
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "k-hat")]
        k_hat: String,
        /// Output matrix file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a forecast; writes report.csv and pnl.csv.
    Evaluate {
        #[command(flatten)]
        opts: Overrides,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        yhat: PathBuf,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Blend forecasts weighted by their t-statistics.
    Consolidate {
        #[arg(long = "forecast", required = true)]
        forecasts: Vec<PathBuf>,
        /// One t-statistic per forecast.
        #[arg(long = "tstat", allow_negative_numbers = true)]
        tstats: Vec<f64>,
        /// One report.csv per forecast; its t_stat row is used.
        #[arg(long = "report")]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rerun one stage over values of a config key; writes sweep.csv.
    Sweep {
        #[command(flatten)]
        opts: Overrides,
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
        #[arg(long, value_enum, default_value = "kestim")]
        stage: Stage,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Nparam,
    Pvel,
    Linear,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    Kestim,
    Gest,
    Pvel,
}

/// Config file plus flag overrides; flags win.
#[derive(Args, Debug, Clone, Default)]
pub struct Overrides {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub ell: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub rounds: Option<usize>,
    /// A positive number or `auto`.
    #[arg(long)]
    pub delta: Option<String>,
    #[arg(long = "nw-lag")]
    pub nw_lag: Option<usize>,
    #[arg(long)]
    pub quantile: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Any other config key, as KEY=VALUE (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl Overrides {
    pub fn resolve(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        let flags: [(&str, Option<String>); 9] = [
            ("d", self.d.map(|v| v.to_string())),
            ("n_train", self.n.map(|v| v.to_string())),
            ("ell", self.ell.map(|v| v.to_string())),
            ("eta", self.eta.map(|v| v.to_string())),
            ("rounds", self.rounds.map(|v| v.to_string())),
            ("delta", self.delta.clone()),
            ("nw_lag", self.nw_lag.map(|v| v.to_string())),
            ("quantile", self.quantile.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate { opts, out } => cmd_generate(&opts.resolve()?, &out),
        Command::EstimateK { opts, panel, out } => {
            let out = out.unwrap_or_else(|| panel.clone());
            cmd_estimate_k(&opts.resolve()?, &panel, &out).map(|_| ())
        }
        Command::FitG { opts, panel, k_hat, method, out } => {
            cmd_fit_g(&opts.resolve()?, &panel, &k_hat, method, &out).map(|_| ())
        }
        Command::Predict { opts, panel, model, k_hat, out } => {
            opts.resolve()?;
            cmd_predict(&panel, &model, &k_hat, &out)
        }
        Command::Evaluate { opts, y, yhat, weights, out } => {
            let cfg = opts.resolve()?;
            let weights = weights.or_else(|| cfg.weights.clone());
            cmd_evaluate(&cfg, &y, &yhat, weights.as_deref(), &out).map(|_| ())
        }
        Command::Consolidate { forecasts, tstats, reports, out } => {
            cmd_consolidate(&forecasts, &tstats, &reports, &out)
        }
        Command::Sweep { opts, axis, values, stage, out } => {
            cmd_sweep(&opts.resolve()?, &axis, &values, stage, &out)
        }
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text).map_err(|e| {
        CliError::from(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn panel_meta(cfg: &ExperimentConfig, n: usize) -> PanelMeta {
    PanelMeta {
        d: cfg.d,
        n,
        k: cfg.k,
        r: cfg.r,
        kernel: cfg.kernel.to_string(),
        sigma_xi: cfg.sigma_xi,
        seed: cfg.seed,
    }
}

/// Train rows `[0, n_train)` and test rows `[n_train, n_train + n_test)` of one stream.
pub fn generate_split(cfg: &ExperimentConfig) -> CliResult<(lik_core::LatentModel, PanelData, Option<PanelData>)> {
    let model = cfg.latent_model()?;
    let train = synth::generate_rows(&model, 0, cfg.n_train, cfg.k, cfg.seed)?;
    let test = if cfg.n_test > 0 {
        Some(synth::generate_rows(&model, cfg.n_train, cfg.n_test, cfg.k, cfg.seed)?)
    } else {
        None
    };
    Ok((model, train, test))
}

pub fn cmd_generate(cfg: &ExperimentConfig, out: &Path) -> CliResult<()> {
    let (model, train, test) = generate_split(cfg)?;
    io::write_panel(out, &train, Some(model.gram()), Some(&panel_meta(cfg, cfg.n_train)))?;
    if let Some(test) = test {
        io::write_panel(&out.join("test"), &test, Some(model.gram()), Some(&panel_meta(cfg, cfg.n_test)))?;
    }
    println!("wrote panel d={} n_train={} n_test={} k={} to {}", cfg.d, cfg.n_train, cfg.n_test, cfg.k, out.display());
    Ok(())
}

pub fn estimate_gram(cfg: &ExperimentConfig, y: &DMatrix<f64>) -> CliResult<GramEstimate> {
    if !cfg.hints.is_empty() {
        let hints = cfg.hints.iter().map(|p| io::read_matrix(p)).collect::<lik_core::Result<Vec<_>>>()?;
        let hs = HintSet::new(hints, cfg.betas.clone(), cfg.hint_exp)?;
        return Ok(kestim::hint_consolidate(&hs)?);
    }
    Ok(match cfg.delta {
        DeltaChoice::Auto => kestim::estimate_k_auto(y)?,
        DeltaChoice::Fixed(delta) => kestim::estimate_k_dd(y, delta)?,
    })
}

pub fn cmd_estimate_k(cfg: &ExperimentConfig, panel: &Path, out: &Path) -> CliResult<GramEstimate> {
    let y = io::read_matrix(&panel.join("Y.csv"))?;
    let est = estimate_gram(cfg, &y)?;
    fs::create_dir_all(out)?;
    io::write_matrix(&out.join("K_hat.csv"), &est.k_hat)?;
    let mut spec = String::new();
    for (i, v) in est.spectrum_used.eigenvalues.iter().enumerate() {
        writeln!(spec, "{},{}", i + 1, num(*v)).unwrap();
    }
    write_text(&out.join("spectrum.csv"), &spec)?;
    println!("rank_star={} delta={}", est.rank_star, num(est.delta));
    Ok(est)
}

pub fn load_k_hat(spec: &str, d: usize) -> CliResult<DMatrix<f64>> {
    if spec == "identity" {
        return Ok(DMatrix::identity(d, d));
    }
    let k = io::read_matrix(Path::new(spec))?;
    if k.shape() != (d, d) {
        return Err(lik_core::Error::InvalidDimension(format!(
            "K_hat {spec} is {:?}, panel has d={d}",
            k.shape()
        ))
        .into());
    }
    Ok(k)
}

fn eval_config(cfg: &ExperimentConfig) -> EvalConfig {
    EvalConfig { nw_lag: cfg.nw_lag, quantile: cfg.quantile, horizon: cfg.horizon }
}

fn report_text(r: &EvalReport) -> String {
    let mut out = String::new();
    for (name, v) in r.metrics() {
        if name == "n_days" {
            writeln!(out, "{name},{}", r.n_days).unwrap();
        } else {
            writeln!(out, "{name},{}", num(v)).unwrap();
        }
    }
    out
}

/// Fits `g` with `c` halved while some cells report no signal.
pub fn fit_nparam(
    cfg: &ExperimentConfig,
    panel: &PanelData,
    k_hat: &DMatrix<f64>,
) -> CliResult<lik_core::PiecewiseG> {
    let partition = gest::build_partition(&gest::calibration_sample(&panel.features), cfg.ell)?;
    let mut c = cfg.c;
    let mut g = gest::estimate_g(&panel.features, &panel.y, k_hat, &partition, c, cfg.seed)?;
    for _ in 0..MAX_C_HALVINGS {
        if g.failed_bins() == 0 {
            break;
        }
        c /= 2.0;
        log::warn!("{} cells without signal, retrying with c={c}", g.failed_bins());
        g = gest::estimate_g(&panel.features, &panel.y, k_hat, &partition, c, cfg.seed)?;
    }
    if g.failed_bins() == g.mu.len() {
        return Err(lik_core::Error::NoSignal(format!("every cell failed down to c={c}")).into());
    }
    if g.failed_bins() > 0 {
        eprintln!("warning: {} of {} cells have no signal; their mu is 0", g.failed_bins(), g.mu.len());
    }
    Ok(g)
}

pub fn cmd_fit_g(
    cfg: &ExperimentConfig,
    panel_dir: &Path,
    k_hat: &str,
    method: Method,
    out: &Path,
) -> CliResult<EvalReport> {
    let panel = io::read_panel(panel_dir)?;
    let k_hat = load_k_hat(k_hat, panel.d())?;
    fs::create_dir_all(out)?;
    let model = match method {
        Method::Nparam => {
            let g = fit_nparam(cfg, &panel, &k_hat)?;
            let model = FittedG::Piecewise(g);
            write_text(&out.join("g_hat.csv"), &model.to_text())?;
            model
        }
        Method::Pvel | Method::Linear => {
            let (rounds, form) = match method {
                Method::Pvel => (cfg.rounds, LearnerForm::Interactions),
                _ => (1, LearnerForm::LinearOnly),
            };
            let fit = pvel::boost_with_trace(&panel.y, &panel.features, &k_hat, cfg.eta, rounds, form)?;
            let mut trace = String::new();
            for (round, mse) in fit.train_mse.iter().enumerate() {
                writeln!(trace, "{round},{}", num(*mse)).unwrap();
            }
            write_text(&out.join("rounds.csv"), &trace)?;
            let model = FittedG::Boosted(fit.model);
            write_text(&out.join("model.csv"), &model.to_text())?;
            model
        }
    };
    let yhat = model.predict(&panel.features, &k_hat)?;
    let report = evalkit::evaluate(&panel.y, &yhat, None, &eval_config(cfg))?;
    write_text(&out.join("insample_report.csv"), &report_text(&report))?;
    println!("in-sample corr={:.6} t_stat={:.4}", report.corr, report.t_stat);
    Ok(report)
}

pub fn cmd_predict(panel_dir: &Path, model: &Path, k_hat: &str, out: &Path) -> CliResult<()> {
    let panel = io::read_panel(panel_dir)?;
    let k_hat = load_k_hat(k_hat, panel.d())?;
    let model = FittedG::load(model)?;
    let yhat = model.predict(&panel.features, &k_hat)?;
    write_text(out, &io::format_matrix(&yhat))?;
    println!("wrote {} x {} forecast to {}", yhat.nrows(), yhat.ncols(), out.display());
    Ok(())
}

pub fn cmd_evaluate(
    cfg: &ExperimentConfig,
    y: &Path,
    yhat: &Path,
    weights: Option<&Path>,
    out: &Path,
) -> CliResult<EvalReport> {
    let y = io::read_matrix(y)?;
    let yhat = io::read_matrix(yhat)?;
    let w = weights.map(io::read_matrix).transpose()?;
    let report = evalkit::evaluate(&y, &yhat, w.as_ref(), &eval_config(cfg))?;
    fs::create_dir_all(out)?;
    write_text(&out.join("report.csv"), &report_text(&report))?;
    let cum = evalkit::cumulative(&report.pnl_series);
    let mut pnl = String::new();
    for (t, (p, c)) in report.pnl_series.iter().zip(cum.iter()).enumerate() {
        writeln!(pnl, "{t},{},{}", num(*p), num(*c)).unwrap();
    }
    write_text(&out.join("pnl.csv"), &pnl)?;
    if report.flagged_days > 0 {
        eprintln!("warning: {} zero-variance days excluded from corr", report.flagged_days);
    }
    println!(
        "corr={:.6} w_corr={:.6} t_stat={:.4} sharpe={:.4} n_days={}",
        report.corr, report.w_corr, report.t_stat, report.sharpe, report.n_days
    );
    Ok(report)
}

/// Reads the `t_stat` row of a report.csv.
pub fn read_report_tstat(path: &Path) -> CliResult<f64> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::from(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let kv: Vec<(&str, &str)> = text.lines().filter_map(|l| l.split_once(',')).collect();
    let v = kv
        .iter()
        .find(|(k, _)| k.trim() == "t_stat")
        .ok_or_else(|| CliError::usage(format!("{} has no t_stat row", path.display())))?
        .1;
    v.trim()
        .parse()
        .map_err(|_| CliError::usage(format!("{}: bad t_stat '{v}'", path.display())))
}

pub fn cmd_consolidate(forecasts: &[PathBuf], tstats: &[f64], reports: &[PathBuf], out: &Path) -> CliResult<()> {
    let weights: Vec<f64> = match (tstats.is_empty(), reports.is_empty()) {
        (false, true) => tstats.to_vec(),
        (true, false) => reports.iter().map(|p| read_report_tstat(p)).collect::<CliResult<_>>()?,
        _ => return Err(CliError::usage("give either --tstat or --report once per forecast")),
    };
    if weights.len() != forecasts.len() {
        return Err(CliError::usage(format!(
            "{} forecasts but {} t-statistics",
            forecasts.len(),
            weights.len()
        )));
    }
    let mats = forecasts.iter().map(|p| io::read_matrix(p)).collect::<lik_core::Result<Vec<_>>>()?;
    let names = forecasts.iter().map(|p| p.display().to_string()).collect();
    let fs = ForecastSet::new(mats, weights, names)?;
    let blended = evalkit::consolidate(&fs)?;
    write_text(out, &io::format_matrix(&blended))?;
    println!("blended {} forecasts into {}", forecasts.len(), out.display());
    Ok(())
}

/// Column names of sweep.csv per stage, after the leading `value` column.
pub fn sweep_columns(stage: Stage) -> &'static [&'static str] {
    match stage {
        Stage::Kestim => &["gram_error", "covariance_error", "rank_star"],
        Stage::Gest => &["sup_error", "failed_bins"],
        Stage::Pvel => &["corr", "t_stat"],
    }
}

/// Mean metrics of one stage over `cfg.seeds` consecutive seeds.
pub fn sweep_point(cfg: &ExperimentConfig, stage: Stage) -> CliResult<Vec<f64>> {
    let cols = sweep_columns(stage).len();
    let mut acc = vec![0.0; cols];
    for s in 0..cfg.seeds as u64 {
        let mut c = cfg.clone();
        c.seed = cfg.seed + s;
        let row = match stage {
            Stage::Kestim => {
                let (model, train, _) = generate_split(&ExperimentConfig { n_test: 0, ..c.clone() })?;
                let est = estimate_gram(&c, &train.y)?;
                vec![
                    kestim::gram_error(&est.k_hat, model.gram())?,
                    kestim::covariance_error(&train.y, model.gram())?,
                    est.rank_star as f64,
                ]
            }
            Stage::Gest => {
                let (model, train, _) = generate_split(&ExperimentConfig { n_test: 0, ..c.clone() })?;
                let g = fit_nparam(&c, &train, model.gram())?;
                let truth = gest::cell_means(&model.g_true, &g.partition, CELL_MEAN_DRAWS, c.seed);
                let sup = g.mu.iter().zip(&truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                vec![sup, g.failed_bins() as f64]
            }
            Stage::Pvel => {
                if c.n_test == 0 {
                    return Err(CliError::usage("sweep --stage pvel needs n_test > 0"));
                }
                let (_, train, test) = generate_split(&c)?;
                let test = test.expect("n_test > 0");
                let est = estimate_gram(&c, &train.y)?;
                let model = pvel::boost(&train.y, &train.features, &est.k_hat, c.eta, c.rounds)?;
                let yhat = pvel::predict(&model, &test.features, &est.k_hat)?;
                let r = evalkit::evaluate(&test.y, &yhat, None, &eval_config(&c))?;
                vec![r.corr, r.t_stat]
            }
        };
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    Ok(acc.into_iter().map(|v| v / cfg.seeds as f64).collect())
}

pub fn cmd_sweep(cfg: &ExperimentConfig, axis: &str, values: &[String], stage: Stage, out: &Path) -> CliResult<()> {
    if !NUMERIC_KEYS.contains(&axis) {
        return Err(CliError::usage(format!("'{axis}' is not a numeric config key")));
    }
    let values: Vec<&String> = values.iter().filter(|v| !v.trim().is_empty()).collect();
    if values.is_empty() {
        return Err(CliError::usage("sweep needs at least one value"));
    }
    let mut text = String::new();
    for v in values {
        let mut c = cfg.clone();
        c.set(axis, v)?;
        c.validate()?;
        let x: f64 = v
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("sweep value '{v}' is not a number")))?;
        let metrics = sweep_point(&c, stage)?;
        write!(text, "{}", num(x)).unwrap();
        for m in &metrics {
            write!(text, ",{}", num(*m)).unwrap();
        }
        text.push('\n');
        log::info!("{axis}={v}: {metrics:?}");
    }
    write_text(out, &text)?;
    println!("columns: value,{}", sweep_columns(stage).join(","));
    Ok(())
}
