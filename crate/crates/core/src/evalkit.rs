//! Forecast evaluation: daily cross-sectional correlations, Newey-West
//! t-statistics on daily betas, top-quantile PnL and t-stat weighted blending.
//!
//! Rows are days and columns are entities throughout.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{ensure_same_shape, Error, Result};

/// Relative variance below which a day counts as constant.
const ZERO_VAR_REL: f64 = 1e-24;

/// Per-day statistic with the days that were excluded from the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyStats {
    pub per_day: Vec<f64>,
    /// `true` for zero-variance days; their `per_day` entry is 0.
    pub flagged: Vec<bool>,
    /// Mean over unflagged days, NaN if every day is flagged.
    pub mean: f64,
}

impl DailyStats {
    fn from_days(days: Vec<Option<f64>>) -> Self {
        let flagged: Vec<bool> = days.iter().map(Option::is_none).collect();
        let per_day: Vec<f64> = days.iter().map(|v| v.unwrap_or(0.0)).collect();
        let valid: Vec<f64> = days.into_iter().flatten().collect();
        let mean = if valid.is_empty() {
            f64::NAN
        } else {
            valid.iter().sum::<f64>() / valid.len() as f64
        };
        DailyStats { per_day, flagged, mean }
    }

    pub fn n_flagged(&self) -> usize {
        self.flagged.iter().filter(|&&f| f).count()
    }
}

/// Plain Pearson correlation, `None` for a constant side.
pub(crate) fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    weighted_pearson(a, b, &vec![1.0; a.len()])
}

/// Weighted Pearson correlation; `w` need not be normalized. `None` when either
/// side is constant under the weights.
fn weighted_pearson(a: &[f64], b: &[f64], w: &[f64]) -> Option<f64> {
    let sw: f64 = w.iter().sum();
    let mean = |x: &[f64]| x.iter().zip(w).map(|(v, wi)| v * wi).sum::<f64>() / sw;
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb, mut qa, mut qb) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((x, y), wi) in a.iter().zip(b).zip(w) {
        let (da, db) = (x - ma, y - mb);
        sab += wi * da * db;
        saa += wi * da * da;
        sbb += wi * db * db;
        qa += wi * x * x;
        qb += wi * y * y;
    }
    if saa <= ZERO_VAR_REL * qa || sbb <= ZERO_VAR_REL * qb || saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

fn check_pair(y: &DMatrix<f64>, yhat: &DMatrix<f64>) -> Result<()> {
    ensure_same_shape(y, yhat, "Y and Yhat")?;
    if y.ncols() < 3 {
        return Err(Error::dim(format!("daily correlation needs d >= 3, got {}", y.ncols())));
    }
    Ok(())
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Pearson correlation across entities for every day.
pub fn daily_corr(y: &DMatrix<f64>, yhat: &DMatrix<f64>) -> Result<DailyStats> {
    check_pair(y, yhat)?;
    let ones = vec![1.0; y.ncols()];
    let (ry, rh) = (rows(y), rows(yhat));
    let days = (0..y.nrows())
        .into_par_iter()
        .map(|t| weighted_pearson(&ry[t], &rh[t], &ones))
        .collect();
    Ok(DailyStats::from_days(days))
}

fn check_weights(w: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
    ensure_same_shape(y, w, "weights")?;
    match w.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        Some(v) => Err(Error::InvalidWeight(format!("weights must be positive and finite, found {v}"))),
        None => Ok(()),
    }
}

/// Weighted Pearson correlation per day with day-normalized weights.
pub fn weighted_corr(y: &DMatrix<f64>, yhat: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DailyStats> {
    check_pair(y, yhat)?;
    check_weights(w, y)?;
    let (ry, rh, rw) = (rows(y), rows(yhat), rows(w));
    let days = (0..y.nrows())
        .into_par_iter()
        .map(|t| weighted_pearson(&ry[t], &rh[t], &rw[t]))
        .collect();
    Ok(DailyStats::from_days(days))
}

/// No-intercept least squares slope of `y_t` on `yhat_t`.
pub fn daily_beta(y_t: &[f64], yhat_t: &[f64]) -> Result<f64> {
    weighted_beta(y_t, yhat_t, None)
}

/// Weighted no-intercept slope `sum w y yhat / sum w yhat^2`.
pub fn weighted_beta(y_t: &[f64], yhat_t: &[f64], w_t: Option<&[f64]>) -> Result<f64> {
    if y_t.len() != yhat_t.len() || w_t.is_some_and(|w| w.len() != y_t.len()) {
        return Err(Error::dim("day vectors differ in length"));
    }
    let w = |i: usize| w_t.map_or(1.0, |w| w[i]);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..y_t.len() {
        num += w(i) * y_t[i] * yhat_t[i];
        den += w(i) * yhat_t[i] * yhat_t[i];
    }
    if den == 0.0 {
        return Err(Error::UndefinedBeta);
    }
    Ok(num / den)
}

/// Daily betas, skipping days with an all-zero forecast.
pub fn beta_series(y: &DMatrix<f64>, yhat: &DMatrix<f64>, w: Option<&DMatrix<f64>>) -> Result<Vec<f64>> {
    ensure_same_shape(y, yhat, "Y and Yhat")?;
    if let Some(w) = w {
        check_weights(w, y)?;
    }
    let (ry, rh) = (rows(y), rows(yhat));
    let rw = w.map(rows);
    let mut out = Vec::with_capacity(y.nrows());
    for t in 0..y.nrows() {
        match weighted_beta(&ry[t], &rh[t], rw.as_ref().map(|r| r[t].as_slice())) {
            Ok(b) => out.push(b),
            Err(Error::UndefinedBeta) => log::debug!("day {t}: zero forecast, beta skipped"),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn autocov(x: &[f64], mean: f64, lag: usize) -> f64 {
    let n = x.len();
    (lag..n).map(|t| (x[t] - mean) * (x[t - lag] - mean)).sum::<f64>() / n as f64
}

/// Bartlett-kernel standard error of the mean.
pub fn newey_west_se(x: &[f64], lag: usize) -> Result<f64> {
    let n = x.len();
    if n < lag + 2 {
        return Err(Error::InsufficientData(format!(
            "Newey-West with lag {lag} needs at least {} observations, got {n}",
            lag + 2
        )));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let mut lrv = autocov(x, mean, 0);
    for l in 1..=lag {
        lrv += 2.0 * (1.0 - l as f64 / (lag as f64 + 1.0)) * autocov(x, mean, l);
    }
    let var = lrv / n as f64;
    if !(var > ZERO_VAR_REL * mean * mean) || var <= 0.0 {
        return Err(Error::DegenerateVariance(format!("long-run variance is {var:e}")));
    }
    Ok(var.sqrt())
}

/// `mean(x) / se` with the Newey-West standard error.
pub fn newey_west_tstat(x: &[f64], lag: usize) -> Result<f64> {
    let se = newey_west_se(x, lag)?;
    Ok(x.iter().sum::<f64>() / x.len() as f64 / se)
}

/// Daily PnL of the sign strategy on the strongest forecasts.
#[derive(Debug, Clone, PartialEq)]
pub struct PnlSummary {
    pub series: Vec<f64>,
    pub total: f64,
    /// `None` when the daily PnL has zero spread.
    pub sharpe: Option<f64>,
}

/// Entities kept on one day: the `ceil(q*d)` largest `|yhat|`, ties to the lower index.
pub fn top_quantile(yhat_t: &[f64], quantile: f64) -> Vec<usize> {
    let d = yhat_t.len();
    let keep = ((quantile * d as f64 - 1e-9).ceil() as usize).clamp(1, d.max(1));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| yhat_t[j].abs().total_cmp(&yhat_t[i].abs()).then(i.cmp(&j)));
    order.truncate(keep.min(d));
    order
}

pub fn pnl_series(y: &DMatrix<f64>, yhat: &DMatrix<f64>, quantile: f64) -> Result<Vec<f64>> {
    ensure_same_shape(y, yhat, "Y and Yhat")?;
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(Error::Numeric(format!("quantile must lie in (0, 1], got {quantile}")));
    }
    if y.ncols() == 0 {
        return Err(Error::dim("no entities"));
    }
    let (ry, rh) = (rows(y), rows(yhat));
    Ok((0..y.nrows())
        .into_par_iter()
        .map(|t| {
            let kept = top_quantile(&rh[t], quantile);
            kept.iter().map(|&i| sign(rh[t][i]) * ry[t][i]).sum::<f64>() / kept.len() as f64
        })
        .collect())
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `sqrt(periods) * mean / std` with the sample standard deviation.
pub fn sharpe_ratio(series: &[f64], periods: f64) -> Result<f64> {
    let n = series.len();
    if n < 2 {
        return Err(Error::DegenerateVariance(format!("Sharpe needs two days, got {n}")));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if !(var > ZERO_VAR_REL * mean * mean) || var <= 0.0 {
        return Err(Error::DegenerateVariance("daily PnL has zero variance".into()));
    }
    Ok(periods.sqrt() * mean / var.sqrt())
}

pub fn pnl_sharpe(y: &DMatrix<f64>, yhat: &DMatrix<f64>, quantile: f64, periods: f64) -> Result<PnlSummary> {
    let series = pnl_series(y, yhat, quantile)?;
    let total = series.iter().sum();
    let sharpe = sharpe_ratio(&series, periods).ok();
    Ok(PnlSummary { series, total, sharpe })
}

/// Forecasts to blend, each with its in-sample t-statistic.
#[derive(Debug, Clone)]
pub struct ForecastSet {
    pub forecasts: Vec<DMatrix<f64>>,
    pub tstats: Vec<f64>,
    pub names: Vec<String>,
}

impl ForecastSet {
    pub fn new(forecasts: Vec<DMatrix<f64>>, tstats: Vec<f64>, names: Vec<String>) -> Result<Self> {
        let Some(first) = forecasts.first() else {
            return Err(Error::dim("no forecasts to consolidate"));
        };
        if tstats.len() != forecasts.len() || names.len() != forecasts.len() {
            return Err(Error::dim(format!(
                "{} forecasts but {} t-stats and {} names",
                forecasts.len(),
                tstats.len(),
                names.len()
            )));
        }
        for f in &forecasts[1..] {
            ensure_same_shape(first, f, "forecasts")?;
        }
        if let Some(t) = tstats.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidWeight(format!("t-stat {t} is not finite")));
        }
        Ok(ForecastSet { forecasts, tstats, names })
    }

    /// Unnamed set, labels `f0, f1, ...`.
    pub fn unnamed(forecasts: Vec<DMatrix<f64>>, tstats: Vec<f64>) -> Result<Self> {
        let names = (0..forecasts.len()).map(|i| format!("f{i}")).collect();
        Self::new(forecasts, tstats, names)
    }
}

/// Scales every row to unit population standard deviation; constant rows become zero.
pub fn rescale_daily(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    let d = m.ncols() as f64;
    for mut row in out.row_iter_mut() {
        let mean = row.sum() / d;
        let sd = (row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d).sqrt();
        if sd > 0.0 {
            row /= sd;
        } else {
            row.fill(0.0);
        }
    }
    out
}

/// `sum_j tstat_j * rescale(yhat_j)`, rescaled to unit daily std.
pub fn consolidate(fs: &ForecastSet) -> Result<DMatrix<f64>> {
    if fs.tstats.iter().all(|&t| t == 0.0) {
        return Err(Error::DegenerateWeights);
    }
    let (n, d) = fs.forecasts[0].shape();
    let blend = fs
        .forecasts
        .par_iter()
        .zip(&fs.tstats)
        .filter(|(_, &t)| t != 0.0)
        .map(|(f, &t)| rescale_daily(f) * t)
        .reduce(|| DMatrix::zeros(n, d), |a, b| a + b);
    Ok(rescale_daily(&blend))
}

/// Settings shared by every evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub nw_lag: usize,
    pub quantile: f64,
    /// Return horizon in days; Sharpe annualizes with `252 / horizon` periods.
    pub horizon: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { nw_lag: 4, quantile: 0.2, horizon: 5.0 }
    }
}

impl EvalConfig {
    pub fn periods(&self) -> f64 {
        252.0 / self.horizon
    }
}

/// Summary of one forecast. Undefined statistics are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub corr: f64,
    pub w_corr: f64,
    pub t_stat: f64,
    pub w_t_stat: f64,
    pub pnl_series: Vec<f64>,
    pub pnl_total: f64,
    pub sharpe: f64,
    pub n_days: usize,
    pub flagged_days: usize,
}

impl EvalReport {
    /// `(metric, value)` rows in report order.
    pub fn metrics(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("corr", self.corr),
            ("w_corr", self.w_corr),
            ("t_stat", self.t_stat),
            ("w_t_stat", self.w_t_stat),
            ("pnl_total", self.pnl_total),
            ("sharpe", self.sharpe),
            ("n_days", self.n_days as f64),
        ]
    }
}

fn tstat_or_nan(betas: Result<Vec<f64>>, lag: usize) -> Result<f64> {
    let betas = betas?;
    Ok(match newey_west_tstat(&betas, lag) {
        Ok(t) => t,
        Err(e) => {
            log::warn!("t-stat undefined: {e}");
            f64::NAN
        }
    })
}

/// Full report; without weights the weighted fields repeat the plain ones.
pub fn evaluate(
    y: &DMatrix<f64>,
    yhat: &DMatrix<f64>,
    weights: Option<&DMatrix<f64>>,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let corr = daily_corr(y, yhat)?;
    let t_stat = tstat_or_nan(beta_series(y, yhat, None), cfg.nw_lag)?;
    let (w_corr, w_t_stat) = match weights {
        Some(w) => (
            weighted_corr(y, yhat, w)?.mean,
            tstat_or_nan(beta_series(y, yhat, Some(w)), cfg.nw_lag)?,
        ),
        None => (corr.mean, t_stat),
    };
    let pnl = pnl_sharpe(y, yhat, cfg.quantile, cfg.periods())?;
    Ok(EvalReport {
        corr: corr.mean,
        w_corr,
        t_stat,
        w_t_stat,
        n_days: pnl.series.len(),
        pnl_total: pnl.total,
        sharpe: pnl.sharpe.unwrap_or(f64::NAN),
        pnl_series: pnl.series,
        flagged_days: corr.n_flagged(),
    })
}

/// Cumulative sum, for plotting PnL curves.
pub fn cumulative(series: &[f64]) -> DVector<f64> {
    let mut acc = 0.0;
    DVector::from_iterator(
        series.len(),
        series.iter().map(|v| {
            acc += v;
            acc
        }),
    )
}
