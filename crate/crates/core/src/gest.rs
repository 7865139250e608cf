//! Non-parametric estimation of `g` given an estimate of `K`.
//!
//! The feature space is cut into `ell` cells of equal probability mass and `g`
//! is approximated by its cell means `mu_j`. On each day one entity `q_t` is
//! drawn at random; its response is a linear form in the cell means whose
//! coefficients are the kernel-weighted cell loads
//!
//! ```text
//! L_{(t,q),j} = sum_{m : x_{t,m} in cell j} K_hat[q, m]
//! ```
//!
//! Each `mu_j` is then recovered by a sign-flipped moment ratio: days whose
//! centered load `Pi_j` is clearly positive or negative contribute with that
//! sign, the rest are dropped.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::synth::{day_features, SignalFn};

/// Axis-aligned grid of equal-mass cells covering `[-1,1]^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSpec {
    k: usize,
    ell: usize,
    /// Per-axis breakpoints, first = -1, last = 1, strictly increasing.
    axes: Vec<Vec<f64>>,
}

impl PartitionSpec {
    pub fn from_axes(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::dim("partition needs at least one axis"));
        }
        for b in &axes {
            if b.len() < 2 || b.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Parse("axis breakpoints must be strictly increasing".into()));
            }
            if b[0] != -1.0 || *b.last().unwrap() != 1.0 {
                return Err(Error::Parse("axis breakpoints must start at -1 and end at 1".into()));
            }
        }
        let ell = axes.iter().map(|b| b.len() - 1).product();
        Ok(PartitionSpec { k: axes.len(), ell, axes })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    /// Breakpoints of a one-dimensional partition.
    pub fn breakpoints(&self) -> &[f64] {
        &self.axes[0]
    }

    /// Cell containing `x` (mixed radix, axis 0 most significant). Points
    /// outside `[-1,1]^k` are clamped to the boundary cell.
    pub fn cell_of(&self, x: &[f64]) -> usize {
        let mut cell = 0;
        for (b, &v) in self.axes.iter().zip(x) {
            let m = b.len() - 1;
            if !(-1.0..=1.0).contains(&v) {
                log::debug!("feature value {v} outside [-1,1], clamped");
            }
            let j = b[1..m].partition_point(|&e| e <= v);
            cell = cell * m + j;
        }
        cell
    }

    /// `(low, high)` per axis for `cell`.
    pub fn cell_bounds(&self, mut cell: usize) -> Vec<(f64, f64)> {
        let mut out = vec![(0.0, 0.0); self.k];
        for (a, b) in self.axes.iter().enumerate().rev() {
            let m = b.len() - 1;
            let j = cell % m;
            cell /= m;
            out[a] = (b[j], b[j + 1]);
        }
        out
    }
}

/// Per-axis cell counts whose product is `ell`, as equal as possible.
pub fn axis_counts(ell: usize, k: usize) -> Vec<usize> {
    fn search(rem: usize, k: usize, min: usize, cur: &mut Vec<usize>, best: &mut Option<Vec<usize>>) {
        if k == 1 {
            if rem >= min {
                cur.push(rem);
                let spread = |v: &[usize]| v.iter().max().unwrap() - v.iter().min().unwrap();
                if best.as_ref().is_none_or(|b| spread(cur) < spread(b)) {
                    *best = Some(cur.clone());
                }
                cur.pop();
            }
            return;
        }
        for f in min..=rem {
            if rem % f == 0 {
                cur.push(f);
                search(rem / f, k - 1, f, cur, best);
                cur.pop();
            }
        }
    }
    let mut best = None;
    search(ell, k, 1, &mut Vec::new(), &mut best);
    let mut counts = best.unwrap_or_else(|| vec![1; k]);
    counts.reverse();
    counts
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn quantile_breaks(mut sample: Vec<f64>, m: usize) -> Vec<f64> {
    sample.retain(|v| v.is_finite());
    sample.sort_by(f64::total_cmp);
    let mut b = Vec::with_capacity(m + 1);
    b.push(-1.0);
    for j in 1..m {
        let q = quantile_sorted(&sample, j as f64 / m as f64).clamp(-1.0, 1.0);
        let prev = *b.last().unwrap();
        b.push(if q <= prev { prev + 1e-12 } else { q });
    }
    b.push(1.0);
    b
}

/// Equal-mass partition from a calibration sample (`m x k`, one point per row).
pub fn build_partition(calibration: &DMatrix<f64>, ell: usize) -> Result<PartitionSpec> {
    if ell < 2 {
        return Err(Error::dim(format!("need ell >= 2, got {ell}")));
    }
    let m = calibration.nrows();
    if m < 10 * ell {
        return Err(Error::InsufficientData(format!(
            "{m} calibration points for {ell} cells (need >= {})",
            10 * ell
        )));
    }
    let k = calibration.ncols();
    if k == 0 {
        return Err(Error::dim("calibration sample has no columns"));
    }
    let counts = axis_counts(ell, k);
    let axes = counts
        .iter()
        .enumerate()
        .map(|(a, &c)| {
            if c == 1 {
                vec![-1.0, 1.0]
            } else {
                quantile_breaks(calibration.column(a).iter().copied().collect(), c)
            }
        })
        .collect();
    PartitionSpec::from_axes(axes)
}

pub fn build_partition_1d(calibration: &[f64], ell: usize) -> Result<PartitionSpec> {
    build_partition(&DMatrix::from_column_slice(calibration.len(), 1, calibration), ell)
}

/// Every `(day, entity)` feature point of a panel, one per row.
pub fn calibration_sample(features: &[DMatrix<f64>]) -> DMatrix<f64> {
    let (n, d) = features[0].shape();
    DMatrix::from_fn(n * d, features.len(), |r, a| features[a][(r / d, r % d)])
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinLoads {
    pub t: usize,
    pub q: usize,
    pub loads: Vec<f64>,
}

/// Kernel-weighted cell loads for row `q` of `k_hat` on one day (`x_t` is `d x k`).
pub fn map_regress(
    q: usize,
    k_hat: &DMatrix<f64>,
    x_t: &DMatrix<f64>,
    partition: &PartitionSpec,
) -> Result<BinLoads> {
    let d = k_hat.nrows();
    if q >= d {
        return Err(Error::dim(format!("row index {q} out of range for d = {d}")));
    }
    if x_t.shape() != (d, partition.k()) {
        return Err(Error::dim(format!(
            "day features {:?}, expected ({d}, {})",
            x_t.shape(),
            partition.k()
        )));
    }
    let mut loads = vec![0.0; partition.ell()];
    let mut x = vec![0.0; partition.k()];
    for m in 0..d {
        for (a, v) in x.iter_mut().enumerate() {
            *v = x_t[(m, a)];
        }
        loads[partition.cell_of(&x)] += k_hat[(q, m)];
    }
    Ok(BinLoads { t: 0, q, loads })
}

/// `L_target - (sum_{j != target} L_j) / (ell - 1)`.
pub fn pi1_statistic(loads: &BinLoads, target: usize, ell: usize) -> f64 {
    let total: f64 = loads.loads.iter().sum();
    let own = loads.loads[target];
    own - (total - own) / (ell as f64 - 1.0)
}

/// Keep threshold `(c / ln d) * sqrt(d / ell)`.
pub fn flip_threshold(c: f64, d: usize, ell: usize) -> f64 {
    c / (d as f64).ln() * (d as f64 / ell as f64).sqrt()
}

/// Sign-flipped moment estimate of the target cell mean. Returns `(mu, n_kept)`.
pub fn flip_sign_estimate(
    obs: &[(f64, BinLoads)],
    target: usize,
    c: f64,
    d: usize,
    ell: usize,
) -> Result<(f64, usize)> {
    if obs.is_empty() {
        return Err(Error::InsufficientData("flip-sign needs at least one observation".into()));
    }
    if ell < 2 || target >= ell {
        return Err(Error::dim(format!("target bin {target} with ell = {ell}")));
    }
    let thr = flip_threshold(c, d, ell);
    let (mut num, mut den, mut kept) = (0.0, 0.0, 0usize);
    for (y, loads) in obs {
        let pi = pi1_statistic(loads, target, ell);
        let b = if pi >= thr {
            1.0
        } else if pi < -thr {
            -1.0
        } else {
            continue;
        };
        num += b * y;
        den += b * pi;
        kept += 1;
    }
    if kept == 0 || !(den > 0.0) {
        return Err(Error::NoSignal(format!(
            "bin {target}: {kept} observations pass threshold {thr:.4}"
        )));
    }
    Ok((num / den, kept))
}

/// Fitted piecewise-constant `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseG {
    pub partition: PartitionSpec,
    pub mu: Vec<f64>,
    pub c_threshold: f64,
    /// Days with a nonzero sign per cell; 0 marks a cell that had no signal.
    pub n_used: Vec<usize>,
}

impl PiecewiseG {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.mu[self.partition.cell_of(x)]
    }

    pub fn failed_bins(&self) -> usize {
        self.n_used.iter().filter(|&&n| n == 0).count()
    }
}

pub fn eval_piecewise(g: &PiecewiseG, x: &[f64]) -> f64 {
    g.eval(x)
}

fn check_panel(features: &[DMatrix<f64>], y: &DMatrix<f64>, k_hat: &DMatrix<f64>) -> Result<()> {
    let d = y.ncols();
    if features.is_empty() || features.iter().any(|f| f.shape() != y.shape()) {
        return Err(Error::dim("feature slices must match the shape of Y"));
    }
    if k_hat.shape() != (d, d) {
        return Err(Error::dim(format!("K_hat is {:?}, expected ({d}, {d})", k_hat.shape())));
    }
    Ok(())
}

/// Full estimator: one random row per day, shared by all cells.
pub fn estimate_g(
    features: &[DMatrix<f64>],
    y: &DMatrix<f64>,
    k_hat: &DMatrix<f64>,
    partition: &PartitionSpec,
    c: f64,
    seed: u64,
) -> Result<PiecewiseG> {
    check_panel(features, y, k_hat)?;
    if features.len() != partition.k() {
        return Err(Error::dim(format!(
            "panel has {} features, partition expects {}",
            features.len(),
            partition.k()
        )));
    }
    if !(c > 0.0) {
        return Err(Error::Numeric(format!("threshold constant c must be positive, got {c}")));
    }
    let (n, d) = y.shape();
    if n == 0 {
        return Err(Error::InsufficientData("empty panel".into()));
    }
    let ell = partition.ell();
    let mut pick = rng::stream(seed, Domain::RowPick, 0);
    let rows: Vec<usize> = (0..n).map(|_| pick.random_range(0..d)).collect();

    let obs: Vec<(f64, BinLoads)> = (0..n)
        .into_par_iter()
        .map(|t| {
            let q = rows[t];
            let mut loads = map_regress(q, k_hat, &day_features(features, t), partition)?;
            loads.t = t;
            Ok((y[(t, q)], loads))
        })
        .collect::<Result<_>>()?;

    let fits: Vec<(f64, usize)> = (0..ell)
        .into_par_iter()
        .map(|j| match flip_sign_estimate(&obs, j, c, d, ell) {
            Ok(fit) => Ok(fit),
            Err(Error::NoSignal(msg)) => {
                log::warn!("no-signal: {msg}; mu set to 0");
                Ok((0.0, 0))
            }
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;

    let mut mu: Vec<f64> = fits.iter().map(|f| f.0).collect();
    let mean = mu.iter().sum::<f64>() / ell as f64;
    mu.iter_mut().for_each(|m| *m -= mean);
    Ok(PiecewiseG {
        partition: partition.clone(),
        mu,
        c_threshold: c,
        n_used: fits.iter().map(|f| f.1).collect(),
    })
}

/// Forecast `Y_hat = G K_hat^T` with `G_{t,j} = g(x_{t,j})`.
pub fn predict_piecewise(
    g: &PiecewiseG,
    features: &[DMatrix<f64>],
    k_hat: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if features.len() != g.partition.k() {
        return Err(Error::dim("feature count does not match the partition"));
    }
    let (n, d) = features[0].shape();
    check_panel(features, &DMatrix::zeros(n, d), k_hat)?;
    let mut x = vec![0.0; features.len()];
    let mut gx = DMatrix::zeros(n, d);
    for t in 0..n {
        for i in 0..d {
            for (a, v) in x.iter_mut().enumerate() {
                *v = features[a][(t, i)];
            }
            gx[(t, i)] = g.eval(&x);
        }
    }
    Ok(gx * k_hat.transpose())
}

/// Monte-Carlo `E[g(x) | x in cell j]` under uniform `x`.
pub fn cell_means(signal: &SignalFn, partition: &PartitionSpec, draws_per_cell: usize, seed: u64) -> Vec<f64> {
    (0..partition.ell())
        .map(|j| {
            let bounds = partition.cell_bounds(j);
            let mut rng = rng::stream(seed, Domain::Calibration, j as u64);
            let mut x = vec![0.0; bounds.len()];
            let mut sum = 0.0;
            for _ in 0..draws_per_cell {
                for (v, &(lo, hi)) in x.iter_mut().zip(&bounds) {
                    *v = rng.random_range(lo..hi);
                }
                sum += signal.eval(&x);
            }
            sum / draws_per_cell as f64
        })
        .collect()
}
