//! Recovery of the Gram matrix `K` from observed responses.
//!
//! The data-driven estimator eigen-decomposes `Y^T Y / n`, which concentrates
//! around `K^T K` when `g` is centered with unit variance, truncates at the
//! largest index whose eigengap clears `delta * d^2`, and takes the PSD square
//! root of the truncated spectrum.

use nalgebra::DMatrix;

use crate::error::{ensure_finite, ensure_same_shape, Error, Result};
use crate::linalg::{self, Spectrum};

#[derive(Debug, Clone)]
pub struct GramEstimate {
    pub k_hat: DMatrix<f64>,
    /// Truncation rank `i*`.
    pub rank_star: usize,
    pub delta: f64,
    /// Spectrum of the matrix the estimate was built from.
    pub spectrum_used: Spectrum,
}

/// Observable similarity matrices combined as `sum_m beta_m K^(m)`, optionally
/// exponentiated entrywise.
#[derive(Debug, Clone)]
pub struct HintSet {
    hints: Vec<DMatrix<f64>>,
    betas: Vec<f64>,
    exponentiate: bool,
}

impl HintSet {
    pub fn new(hints: Vec<DMatrix<f64>>, betas: Vec<f64>, exponentiate: bool) -> Result<Self> {
        if hints.is_empty() || hints.len() != betas.len() {
            return Err(Error::dim(format!(
                "{} hints but {} betas",
                hints.len(),
                betas.len()
            )));
        }
        let d = hints[0].nrows();
        if hints.iter().any(|h| h.shape() != (d, d)) {
            return Err(Error::dim("all hints must be square with the same dimension"));
        }
        if betas.iter().any(|b| !b.is_finite()) {
            return Err(Error::Numeric("hint betas must be finite".into()));
        }
        Ok(HintSet { hints, betas, exponentiate })
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn with_betas(&self, betas: Vec<f64>) -> Result<Self> {
        HintSet::new(self.hints.clone(), betas, self.exponentiate)
    }
}

/// `Y^T Y / n`.
pub fn covariance_target(y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if y.nrows() == 0 {
        return Err(Error::dim("covariance target needs n >= 1"));
    }
    ensure_finite(y, "Y")?;
    let c = y.tr_mul(y) / y.nrows() as f64;
    Ok((&c + c.transpose()) * 0.5)
}

fn gaps(spec: &Spectrum) -> Vec<f64> {
    spec.eigenvalues.as_slice().windows(2).map(|w| w[0] - w[1]).collect()
}

/// `i* = max { i : sigma_i - sigma_{i+1} >= delta d^2 }` (1-based).
pub fn select_rank(spec: &Spectrum, delta: f64) -> Result<usize> {
    let d = spec.dim();
    if !(delta > 0.0) {
        return Err(Error::Numeric(format!("delta must be positive, got {delta}")));
    }
    let threshold = delta * (d * d) as f64;
    let g = gaps(spec);
    match g.iter().rposition(|&gap| gap >= threshold) {
        Some(i) => Ok(i + 1),
        None => Err(Error::GapNotFound {
            largest_gap: g.iter().fold(0.0f64, |m, &x| m.max(x)) / (d * d) as f64,
            delta,
        }),
    }
}

pub fn estimate_k_dd(y: &DMatrix<f64>, delta: f64) -> Result<GramEstimate> {
    let spec = linalg::eig_sym(&covariance_target(y)?)?;
    estimate_from_spectrum(spec, delta)
}

/// [`estimate_k_dd`] with `delta` chosen by [`auto_delta`].
pub fn estimate_k_auto(y: &DMatrix<f64>) -> Result<GramEstimate> {
    let spec = linalg::eig_sym(&covariance_target(y)?)?;
    let delta = auto_delta(&spec, spec.dim())?;
    estimate_from_spectrum(spec, delta)
}

pub fn estimate_from_spectrum(spec: Spectrum, delta: f64) -> Result<GramEstimate> {
    let rank_star = select_rank(&spec, delta)?;
    let k_hat = linalg::psd_sqrt(&spec, rank_star)?;
    Ok(GramEstimate { k_hat, rank_star, delta, spectrum_used: spec })
}

/// Data-dependent gap parameter.
///
/// Candidates are indices `i <= ceil(sqrt(d))` at which the gap rule fires
/// exactly (0.99 * gap_i beats every later gap). Among them we keep those whose
/// gap clears the noise level, estimated as three times the largest gap past
/// `ceil(sqrt(d))`, and pick the deepest one; without any we fall back to the
/// largest gap. Returns `0.99 * gap_i / d^2`.
pub fn auto_delta(spec: &Spectrum, d: usize) -> Result<f64> {
    if spec.dim() != d || d < 2 {
        return Err(Error::dim(format!("spectrum of size {} for d = {d}", spec.dim())));
    }
    let g = gaps(spec);
    let top = spec.eigenvalues[0].abs();
    let largest = g.iter().fold(0.0f64, |m, &x| m.max(x));
    if !(largest > 1e-12 * top) || largest == 0.0 {
        return Err(Error::DegenerateSpectrum);
    }
    let cap = ((d as f64).sqrt().ceil() as usize).min(d - 1);
    let tail = g[cap..].iter().fold(0.0f64, |m, &x| m.max(x));
    let floor = (3.0 * tail).max(1e-8 * top);

    // suffix maxima of the gaps: later[i] = max_{j > i} g[j]
    let mut later = vec![0.0f64; g.len()];
    for i in (0..g.len().saturating_sub(1)).rev() {
        later[i] = later[i + 1].max(g[i + 1]);
    }
    let fires_exactly = |i: usize| 0.99 * g[i] > later[i];
    let chosen = (0..cap)
        .rev()
        .find(|&i| fires_exactly(i) && g[i] >= floor)
        .unwrap_or_else(|| {
            // first index attaining the maximum gap always fires exactly
            g.iter().position(|&x| x == largest).unwrap()
        });
    Ok(0.99 * g[chosen] / (d * d) as f64)
}

/// `(1/d^2) ||K_hat - K||_F^2`.
pub fn gram_error(k_hat: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<f64> {
    ensure_same_shape(k_hat, k, "gram_error")?;
    let d = k.nrows().max(1) as f64;
    Ok((k_hat - k).norm_squared() / (d * d))
}

/// `||Y^T Y / n - K^T K||_F / d^2`.
pub fn covariance_error(y: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<f64> {
    let c = covariance_target(y)?;
    let ktk = k.tr_mul(k);
    ensure_same_shape(&c, &ktk, "covariance_error")?;
    let d = k.nrows() as f64;
    Ok((c - ktk).norm() / (d * d))
}

pub fn hint_consolidate(hs: &HintSet) -> Result<GramEstimate> {
    let d = hs.hints[0].nrows();
    let mut m = DMatrix::zeros(d, d);
    for (h, &b) in hs.hints.iter().zip(&hs.betas) {
        m += h * b;
    }
    if hs.exponentiate {
        m.apply(|v| *v = v.exp());
    }
    ensure_finite(&m, "consolidated hint matrix")?;
    let k_hat = (&m + m.transpose()) * 0.5;
    let spectrum_used = linalg::eig_sym(&k_hat)?;
    Ok(GramEstimate { k_hat, rank_star: d, delta: 0.0, spectrum_used })
}

/// Exponential moving average with `alpha = 2 / (1 + window)`.
pub fn ema_update(prev: &DMatrix<f64>, current: &DMatrix<f64>, window: usize) -> Result<DMatrix<f64>> {
    if window < 1 {
        return Err(Error::dim("EMA window must be >= 1"));
    }
    ensure_same_shape(prev, current, "ema_update")?;
    let alpha = 2.0 / (1.0 + window as f64);
    Ok(current * alpha + prev * (1.0 - alpha))
}
