//! Generative side of the additive influence model.
//!
//! Each entity `i` carries a latent position `z_i` in `[-1,1]^r`. On day `t`
//! every entity draws a feature vector `x_{t,i}` and the responses are
//!
//! ```text
//! y_{t,i} = sum_j kappa(z_i, z_j) * g(x_{t,j}) + xi_{t,i}
//! ```
//!
//! i.e. `Y = S K + E` with `S_{t,j} = g(x_{t,j})`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{self, Domain};

/// Number of uniform draws used to center (and optionally standardize) a signal.
pub const SIGNAL_MC_DRAWS: usize = 1_000_000;
const SIGNAL_MC_SEED: u64 = 0x5eed_0f_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Gaussian { sigma: f64 },
    Imq { c: f64, alpha: f64 },
    InnerProduct,
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Gaussian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(Error::Parse(format!("gaussian sigma must be positive, got {sigma}")))
            }
            KernelSpec::Imq { c, alpha } if !(c > 0.0 && alpha > 0.0) => Err(Error::Parse(
                format!("imq needs c > 0 and alpha > 0, got c={c} alpha={alpha}"),
            )),
            _ => Ok(()),
        }
    }

    /// Largest value the kernel can take (`None` for the unbounded inner product).
    pub fn max_value(&self) -> Option<f64> {
        match *self {
            KernelSpec::Gaussian { .. } => Some(1.0),
            KernelSpec::Imq { c, alpha } => Some(c.powf(-2.0 * alpha)),
            KernelSpec::InnerProduct => None,
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::dim(format!(
                "kernel arguments have lengths {} and {}",
                a.len(),
                b.len()
            )));
        }
        Ok(self.eval_unchecked(a, b))
    }

    fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::Gaussian { sigma } => (-sq_dist(a, b) / (sigma * sigma)).exp(),
            KernelSpec::Imq { c, alpha } => (c * c + sq_dist(a, b)).powf(-alpha),
            KernelSpec::InnerProduct => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Gaussian { sigma } => write!(f, "gaussian:{sigma}"),
            KernelSpec::Imq { c, alpha } => write!(f, "imq:{c}:{alpha}"),
            KernelSpec::InnerProduct => write!(f, "inner"),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    /// `gaussian:<sigma>`, `imq:<c>:<alpha>` or `inner`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad kernel parameter '{p}' in '{s}'")))
        };
        let spec = match parts.as_slice() {
            ["gaussian"] => KernelSpec::Gaussian { sigma: 1.0 },
            ["gaussian", sigma] => KernelSpec::Gaussian { sigma: num(sigma)? },
            ["imq", c, alpha] => KernelSpec::Imq { c: num(c)?, alpha: num(alpha)? },
            ["inner"] => KernelSpec::InnerProduct,
            _ => return Err(Error::Parse(format!("unknown kernel spec '{s}'"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Raw shape of the signal function before centering.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalKind {
    /// Step function of the first coordinate; `breaks` ascending, spanning [-1,1],
    /// one more entry than `values`.
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<f64> },
    /// Additive polynomial: `coeffs[a][p]` multiplies `x_a^p`.
    Polynomial { coeffs: Vec<Vec<f64>> },
    /// `amp * sin(pi * freq * x_0)`.
    Sinusoid { freq: f64, amp: f64 },
}

impl SignalKind {
    /// Piecewise-constant signal on equal-width cells of [-1,1].
    pub fn steps(values: Vec<f64>) -> Self {
        let m = values.len();
        let breaks = (0..=m).map(|j| -1.0 + 2.0 * j as f64 / m as f64).collect();
        SignalKind::PiecewiseConstant { breaks, values }
    }

    /// True when the raw signal does not depend on `x` (it centers to zero).
    pub fn is_constant(&self) -> bool {
        match self {
            SignalKind::PiecewiseConstant { values, .. } => values.windows(2).all(|w| w[0] == w[1]),
            SignalKind::Polynomial { coeffs } => coeffs.iter().all(|c| c.iter().skip(1).all(|&v| v == 0.0)),
            SignalKind::Sinusoid { freq, amp } => *freq == 0.0 || *amp == 0.0,
        }
    }

    /// Number of input axes the signal reads.
    pub fn min_dim(&self) -> usize {
        match self {
            SignalKind::Polynomial { coeffs } => coeffs.len().max(1),
            _ => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            SignalKind::PiecewiseConstant { breaks, values } => {
                if values.is_empty() || breaks.len() != values.len() + 1 {
                    return Err(Error::Parse(
                        "piecewise signal needs len(breaks) = len(values) + 1 >= 2".into(),
                    ));
                }
                if breaks.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Parse("piecewise breaks must increase".into()));
                }
                if breaks[0] > -1.0 || *breaks.last().unwrap() < 1.0 {
                    return Err(Error::Parse("piecewise breaks must span [-1,1]".into()));
                }
            }
            SignalKind::Polynomial { coeffs } => {
                if coeffs.iter().flatten().any(|c| !c.is_finite()) {
                    return Err(Error::Parse("polynomial coefficients must be finite".into()));
                }
            }
            SignalKind::Sinusoid { freq, amp } => {
                if !freq.is_finite() || !amp.is_finite() {
                    return Err(Error::Parse("sinusoid parameters must be finite".into()));
                }
            }
        }
        Ok(())
    }

    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            SignalKind::PiecewiseConstant { breaks, values } => {
                let v = x[0];
                // left-closed cells, last cell closed on both ends
                let j = breaks[1..breaks.len() - 1].partition_point(|&b| b <= v);
                values[j.min(values.len() - 1)]
            }
            SignalKind::Polynomial { coeffs } => coeffs
                .iter()
                .zip(x)
                .map(|(cs, &xa)| cs.iter().rev().fold(0.0, |acc, c| acc * xa + c))
                .sum(),
            SignalKind::Sinusoid { freq, amp } => amp * (std::f64::consts::PI * freq * x[0]).sin(),
        }
    }
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
        match self {
            SignalKind::PiecewiseConstant { breaks, values } => {
                write!(f, "piecewise:{};{}", join(breaks), join(values))
            }
            SignalKind::Polynomial { coeffs } if coeffs.is_empty() => f.write_str("zero"),
            SignalKind::Polynomial { coeffs } => {
                let axes: Vec<String> = coeffs.iter().map(|c| join(c)).collect();
                write!(f, "poly:{}", axes.join(";"))
            }
            SignalKind::Sinusoid { freq, amp } => write!(f, "sin:{freq},{amp}"),
        }
    }
}

impl FromStr for SignalKind {
    type Err = Error;

    /// Accepted forms:
    /// - `steps:v1,v2,...` equal-width cells on [-1,1]
    /// - `piecewise:b0,...,bm;v1,...,vm`
    /// - `poly:c0,c1,..;c0,c1,..` one coefficient list per axis
    /// - `sin:freq,amp`
    /// - `zero`
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let list = |p: &str| -> Result<Vec<f64>> {
            p.split(',')
                .filter(|t| !t.trim().is_empty())
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad number '{t}' in signal '{s}'")))
                })
                .collect()
        };
        let (head, body) = s.split_once(':').unwrap_or((s, ""));
        let kind = match head {
            "zero" => SignalKind::Polynomial { coeffs: vec![] },
            "steps" => SignalKind::steps(list(body)?),
            "piecewise" => {
                let (b, v) = body
                    .split_once(';')
                    .ok_or_else(|| Error::Parse(format!("piecewise needs 'breaks;values': '{s}'")))?;
                SignalKind::PiecewiseConstant { breaks: list(b)?, values: list(v)? }
            }
            "poly" => SignalKind::Polynomial {
                coeffs: body.split(';').map(list).collect::<Result<_>>()?,
            },
            "sin" => match list(body)?.as_slice() {
                [freq, amp] => SignalKind::Sinusoid { freq: *freq, amp: *amp },
                _ => return Err(Error::Parse(format!("sin needs 'freq,amp': '{s}'"))),
            },
            _ => return Err(Error::Parse(format!("unknown signal spec '{s}'"))),
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// Centered signal function `g : [-1,1]^dim -> R`.
///
/// `g(x) = scale * (raw(x) - offset)` where `offset` is a Monte-Carlo estimate of
/// `E[raw(x)]` under uniform `x`, so `E[g] = 0` up to sampling error.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalFn {
    kind: SignalKind,
    dim: usize,
    offset: f64,
    scale: f64,
}

impl SignalFn {
    pub fn new(kind: SignalKind, dim: usize) -> Result<Self> {
        kind.validate()?;
        if dim < kind.min_dim() {
            return Err(Error::dim(format!(
                "signal needs at least {} input axes, got {dim}",
                kind.min_dim()
            )));
        }
        let mut g = SignalFn { kind, dim, offset: 0.0, scale: 1.0 };
        let (mean, _) = g.monte_carlo_moments(SIGNAL_MC_DRAWS, SIGNAL_MC_SEED);
        g.offset = mean;
        Ok(g)
    }

    /// Centered and rescaled to unit variance under uniform inputs.
    pub fn standardized(kind: SignalKind, dim: usize) -> Result<Self> {
        let mut g = Self::new(kind, dim)?;
        let (_, std) = g.monte_carlo_moments(SIGNAL_MC_DRAWS, SIGNAL_MC_SEED);
        if !(std > 0.0) {
            return Err(Error::DegenerateVariance("cannot standardize a constant signal".into()));
        }
        g.scale = 1.0 / std;
        Ok(g)
    }

    pub fn zero(dim: usize) -> Self {
        SignalFn { kind: SignalKind::Polynomial { coeffs: vec![] }, dim, offset: 0.0, scale: 1.0 }
    }

    pub fn kind(&self) -> &SignalKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.scale * (self.kind.eval(x) - self.offset)
    }

    /// Mean and standard deviation of `g` over `draws` uniform inputs.
    pub fn monte_carlo_moments(&self, draws: usize, seed: u64) -> (f64, f64) {
        let mut rng = rng::stream(seed, Domain::SignalMoments, 0);
        let mut x = vec![0.0; self.dim];
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..draws {
            for v in x.iter_mut() {
                *v = rng.random_range(-1.0..=1.0);
            }
            let g = self.eval(&x);
            sum += g;
            sum_sq += g * g;
        }
        let mean = sum / draws as f64;
        let var = (sum_sq / draws as f64 - mean * mean).max(0.0);
        (mean, var.sqrt())
    }
}

/// Ground-truth generator state.
#[derive(Debug, Clone)]
pub struct LatentModel {
    pub d: usize,
    pub r: usize,
    pub z: DMatrix<f64>,
    pub kernel: KernelSpec,
    pub g_true: SignalFn,
    pub sigma_xi: f64,
    pub seed: u64,
    k_true: DMatrix<f64>,
}

impl LatentModel {
    pub fn new(
        d: usize,
        r: usize,
        kernel: KernelSpec,
        g_true: SignalFn,
        sigma_xi: f64,
        seed: u64,
    ) -> Result<Self> {
        kernel.validate()?;
        if !(sigma_xi >= 0.0 && sigma_xi.is_finite()) {
            return Err(Error::Parse(format!("sigma_xi must be >= 0, got {sigma_xi}")));
        }
        let z = sample_latent_positions(d, r, seed)?;
        let k_true = gram_matrix(&z, &kernel)?;
        Ok(LatentModel { d, r, z, kernel, g_true, sigma_xi, seed, k_true })
    }

    /// The Gram matrix `K_{i,j} = kappa(z_i, z_j)`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.k_true
    }
}

/// Observed panel: `k` feature slices (each `n x d`), responses and optionally
/// the noiseless signal `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    pub features: Vec<DMatrix<f64>>,
    pub y: DMatrix<f64>,
    pub signal: Option<DMatrix<f64>>,
}

impl PanelData {
    pub fn new(
        features: Vec<DMatrix<f64>>,
        y: DMatrix<f64>,
        signal: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::dim("panel needs at least one feature slice"));
        }
        if let Some(f) = features.iter().find(|f| f.shape() != y.shape()) {
            return Err(Error::dim(format!(
                "feature slice shape {:?} does not match Y shape {:?}",
                f.shape(),
                y.shape()
            )));
        }
        if let Some(s) = &signal {
            if s.shape() != y.shape() {
                return Err(Error::dim("signal shape does not match Y"));
            }
        }
        Ok(PanelData { features, y, signal })
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn d(&self) -> usize {
        self.y.ncols()
    }

    pub fn k(&self) -> usize {
        self.features.len()
    }

    /// Features of day `t` as a `d x k` matrix.
    pub fn day_features(&self, t: usize) -> DMatrix<f64> {
        day_features(&self.features, t)
    }
}

pub(crate) fn day_features(features: &[DMatrix<f64>], t: usize) -> DMatrix<f64> {
    let d = features[0].ncols();
    DMatrix::from_fn(d, features.len(), |i, a| features[a][(t, i)])
}

/// Latent positions, iid uniform on `[-1,1]`.
pub fn sample_latent_positions(d: usize, r: usize, seed: u64) -> Result<DMatrix<f64>> {
    if d < 2 || r < 1 {
        return Err(Error::dim(format!("need d >= 2 and r >= 1, got d={d} r={r}")));
    }
    let mut rng = rng::stream(seed, Domain::Latent, 0);
    // row-major fill so row i depends only on the first (i+1)*r draws
    let mut z = DMatrix::zeros(d, r);
    for i in 0..d {
        for a in 0..r {
            z[(i, a)] = rng.random_range(-1.0..=1.0);
        }
    }
    Ok(z)
}

pub fn gram_matrix(z: &DMatrix<f64>, kernel: &KernelSpec) -> Result<DMatrix<f64>> {
    kernel.validate()?;
    if z.iter().any(|v| !v.is_finite() || v.abs() > 1.0) {
        return Err(Error::dim("latent positions must lie in [-1,1]^r"));
    }
    let d = z.nrows();
    let rows: Vec<Vec<f64>> = (0..d).map(|i| z.row(i).iter().copied().collect()).collect();
    let mut k = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = kernel.eval_unchecked(&rows[i], &rows[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Draws `n` days of the model. Equivalent to `generate_rows(model, 0, n, k, seed)`.
pub fn generate_panel(model: &LatentModel, n: usize, k: usize, seed: u64) -> Result<PanelData> {
    generate_rows(model, 0, n, k, seed)
}

/// Draws days `start..start+n`. Each day has its own random stream, so a
/// train/test split taken from one index range never reuses draws and the
/// result does not depend on the rayon pool size.
pub fn generate_rows(
    model: &LatentModel,
    start: usize,
    n: usize,
    k: usize,
    seed: u64,
) -> Result<PanelData> {
    if n < 1 || k < 1 {
        return Err(Error::dim(format!("need n >= 1 and k >= 1, got n={n} k={k}")));
    }
    if k != model.g_true.dim() {
        return Err(Error::dim(format!(
            "feature dimension {k} does not match signal input dimension {}",
            model.g_true.dim()
        )));
    }
    let d = model.d;
    let sigma = model.sigma_xi;
    let gram = model.gram();
    // y_t = s_t K + e_t, summed per row so every entry depends on that day only
    let rows: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (start..start + n)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(seed, Domain::PanelRow, t as u64);
            let x: Vec<f64> = (0..d * k).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let s: Vec<f64> = x.chunks_exact(k).map(|xi| model.g_true.eval(xi)).collect();
            let e: Vec<f64> = (0..d)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    sigma * z
                })
                .collect();
            let y: Vec<f64> = (0..d)
                .map(|i| {
                    let col = gram.column(i);
                    s.iter().zip(col.iter()).map(|(a, b)| a * b).sum::<f64>() + e[i]
                })
                .collect();
            (x, s, y)
        })
        .collect();

    let mut features = vec![DMatrix::zeros(n, d); k];
    let mut s = DMatrix::zeros(n, d);
    let mut y = DMatrix::zeros(n, d);
    for (t, (x, srow, yrow)) in rows.into_iter().enumerate() {
        for i in 0..d {
            for (a, f) in features.iter_mut().enumerate() {
                f[(t, i)] = x[i * k + a];
            }
            s[(t, i)] = srow[i];
            y[(t, i)] = yrow[i];
        }
    }
    PanelData::new(features, y, Some(s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(sigma: f64) -> KernelSpec {
        KernelSpec::Gaussian { sigma }
    }

    #[test]
    fn latent_positions_are_deterministic() {
        let a = sample_latent_positions(3, 2, 7).unwrap();
        let b = sample_latent_positions(3, 2, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn latent_positions_reject_bad_dims() {
        assert!(matches!(sample_latent_positions(1, 2, 0), Err(Error::InvalidDimension(_))));
        assert!(matches!(sample_latent_positions(3, 0, 0), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn latent_mean_is_near_zero() {
        // mean of 10^4 uniforms on [-1,1]: std = sqrt(1/3)/100 ~ 0.0058, bound is > 3 sigma
        let z = sample_latent_positions(10_000, 1, 11).unwrap();
        assert!(z.mean().abs() < 0.02);
    }

    #[test]
    fn kernel_values() {
        assert_eq!(gaussian(1.0).eval(&[0.3, -0.2], &[0.3, -0.2]).unwrap(), 1.0);
        let v = gaussian(1.0).eval(&[0.0], &[1.0]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        let imq = KernelSpec::Imq { c: 1.0, alpha: 1.0 };
        // |a-b|^2 = 3
        let v = imq.eval(&[1.0, 1.0, 1.0], &[0.0, 0.0, 0.0]).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
        assert!(gaussian(1.0).eval(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn kernel_spec_parsing() {
        assert_eq!("gaussian:2".parse::<KernelSpec>().unwrap(), gaussian(2.0));
        assert_eq!(
            "imq:1:0.5".parse::<KernelSpec>().unwrap(),
            KernelSpec::Imq { c: 1.0, alpha: 0.5 }
        );
        assert!("gaussian:-1".parse::<KernelSpec>().is_err());
        assert!("rbf".parse::<KernelSpec>().is_err());
        let k = KernelSpec::Imq { c: 0.5, alpha: 2.0 };
        assert_eq!(k.to_string().parse::<KernelSpec>().unwrap(), k);
    }

    #[test]
    fn gram_matrix_examples() {
        let z = DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.1, 0.2]);
        assert_eq!(gram_matrix(&z, &gaussian(1.0)).unwrap(), DMatrix::from_element(2, 2, 1.0));
        let eye = DMatrix::<f64>::identity(2, 2);
        assert_eq!(gram_matrix(&eye, &KernelSpec::InnerProduct).unwrap(), eye);
        let z = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let k = gram_matrix(&z, &gaussian(1.0)).unwrap();
        assert!((k[(0, 1)] - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn signal_spec_parsing() {
        let k: SignalKind = "steps:-1,1".parse().unwrap();
        assert_eq!(k, SignalKind::PiecewiseConstant { breaks: vec![-1.0, 0.0, 1.0], values: vec![-1.0, 1.0] });
        let p: SignalKind = "poly:0,1;0,0,0,2".parse().unwrap();
        assert_eq!(p, SignalKind::Polynomial { coeffs: vec![vec![0.0, 1.0], vec![0.0, 0.0, 0.0, 2.0]] });
        assert_eq!(p.to_string().parse::<SignalKind>().unwrap(), p);
        assert!("piecewise:0,1;1".parse::<SignalKind>().is_err());
        assert!("cubic".parse::<SignalKind>().is_err());
    }

    #[test]
    fn piecewise_cells_are_left_closed() {
        let k = SignalKind::steps(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(k.eval(&[-1.0]), 1.0);
        assert_eq!(k.eval(&[-0.5]), 2.0);
        assert_eq!(k.eval(&[0.0]), 3.0);
        assert_eq!(k.eval(&[1.0]), 4.0);
    }

    #[test]
    fn signal_is_centered() {
        let g = SignalFn::new(SignalKind::Polynomial { coeffs: vec![vec![0.3, 1.0, 2.0]] }, 1).unwrap();
        let (mean, std) = g.monte_carlo_moments(SIGNAL_MC_DRAWS, 99);
        assert!(mean.abs() <= 10.0 * std / 1e3, "mean {mean} std {std}");
    }

    #[test]
    fn standardized_signal_has_unit_variance() {
        let g = SignalFn::standardized(SignalKind::Sinusoid { freq: 1.0, amp: 3.0 }, 2).unwrap();
        let (_, std) = g.monte_carlo_moments(200_000, 5);
        assert!((std - 1.0).abs() < 0.01);
        assert!(SignalFn::standardized(SignalKind::Polynomial { coeffs: vec![] }, 1).is_err());
    }

    #[test]
    fn signal_dimension_is_checked() {
        let kind = SignalKind::Polynomial { coeffs: vec![vec![0.0, 1.0]; 3] };
        assert!(SignalFn::new(kind, 2).is_err());
    }

    fn small_model(g: SignalFn, sigma_xi: f64) -> LatentModel {
        LatentModel::new(12, 2, gaussian(1.0), g, sigma_xi, 3).unwrap()
    }

    #[test]
    fn zero_signal_zero_noise_gives_zero_panel() {
        let m = small_model(SignalFn::zero(1), 0.0);
        let p = generate_panel(&m, 20, 1, 1).unwrap();
        assert!(p.y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn noiseless_panel_reconstructs() {
        let g = SignalFn::standardized("poly:0,1,0,1".parse().unwrap(), 1).unwrap();
        let m = small_model(g, 0.0);
        let p = generate_panel(&m, 30, 1, 9).unwrap();
        let s = p.signal.as_ref().unwrap();
        let resid = &p.y - s * m.gram();
        assert!(resid.amax() <= 1e-10);
    }

    #[test]
    fn generation_checks_feature_dimension() {
        let m = small_model(SignalFn::zero(1), 0.1);
        assert!(matches!(generate_panel(&m, 5, 2, 0), Err(Error::InvalidDimension(_))));
        assert!(generate_panel(&m, 0, 1, 0).is_err());
    }

    #[test]
    fn row_ranges_stitch_together() {
        let g = SignalFn::new("sin:1,1".parse().unwrap(), 1).unwrap();
        let m = small_model(g, 0.5);
        let all = generate_panel(&m, 10, 1, 4).unwrap();
        let tail = generate_rows(&m, 6, 4, 1, 4).unwrap();
        assert_eq!(all.y.rows(6, 4).into_owned(), tail.y);
        assert_eq!(all.features[0].rows(6, 4).into_owned(), tail.features[0]);
    }

    #[test]
    fn generation_is_independent_of_thread_count() {
        let g = SignalFn::new("sin:1,1".parse().unwrap(), 1).unwrap();
        let m = small_model(g, 0.5);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| generate_panel(&m, 40, 1, 8).unwrap());
        let b = four.install(|| generate_panel(&m, 40, 1, 8).unwrap());
        assert_eq!(a, b);
    }
}
