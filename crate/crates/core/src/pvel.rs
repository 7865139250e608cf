//! Gradient boosting for the vector model `y_t = K_hat * sum_m g_m(x_t)` with
//! linear weak learners.
//!
//! A weak learner picks three features and fits
//!
//! ```text
//! g(x) = b1 x_a + b2 x_b + b3 x_c + b4 x_a x_b + b5 x_a x_c + b6 x_b x_c
//! ```
//!
//! where every term is mixed across entities through `K_hat` before the least
//! squares fit. Mixing a day's term vector is a product with `K_hat^T`, so a
//! whole `n x d` term matrix `T` mixes as `T K_hat^T`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evalkit::pearson;
use crate::linalg::pinv_solve_sym;

const PINV_CUTOFF: f64 = 1e-10;

/// Which terms a weak learner may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnerForm {
    /// Three linear terms and their three pairwise products.
    Interactions,
    /// Three linear terms only; the product coefficients stay zero.
    LinearOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearLearner {
    /// Selected feature indices, ascending.
    pub idx: [usize; 3],
    pub beta: [f64; 6],
}

impl LinearLearner {
    pub fn terms(&self, x: &[f64]) -> [f64; 6] {
        let [a, b, c] = self.idx.map(|j| x[j]);
        [a, b, c, a * b, a * c, b * c]
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms(x).iter().zip(&self.beta).map(|(t, b)| t * b).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostedModel {
    pub learners: Vec<LinearLearner>,
    pub eta: f64,
    pub k: usize,
}

impl BoostedModel {
    pub fn b(&self) -> usize {
        self.learners.len()
    }

    /// `eta * sum_m g_m(x)` for one entity.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eta * self.learners.iter().map(|l| l.eval(x)).sum::<f64>()
    }
}

/// Result of a boosting run with its training trace.
#[derive(Debug, Clone)]
pub struct BoostFit {
    pub model: BoostedModel,
    pub residual: DMatrix<f64>,
    /// In-sample MSE before round 1 and after every round (`b + 1` entries).
    pub train_mse: Vec<f64>,
}

/// `F^(t)` for one day: column `i` is `sum_j K_hat[i,j] x_{t,j}` (`k x d`).
pub fn neighbor_features(k_hat: &DMatrix<f64>, x_t: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = k_hat.nrows();
    if !k_hat.is_square() || x_t.nrows() != d {
        return Err(Error::dim(format!(
            "K_hat {:?} incompatible with day features {:?}",
            k_hat.shape(),
            x_t.shape()
        )));
    }
    Ok((k_hat * x_t).transpose())
}

/// Neighbor-mixed copies of every feature slice: `F_a = X_a K_hat^T` (`n x d`),
/// so `F_a[(t, i)]` is row `a`, column `i` of the day-`t` neighbor features.
#[derive(Debug, Clone)]
pub struct MixedFeatures(pub Vec<DMatrix<f64>>);

impl MixedFeatures {
    pub fn new(features: &[DMatrix<f64>], k_hat: &DMatrix<f64>) -> Result<Self> {
        check_inputs(features, k_hat)?;
        let kt = k_hat.transpose();
        Ok(MixedFeatures(features.par_iter().map(|x| x * &kt).collect()))
    }
}

fn check_inputs(features: &[DMatrix<f64>], k_hat: &DMatrix<f64>) -> Result<()> {
    let Some(first) = features.first() else {
        return Err(Error::dim("no feature slices"));
    };
    let d = first.ncols();
    if features.iter().any(|f| f.shape() != first.shape()) {
        return Err(Error::dim("feature slices differ in shape"));
    }
    if k_hat.shape() != (d, d) {
        return Err(Error::dim(format!("K_hat is {:?}, expected ({d}, {d})", k_hat.shape())));
    }
    Ok(())
}

/// `r_j = sum_t corr(F^(t)_{j,:}, y_res_t)`; days where either side has zero
/// variance contribute 0.
pub fn feature_scores(mixed: &MixedFeatures, y_res: &DMatrix<f64>) -> Result<Vec<f64>> {
    if mixed.0.iter().any(|f| f.shape() != y_res.shape()) {
        return Err(Error::dim("residuals do not match the feature shape"));
    }
    Ok(mixed
        .0
        .par_iter()
        .map(|f| {
            (0..y_res.nrows())
                .map(|t| {
                    let a: Vec<f64> = f.row(t).iter().copied().collect();
                    let b: Vec<f64> = y_res.row(t).iter().copied().collect();
                    pearson(&a, &b).unwrap_or(0.0)
                })
                .sum()
        })
        .collect())
}

/// Indices of the three largest scores (ties to the lower index), returned ascending.
pub fn select_features(mixed: &MixedFeatures, y_res: &DMatrix<f64>) -> Result<[usize; 3]> {
    let k = mixed.0.len();
    if k < 3 {
        return Err(Error::dim(format!("feature selection needs k >= 3, got {k}")));
    }
    let r = feature_scores(mixed, y_res)?;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| r[j].total_cmp(&r[i]).then(i.cmp(&j)));
    let mut idx = [order[0], order[1], order[2]];
    idx.sort_unstable();
    Ok(idx)
}

fn dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

struct Fitted {
    learner: LinearLearner,
    fit: DMatrix<f64>,
}

fn fit_on_selection(
    idx: [usize; 3],
    y_res: &DMatrix<f64>,
    features: &[DMatrix<f64>],
    mixed: &MixedFeatures,
    k_hat: &DMatrix<f64>,
    form: LearnerForm,
) -> Result<Fitted> {
    let [a, b, c] = idx;
    let mut regressors: Vec<DMatrix<f64>> = vec![mixed.0[a].clone(), mixed.0[b].clone(), mixed.0[c].clone()];
    if form == LearnerForm::Interactions {
        let kt = k_hat.transpose();
        let products: Vec<DMatrix<f64>> = [(a, b), (a, c), (b, c)]
            .par_iter()
            .map(|&(p, q)| features[p].component_mul(&features[q]) * &kt)
            .collect();
        regressors.extend(products);
    }
    let m = regressors.len();
    let mut gram = DMatrix::zeros(m, m);
    let mut rhs = DVector::zeros(m);
    for p in 0..m {
        rhs[p] = dot(&regressors[p], y_res);
        for q in p..m {
            let v = dot(&regressors[p], &regressors[q]);
            gram[(p, q)] = v;
            gram[(q, p)] = v;
        }
    }
    let sol = pinv_solve_sym(&gram, &rhs, PINV_CUTOFF)?;
    let mut beta = [0.0; 6];
    let mut fit = DMatrix::zeros(y_res.nrows(), y_res.ncols());
    for p in 0..m {
        beta[p] = sol[p];
        fit += &regressors[p] * sol[p];
    }
    Ok(Fitted { learner: LinearLearner { idx, beta }, fit })
}

/// One weak learner fitted to `y_res`.
pub fn fit_weak_learner(
    y_res: &DMatrix<f64>,
    features: &[DMatrix<f64>],
    k_hat: &DMatrix<f64>,
    form: LearnerForm,
) -> Result<LinearLearner> {
    let mixed = MixedFeatures::new(features, k_hat)?;
    let idx = select_features(&mixed, y_res)?;
    Ok(fit_on_selection(idx, y_res, features, &mixed, k_hat, form)?.learner)
}

pub fn boost(
    y: &DMatrix<f64>,
    features: &[DMatrix<f64>],
    k_hat: &DMatrix<f64>,
    eta: f64,
    b: usize,
) -> Result<BoostedModel> {
    Ok(boost_with_trace(y, features, k_hat, eta, b, LearnerForm::Interactions)?.model)
}

pub fn boost_with_trace(
    y: &DMatrix<f64>,
    features: &[DMatrix<f64>],
    k_hat: &DMatrix<f64>,
    eta: f64,
    b: usize,
    form: LearnerForm,
) -> Result<BoostFit> {
    if !(eta > 0.0) || b < 1 {
        return Err(Error::Numeric(format!("need eta > 0 and b >= 1, got eta={eta} b={b}")));
    }
    let mixed = MixedFeatures::new(features, k_hat)?;
    if y.shape() != features[0].shape() {
        return Err(Error::dim("Y does not match the feature shape"));
    }
    let size = y.len().max(1) as f64;
    let mut residual = y.clone();
    let mut train_mse = vec![residual.norm_squared() / size];
    let mut learners = Vec::with_capacity(b);
    for round in 0..b {
        let idx = select_features(&mixed, &residual)?;
        let fitted = fit_on_selection(idx, &residual, features, &mixed, k_hat, form)?;
        residual -= fitted.fit * eta;
        train_mse.push(residual.norm_squared() / size);
        log::debug!("round {}: features {:?}, mse {:.6e}", round + 1, idx, train_mse[round + 1]);
        learners.push(fitted.learner);
    }
    let model = BoostedModel { learners, eta, k: features.len() };
    Ok(BoostFit { model, residual, train_mse })
}

/// `y_hat_{t,i} = sum_j K_hat[i,j] * eta * sum_m g_m(x_{t,j})`.
pub fn predict(model: &BoostedModel, features: &[DMatrix<f64>], k_hat: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_inputs(features, k_hat)?;
    if features.len() != model.k {
        return Err(Error::dim(format!(
            "model expects {} features, got {}",
            model.k,
            features.len()
        )));
    }
    let (n, d) = features[0].shape();
    let mut x = vec![0.0; model.k];
    let mut g = DMatrix::zeros(n, d);
    for t in 0..n {
        for i in 0..d {
            for (a, v) in x.iter_mut().enumerate() {
                *v = features[a][(t, i)];
            }
            g[(t, i)] = model.eval(&x);
        }
    }
    Ok(g * k_hat.transpose())
}
