//! Python bindings. Matrices cross the boundary as lists of rows.

use std::collections::HashMap;

use lik_core::{evalkit, gest, kestim, linalg, pvel, synth};
use lik_core::{DMatrix, EvalConfig, ErrorClass, ForecastSet, KernelSpec, LatentModel, LearnerForm, SignalFn};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

create_exception!(lik, AlgorithmError, PyRuntimeError, "Typed algorithmic failure; the message starts with its name.");

type Rows = Vec<Vec<f64>>;

fn py_err(e: lik_core::Error) -> PyErr {
    match e.class() {
        ErrorClass::Usage => PyValueError::new_err(e.to_string()),
        ErrorClass::Algorithmic => AlgorithmError::new_err(e.to_string()),
    }
}

fn core<T>(r: lik_core::Result<T>) -> PyResult<T> {
    r.map_err(py_err)
}

/// Rectangular, non-empty rows to a matrix.
pub fn to_matrix(rows: &[Vec<f64>]) -> lik_core::Result<DMatrix<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if n == 0 || d == 0 {
        return Err(lik_core::Error::InvalidDimension("matrix must be non-empty".into()));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != d) {
        return Err(lik_core::Error::InvalidDimension(format!(
            "row {i} has {} entries, expected {d}",
            rows[i].len()
        )));
    }
    Ok(DMatrix::from_fn(n, d, |t, j| rows[t][j]))
}

pub fn to_rows(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn to_matrices(slices: &[Rows]) -> lik_core::Result<Vec<DMatrix<f64>>> {
    slices.iter().map(|s| to_matrix(s)).collect()
}

/// Latent-position model with a fixed Gram matrix.
#[pyclass(name = "LatentModel", module = "lik")]
struct PyLatentModel {
    inner: LatentModel,
}

#[pymethods]
impl PyLatentModel {
    #[new]
    #[pyo3(signature = (d, r=2, kernel="gaussian:1", g="poly:0,1;0,0.6;0,-0.5;0;0", k=5, sigma_xi=1.0, standardize=true, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        d: usize,
        r: usize,
        kernel: &str,
        g: &str,
        k: usize,
        sigma_xi: f64,
        standardize: bool,
        seed: u64,
    ) -> PyResult<Self> {
        let kernel: KernelSpec = core(kernel.parse())?;
        let kind = core(g.parse())?;
        let signal = if standardize {
            core(SignalFn::standardized(kind, k))?
        } else {
            core(SignalFn::new(kind, k))?
        };
        Ok(PyLatentModel { inner: core(LatentModel::new(d, r, kernel, signal, sigma_xi, seed))? })
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.g_true.dim()
    }

    fn gram(&self) -> Rows {
        to_rows(self.inner.gram())
    }

    /// Days `start..start+n` as `(features, y)`; features is a list of `k` slices.
    #[pyo3(signature = (n, start=0))]
    fn generate(&self, n: usize, start: usize) -> PyResult<(Vec<Rows>, Rows)> {
        let p = core(synth::generate_rows(&self.inner, start, n, self.inner.g_true.dim(), self.inner.seed))?;
        Ok((p.features.iter().map(to_rows).collect(), to_rows(&p.y)))
    }
}

/// Fitted piecewise-constant `g`.
#[pyclass(name = "PiecewiseG", module = "lik")]
struct PyPiecewiseG {
    inner: lik_core::PiecewiseG,
}

#[pymethods]
impl PyPiecewiseG {
    #[getter]
    fn mu(&self) -> Vec<f64> {
        self.inner.mu.clone()
    }

    #[getter]
    fn n_used(&self) -> Vec<usize> {
        self.inner.n_used.clone()
    }

    #[getter]
    fn failed_bins(&self) -> usize {
        self.inner.failed_bins()
    }

    /// Cell edges per feature axis.
    #[getter]
    fn axes(&self) -> Vec<Vec<f64>> {
        self.inner.partition.axes().to_vec()
    }

    fn eval(&self, x: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.inner.partition.k() {
            return Err(PyValueError::new_err(format!("expected {} coordinates", self.inner.partition.k())));
        }
        Ok(self.inner.eval(&x))
    }

    fn predict(&self, features: Vec<Rows>, k_hat: Rows) -> PyResult<Rows> {
        let f = core(to_matrices(&features))?;
        let k = core(to_matrix(&k_hat))?;
        Ok(to_rows(&core(gest::predict_piecewise(&self.inner, &f, &k))?))
    }

    fn __repr__(&self) -> String {
        format!("PiecewiseG(cells={}, failed={})", self.inner.mu.len(), self.inner.failed_bins())
    }
}

/// Boosted sum of three-feature learners.
#[pyclass(name = "BoostedModel", module = "lik")]
struct PyBoostedModel {
    inner: lik_core::BoostedModel,
    train_mse: Vec<f64>,
}

#[pymethods]
impl PyBoostedModel {
    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta
    }

    #[getter]
    fn rounds(&self) -> usize {
        self.inner.b()
    }

    /// In-sample MSE before the first round and after each round.
    #[getter]
    fn train_mse(&self) -> Vec<f64> {
        self.train_mse.clone()
    }

    /// `(indices, coefficients)` per round.
    #[getter]
    fn learners(&self) -> Vec<([usize; 3], [f64; 6])> {
        self.inner.learners.iter().map(|l| (l.idx, l.beta)).collect()
    }

    fn eval(&self, x: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.inner.k {
            return Err(PyValueError::new_err(format!("expected {} coordinates", self.inner.k)));
        }
        Ok(self.inner.eval(&x))
    }

    fn predict(&self, features: Vec<Rows>, k_hat: Rows) -> PyResult<Rows> {
        let f = core(to_matrices(&features))?;
        let k = core(to_matrix(&k_hat))?;
        Ok(to_rows(&core(pvel::predict(&self.inner, &f, &k))?))
    }

    fn __repr__(&self) -> String {
        format!("BoostedModel(rounds={}, eta={}, k={})", self.inner.b(), self.inner.eta, self.inner.k)
    }
}

/// `(k_hat, rank_star, delta)`; `delta=None` picks the threshold from the spectrum.
#[pyfunction]
#[pyo3(signature = (y, delta=None))]
fn estimate_k(y: Rows, delta: Option<f64>) -> PyResult<(Rows, usize, f64)> {
    let y = core(to_matrix(&y))?;
    let est = match delta {
        Some(d) => core(kestim::estimate_k_dd(&y, d))?,
        None => core(kestim::estimate_k_auto(&y))?,
    };
    Ok((to_rows(&est.k_hat), est.rank_star, est.delta))
}

/// Eigenvalues of a symmetric matrix, descending.
#[pyfunction]
fn eigenvalues(a: Rows) -> PyResult<Vec<f64>> {
    let a = core(to_matrix(&a))?;
    Ok(core(linalg::eig_sym(&a))?.eigenvalues.iter().copied().collect())
}

#[pyfunction]
fn gram_error(k_hat: Rows, k: Rows) -> PyResult<f64> {
    core(kestim::gram_error(&core(to_matrix(&k_hat))?, &core(to_matrix(&k))?))
}

#[pyfunction]
fn covariance_error(y: Rows, k: Rows) -> PyResult<f64> {
    core(kestim::covariance_error(&core(to_matrix(&y))?, &core(to_matrix(&k))?))
}

#[pyfunction]
#[pyo3(signature = (features, y, k_hat, ell=10, c=0.5, seed=0))]
fn estimate_g(features: Vec<Rows>, y: Rows, k_hat: Rows, ell: usize, c: f64, seed: u64) -> PyResult<PyPiecewiseG> {
    let f = core(to_matrices(&features))?;
    let y = core(to_matrix(&y))?;
    let k = core(to_matrix(&k_hat))?;
    let part = core(gest::build_partition(&gest::calibration_sample(&f), ell))?;
    Ok(PyPiecewiseG { inner: core(gest::estimate_g(&f, &y, &k, &part, c, seed))? })
}

#[pyfunction]
#[pyo3(signature = (y, features, k_hat, eta=0.1, rounds=50, linear_only=false))]
fn boost(y: Rows, features: Vec<Rows>, k_hat: Rows, eta: f64, rounds: usize, linear_only: bool) -> PyResult<PyBoostedModel> {
    let f = core(to_matrices(&features))?;
    let y = core(to_matrix(&y))?;
    let k = core(to_matrix(&k_hat))?;
    let form = if linear_only { LearnerForm::LinearOnly } else { LearnerForm::Interactions };
    let fit = core(pvel::boost_with_trace(&y, &f, &k, eta, rounds, form))?;
    Ok(PyBoostedModel { inner: fit.model, train_mse: fit.train_mse })
}

/// Report as a dict of metric name to value, plus `pnl_series`.
#[pyfunction]
#[pyo3(signature = (y, yhat, weights=None, nw_lag=4, quantile=0.2, horizon=5.0))]
fn evaluate(
    py: Python<'_>,
    y: Rows,
    yhat: Rows,
    weights: Option<Rows>,
    nw_lag: usize,
    quantile: f64,
    horizon: f64,
) -> PyResult<Py<PyAny>> {
    let y = core(to_matrix(&y))?;
    let yhat = core(to_matrix(&yhat))?;
    let w = weights.map(|w| to_matrix(&w)).transpose().map_err(py_err)?;
    let cfg = EvalConfig { nw_lag, quantile, horizon };
    let report = core(evalkit::evaluate(&y, &yhat, w.as_ref(), &cfg))?;
    let metrics: HashMap<&str, f64> = report.metrics().into_iter().collect();
    let out = metrics.into_pyobject(py)?;
    out.set_item("pnl_series", report.pnl_series)?;
    Ok(out.into_any().unbind())
}

#[pyfunction]
#[pyo3(signature = (x, lag=4))]
fn newey_west_tstat(x: Vec<f64>, lag: usize) -> PyResult<f64> {
    core(evalkit::newey_west_tstat(&x, lag))
}

#[pyfunction]
fn consolidate(forecasts: Vec<Rows>, tstats: Vec<f64>) -> PyResult<Rows> {
    let set = core(ForecastSet::unnamed(core(to_matrices(&forecasts))?, tstats))?;
    Ok(to_rows(&core(evalkit::consolidate(&set))?))
}

#[pymodule]
fn lik(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("AlgorithmError", m.py().get_type::<AlgorithmError>())?;
    m.add_class::<PyLatentModel>()?;
    m.add_class::<PyPiecewiseG>()?;
    m.add_class::<PyBoostedModel>()?;
    m.add_function(wrap_pyfunction!(estimate_k, m)?)?;
    m.add_function(wrap_pyfunction!(eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(gram_error, m)?)?;
    m.add_function(wrap_pyfunction!(covariance_error, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_g, m)?)?;
    m.add_function(wrap_pyfunction!(boost, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(newey_west_tstat, m)?)?;
    m.add_function(wrap_pyfunction!(consolidate, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip() {
        let rows = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]];
        let m = to_matrix(&rows).unwrap();
        assert_eq!(m.shape(), (2, 3));
        assert_eq!(m[(1, 0)], 4.0);
        assert_eq!(to_rows(&m), rows);
    }

    #[test]
    fn ragged_or_empty_rows_are_rejected() {
        assert!(to_matrix(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(to_matrix(&[]).is_err());
        assert!(to_matrix(&[vec![]]).is_err());
    }
}
