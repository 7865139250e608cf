//! Symmetric spectral utilities.

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_finite, ensure_same_shape, Error, Result};

const EIG_EPS: f64 = 1e-15;
const EIG_MAX_ITER: usize = 0; // 0 = iterate until convergence

/// Eigen-decomposition `A = V diag(lambda) V^T`, eigenvalues sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Rebuilds `V diag(f(lambda_i)) V^T` over the leading `rank` pairs.
    fn rebuild(&self, rank: usize, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let v = self.eigenvectors.columns(0, rank);
        let mut scaled = v.clone_owned();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.eigenvalues[j]);
        }
        let m = scaled * v.transpose();
        (&m + m.transpose()) * 0.5
    }

    fn check_rank(&self, rank: usize) -> Result<()> {
        if rank < 1 || rank > self.dim() {
            return Err(Error::dim(format!("rank {rank} outside 1..={}", self.dim())));
        }
        Ok(())
    }
}

pub fn eig_sym(a: &DMatrix<f64>) -> Result<Spectrum> {
    if !a.is_square() {
        return Err(Error::dim(format!("eig_sym needs a square matrix, got {:?}", a.shape())));
    }
    ensure_finite(a, "eig_sym input")?;
    let scale = a.amax();
    let asym = (a - a.transpose()).amax();
    if asym > 1e-8 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Numeric(format!("matrix is not symmetric (max |A - A^T| = {asym:e})")));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym
        .try_symmetric_eigen(EIG_EPS, EIG_MAX_ITER)
        .ok_or_else(|| Error::Numeric("symmetric eigen-decomposition did not converge".into()))?;

    let d = a.nrows();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let eigenvalues = DVector::from_iterator(d, order.iter().map(|&i| eig.eigenvalues[i]));
    let eigenvectors = DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Spectrum { eigenvalues, eigenvectors })
}

/// Rank-`rank` truncation `sum_{i<=rank} lambda_i v_i v_i^T`.
pub fn low_rank_project(spec: &Spectrum, rank: usize) -> Result<DMatrix<f64>> {
    spec.check_rank(rank)?;
    Ok(spec.rebuild(rank, |l| l))
}

/// `sum_{i<=rank} sqrt(max(lambda_i, 0)) v_i v_i^T`.
pub fn psd_sqrt(spec: &Spectrum, rank: usize) -> Result<DMatrix<f64>> {
    spec.check_rank(rank)?;
    Ok(spec.rebuild(rank, |l| l.max(0.0).sqrt()))
}

pub fn frobenius_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    ensure_same_shape(a, b, "frobenius_distance")?;
    Ok((a - b).norm())
}

/// Largest singular value. Symmetric input goes through the eigen-decomposition,
/// anything else through power iteration on `A^T A`.
pub fn spectral_norm(a: &DMatrix<f64>) -> Result<f64> {
    ensure_finite(a, "spectral_norm input")?;
    if a.is_empty() {
        return Ok(0.0);
    }
    if a.is_square() && (a - a.transpose()).amax() <= 1e-12 * a.amax() {
        let spec = eig_sym(a)?;
        return Ok(spec.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs())));
    }
    let ata = a.transpose() * a;
    let n = ata.nrows();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64) * 1e-3);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        let w = &ata * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - lambda).abs() <= 1e-10 * next.abs().max(1e-300) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    Ok(lambda.max(0.0).sqrt())
}

/// Moore-Penrose solve of a symmetric system, dropping eigenvalues at or
/// below `rel_cutoff * lambda_max`.
pub(crate) fn pinv_solve_sym(a: &DMatrix<f64>, b: &DVector<f64>, rel_cutoff: f64) -> Result<DVector<f64>> {
    let spec = eig_sym(a)?;
    let lmax = spec.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let mut x = DVector::zeros(a.nrows());
    if lmax == 0.0 {
        return Ok(x);
    }
    for (j, &l) in spec.eigenvalues.iter().enumerate() {
        if l.abs() > rel_cutoff * lmax {
            let v = spec.eigenvectors.column(j);
            x += v * (v.dot(b) / l);
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Domain};
    use rand::Rng;

    fn random_sym(d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rng::stream(seed, Domain::Calibration, 0);
        let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        &m + m.transpose()
    }

    fn random_psd(d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rng::stream(seed, Domain::Calibration, 1);
        let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        &m * m.transpose()
    }

    #[test]
    fn identity_and_diagonal() {
        let s = eig_sym(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(s.eigenvalues.as_slice(), &[1.0, 1.0, 1.0]);
        let s = eig_sym(&DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]))).unwrap();
        assert_eq!(s.eigenvalues.as_slice(), &[3.0, 2.0, 1.0]);
    }

    #[test]
    fn random_reconstruction_and_orthonormality() {
        let a = random_sym(50, 1);
        let s = eig_sym(&a).unwrap();
        let recon = low_rank_project(&s, 50).unwrap();
        assert!((&a - recon).norm() <= 1e-6 * a.norm());
        let vtv = s.eigenvectors.transpose() * &s.eigenvectors;
        assert!((vtv - DMatrix::identity(50, 50)).amax() <= 1e-8);
        assert!(s.eigenvalues.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_non_finite_and_asymmetric() {
        let mut a = DMatrix::identity(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(eig_sym(&a), Err(Error::Numeric(_))));
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(eig_sym(&b), Err(Error::Numeric(_))));
    }

    #[test]
    fn rank_one_projection() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let p = low_rank_project(&eig_sym(&a).unwrap(), 1).unwrap();
        assert!((p - DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 0.0])).amax() < 1e-15);
        let s = eig_sym(&a).unwrap();
        assert!(low_rank_project(&s, 0).is_err());
        assert!(low_rank_project(&s, 3).is_err());
    }

    #[test]
    fn eckart_young_against_random_competitors() {
        let a = random_sym(12, 3);
        let s = eig_sym(&a).unwrap();
        let rank = 3;
        let best = (&a - low_rank_project(&s, rank).unwrap()).norm();
        let mut rng = rng::stream(17, Domain::Calibration, 2);
        for _ in 0..100 {
            let u = DMatrix::from_fn(12, rank, |_, _| rng.random_range(-1.0..1.0));
            let w = DMatrix::from_fn(rank, 12, |_, _| rng.random_range(-1.0..1.0));
            let b = u * w;
            assert!(best <= (&a - b).norm());
        }
    }

    #[test]
    fn sqrt_examples() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        let r = psd_sqrt(&eig_sym(&a).unwrap(), 2).unwrap();
        assert!((r - DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0])).amax() < 1e-15);
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, -1e-12]);
        let r = psd_sqrt(&eig_sym(&a).unwrap(), 2).unwrap();
        assert!((r - DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0])).amax() < 1e-15);
    }

    #[test]
    fn sqrt_squares_to_projection() {
        let a = random_psd(30, 4);
        let s = eig_sym(&a).unwrap();
        for rank in [1, 5, 30] {
            let r = psd_sqrt(&s, rank).unwrap();
            let p = low_rank_project(&s, rank).unwrap();
            assert!((&r * &r - p).norm() <= 1e-6 * a.norm());
        }
    }

    #[test]
    fn norms() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 4.0]);
        assert_eq!(frobenius_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(frobenius_distance(&a, &DMatrix::zeros(2, 2)).unwrap(), 5.0);
        assert!(frobenius_distance(&a, &DMatrix::zeros(2, 3)).is_err());
        let n = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 0.0, 0.0]);
        // singular values are sqrt(eig(A^T A)) = sqrt(eig(diag(0, 4)))
        let oracle = eig_sym(&(n.transpose() * &n)).unwrap().eigenvalues[0].sqrt();
        assert!((spectral_norm(&n).unwrap() - oracle).abs() < 1e-9);
        assert!((spectral_norm(&n).unwrap() - 2.0).abs() < 1e-9);
        assert!((spectral_norm(&a).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn pinv_handles_singular_systems() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 2.0]);
        let x = pinv_solve_sym(&a, &b, 1e-10).unwrap();
        assert!((x - DVector::from_vec(vec![1.0, 1.0])).amax() < 1e-12);
        let z = pinv_solve_sym(&DMatrix::zeros(2, 2), &b, 1e-10).unwrap();
        assert_eq!(z, DVector::zeros(2));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn reconstruction_holds(d in 2usize..16, seed in 0u64..1000) {
                let a = random_sym(d, seed);
                let s = eig_sym(&a).unwrap();
                let rec = low_rank_project(&s, d).unwrap();
                prop_assert!((&a - rec).norm() <= 1e-6 * a.norm().max(1e-300));
            }

            #[test]
            fn projection_is_idempotent(d in 3usize..12, rank in 1usize..3, seed in 0u64..1000) {
                // signed truncation is only idempotent when the kept eigenvalues lead
                let a = random_psd(d, seed);
                let p = low_rank_project(&eig_sym(&a).unwrap(), rank).unwrap();
                let pp = low_rank_project(&eig_sym(&p).unwrap(), rank).unwrap();
                prop_assert!((&p - pp).norm() <= 1e-8 * p.norm().max(1.0));
            }

            #[test]
            fn full_sqrt_squares_to_psd_part(d in 2usize..12, seed in 0u64..1000) {
                let a = random_sym(d, seed);
                let s = eig_sym(&a).unwrap();
                let r = psd_sqrt(&s, d).unwrap();
                let pos = s.rebuild(d, |l| l.max(0.0));
                prop_assert!((&r * &r - pos).norm() <= 1e-6 * a.norm());
            }
        }
    }
}
