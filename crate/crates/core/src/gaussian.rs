//! Multivariate Gaussians carried as `(mean, lower Cholesky factor)` pairs.
//!
//! Dense covariances are only ever reconstructed for reporting; densities,
//! sampling and divergences go through triangular solves against the factor.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::special::HALF_LN_2PI;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDensity {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
}

impl GaussianDensity {
    /// Builds a density from a mean and a lower-triangular factor with a
    /// strictly positive diagonal. Entries above the diagonal must be zero.
    pub fn new(mean: DVector<f64>, chol: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::Empty("gaussian mean"));
        }
        check_dim("cholesky rows", d, chol.nrows())?;
        check_dim("cholesky cols", d, chol.ncols())?;
        if mean.iter().chain(chol.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gaussian parameters"));
        }
        for i in 0..d {
            if chol[(i, i)] <= 0.0 {
                return Err(Error::invalid(format!(
                    "cholesky diagonal entry {i} must be positive, got {}",
                    chol[(i, i)]
                )));
            }
            for j in (i + 1)..d {
                if chol[(i, j)] != 0.0 {
                    return Err(Error::invalid("cholesky factor must be lower triangular"));
                }
            }
        }
        Ok(Self { mean, chol })
    }

    pub fn from_covariance(mean: DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        check_dim("covariance rows", mean.len(), cov.nrows())?;
        let sym = (cov + cov.transpose()) * 0.5;
        let chol = sym.cholesky().ok_or(Error::NotPositiveDefinite("covariance"))?.unpack();
        Self::new(mean, chol)
    }

    pub fn diagonal(mean: DVector<f64>, variances: &[f64]) -> Result<Self> {
        check_dim("variances", mean.len(), variances.len())?;
        if variances.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::invalid("variances must be positive"));
        }
        let sd = DVector::from_iterator(variances.len(), variances.iter().map(|v| v.sqrt()));
        Self::new(mean, DMatrix::from_diagonal(&sd))
    }

    pub fn standard(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Empty("gaussian mean"));
        }
        Self::new(DVector::zeros(d), DMatrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        &self.chol * self.chol.transpose()
    }

    /// Marginal standard deviations, i.e. the row norms of the factor.
    pub fn std_devs(&self) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.chol.row_iter().map(|r| r.norm()))
    }

    /// `Σᵢ ln Lᵢᵢ`, half the log-determinant of the covariance.
    pub fn half_log_det(&self) -> f64 {
        self.chol.diagonal().iter().map(|v| v.ln()).sum()
    }

    /// Solves `L v = b` by forward substitution.
    pub fn whiten(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve_lower_triangular(b).expect("cholesky diagonal is positive")
    }

    /// Joint marginal over a subset of coordinates.
    pub fn marginal(&self, indices: &[usize]) -> Result<GaussianDensity> {
        let cov = self.covariance();
        let k = indices.len();
        if indices.iter().any(|&i| i >= self.dim()) {
            return Err(Error::invalid("marginal index out of range"));
        }
        let mean = DVector::from_iterator(k, indices.iter().map(|&i| self.mean[i]));
        let sub = DMatrix::from_fn(k, k, |r, c| cov[(indices[r], indices[c])]);
        GaussianDensity::from_covariance(mean, &sub)
    }

    pub fn logpdf(&self, x: &[f64]) -> Result<f64> {
        mvn_logpdf(x, self)
    }
}

/// Log-density of `x` under `g`.
pub fn mvn_logpdf(x: &[f64], g: &GaussianDensity) -> Result<f64> {
    check_dim("logpdf argument", g.dim(), x.len())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("logpdf argument"));
    }
    let diff = DVector::from_column_slice(x) - g.mean();
    let v = g.whiten(&diff);
    let d = g.dim() as f64;
    Ok(-d * HALF_LN_2PI - g.half_log_det() - 0.5 * v.norm_squared())
}

/// Reparameterized draws: row `i` of the result is `mean + L·epsᵢ`.
pub fn mvn_sample(g: &GaussianDensity, eps: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dim("noise columns", g.dim(), eps.ncols())?;
    let mut out = eps * g.chol().transpose();
    for mut row in out.row_iter_mut() {
        row += g.mean().transpose();
    }
    Ok(out)
}

/// Closed-form `KL(q ‖ p)`.
pub fn kl_gaussians(q: &GaussianDensity, p: &GaussianDensity) -> Result<f64> {
    check_dim("kl dimensions", p.dim(), q.dim())?;
    let d = q.dim() as f64;
    let m = p.chol().solve_lower_triangular(q.chol()).expect("cholesky diagonal is positive");
    let trace = m.norm_squared();
    let v = p.whiten(&(p.mean() - q.mean()));
    let kl = 0.5 * (trace + v.norm_squared() - d) + p.half_log_det() - q.half_log_det();
    // Round-off can push an exact zero slightly negative.
    Ok(kl.max(0.0))
}

/// `ln Σ exp(vᵢ)` evaluated with a max shift.
pub fn logsumexp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::Empty("logsumexp input"));
    }
    if v.iter().any(|x| x.is_nan()) {
        return Err(Error::NonFinite("logsumexp input"));
    }
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return Ok(m);
    }
    let s: f64 = v.iter().map(|x| (x - m).exp()).sum();
    Ok(m + s.ln())
}

/// Normalized weights `exp(vᵢ - logsumexp(v))`.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    let lse = logsumexp(v)?;
    if !lse.is_finite() {
        return Err(Error::NonFinite("softmax normalizer"));
    }
    Ok(v.iter().map(|x| (x - lse).exp()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g1(mean: f64, var: f64) -> GaussianDensity {
        GaussianDensity::diagonal(DVector::from_element(1, mean), &[var]).unwrap()
    }

    #[test]
    fn logpdf_examples() {
        let v = mvn_logpdf(&[0.0], &g1(0.0, 1.0)).unwrap();
        assert!((v + 0.918_938_533_204_672_7).abs() < 1e-14);

        let g = GaussianDensity::standard(2).unwrap();
        let v = mvn_logpdf(&[1.0, 1.0], &g).unwrap();
        assert!((v - (-(2.0 * std::f64::consts::PI).ln() - 1.0)).abs() < 1e-14);
        assert!((v + 2.837_877_066_409_345).abs() < 1e-12);

        let chol = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.3, 0.5, 0.0, -1.0, 0.2, 1.5]);
        let g = GaussianDensity::new(DVector::from_vec(vec![1.0, -2.0, 0.5]), chol).unwrap();
        let v = mvn_logpdf(&[1.0, -2.0, 0.5], &g).unwrap();
        let expect = -1.5 * (2.0 * std::f64::consts::PI).ln() - (2.0f64 * 0.5 * 1.5).ln();
        assert!((v - expect).abs() < 1e-13);
    }

    #[test]
    fn logpdf_errors() {
        let g = GaussianDensity::standard(2).unwrap();
        assert!(matches!(mvn_logpdf(&[0.0], &g), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(mvn_logpdf(&[0.0, f64::NAN], &g), Err(Error::NonFinite(_))));
    }

    #[test]
    fn invalid_factors_rejected() {
        let m = DVector::zeros(2);
        assert!(GaussianDensity::new(m.clone(), DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0])).is_err());
        assert!(GaussianDensity::new(m.clone(), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).is_err());
        assert!(GaussianDensity::new(m, DMatrix::identity(3, 3)).is_err());
    }

    fn simpson_weights(n: usize) -> Vec<f64> {
        (0..=n)
            .map(|i| {
                if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                }
            })
            .collect()
    }

    #[test]
    fn logpdf_integrates_to_one_1d() {
        let g = g1(0.7, 2.25);
        let (lo, hi, n) = (0.7 - 8.0 * 1.5, 0.7 + 8.0 * 1.5, 2000);
        let h = (hi - lo) / n as f64;
        let w = simpson_weights(n);
        let total: f64 =
            (0..=n).map(|i| w[i] * mvn_logpdf(&[lo + i as f64 * h], &g).unwrap().exp()).sum::<f64>() * h / 3.0;
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn logpdf_integrates_to_one_2d() {
        let chol = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.6, 0.5]);
        let g = GaussianDensity::new(DVector::from_vec(vec![0.0, 1.0]), chol).unwrap();
        let sd = g.std_devs();
        let n = 400;
        let w = simpson_weights(n);
        let (lo0, h0) = (-8.0 * sd[0], 16.0 * sd[0] / n as f64);
        let (lo1, h1) = (1.0 - 8.0 * sd[1], 16.0 * sd[1] / n as f64);
        let mut total = 0.0;
        for i in 0..=n {
            for j in 0..=n {
                let x = [lo0 + i as f64 * h0, lo1 + j as f64 * h1];
                total += w[i] * w[j] * mvn_logpdf(&x, &g).unwrap().exp();
            }
        }
        total *= h0 * h1 / 9.0;
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn sample_examples() {
        let g = GaussianDensity::new(
            DVector::from_vec(vec![1.0, -1.0]),
            DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0])),
        )
        .unwrap();
        let out = mvn_sample(&g, &DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0])).unwrap();
        assert_eq!(out.row(0).iter().copied().collect::<Vec<_>>(), vec![3.0, 2.0]);
        assert_eq!(out.row(1).iter().copied().collect::<Vec<_>>(), vec![1.0, -1.0]);

        let id = GaussianDensity::standard(3).unwrap();
        let out = mvn_sample(&id, &DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(out.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 0.0]);

        assert!(mvn_sample(&id, &DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn sample_moments() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let chol = DMatrix::from_row_slice(2, 2, &[1.5, 0.0, -0.8, 0.4]);
        let g = GaussianDensity::new(DVector::from_vec(vec![2.0, -1.0]), chol).unwrap();
        let n = 100_000;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let eps = DMatrix::from_fn(n, 2, |_, _| StandardNormal.sample(&mut rng));
        let s = mvn_sample(&g, &eps).unwrap();
        let mean = s.row_mean();
        let sd = g.std_devs();
        for k in 0..2 {
            assert!((mean[k] - g.mean()[k]).abs() < 5.0 * sd[k] / (n as f64).sqrt());
        }
        let centered = DMatrix::from_fn(n, 2, |i, j| s[(i, j)] - mean[j]);
        let cov = centered.transpose() * &centered / (n as f64 - 1.0);
        let target = g.covariance();
        assert!((cov - &target).norm() / target.norm() < 0.05);
    }

    #[test]
    fn kl_examples() {
        let p = g1(0.0, 1.0);
        assert_eq!(kl_gaussians(&p, &p).unwrap(), 0.0);
        assert!((kl_gaussians(&g1(1.0, 1.0), &p).unwrap() - 0.5).abs() < 1e-15);
        let v = kl_gaussians(&g1(0.0, 4.0), &p).unwrap();
        assert!((v - 0.5 * (4.0 - 1.0 - 4.0f64.ln())).abs() < 1e-15);
        assert!((v - 0.806_852_819_440_054_7).abs() < 1e-12);
        assert!(kl_gaussians(&p, &GaussianDensity::standard(2).unwrap()).is_err());
    }

    #[test]
    fn kl_matches_quadrature() {
        // ∫ q ln(q/p) on a fine grid
        let q = g1(0.3, 4.0);
        let p = g1(-0.5, 0.7);
        let n = 20_000;
        let (lo, hi) = (-30.0, 30.0);
        let h = (hi - lo) / n as f64;
        let w = simpson_weights(n);
        let mut s = 0.0;
        for (i, wi) in w.iter().enumerate() {
            let x = [lo + i as f64 * h];
            let lq = q.logpdf(&x).unwrap();
            let lp = p.logpdf(&x).unwrap();
            s += wi * lq.exp() * (lq - lp);
        }
        s *= h / 3.0;
        assert!((s - kl_gaussians(&q, &p).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn logsumexp_examples() {
        assert_eq!(logsumexp(&[3.5]).unwrap(), 3.5);
        assert!((logsumexp(&[0.0, 0.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
        let v = logsumexp(&[-1000.0, -1001.0]).unwrap();
        assert!((v - (-1000.0 + (1.0 + (-1.0f64).exp()).ln())).abs() < 1e-12);
        assert!((v + 999.686_738_312_170_2).abs() < 1e-9);
        assert_eq!(logsumexp(&[f64::NEG_INFINITY; 3]).unwrap(), f64::NEG_INFINITY);
        assert!(logsumexp(&[]).is_err());
    }

    fn lower_factor(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
        prop::collection::vec(-2.0..2.0f64, d * d).prop_map(move |v| {
            DMatrix::from_fn(d, d, |i, j| {
                if i == j {
                    0.1 + v[i * d + j].abs()
                } else if i > j {
                    v[i * d + j]
                } else {
                    0.0
                }
            })
        })
    }

    proptest! {
        #[test]
        fn kl_nonnegative(lq in lower_factor(3), lp in lower_factor(3),
                          mq in prop::collection::vec(-3.0..3.0f64, 3),
                          mp in prop::collection::vec(-3.0..3.0f64, 3)) {
            let q = GaussianDensity::new(DVector::from_vec(mq), lq).unwrap();
            let p = GaussianDensity::new(DVector::from_vec(mp), lp).unwrap();
            prop_assert!(kl_gaussians(&q, &p).unwrap() >= 0.0);
            prop_assert!(kl_gaussians(&q, &q).unwrap() < 1e-12);
        }

        #[test]
        fn logsumexp_shift_equivariant(v in prop::collection::vec(-50.0..50.0f64, 1..20),
                                       c in -1e3..1e3f64) {
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let a = logsumexp(&shifted).unwrap();
            let b = logsumexp(&v).unwrap() + c;
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }
}
