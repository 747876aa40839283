//! Linear-Gaussian testbed: data from `a·xᵖ + b + ε`, inference with the
//! straight line `a·x + b`, and every closed form the Gaussian case allows.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gaussian::{logsumexp, mvn_logpdf, GaussianDensity};
use crate::model::{ForwardModel, ObservationSet};
use crate::rng::{self, standard_normal_matrix, standard_normal_vec};
use crate::special::{std_normal_invcdf, HALF_LN_2PI};
use crate::variational::{kl_with_grad, sigmoid, train_with, LossEval, RunResult, TrainConfig, VariationalState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyDataGenSpec {
    pub p: f64,
    pub a_dg: f64,
    pub b_dg: f64,
    pub noise_std: f64,
    pub n_points: usize,
    pub domain: [f64; 2],
}

impl Default for PolyDataGenSpec {
    fn default() -> Self {
        Self { p: 2.0, a_dg: 2.0, b_dg: 1.0, noise_std: 0.4, n_points: 40, domain: [0.0, 2.0] }
    }
}

/// `n` equally spaced points covering `[lo, hi]` inclusive.
pub fn uniform_grid(domain: [f64; 2], n: usize) -> Vec<f64> {
    let step = (domain[1] - domain[0]) / (n - 1) as f64;
    (0..n).map(|i| domain[0] + step * i as f64).collect()
}

pub fn generate_poly_data(spec: &PolyDataGenSpec, seed: u64) -> Result<ObservationSet> {
    // p = 1 is the well-specified control.
    if !(spec.p >= 1.0 && spec.p <= 3.0) {
        return Err(Error::invalid(format!("misspecification power p must lie in [1, 3], got {}", spec.p)));
    }
    if spec.n_points < 2 {
        return Err(Error::invalid("need at least 2 grid points"));
    }
    if !(spec.domain[1] > spec.domain[0]) || spec.domain[0] < 0.0 {
        return Err(Error::invalid("domain must be an increasing interval on x >= 0"));
    }
    let grid = uniform_grid(spec.domain, spec.n_points);
    let noise = standard_normal_vec(&mut rng::stream(seed, rng::DATA_STREAM), spec.n_points);
    let data =
        grid.iter().zip(&noise).map(|(x, e)| spec.a_dg * x.powf(spec.p) + spec.b_dg + spec.noise_std * e).collect();
    ObservationSet::new(grid, data, spec.noise_std)
}

/// Rows `[xᵢ, 1]`.
pub fn design_matrix(grid: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(grid.len(), 2, |i, j| if j == 0 { grid[i] } else { 1.0 })
}

/// `f(θ) = A θ`.
#[derive(Debug, Clone)]
pub struct LinearModel {
    design: DMatrix<f64>,
}

impl LinearModel {
    pub fn new(design: DMatrix<f64>) -> Self {
        Self { design }
    }

    pub fn on_grid(grid: &[f64]) -> Self {
        Self::new(design_matrix(grid))
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }
}

impl ForwardModel for LinearModel {
    fn dim_params(&self) -> usize {
        self.design.ncols()
    }

    fn dim_obs(&self) -> usize {
        self.design.nrows()
    }

    fn evaluate(&self, theta: &[f64]) -> Result<DVector<f64>> {
        check_dim("linear model parameters", self.design.ncols(), theta.len())?;
        Ok(&self.design * DVector::from_column_slice(theta))
    }

    fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        check_dim("linear model parameters", self.design.ncols(), theta.len())?;
        Ok(self.design.clone())
    }
}

/// Mean and (possibly singular) covariance of a Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoments {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianMoments {
    pub fn variances(&self) -> Vec<f64> {
        self.covariance.diagonal().iter().map(|v| v.max(0.0)).collect()
    }
}

impl From<&GaussianDensity> for GaussianMoments {
    fn from(g: &GaussianDensity) -> Self {
        Self { mean: g.mean().clone(), covariance: g.covariance() }
    }
}

fn check_linear(q: &GaussianDensity, a: &DMatrix<f64>) -> Result<()> {
    check_dim("design columns", q.dim(), a.ncols())
}

/// Exact Bayesian posterior for `y = Aθ + ε`, `ε ~ N(0, σ²I)`.
pub fn analytic_posterior(
    prior: &GaussianDensity,
    a: &DMatrix<f64>,
    noise_std: f64,
    y: &[f64],
) -> Result<GaussianDensity> {
    check_linear(prior, a)?;
    check_dim("observations", a.nrows(), y.len())?;
    let d = prior.dim();
    let var = noise_std * noise_std;
    let l0_inv =
        prior.chol().solve_lower_triangular(&DMatrix::identity(d, d)).expect("prior factor has positive diagonal");
    let prior_precision = l0_inv.tr_mul(&l0_inv);
    let precision = a.tr_mul(a) / var + &prior_precision;
    let rhs = a.tr_mul(&DVector::from_column_slice(y)) / var + &prior_precision * prior.mean();
    let chol = precision.cholesky().ok_or(Error::NotPositiveDefinite("posterior precision"))?;
    let mean = chol.solve(&rhs);
    let cov = chol.inverse();
    GaussianDensity::from_covariance(mean, &cov)
}

/// `N(Aμ, AΣAᵀ)`; rank-deficient whenever `A` has more rows than columns.
pub fn analytic_pushforward(q: &GaussianDensity, a: &DMatrix<f64>) -> Result<GaussianMoments> {
    check_linear(q, a)?;
    let al = a * q.chol();
    Ok(GaussianMoments { mean: a * q.mean(), covariance: &al * al.transpose() })
}

/// `N(Aμ, AΣAᵀ + σ²I)`.
pub fn analytic_predictive(q: &GaussianDensity, a: &DMatrix<f64>, noise_std: f64) -> Result<GaussianDensity> {
    let pf = analytic_pushforward(q, a)?;
    let n = a.nrows();
    let cov = pf.covariance + DMatrix::identity(n, n) * (noise_std * noise_std);
    GaussianDensity::from_covariance(pf.mean, &cov)
}

/// `N(Aμ, diag(AΣAᵀ + σ²I))`.
pub fn componentwise_predictive(q: &GaussianDensity, a: &DMatrix<f64>, noise_std: f64) -> Result<GaussianDensity> {
    let pf = analytic_pushforward(q, a)?;
    let var: Vec<f64> = pf.variances().iter().map(|v| v + noise_std * noise_std).collect();
    GaussianDensity::diagonal(pf.mean, &var)
}

/// Two-sided normal quantile for a central interval of probability `level`.
pub fn central_z(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("credible level must lie in (0, 1), got {level}")));
    }
    std_normal_invcdf(1.0 - (1.0 - level) / 2.0)
}

/// Per-component `mean ± z·sd` intervals.
pub fn marginal_ci_from_moments(mean: &[f64], variances: &[f64], level: f64) -> Result<Vec<[f64; 2]>> {
    check_dim("variances", mean.len(), variances.len())?;
    let z = central_z(level)?;
    Ok(mean
        .iter()
        .zip(variances)
        .map(|(m, v)| {
            let half = z * v.max(0.0).sqrt();
            [m - half, m + half]
        })
        .collect())
}

pub fn marginal_ci(g: &GaussianDensity, level: f64) -> Result<Vec<[f64; 2]>> {
    let sd = g.std_devs();
    let var: Vec<f64> = sd.iter().map(|s| s * s).collect();
    marginal_ci_from_moments(g.mean().as_slice(), &var, level)
}

fn isotropic_logpdf(y: &[f64], mean: &DVector<f64>, noise_std: f64) -> f64 {
    let n = y.len() as f64;
    let ss: f64 = y.iter().zip(mean.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    -n * (HALF_LN_2PI + noise_std.ln()) - 0.5 * ss / (noise_std * noise_std)
}

/// `E_q[log N(y; Aθ, σ²I)]` in closed form.
pub fn analytic_vi_data_term(q: &GaussianDensity, a: &DMatrix<f64>, noise_std: f64, y: &[f64]) -> Result<f64> {
    check_linear(q, a)?;
    check_dim("observations", a.nrows(), y.len())?;
    let al = a * q.chol();
    let trace = al.norm_squared();
    Ok(isotropic_logpdf(y, &(a * q.mean()), noise_std) - 0.5 * trace / (noise_std * noise_std))
}

/// `log N(y; Aμ, AΣAᵀ + σ²I)`, the exact log predictive.
pub fn analytic_pvi_data_term(q: &GaussianDensity, a: &DMatrix<f64>, noise_std: f64, y: &[f64]) -> Result<f64> {
    check_dim("observations", a.nrows(), y.len())?;
    mvn_logpdf(y, &analytic_predictive(q, a, noise_std)?)
}

/// Trace and determinant of the covariance; the determinant is `(Π Lᵢᵢ)²`.
pub fn cov_summaries(g: &GaussianDensity) -> (f64, f64) {
    let trace = g.chol().norm_squared();
    let det = g.chol().diagonal().iter().product::<f64>().powi(2);
    (trace, det)
}

/// Closed-form objectives for the linear-Gaussian problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticObjective {
    /// `-E_q[log ℓ(y | θ)]`.
    Vi,
    /// `-log N(y; Aμ, AΣAᵀ + σ²I)`.
    PviMultivariate,
    /// `-Σⱼ log N(yⱼ; (Aμ)ⱼ, (AΣAᵀ + σ²I)ⱼⱼ)`.
    PviComponentwise,
}

/// Exact objective value plus KL, with the gradient in state coordinates.
pub fn analytic_loss(
    objective: AnalyticObjective,
    state: &VariationalState,
    prior: &GaussianDensity,
    a: &DMatrix<f64>,
    noise_std: f64,
    y: &[f64],
) -> Result<LossEval> {
    check_dim("prior dimension", state.dim(), prior.dim())?;
    check_dim("design columns", state.dim(), a.ncols())?;
    check_dim("observations", a.nrows(), y.len())?;
    let factor = state.effective_factor();
    let q = GaussianDensity::new(state.mean.clone(), factor.clone())?;
    let var = noise_std * noise_std;
    let n = y.len();
    let resid = DVector::from_column_slice(y) - a * &state.mean;
    let al = a * &factor;

    // data term D, ∂D/∂μ and the symmetric ∂D/∂Σ
    let (data, grad_mean, grad_sigma) = match objective {
        AnalyticObjective::Vi => {
            let d = -analytic_vi_data_term(&q, a, noise_std, y)?;
            (d, -a.tr_mul(&resid) / var, a.tr_mul(a) / (2.0 * var))
        }
        AnalyticObjective::PviMultivariate => {
            let cov = &al * al.transpose() + DMatrix::identity(n, n) * var;
            let chol = cov.clone().cholesky().ok_or(Error::NotPositiveDefinite("predictive covariance"))?;
            let alpha = chol.solve(&resid);
            let half_log_det: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum();
            let d = n as f64 * HALF_LN_2PI + half_log_det + 0.5 * resid.dot(&alpha);
            let inv = chol.inverse();
            let inner = (inv - &alpha * alpha.transpose()) * 0.5;
            (d, -a.tr_mul(&alpha), a.tr_mul(&(inner * a)))
        }
        AnalyticObjective::PviComponentwise => {
            let c: Vec<f64> = (0..n).map(|j| al.row(j).norm_squared() + var).collect();
            let mut d = 0.0;
            let mut dc = DVector::zeros(n);
            let mut scaled = DVector::zeros(n);
            for j in 0..n {
                d += HALF_LN_2PI + 0.5 * c[j].ln() + 0.5 * resid[j] * resid[j] / c[j];
                dc[j] = 0.5 * (1.0 / c[j] - resid[j] * resid[j] / (c[j] * c[j]));
                scaled[j] = resid[j] / c[j];
            }
            let weighted = DMatrix::from_fn(n, a.ncols(), |i, k| a[(i, k)] * dc[i]);
            (d, -a.tr_mul(&scaled), a.tr_mul(&weighted))
        }
    };

    let (kl, kl_mean, kl_l) = kl_with_grad(state, &factor, prior)?;
    let mut grad_l = (grad_sigma * &factor * 2.0).lower_triangle() + kl_l;
    for j in 0..state.dim() {
        grad_l[(j, j)] *= sigmoid(state.raw_factor[(j, j)]);
    }
    Ok(LossEval {
        value: data + kl,
        data_term: data,
        kl,
        grad: VariationalState { mean: grad_mean + kl_mean, raw_factor: grad_l },
        bandwidths: None,
    })
}

/// Adam on an exact objective; no Monte Carlo noise is involved.
pub fn train_analytic(
    objective: AnalyticObjective,
    prior: &GaussianDensity,
    a: &DMatrix<f64>,
    noise_std: f64,
    y: &[f64],
    config: &TrainConfig,
) -> Result<RunResult> {
    train_with(prior.dim(), config, |state, _| analytic_loss(objective, state, prior, a, noise_std, y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McStudyRow {
    pub n: usize,
    pub replicate: usize,
    pub vi_estimate: f64,
    pub vi_exact: f64,
    pub vi_percent_error: f64,
    pub pvi_estimate: f64,
    pub pvi_exact: f64,
    pub pvi_percent_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct McStudyTable {
    pub rows: Vec<McStudyRow>,
}

impl McStudyTable {
    fn max_abs(&self, n: usize, pick: impl Fn(&McStudyRow) -> f64) -> f64 {
        self.rows.iter().filter(|r| r.n == n).map(|r| pick(r).abs()).fold(0.0, f64::max)
    }

    pub fn max_vi_error(&self, n: usize) -> f64 {
        self.max_abs(n, |r| r.vi_percent_error)
    }

    pub fn max_pvi_error(&self, n: usize) -> f64 {
        self.max_abs(n, |r| r.pvi_percent_error)
    }
}

fn percent_error(estimate: f64, exact: f64) -> f64 {
    100.0 * (estimate - exact) / exact.abs()
}

/// Percent errors of the Monte Carlo expected-log-likelihood and
/// log-predictive estimators against their closed forms.
///
/// Replicate `r` of sample size `n_list[k]` draws from substream
/// `REPLICATE_STREAM_BASE + k·replicates + r`.
pub fn mc_convergence_study(
    q: &GaussianDensity,
    a: &DMatrix<f64>,
    noise_std: f64,
    y: &[f64],
    n_list: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<McStudyTable> {
    if n_list.is_empty() || n_list.contains(&0) {
        return Err(Error::invalid("sample sizes must be non-empty and positive"));
    }
    if replicates == 0 {
        return Err(Error::invalid("need at least one replicate"));
    }
    let vi_exact = analytic_vi_data_term(q, a, noise_std, y)?;
    let pvi_exact = analytic_pvi_data_term(q, a, noise_std, y)?;
    let model = LinearModel::new(a.clone());
    let jobs: Vec<(usize, usize, usize)> =
        n_list.iter().enumerate().flat_map(|(k, &n)| (0..replicates).map(move |r| (k, n, r))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(k, n, r)| {
            let idx = (k * replicates + r) as u64;
            let mut rng = rng::stream(seed, rng::REPLICATE_STREAM_BASE + idx);
            let eps = standard_normal_matrix(&mut rng, n, q.dim());
            let thetas = crate::gaussian::mvn_sample(q, &eps)?;
            let mut w = Vec::with_capacity(n);
            for i in 0..n {
                let f = model.evaluate(thetas.row(i).transpose().as_slice())?;
                w.push(isotropic_logpdf(y, &f, noise_std));
            }
            let vi = w.iter().sum::<f64>() / n as f64;
            let pvi = logsumexp(&w)? - (n as f64).ln();
            Ok(McStudyRow {
                n,
                replicate: r,
                vi_estimate: vi,
                vi_exact,
                vi_percent_error: percent_error(vi, vi_exact),
                pvi_estimate: pvi,
                pvi_exact,
                pvi_percent_error: percent_error(pvi, pvi_exact),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(McStudyTable { rows })
}

/// The prior used throughout the polynomial study, `N([3, 0.3], diag(1, 2.4))`.
pub fn default_poly_prior() -> GaussianDensity {
    GaussianDensity::diagonal(DVector::from_vec(vec![3.0, 0.3]), &[1.0, 2.4]).expect("valid constant prior")
}
