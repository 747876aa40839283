//! Reparameterized Monte Carlo losses and their pathwise gradients.
//!
//! Every loss is `data term + KL(q ‖ prior)`, with `q` and the prior both
//! Gaussian on the unconstrained coordinates. Samples are `zᵢ = μ + L·εᵢ`,
//! mapped to physical parameters `θᵢ = T(zᵢ)` before the forward model is
//! called. Gradients flow back through the model Jacobian, the transform
//! derivative and the softplus on the factor diagonal.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::state::{sigmoid, VariationalState};
use crate::error::{check_dim, Error, Result};
use crate::gaussian::{kl_gaussians, logsumexp, GaussianDensity};
use crate::kde::{componentwise_bandwidths, componentwise_kde_logpdf_with_grad};
use crate::model::{ForwardModel, ObservationSet};
use crate::special::HALF_LN_2PI;
use crate::transform::TransformedPrior;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Expected negative log-likelihood.
    ViElbo,
    /// Negative log of the Monte Carlo predictive, explicit Gaussian likelihood.
    PviExplicit,
    /// Negative log of the component-wise KDE predictive (likelihood-free).
    PviKde,
}

impl LossKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LossKind::ViElbo => "vi_elbo",
            LossKind::PviExplicit => "pvi_explicit",
            LossKind::PviKde => "pvi_kde",
        }
    }

    pub fn is_predictive(&self) -> bool {
        !matches!(self, LossKind::ViElbo)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub data_term: f64,
    pub kl: f64,
    pub grad: VariationalState,
    /// Bandwidths used by the KDE loss, `None` for the explicit losses.
    pub bandwidths: Option<Vec<f64>>,
}

/// Everything about one reparameterized draw that the gradient needs.
struct Draw {
    dtheta_dz: Vec<f64>,
    output: DVector<f64>,
    jacobian: DMatrix<f64>,
}

fn check_problem(
    state: &VariationalState,
    model: &dyn ForwardModel,
    prior: &TransformedPrior,
    obs: &ObservationSet,
    eps: &DMatrix<f64>,
) -> Result<()> {
    let d = state.dim();
    check_dim("prior dimension", d, prior.dim())?;
    check_dim("model parameters", d, model.dim_params())?;
    check_dim("model observables", obs.len(), model.dim_obs())?;
    check_dim("noise columns", d, eps.ncols())?;
    if eps.nrows() == 0 {
        return Err(Error::Empty("monte carlo samples"));
    }
    Ok(())
}

fn draw_all(
    factor: &DMatrix<f64>,
    state: &VariationalState,
    model: &dyn ForwardModel,
    prior: &TransformedPrior,
    eps: &DMatrix<f64>,
) -> Result<Vec<Draw>> {
    let d = state.dim();
    let mut draws = Vec::with_capacity(eps.nrows());
    let mut z = vec![0.0; d];
    for i in 0..eps.nrows() {
        for j in 0..d {
            let mut v = state.mean[j];
            for k in 0..=j {
                v += factor[(j, k)] * eps[(i, k)];
            }
            z[j] = v;
        }
        let mut theta = vec![0.0; d];
        let mut dtheta_dz = vec![0.0; d];
        prior.to_physical(&z, &mut theta, &mut dtheta_dz);
        let (output, jacobian) = model.evaluate_with_jacobian(&theta)?;
        if output.iter().chain(jacobian.iter()).any(|v| !v.is_finite()) {
            return Err(Error::ModelOutput { theta });
        }
        draws.push(Draw { dtheta_dz, output, jacobian });
    }
    Ok(draws)
}

/// Gaussian log-likelihood `log N(y; f, σ²I)` and its gradient in `θ`.
fn log_lik_and_grad(draw: &Draw, obs: &ObservationSet) -> (f64, DVector<f64>) {
    let var = obs.noise_std() * obs.noise_std();
    let resid = DVector::from_iterator(obs.len(), obs.data().iter().zip(draw.output.iter()).map(|(y, f)| y - f));
    let n = obs.len() as f64;
    let w = -n * (HALF_LN_2PI + obs.noise_std().ln()) - 0.5 * resid.norm_squared() / var;
    let g = draw.jacobian.tr_mul(&resid) / var;
    (w, g)
}

/// KL to the prior with its gradient in `(mean, L)`.
pub(crate) fn kl_with_grad(
    state: &VariationalState,
    factor: &DMatrix<f64>,
    prior: &GaussianDensity,
) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
    let q = GaussianDensity::new(state.mean.clone(), factor.clone())?;
    let kl = kl_gaussians(&q, prior)?;
    let d = state.dim();
    let l0_inv =
        prior.chol().solve_lower_triangular(&DMatrix::identity(d, d)).expect("prior factor has positive diagonal");
    let precision = l0_inv.tr_mul(&l0_inv);
    let grad_mean = &precision * (&state.mean - prior.mean());
    let mut grad_l = (&precision * factor).lower_triangle();
    for j in 0..d {
        grad_l[(j, j)] -= 1.0 / factor[(j, j)];
    }
    Ok((kl, grad_mean, grad_l))
}

/// Folds `dLoss/dzᵢ` for every draw and the KL gradient into a gradient on
/// the unconstrained state.
fn assemble(
    state: &VariationalState,
    eps: &DMatrix<f64>,
    dz: &[DVector<f64>],
    kl_grad_mean: DVector<f64>,
    kl_grad_l: DMatrix<f64>,
) -> VariationalState {
    let d = state.dim();
    let mut gm = kl_grad_mean;
    let mut gl = kl_grad_l;
    for (i, g) in dz.iter().enumerate() {
        for j in 0..d {
            gm[j] += g[j];
            for k in 0..=j {
                gl[(j, k)] += g[j] * eps[(i, k)];
            }
        }
    }
    for j in 0..d {
        gl[(j, j)] *= sigmoid(state.raw_factor[(j, j)]);
    }
    VariationalState { mean: gm, raw_factor: gl }
}

fn chain_to_z(draw: &Draw, grad_theta: DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(grad_theta.len(), grad_theta.iter().zip(&draw.dtheta_dz).map(|(g, t)| g * t))
}

fn explicit_loss(
    predictive: bool,
    state: &VariationalState,
    model: &dyn ForwardModel,
    prior: &TransformedPrior,
    obs: &ObservationSet,
    eps: &DMatrix<f64>,
) -> Result<LossEval> {
    check_problem(state, model, prior, obs, eps)?;
    let factor = state.effective_factor();
    let draws = draw_all(&factor, state, model, prior, eps)?;
    let n = draws.len() as f64;
    let (weights, grads): (Vec<f64>, Vec<DVector<f64>>) = draws.iter().map(|dr| log_lik_and_grad(dr, obs)).unzip();

    let (data_term, coeffs): (f64, Vec<f64>) = if predictive {
        let lse = logsumexp(&weights)?;
        if lse == f64::NEG_INFINITY {
            return Err(Error::ZeroPredictiveMass);
        }
        let soft = weights.iter().map(|w| (w - lse).exp()).collect();
        (-(lse - n.ln()), soft)
    } else {
        (-weights.iter().sum::<f64>() / n, vec![1.0 / n; draws.len()])
    };

    let dz: Vec<DVector<f64>> =
        draws.iter().zip(grads).zip(&coeffs).map(|((dr, g), c)| chain_to_z(dr, g * (-c))).collect();
    let (kl, gm, gl) = kl_with_grad(state, &factor, prior.gaussian())?;
    Ok(LossEval { value: data_term + kl, data_term, kl, grad: assemble(state, eps, &dz, gm, gl), bandwidths: None })
}

/// `-(1/n) Σ log ℓ(y | θᵢ) + KL`.
pub fn vi_loss(
    state: &VariationalState,
    model: &dyn ForwardModel,
    prior: &TransformedPrior,
    obs: &ObservationSet,
    eps: &DMatrix<f64>,
) -> Result<LossEval> {
    explicit_loss(false, state, model, prior, obs, eps)
}

/// `-[logsumexp(log ℓ(y | θᵢ)) - ln n] + KL`.
pub fn pvi_explicit_loss(
    state: &VariationalState,
    model: &dyn ForwardModel,
    prior: &TransformedPrior,
    obs: &ObservationSet,
    eps: &DMatrix<f64>,
) -> Result<LossEval> {
    explicit_loss(true, state, model, prior, obs, eps)
}

fn kde_loss(
    state: &VariationalState,
    model: &dyn ForwardModel,
    prior: &TransformedPrior,
    obs: &ObservationSet,
    eps_params: &DMatrix<f64>,
    eps_noise: &DMatrix<f64>,
    fixed_bandwidths: Option<&[f64]>,
) -> Result<LossEval> {
    check_problem(state, model, prior, obs, eps_params)?;
    let n = eps_params.nrows();
    if n < 2 {
        return Err(Error::Degenerate("kde loss needs at least 2 samples".into()));
    }
    check_dim("noise draws", n, eps_noise.nrows())?;
    check_dim("noise components", obs.len(), eps_noise.ncols())?;

    let factor = state.effective_factor();
    let draws = draw_all(&factor, state, model, prior, eps_params)?;
    let sigma = obs.noise_std();
    let simulated = DMatrix::from_fn(n, obs.len(), |i, j| draws[i].output[j] + sigma * eps_noise[(i, j)]);
    let bandwidths = match fixed_bandwidths {
        Some(h) => h.to_vec(),
        None => componentwise_bandwidths(&simulated)?,
    };
    let (log_pred, dsim) = componentwise_kde_logpdf_with_grad(&simulated, obs.data(), &bandwidths)?;

    let dz: Vec<DVector<f64>> = draws
        .iter()
        .enumerate()
        .map(|(i, dr)| {
            let dy = -dsim.row(i).transpose();
            chain_to_z(dr, dr.jacobian.tr_mul(&dy))
        })
        .collect();
    let (kl, gm, gl) = kl_with_grad(state, &factor, prior.gaussian())?;
    Ok(LossEval {
        value: -log_pred + kl,
        data_term: -log_pred,
        kl,
        grad: assemble(state, eps_params, &dz, gm, gl),
        bandwidths: Some(bandwidths),
    })
}

/// Likelihood-free loss: simulate `yᵢ = f(θᵢ) + σ·εᵢ`, fit per-component
/// Scott KDEs and score the observed data. Bandwidths are constants for the
/// gradient.
pub fn pvi_kde_loss(
    state: &VariationalState,
    model: &dyn ForwardModel,
    prior: &TransformedPrior,
    obs: &ObservationSet,
    eps_params: &DMatrix<f64>,
    eps_noise: &DMatrix<f64>,
) -> Result<LossEval> {
    kde_loss(state, model, prior, obs, eps_params, eps_noise, None)
}

/// [`pvi_kde_loss`] with caller-supplied bandwidths.
pub fn pvi_kde_loss_with_bandwidths(
    state: &VariationalState,
    model: &dyn ForwardModel,
    prior: &TransformedPrior,
    obs: &ObservationSet,
    eps_params: &DMatrix<f64>,
    eps_noise: &DMatrix<f64>,
    bandwidths: &[f64],
) -> Result<LossEval> {
    kde_loss(state, model, prior, obs, eps_params, eps_noise, Some(bandwidths))
}
