use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::loss::{pvi_explicit_loss, pvi_kde_loss, vi_loss, LossEval, LossKind};
use super::state::{init_state, VariationalState};
use crate::error::{Error, Result};
use crate::gaussian::GaussianDensity;
use crate::model::{ForwardModel, ObservationSet};
use crate::rng::{standard_normal_matrix, step_rng};
use crate::transform::TransformedPrior;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub mc_samples: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 5000,
            learning_rate: 1e-2,
            mc_samples: 100,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::config(format!("train.{key}"), msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be positive");
        }
        if self.mc_samples == 0 {
            return bad("mc_samples", "must be positive");
        }
        if !(self.adam_beta1 > 0.0 && self.adam_beta1 < 1.0) {
            return bad("adam_beta1", "must lie in (0, 1)");
        }
        if !(self.adam_beta2 > 0.0 && self.adam_beta2 < 1.0) {
            return bad("adam_beta2", "must lie in (0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps", "must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub loss_trace: Vec<f64>,
    pub final_state: VariationalState,
    pub final_gaussian: GaussianDensity,
    pub config: TrainConfig,
    pub seed: u64,
}

/// Runs Adam on an arbitrary objective. `objective` receives the current
/// state and the step's private random stream.
pub fn train_with<F>(d: usize, config: &TrainConfig, mut objective: F) -> Result<RunResult>
where
    F: FnMut(&VariationalState, &mut ChaCha8Rng) -> Result<LossEval>,
{
    config.validate()?;
    let mut state = init_state(d)?;
    let mut params = state.to_flat();
    let mut adam = AdamState::new(params.len());
    let mut trace = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let wrap = |e: Error| Error::Training { step, source: Box::new(e) };
        let mut rng = step_rng(config.seed, step);
        let eval = objective(&state, &mut rng).map_err(wrap)?;
        if !eval.value.is_finite() {
            return Err(wrap(Error::NonFinite("loss value")));
        }
        let grad = eval.grad.to_flat();
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(wrap(Error::NonFinite("loss gradient")));
        }
        trace.push(eval.value);
        adam_step(&mut adam, &mut params, &grad, config);
        state = VariationalState::from_flat(d, &params)?;
    }
    let final_gaussian = state.to_gaussian()?;
    Ok(RunResult { loss_trace: trace, final_state: state, final_gaussian, config: config.clone(), seed: config.seed })
}

/// One loss evaluation with fresh noise drawn from `rng`: `eps` first, then
/// `eps_noise` for the KDE loss.
pub fn sample_loss(
    kind: LossKind,
    state: &VariationalState,
    model: &dyn ForwardModel,
    prior: &TransformedPrior,
    obs: &ObservationSet,
    mc_samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<LossEval> {
    let eps = standard_normal_matrix(rng, mc_samples, state.dim());
    match kind {
        LossKind::ViElbo => vi_loss(state, model, prior, obs, &eps),
        LossKind::PviExplicit => pvi_explicit_loss(state, model, prior, obs, &eps),
        LossKind::PviKde => {
            let eps_noise = standard_normal_matrix(rng, mc_samples, obs.len());
            pvi_kde_loss(state, model, prior, obs, &eps, &eps_noise)
        }
    }
}

/// Trains the Gaussian variational family from `N(0, I)` on the chosen loss.
pub fn train(
    kind: LossKind,
    model: &dyn ForwardModel,
    prior: &TransformedPrior,
    obs: &ObservationSet,
    config: &TrainConfig,
) -> Result<RunResult> {
    train_with(prior.dim(), config, |state, rng| sample_loss(kind, state, model, prior, obs, config.mc_samples, rng))
}
