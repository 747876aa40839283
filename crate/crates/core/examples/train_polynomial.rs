//! Standard and predictive VI on a misspecified polynomial, against the exact posterior.

use pvi::harness::{coverage_metric, Bands};
use pvi::polynomial::{
    analytic_posterior, analytic_pushforward, default_poly_prior, design_matrix, generate_poly_data, LinearModel,
    PolyDataGenSpec,
};
use pvi::variational::train;
use pvi::{LossKind, TrainConfig, TransformedPrior};

fn main() -> pvi::Result<()> {
    let p: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2.0);
    let obs = generate_poly_data(&PolyDataGenSpec { p, ..Default::default() }, 0)?;
    let a = design_matrix(obs.grid());
    let prior = default_poly_prior();
    let exact = analytic_posterior(&prior, &a, obs.noise_std(), obs.data())?;
    println!("p = {p}");
    println!("exact posterior mean {:.4?}", exact.mean().as_slice());

    let model = LinearModel::new(a.clone());
    let tprior = TransformedPrior::identity(prior);
    let cfg = TrainConfig::default();
    for loss in [LossKind::ViElbo, LossKind::PviExplicit, LossKind::PviKde] {
        let run = train(loss, &model, &tprior, &obs, &cfg)?;
        let q = &run.final_gaussian;
        let pf = analytic_pushforward(q, &a)?;
        let bands = Bands::gaussian(&obs, pf.mean.as_slice(), &pf.variances(), 0.95)?;
        println!(
            "{:<13} mean {:.4?}  trace {:.4}  coverage {:.3}  final loss {:.3}",
            loss.as_str(),
            q.mean().as_slice(),
            q.covariance().trace(),
            coverage_metric(&bands, &obs)?,
            run.loss_trace.last().copied().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
