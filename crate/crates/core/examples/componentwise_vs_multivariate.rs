//! Closed-form PVI with the full and the diagonal posterior predictive.

use pvi::polynomial::{
    analytic_pushforward, cov_summaries, default_poly_prior, design_matrix, generate_poly_data, train_analytic,
    AnalyticObjective, PolyDataGenSpec,
};
use pvi::TrainConfig;

fn main() -> pvi::Result<()> {
    let obs = generate_poly_data(&PolyDataGenSpec::default(), 0)?;
    let a = design_matrix(obs.grid());
    let prior = default_poly_prior();
    let cfg = TrainConfig::default();
    for objective in [AnalyticObjective::Vi, AnalyticObjective::PviMultivariate, AnalyticObjective::PviComponentwise] {
        let run = train_analytic(objective, &prior, &a, obs.noise_std(), obs.data(), &cfg)?;
        let (trace, det) = cov_summaries(&run.final_gaussian);
        let pf = analytic_pushforward(&run.final_gaussian, &a)?;
        let pred_trace = pf.covariance.trace() + obs.len() as f64 * obs.noise_std().powi(2);
        println!("{objective:?}: posterior trace {trace:.4}, det {det:.3e}, predictive trace {pred_trace:.3}");
    }
    Ok(())
}
