//! End-to-end runs for every study.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::{mvn_sample, GaussianDensity};
use crate::harness::bundle::{
    contour_grid, coverage_metric, marginal_curve, Bands, OutputBundle, RunBundle, RunSummary, SweepPoint,
};
use crate::harness::config::{
    config_hash, ExperimentConfig, ExperimentKind, PolyObjective, PredictiveForm, SpectrumSource,
};
use crate::model::{ForwardModel, ObservationSet};
use crate::polynomial::{
    analytic_pushforward, cov_summaries, design_matrix, generate_poly_data, mc_convergence_study, train_analytic,
    AnalyticObjective, LinearModel, PolyDataGenSpec,
};
use crate::rng::{self, BAND_STREAM};
use crate::transform::TransformedPrior;
use crate::transport::{
    build_transport_prior, generate_transport_data, DispersionSpectrum, TransportKind, TransportModel,
};
use crate::variational::{self, LossKind, RunResult};

const POLY_PARAMS: [&str; 2] = ["a", "b"];

/// Runs the configured study. Independent members (sweep points, losses)
/// run in parallel; each is deterministic given the config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<OutputBundle> {
    cfg.validate()?;
    let hash = config_hash(cfg);
    let runs = match cfg.experiment {
        ExperimentKind::PolySweepP => poly_sweep(cfg, &hash, Sweep::P),
        ExperimentKind::PolySweepNoise => poly_sweep(cfg, &hash, Sweep::Noise),
        ExperimentKind::PolyComponentwise => poly_componentwise(cfg, &hash),
        ExperimentKind::PolyMcStudy => return run_mc_study(cfg),
        ExperimentKind::TransportAde => transport(cfg, &hash, TransportKind::Ade),
        ExperimentKind::TransportFrade => transport(cfg, &hash, TransportKind::Frade),
    }
    .map_err(|e| context(cfg, e))?;
    Ok(OutputBundle { config: cfg.clone(), config_hash: hash, runs, mc_table: None })
}

/// The Monte Carlo error study on the configured polynomial data, whatever
/// the configured experiment.
pub fn run_mc_study(cfg: &ExperimentConfig) -> Result<OutputBundle> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    cfg.experiment = ExperimentKind::PolyMcStudy;
    let hash = config_hash(&cfg);
    let table = (|| {
        let obs = poly_data(&cfg, cfg.poly.p, cfg.poly.noise_std)?;
        let a = design_matrix(obs.grid());
        let m = &cfg.mc_study;
        let q = GaussianDensity::diagonal(DVector::from_column_slice(&m.q_mean), &m.q_var)?;
        mc_convergence_study(&q, &a, obs.noise_std(), obs.data(), &m.n_list, m.replicates, cfg.seed)
    })()
    .map_err(|e| context(&cfg, e))?;
    Ok(OutputBundle { config: cfg, config_hash: hash, runs: Vec::new(), mc_table: Some(table) })
}

fn context(cfg: &ExperimentConfig, e: Error) -> Error {
    if e.is_config_error() {
        return e;
    }
    Error::Experiment { experiment: cfg.experiment.as_str().to_string(), source: Box::new(e) }
}

/// The configured loss, preceded by the VI baseline when requested.
fn losses(cfg: &ExperimentConfig) -> Vec<LossKind> {
    let main = cfg.loss();
    if cfg.compare_vi && main != LossKind::ViElbo {
        vec![LossKind::ViElbo, main]
    } else {
        vec![main]
    }
}

fn label_value(v: f64) -> String {
    format!("{v}")
}

fn poly_data(cfg: &ExperimentConfig, p: f64, noise_std: f64) -> Result<ObservationSet> {
    let pc = &cfg.poly;
    let spec = PolyDataGenSpec { p, a_dg: pc.a_dg, b_dg: pc.b_dg, noise_std, n_points: pc.n_points, domain: pc.domain };
    generate_poly_data(&spec, cfg.seed)
}

fn poly_prior(cfg: &ExperimentConfig) -> Result<GaussianDensity> {
    GaussianDensity::diagonal(DVector::from_column_slice(&cfg.poly.prior_mean), &cfg.poly.prior_var)
}

#[derive(Clone, Copy)]
enum Sweep {
    P,
    Noise,
}

fn poly_sweep(cfg: &ExperimentConfig, hash: &str, sweep: Sweep) -> Result<Vec<RunBundle>> {
    let (name, values) = match sweep {
        Sweep::P => ("p", cfg.poly.p_values.clone()),
        Sweep::Noise => ("noise_std", cfg.poly.noise_values.clone()),
    };
    let jobs: Vec<(f64, LossKind)> =
        values.iter().flat_map(|&v| losses(cfg).into_iter().map(move |l| (v, l))).collect();
    jobs.par_iter()
        .map(|&(v, loss)| {
            let (p, noise) = match sweep {
                Sweep::P => (v, cfg.poly.noise_std),
                Sweep::Noise => (cfg.poly.p, v),
            };
            let obs = poly_data(cfg, p, noise)?;
            let objective = poly_objective(cfg, loss);
            let label = format!("{name}{}_{}", label_value(v), loss.as_str());
            let point = SweepPoint { name: name.to_string(), value: v };
            poly_run(cfg, hash, &obs, loss, objective, label, Some(point))
        })
        .collect()
}

fn poly_objective(cfg: &ExperimentConfig, loss: LossKind) -> Option<AnalyticObjective> {
    match cfg.poly.objective {
        PolyObjective::MonteCarlo => None,
        PolyObjective::Analytic => Some(match (loss, cfg.poly.predictive) {
            (LossKind::ViElbo, _) => AnalyticObjective::Vi,
            (_, PredictiveForm::Multivariate) => AnalyticObjective::PviMultivariate,
            (_, PredictiveForm::Componentwise) => AnalyticObjective::PviComponentwise,
        }),
    }
}

/// Closed-form PVI with the multivariate and the component-wise predictive
/// on one dataset, plus closed-form VI when requested.
fn poly_componentwise(cfg: &ExperimentConfig, hash: &str) -> Result<Vec<RunBundle>> {
    let obs = poly_data(cfg, cfg.poly.p, cfg.poly.noise_std)?;
    let mut jobs = vec![
        ("multivariate", AnalyticObjective::PviMultivariate, LossKind::PviExplicit),
        ("componentwise", AnalyticObjective::PviComponentwise, LossKind::PviExplicit),
    ];
    if cfg.compare_vi {
        jobs.insert(0, ("vi", AnalyticObjective::Vi, LossKind::ViElbo));
    }
    jobs.par_iter()
        .map(|&(label, objective, loss)| poly_run(cfg, hash, &obs, loss, Some(objective), label.to_string(), None))
        .collect()
}

fn poly_run(
    cfg: &ExperimentConfig,
    hash: &str,
    obs: &ObservationSet,
    loss: LossKind,
    objective: Option<AnalyticObjective>,
    label: String,
    sweep: Option<SweepPoint>,
) -> Result<RunBundle> {
    let prior = poly_prior(cfg)?;
    let a = design_matrix(obs.grid());
    let tprior = TransformedPrior::identity(prior.clone());
    let run = match objective {
        Some(obj) => train_analytic(obj, &prior, &a, obs.noise_std(), obs.data(), &cfg.train)?,
        None => variational::train(loss, &LinearModel::new(a.clone()), &tprior, obs, &cfg.train)?,
    };
    let q = &run.final_gaussian;
    let pf = analytic_pushforward(q, &a)?;
    let bands = Bands::gaussian(obs, pf.mean.as_slice(), &pf.variances(), cfg.level)?;
    let predictive_trace = pf.covariance.trace() + obs.len() as f64 * obs.noise_std().powi(2);
    let model = match objective {
        Some(AnalyticObjective::PviComponentwise) => "linear (component-wise predictive)",
        Some(_) => "linear (closed form)",
        None => "linear",
    };
    finish_run(cfg, hash, label, model, loss, sweep, run, &tprior, &POLY_PARAMS, bands, obs, predictive_trace)
}

#[allow(clippy::too_many_arguments)]
fn finish_run(
    cfg: &ExperimentConfig,
    hash: &str,
    label: String,
    model: &str,
    loss: LossKind,
    sweep: Option<SweepPoint>,
    run: RunResult,
    prior: &TransformedPrior,
    names: &[&str],
    bands: Bands,
    obs: &ObservationSet,
    predictive_trace: f64,
) -> Result<RunBundle> {
    let q = &run.final_gaussian;
    let d = q.dim();
    let mut contours = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            contours.push(contour_grid(q, prior.gaussian(), [i, j], [names[i], names[j]])?);
        }
    }
    let marginals = (0..d).map(|k| marginal_curve(q, prior, k, names[k])).collect::<Result<Vec<_>>>()?;
    let sd = q.std_devs();
    let cov = q.covariance();
    let (trace, det) = cov_summaries(q);
    let summary = RunSummary {
        label: label.clone(),
        model: model.to_string(),
        loss,
        sweep,
        param_names: names.iter().map(|s| s.to_string()).collect(),
        posterior_mean: q.mean().iter().copied().collect(),
        posterior_sd: sd.iter().copied().collect(),
        posterior_cov: (0..d).map(|i| cov.row(i).iter().copied().collect()).collect(),
        physical_mean: (0..d).map(|k| prior.transforms()[k].mean_under_normal(q.mean()[k], sd[k])).collect(),
        posterior_trace: trace,
        posterior_det: det,
        predictive_trace,
        coverage: coverage_metric(&bands, obs)?,
        mean_predictive_width: bands.mean_predictive_width(),
        mean_pushforward_width: bands.mean_pushforward_width(),
        final_loss: run.loss_trace.last().copied().unwrap_or(f64::NAN),
        steps: run.loss_trace.len(),
        level: cfg.level,
        config_hash: hash.to_string(),
        seed: cfg.seed,
    };
    Ok(RunBundle { label, run, bands, contours, marginals, summary })
}

/// The configured data-generating spectrum.
pub fn load_spectrum(cfg: &ExperimentConfig) -> Result<DispersionSpectrum> {
    let t = &cfg.transport;
    match t.spectrum.source {
        SpectrumSource::PowerLaw => DispersionSpectrum::power_law(&t.setup, &t.spectrum.power_law)
            .map_err(|e| Error::config("transport.spectrum.power_law", e.to_string())),
        SpectrumSource::File => {
            let path = t.spectrum.path.as_ref().ok_or_else(|| Error::config("transport.spectrum.path", "missing"))?;
            DispersionSpectrum::load(path, t.setup.n_modes)
        }
    }
}

fn transport(cfg: &ExperimentConfig, hash: &str, kind: TransportKind) -> Result<Vec<RunBundle>> {
    let t = &cfg.transport;
    let spectrum = load_spectrum(cfg)?;
    let data = generate_transport_data(&t.setup, &spectrum, &t.data, cfg.seed)?;
    let obs = &data.observations;
    let model = TransportModel::new(kind, &t.setup, t.data.t, t.data.n_obs)?;
    let prior = build_transport_prior(kind, &t.prior)?;
    let name = match kind {
        TransportKind::Ade => "ade",
        TransportKind::Frade => "frade",
    };
    losses(cfg)
        .par_iter()
        .map(|&loss| {
            let run = variational::train(loss, &model, &prior, obs, &cfg.train)?;
            let (bands, predictive_trace) = sampled_bands(cfg, &model, &prior, &run.final_gaussian, obs)?;
            let label = format!("{name}_{}", loss.as_str());
            finish_run(
                cfg,
                hash,
                label,
                name,
                loss,
                None,
                run,
                &prior,
                kind.param_names(),
                bands,
                obs,
                predictive_trace,
            )
        })
        .collect()
}

/// Empirical bands from posterior draws on the band stream of the seed,
/// plus the trace of the sampled predictive covariance.
fn sampled_bands(
    cfg: &ExperimentConfig,
    model: &dyn ForwardModel,
    prior: &TransformedPrior,
    q: &GaussianDensity,
    obs: &ObservationSet,
) -> Result<(Bands, f64)> {
    let n = cfg.transport.band_samples;
    let d = q.dim();
    let mut rng = rng::stream(cfg.seed, BAND_STREAM);
    let eps = rng::standard_normal_matrix(&mut rng, n, d);
    let noise_mat = rng::standard_normal_matrix(&mut rng, n, obs.len());
    let z: DMatrix<f64> = mvn_sample(q, &eps)?;
    let outputs = (0..n)
        .into_par_iter()
        .map(|i| {
            let zi: Vec<f64> = z.row(i).iter().copied().collect();
            let mut theta = vec![0.0; d];
            let mut jac = vec![0.0; d];
            prior.to_physical(&zi, &mut theta, &mut jac);
            Ok(model.evaluate(&theta)?.as_slice().to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    let noise: Vec<Vec<f64>> = (0..n).map(|i| noise_mat.row(i).iter().copied().collect()).collect();
    let bands = Bands::empirical(obs, &outputs, &noise, cfg.level)?;
    let mut trace = obs.len() as f64 * obs.noise_std().powi(2);
    for k in 0..obs.len() {
        let mean = outputs.iter().map(|f| f[k]).sum::<f64>() / n as f64;
        trace += outputs.iter().map(|f| (f[k] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    }
    Ok((bands, trace))
}
