//! Plot-ready artifacts: credible bands, contour grids, marginal curves and
//! run summaries, plus their CSV/JSON emission.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gaussian::GaussianDensity;
use crate::harness::config::{emit_config, ExperimentConfig};
use crate::model::ObservationSet;
use crate::polynomial::{central_z, McStudyTable};
use crate::transform::TransformedPrior;
use crate::variational::{LossKind, RunResult};

pub const CONTOUR_POINTS: usize = 101;
pub const CONTOUR_HALF_WIDTH: f64 = 4.0;
pub const MARGINAL_POINTS: usize = 401;
pub const MARGINAL_HALF_WIDTH: f64 = 8.0;

/// Pointwise central credible intervals of the pushforward and the
/// predictive at the observation locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bands {
    pub x: Vec<f64>,
    pub pf_lo: Vec<f64>,
    pub pf_hi: Vec<f64>,
    pub pred_lo: Vec<f64>,
    pub pred_hi: Vec<f64>,
    pub mean: Vec<f64>,
    pub y_obs: Vec<f64>,
}

impl Bands {
    /// Gaussian marginals: `mean ± z·sd` with predictive variance
    /// `pf_var + σ²`.
    pub fn gaussian(obs: &ObservationSet, mean: &[f64], pf_var: &[f64], level: f64) -> Result<Self> {
        check_dim("band means", obs.len(), mean.len())?;
        check_dim("band variances", obs.len(), pf_var.len())?;
        let z = central_z(level)?;
        let s2 = obs.noise_std() * obs.noise_std();
        let pf_sd: Vec<f64> = pf_var.iter().map(|v| v.max(0.0).sqrt()).collect();
        let pred_sd: Vec<f64> = pf_var.iter().map(|v| (v.max(0.0) + s2).sqrt()).collect();
        Ok(Self {
            x: obs.grid().to_vec(),
            pf_lo: mean.iter().zip(&pf_sd).map(|(m, s)| m - z * s).collect(),
            pf_hi: mean.iter().zip(&pf_sd).map(|(m, s)| m + z * s).collect(),
            pred_lo: mean.iter().zip(&pred_sd).map(|(m, s)| m - z * s).collect(),
            pred_hi: mean.iter().zip(&pred_sd).map(|(m, s)| m + z * s).collect(),
            mean: mean.to_vec(),
            y_obs: obs.data().to_vec(),
        })
    }

    /// Empirical central intervals. `outputs[i]` is the model output of the
    /// i-th posterior draw and `noise[i]` its standard-normal noise vector.
    pub fn empirical(obs: &ObservationSet, outputs: &[Vec<f64>], noise: &[Vec<f64>], level: f64) -> Result<Self> {
        if outputs.len() < 2 {
            return Err(Error::Empty("band samples"));
        }
        check_dim("band noise draws", outputs.len(), noise.len())?;
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::invalid(format!("credible level must lie in (0, 1), got {level}")));
        }
        let n = obs.len();
        let lo_p = 0.5 * (1.0 - level);
        let hi_p = 1.0 - lo_p;
        let sigma = obs.noise_std();
        let mut bands = Self {
            x: obs.grid().to_vec(),
            pf_lo: vec![0.0; n],
            pf_hi: vec![0.0; n],
            pred_lo: vec![0.0; n],
            pred_hi: vec![0.0; n],
            mean: vec![0.0; n],
            y_obs: obs.data().to_vec(),
        };
        let mut pf = vec![0.0; outputs.len()];
        let mut pred = vec![0.0; outputs.len()];
        for k in 0..n {
            for (i, (f, e)) in outputs.iter().zip(noise).enumerate() {
                check_dim("band sample length", n, f.len())?;
                check_dim("band noise length", n, e.len())?;
                pf[i] = f[k];
                pred[i] = f[k] + sigma * e[k];
            }
            bands.mean[k] = pf.iter().sum::<f64>() / pf.len() as f64;
            pf.sort_by(f64::total_cmp);
            pred.sort_by(f64::total_cmp);
            bands.pf_lo[k] = quantile_sorted(&pf, lo_p);
            bands.pf_hi[k] = quantile_sorted(&pf, hi_p);
            bands.pred_lo[k] = quantile_sorted(&pred, lo_p);
            bands.pred_hi[k] = quantile_sorted(&pred, hi_p);
        }
        Ok(bands)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn mean_predictive_width(&self) -> f64 {
        let total: f64 = self.pred_hi.iter().zip(&self.pred_lo).map(|(h, l)| h - l).sum();
        total / self.len() as f64
    }

    pub fn mean_pushforward_width(&self) -> f64 {
        let total: f64 = self.pf_hi.iter().zip(&self.pf_lo).map(|(h, l)| h - l).sum();
        total / self.len() as f64
    }
}

/// Linear interpolation between order statistics (`(n-1)p` convention).
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 >= sorted.len() {
        sorted[sorted.len() - 1]
    } else {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    }
}

/// Fraction of observations inside the predictive band.
pub fn coverage_metric(bands: &Bands, obs: &ObservationSet) -> Result<f64> {
    check_dim("band locations", obs.len(), bands.len())?;
    if bands.x.iter().zip(obs.grid()).any(|(a, b)| a != b) {
        return Err(Error::invalid("band locations differ from observation locations"));
    }
    if obs.is_empty() {
        return Err(Error::Empty("observations"));
    }
    let inside =
        obs.data().iter().enumerate().filter(|&(k, &y)| bands.pred_lo[k] <= y && y <= bands.pred_hi[k]).count();
    Ok(inside as f64 / obs.len() as f64)
}

/// Gaussian densities on a square grid in transformed coordinates, each
/// relative to its own peak. The box is the posterior mean ± 4 posterior
/// standard deviations per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourGrid {
    pub names: [String; 2],
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    /// Row-major over `(z1, z2)`.
    pub posterior: Vec<f64>,
    pub prior: Vec<f64>,
}

pub fn contour_grid(
    posterior: &GaussianDensity,
    prior: &GaussianDensity,
    pair: [usize; 2],
    names: [&str; 2],
) -> Result<ContourGrid> {
    let post = posterior.marginal(&pair)?;
    let pri = prior.marginal(&pair)?;
    let sd = post.std_devs();
    let axis = |k: usize| -> Vec<f64> {
        let m = post.mean()[k];
        let step = 2.0 * CONTOUR_HALF_WIDTH * sd[k] / (CONTOUR_POINTS - 1) as f64;
        (0..CONTOUR_POINTS).map(|i| m - CONTOUR_HALF_WIDTH * sd[k] + i as f64 * step).collect()
    };
    let (z1, z2) = (axis(0), axis(1));
    let peak_post = post.logpdf(post.mean().as_slice())?;
    let peak_prior = pri.logpdf(pri.mean().as_slice())?;
    let mut posterior_vals = Vec::with_capacity(CONTOUR_POINTS * CONTOUR_POINTS);
    let mut prior_vals = Vec::with_capacity(CONTOUR_POINTS * CONTOUR_POINTS);
    for a in &z1 {
        for b in &z2 {
            posterior_vals.push((post.logpdf(&[*a, *b])? - peak_post).exp());
            prior_vals.push((pri.logpdf(&[*a, *b])? - peak_prior).exp());
        }
    }
    Ok(ContourGrid {
        names: [names[0].to_string(), names[1].to_string()],
        z1,
        z2,
        posterior: posterior_vals,
        prior: prior_vals,
    })
}

/// Marginal density in physical coordinates on a grid that is uniform in the
/// transformed coordinate (posterior mean ± 8 sd).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalCurve {
    pub name: String,
    pub theta: Vec<f64>,
    pub posterior: Vec<f64>,
    pub prior: Vec<f64>,
}

impl MarginalCurve {
    /// Trapezoid rule over the physical grid.
    pub fn posterior_mass(&self) -> f64 {
        self.theta.windows(2).zip(self.posterior.windows(2)).map(|(t, p)| 0.5 * (p[0] + p[1]) * (t[1] - t[0])).sum()
    }
}

pub fn marginal_curve(
    posterior: &GaussianDensity,
    prior: &TransformedPrior,
    index: usize,
    name: &str,
) -> Result<MarginalCurve> {
    if index >= prior.dim() || posterior.dim() != prior.dim() {
        return Err(Error::invalid(format!("marginal index {index} out of range")));
    }
    let t = prior.transforms()[index];
    let (m, s) = (posterior.mean()[index], posterior.std_devs()[index]);
    let (m0, s0) = (prior.gaussian().mean()[index], prior.gaussian().std_devs()[index]);
    let step = 2.0 * MARGINAL_HALF_WIDTH * s / (MARGINAL_POINTS - 1) as f64;
    let mut curve = MarginalCurve {
        name: name.to_string(),
        theta: Vec::with_capacity(MARGINAL_POINTS),
        posterior: Vec::with_capacity(MARGINAL_POINTS),
        prior: Vec::with_capacity(MARGINAL_POINTS),
    };
    for i in 0..MARGINAL_POINTS {
        let z = m - MARGINAL_HALF_WIDTH * s + i as f64 * step;
        curve.theta.push(t.forward(z));
        curve.posterior.push(t.pushforward_density(z, m, s));
        curve.prior.push(t.pushforward_density(z, m0, s0));
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub model: String,
    pub loss: LossKind,
    pub sweep: Option<SweepPoint>,
    pub param_names: Vec<String>,
    /// Variational mean and standard deviations in transformed coordinates.
    pub posterior_mean: Vec<f64>,
    pub posterior_sd: Vec<f64>,
    pub posterior_cov: Vec<Vec<f64>>,
    /// `E_q[θ]` in physical coordinates.
    pub physical_mean: Vec<f64>,
    pub posterior_trace: f64,
    pub posterior_det: f64,
    pub predictive_trace: f64,
    pub coverage: f64,
    pub mean_predictive_width: f64,
    pub mean_pushforward_width: f64,
    pub final_loss: f64,
    pub steps: usize,
    pub level: f64,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunBundle {
    /// Subdirectory name.
    pub label: String,
    pub run: RunResult,
    pub bands: Bands,
    pub contours: Vec<ContourGrid>,
    pub marginals: Vec<MarginalCurve>,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputBundle {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub runs: Vec<RunBundle>,
    pub mc_table: Option<McStudyTable>,
}

impl OutputBundle {
    pub fn run(&self, label: &str) -> Option<&RunBundle> {
        self.runs.iter().find(|r| r.label == label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McStudyMaxima {
    pub n: usize,
    pub max_vi_percent_error: f64,
    pub max_pvi_percent_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub runs: Vec<RunSummary>,
    pub mc_study: Option<Vec<McStudyMaxima>>,
}

impl OutputBundle {
    pub fn summary(&self) -> ExperimentSummary {
        let mc_study = self.mc_table.as_ref().map(|t| {
            self.config
                .mc_study
                .n_list
                .iter()
                .map(|&n| McStudyMaxima {
                    n,
                    max_vi_percent_error: t.max_vi_error(n),
                    max_pvi_percent_error: t.max_pvi_error(n),
                })
                .collect()
        });
        ExperimentSummary {
            experiment: self.config.experiment.as_str().to_string(),
            config_hash: self.config_hash.clone(),
            seed: self.config.seed,
            config: self.config.clone(),
            runs: self.runs.iter().map(|r| r.summary.clone()).collect(),
            mc_study,
        }
    }
}

/// 17 significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

struct Csv {
    text: String,
}

impl Csv {
    fn new(bundle: &OutputBundle, header: &[&str]) -> Self {
        let mut text = format!("# config_hash={} seed={}\n", bundle.config_hash, bundle.config.seed);
        text.push_str(&header.join(","));
        text.push('\n');
        Self { text }
    }

    fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }
}

struct Writer<'a> {
    root: &'a Path,
    manifest: Vec<ManifestEntry>,
}

impl Writer<'_> {
    fn write(&mut self, rel: &str, contents: &str) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.manifest.push(ManifestEntry { path: rel.to_string(), bytes: contents.len() as u64 });
        Ok(())
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("summary serializes");
    s.push('\n');
    s
}

/// Writes every artifact under `dir` and returns the manifest, which is also
/// saved as `manifest.json`.
pub fn emit_bundle(bundle: &OutputBundle, dir: &Path) -> Result<Vec<ManifestEntry>> {
    let mut w = Writer { root: dir, manifest: Vec::new() };
    w.write("config.toml", &emit_config(&bundle.config))?;
    w.write("summary.json", &json(&bundle.summary()))?;

    if let Some(table) = &bundle.mc_table {
        let mut csv = Csv::new(
            bundle,
            &[
                "n",
                "replicate",
                "vi_estimate",
                "vi_exact",
                "vi_percent_error",
                "pvi_estimate",
                "pvi_exact",
                "pvi_percent_error",
            ],
        );
        for r in &table.rows {
            csv.row(&[
                r.n.to_string(),
                r.replicate.to_string(),
                num(r.vi_estimate),
                num(r.vi_exact),
                num(r.vi_percent_error),
                num(r.pvi_estimate),
                num(r.pvi_exact),
                num(r.pvi_percent_error),
            ]);
        }
        w.write("mc_study.csv", &csv.text)?;
    }

    for run in &bundle.runs {
        let base = &run.label;
        let b = &run.bands;
        let mut csv = Csv::new(bundle, &["x", "pf_lo", "pf_hi", "pred_lo", "pred_hi", "mean", "y_obs"]);
        for k in 0..b.len() {
            csv.row(&[
                num(b.x[k]),
                num(b.pf_lo[k]),
                num(b.pf_hi[k]),
                num(b.pred_lo[k]),
                num(b.pred_hi[k]),
                num(b.mean[k]),
                num(b.y_obs[k]),
            ]);
        }
        w.write(&format!("{base}/bands.csv"), &csv.text)?;

        for c in &run.contours {
            let (n1, n2) = (&c.names[0], &c.names[1]);
            let mut csv = Csv::new(bundle, &[n1, n2, "posterior", "prior"]);
            let n = c.z2.len();
            for (i, a) in c.z1.iter().enumerate() {
                for (j, bv) in c.z2.iter().enumerate() {
                    csv.row(&[num(*a), num(*bv), num(c.posterior[i * n + j]), num(c.prior[i * n + j])]);
                }
            }
            w.write(&format!("{base}/contours_{n1}_{n2}.csv"), &csv.text)?;
        }

        for m in &run.marginals {
            let mut csv = Csv::new(bundle, &[&m.name, "posterior", "prior"]);
            for k in 0..m.theta.len() {
                csv.row(&[num(m.theta[k]), num(m.posterior[k]), num(m.prior[k])]);
            }
            w.write(&format!("{base}/marginals_{}.csv", m.name), &csv.text)?;
        }

        let mut csv = Csv::new(bundle, &["step", "loss"]);
        for (k, v) in run.run.loss_trace.iter().enumerate() {
            csv.row(&[k.to_string(), num(*v)]);
        }
        w.write(&format!("{base}/loss_trace.csv"), &csv.text)?;
        w.write(&format!("{base}/summary.json"), &json(&run.summary))?;
    }

    let manifest = w.manifest.clone();
    w.write("manifest.json", &json(&manifest))?;
    Ok(manifest)
}
