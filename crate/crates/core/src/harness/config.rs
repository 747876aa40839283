//! Declarative experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::transport::{
    build_transport_prior, PowerLaw, SpectralSetup, TransportDataSpec, TransportKind, TransportPriorSpec,
};
use crate::variational::{LossKind, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    PolySweepP,
    PolySweepNoise,
    PolyMcStudy,
    PolyComponentwise,
    TransportAde,
    TransportFrade,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::PolySweepP => "poly_sweep_p",
            ExperimentKind::PolySweepNoise => "poly_sweep_noise",
            ExperimentKind::PolyMcStudy => "poly_mc_study",
            ExperimentKind::PolyComponentwise => "poly_componentwise",
            ExperimentKind::TransportAde => "transport_ade",
            ExperimentKind::TransportFrade => "transport_frade",
        }
    }

    pub fn is_transport(self) -> bool {
        matches!(self, ExperimentKind::TransportAde | ExperimentKind::TransportFrade)
    }

    /// Training steps when `train.steps` is not given: 10000 for transport,
    /// 5000 otherwise.
    pub fn default_steps(self) -> usize {
        if self.is_transport() {
            10_000
        } else {
            5_000
        }
    }

    /// `pvi_kde` for transport, `pvi_explicit` otherwise.
    pub fn default_loss(self) -> LossKind {
        if self.is_transport() {
            LossKind::PviKde
        } else {
            LossKind::PviExplicit
        }
    }
}

/// How polynomial runs evaluate their objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolyObjective {
    /// The sampled losses of the variational engine.
    MonteCarlo,
    /// Closed-form expectations; `predictive` selects the PVI variant.
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictiveForm {
    Multivariate,
    Componentwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolyConfig {
    pub p: f64,
    pub p_values: Vec<f64>,
    pub noise_std: f64,
    pub noise_values: Vec<f64>,
    pub n_points: usize,
    pub domain: [f64; 2],
    pub a_dg: f64,
    pub b_dg: f64,
    pub prior_mean: [f64; 2],
    pub prior_var: [f64; 2],
    pub objective: PolyObjective,
    pub predictive: PredictiveForm,
}

impl Default for PolyConfig {
    fn default() -> Self {
        Self {
            p: 2.0,
            p_values: vec![1.0, 1.5, 2.0, 2.5],
            noise_std: 0.4,
            noise_values: vec![0.2, 0.4, 0.8],
            n_points: 40,
            domain: [0.0, 2.0],
            a_dg: 2.0,
            b_dg: 1.0,
            prior_mean: [3.0, 0.3],
            prior_var: [1.0, 2.4],
            objective: PolyObjective::MonteCarlo,
            predictive: PredictiveForm::Multivariate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McStudyConfig {
    pub n_list: Vec<usize>,
    pub replicates: usize,
    /// Evaluation density `q`, diagonal.
    pub q_mean: [f64; 2],
    pub q_var: [f64; 2],
}

impl Default for McStudyConfig {
    fn default() -> Self {
        Self { n_list: vec![100, 1000, 10000], replicates: 100, q_mean: [0.0, 0.0], q_var: [1.0, 1.0] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSource {
    PowerLaw,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub source: SpectrumSource,
    pub power_law: PowerLaw,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { source: SpectrumSource::PowerLaw, power_law: PowerLaw::default(), path: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportConfig {
    pub setup: SpectralSetup,
    pub data: TransportDataSpec,
    pub spectrum: SpectrumConfig,
    pub prior: TransportPriorSpec,
    /// Posterior draws behind the transport credible bands.
    pub band_samples: usize,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self {
            setup: SpectralSetup::default(),
            data: TransportDataSpec::default(),
            spectrum: SpectrumConfig::default(),
            prior: TransportPriorSpec::default(),
            band_samples: 4000,
        }
    }
}

/// A fully resolved experiment description. Every field is present after
/// [`parse_config`], so emitting and re-parsing is the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub loss: Option<LossKind>,
    /// Also train the standard-VI baseline on the same data.
    #[serde(default = "yes")]
    pub compare_vi: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub poly: PolyConfig,
    #[serde(default)]
    pub mc_study: McStudyConfig,
    #[serde(default)]
    pub transport: TransportConfig,
}

fn yes() -> bool {
    true
}

fn default_level() -> f64 {
    0.95
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Defaults for `experiment`, as if parsed from a document naming only it.
    pub fn new(experiment: ExperimentKind) -> Self {
        let mut cfg = Self {
            experiment,
            loss: None,
            compare_vi: true,
            seed: 0,
            level: default_level(),
            output_dir: default_output_dir(),
            train: TrainConfig::default(),
            poly: PolyConfig::default(),
            mc_study: McStudyConfig::default(),
            transport: TransportConfig::default(),
        };
        cfg.train.steps = experiment.default_steps();
        cfg.resolve().expect("defaults are valid");
        cfg
    }

    pub fn loss(&self) -> LossKind {
        self.loss.unwrap_or_else(|| self.experiment.default_loss())
    }

    /// Sets the seed everywhere it is recorded.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.seed = seed;
    }

    fn resolve(&mut self) -> Result<()> {
        if self.loss.is_none() {
            self.loss = Some(self.experiment.default_loss());
        }
        if self.train.seed != 0 && self.train.seed != self.seed {
            return Err(Error::config("train.seed", "must be omitted or equal the top-level seed"));
        }
        self.train.seed = self.seed;
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::config("level", "must lie in (0, 1)"));
        }
        if self.train.seed != self.seed {
            return Err(Error::config("train.seed", "must equal the top-level seed"));
        }
        self.train.validate()?;
        self.validate_poly()?;
        self.validate_mc_study()?;
        self.validate_transport()
    }

    fn validate_poly(&self) -> Result<()> {
        let p = &self.poly;
        let in_range = |v: f64| (1.0..=3.0).contains(&v);
        if !in_range(p.p) {
            return Err(Error::config("poly.p", "must lie in [1, 3]"));
        }
        if p.p_values.is_empty() || !p.p_values.iter().all(|&v| in_range(v)) {
            return Err(Error::config("poly.p_values", "must be non-empty with entries in [1, 3]"));
        }
        if !(p.noise_std > 0.0) {
            return Err(Error::config("poly.noise_std", "must be positive"));
        }
        if p.noise_values.is_empty() || !p.noise_values.iter().all(|&v| v > 0.0) {
            return Err(Error::config("poly.noise_values", "must be non-empty and positive"));
        }
        if p.n_points < 2 {
            return Err(Error::config("poly.n_points", "must be at least 2"));
        }
        if !(p.domain[1] > p.domain[0]) || !p.domain.iter().all(|v| v.is_finite()) {
            return Err(Error::config("poly.domain", "must be a finite increasing interval"));
        }
        if !(p.domain[0] >= 0.0) {
            return Err(Error::config("poly.domain", "x^p needs a non-negative domain"));
        }
        if !p.prior_var.iter().all(|&v| v > 0.0) {
            return Err(Error::config("poly.prior_var", "must be positive"));
        }
        if !p.prior_mean.iter().chain([&p.a_dg, &p.b_dg]).all(|v| v.is_finite()) {
            return Err(Error::config("poly", "prior mean and data-generating coefficients must be finite"));
        }
        Ok(())
    }

    fn validate_mc_study(&self) -> Result<()> {
        let m = &self.mc_study;
        if m.n_list.is_empty() || m.n_list.contains(&0) {
            return Err(Error::config("mc_study.n_list", "must be non-empty and positive"));
        }
        if m.replicates == 0 {
            return Err(Error::config("mc_study.replicates", "must be positive"));
        }
        if !m.q_var.iter().all(|&v| v > 0.0) {
            return Err(Error::config("mc_study.q_var", "must be positive"));
        }
        Ok(())
    }

    fn validate_transport(&self) -> Result<()> {
        let t = &self.transport;
        t.setup.validate().map_err(|e| Error::config("transport.setup", e.to_string()))?;
        let d = &t.data;
        if !(d.noise_std > 0.0) {
            return Err(Error::config("transport.data.noise_std", "must be positive"));
        }
        if !(d.t >= 0.0) || !d.t.is_finite() {
            return Err(Error::config("transport.data.t", "must be finite and non-negative"));
        }
        if d.n_obs == 0 || !t.setup.grid_size.is_multiple_of(d.n_obs) {
            return Err(Error::config("transport.data.n_obs", "must divide transport.setup.grid_size"));
        }
        if !(d.u.is_finite() && d.nu_p >= 0.0 && d.nu_p.is_finite()) {
            return Err(Error::config("transport.data", "u must be finite and nu_p non-negative"));
        }
        if t.band_samples < 2 {
            return Err(Error::config("transport.band_samples", "must be at least 2"));
        }
        if t.spectrum.source == SpectrumSource::File && t.spectrum.path.is_none() {
            return Err(Error::config("transport.spectrum.path", "required when source = \"file\""));
        }
        build_transport_prior(TransportKind::Frade, &t.prior)?;
        Ok(())
    }
}

/// Parses and validates a TOML document, filling documented defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::config("<document>", e.to_string()))?;
    let steps_given = table.get("train").and_then(|t| t.as_table()).is_some_and(|t| t.contains_key("steps"));
    let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.to_string()))?;
    let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." { "<document>".to_string() } else { path };
        Error::config(key, e.into_inner().message().to_string())
    })?;
    if !steps_given {
        cfg.train.steps = cfg.experiment.default_steps();
    }
    cfg.resolve()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    parse_config(&text)
}

/// Canonical TOML rendering; `parse_config(emit_config(c)) == c`.
pub fn emit_config(cfg: &ExperimentConfig) -> String {
    toml::to_string(cfg).expect("config serializes")
}

/// SHA-256 of the canonical rendering, hex encoded.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(emit_config(cfg).as_bytes()))
}
