//! Experiment configuration, end-to-end runs and artifact emission.

pub mod bundle;
pub mod config;
pub mod experiments;

pub use bundle::{
    contour_grid, coverage_metric, emit_bundle, marginal_curve, Bands, ContourGrid, ExperimentSummary, ManifestEntry,
    MarginalCurve, McStudyMaxima, OutputBundle, RunBundle, RunSummary, SweepPoint, CONTOUR_HALF_WIDTH, CONTOUR_POINTS,
    MARGINAL_HALF_WIDTH, MARGINAL_POINTS,
};
pub use config::{
    config_hash, emit_config, load_config, parse_config, ExperimentConfig, ExperimentKind, McStudyConfig, PolyConfig,
    PolyObjective, PredictiveForm, SpectrumConfig, SpectrumSource, TransportConfig,
};
pub use experiments::{load_spectrum, run_experiment, run_mc_study};
