//! Likelihood-free PVI of the ADE and FRADE models against misspecified data.
//!
//! `cargo run --release --example transport_calibration -- [steps] [seed]`

use pvi::harness::{run_experiment, ExperimentConfig, ExperimentKind};

fn main() -> pvi::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2000);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    for kind in [ExperimentKind::TransportAde, ExperimentKind::TransportFrade] {
        let mut cfg = ExperimentConfig::new(kind);
        cfg.train.steps = steps;
        cfg.set_seed(seed);
        let bundle = run_experiment(&cfg)?;
        for run in &bundle.runs {
            let s = &run.summary;
            println!(
                "{:<16} coverage {:.3}  band width {:.4}  E[theta] {:.4?}",
                s.label, s.coverage, s.mean_predictive_width, s.physical_mean
            );
        }
    }
    Ok(())
}
