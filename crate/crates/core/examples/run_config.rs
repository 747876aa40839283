//! Parse a config, run it and write the artifact bundle.
//!
//! `cargo run --release --example run_config -- configs/poly_sweep_p.toml /tmp/out`

use std::path::PathBuf;

use pvi::harness::{emit_bundle, load_config, run_experiment, run_mc_study, ExperimentKind};

fn main() -> pvi::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = PathBuf::from(args.next().unwrap_or_else(|| "configs/poly_sweep_p.toml".into()));
    let cfg = load_config(&path)?;
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| cfg.output_dir.clone());
    let bundle =
        if cfg.experiment == ExperimentKind::PolyMcStudy { run_mc_study(&cfg)? } else { run_experiment(&cfg)? };
    for entry in emit_bundle(&bundle, &out)? {
        println!("{:>10}  {}", entry.bytes, entry.path);
    }
    Ok(())
}
