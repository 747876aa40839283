use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pvi::harness::{emit_bundle, emit_config, load_config, run_experiment, run_mc_study, ExperimentConfig};
use pvi::Error;

#[derive(Parser)]
#[command(name = "pvi", version, about = "Standard vs predictive variational inference experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Overrides {
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the credible level of the bands.
    #[arg(long)]
    level: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment and write its artifacts.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the Monte Carlo error study on the configured polynomial data.
    McStudy {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check a config and print it with defaults filled in.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn configure(path: &Path, o: &Overrides) -> Result<ExperimentConfig, Error> {
    let mut cfg = load_config(path)?;
    if let Some(seed) = o.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &o.out {
        cfg.output_dir = out.clone();
    }
    if let Some(level) = o.level {
        cfg.level = level;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Validate { config, overrides } => {
            print!("{}", emit_config(&configure(&config, &overrides)?));
        }
        Command::Run { config, overrides } => {
            let cfg = configure(&config, &overrides)?;
            let bundle = run_experiment(&cfg)?;
            let manifest = emit_bundle(&bundle, &cfg.output_dir)?;
            for run in &bundle.runs {
                let s = &run.summary;
                println!(
                    "{:<28} coverage {:.3}  posterior trace {:.6e}  final loss {:.6e}",
                    s.label, s.coverage, s.posterior_trace, s.final_loss
                );
            }
            println!("wrote {} files to {}", manifest.len() + 1, cfg.output_dir.display());
        }
        Command::McStudy { config, overrides } => {
            let cfg = configure(&config, &overrides)?;
            let bundle = run_mc_study(&cfg)?;
            let manifest = emit_bundle(&bundle, &cfg.output_dir)?;
            for m in bundle.summary().mc_study.unwrap_or_default() {
                println!(
                    "n = {:<7} max |VI error| {:>10.4}%   max |PVI error| {:>10.4}%",
                    m.n, m.max_vi_percent_error, m.max_pvi_percent_error
                );
            }
            println!("wrote {} files to {}", manifest.len() + 1, cfg.output_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage mistakes count as configuration errors
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            if e.is_config_error() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
