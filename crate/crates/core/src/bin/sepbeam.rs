use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sepbeam::harness::{run, ExperimentConfig, ExperimentKind, Overrides};

#[derive(Parser)]
#[command(
    name = "sepbeam",
    version,
    about = "Separable MMSE beamforming experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        /// ber_vs_snr, ber_vs_rho, cond_vs_rho, flops_vs_size or array_factor_maps.
        #[arg(long)]
        experiment: Option<ExperimentKind>,
    },
}

fn main() -> ExitCode {
    let Command::Run {
        config,
        out,
        seed,
        trials,
        workers,
        experiment,
    } = Cli::parse().command;

    let result = ExperimentConfig::load(&config).and_then(|mut cfg| {
        cfg.apply(&Overrides {
            seed,
            trials,
            workers,
            experiment,
        })?;
        run(&cfg, &out)
    });
    match result {
        Ok(o) => {
            println!("{}", o.manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
