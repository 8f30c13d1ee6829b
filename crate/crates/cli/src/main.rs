use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use paoti_core::experiments::{compare_dynamic, fit_curves, sweep_lambda, sweep_nc, validate};
use paoti_core::{ExperimentConfig, Output, Runner};

#[derive(Parser, Debug)]
#[command(name = "paoti", version, about = "Peak age of task information experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Base seed, overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// PAoTI against the number of channel uses.
    SweepNc,
    /// PAoTI against the arrival rate.
    SweepLambda,
    /// Fixed against adaptive channel uses.
    CompareDynamic,
    /// Closed forms against simulation; exits 1 on any failed check.
    Validate,
    /// Fit saturating curves to the accuracy tables.
    FitCurves,
}

fn run(cli: &Cli) -> paoti_core::Result<Output> {
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let runner = Runner::new(config, cli.jobs)?;
    let output = match cli.command {
        Command::SweepNc => sweep_nc(&runner)?,
        Command::SweepLambda => sweep_lambda(&runner)?,
        Command::CompareDynamic => compare_dynamic(&runner)?,
        Command::Validate => validate(&runner)?,
        Command::FitCurves => fit_curves(&runner)?,
    };
    output.write_to(&cli.out)?;
    Ok(output)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            print!("{}", out.summary);
            if out.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
