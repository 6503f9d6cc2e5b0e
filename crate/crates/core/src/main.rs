use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gauss_trace::cli::{run, sweep, ExperimentConfig, RunOptions, RunOutcome, SweepAxis};

#[derive(Parser)]
#[command(name = "gauss-trace", version, about = "Gaussian trace-calculus experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// TOML experiment description.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Repeat an experiment along one axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// dimension, samples, bandwidth or degree.
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

fn report(out: &RunOutcome) {
    for c in &out.checks {
        let tag = match (c.pass, c.gated) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "NOTE",
        };
        println!("[{tag}] {}: {}", c.name, c.detail);
    }
    println!("output: {}", out.out_dir.display());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, axis) = match cli.cmd {
        Cmd::Run { common } => (common, None),
        Cmd::Sweep { common, axis, values } => (common, Some((axis, values))),
    };
    let result = ExperimentConfig::load(&common.config).and_then(|(cfg, _)| {
        let opts = RunOptions {
            seed: common.seed,
            out_dir: common.out,
            workers: common.workers,
        };
        match axis {
            None => run(&cfg, &opts),
            Some((axis, values)) => sweep(&cfg, axis, &values, &opts),
        }
    });
    match result {
        Ok(out) => {
            report(&out);
            if out.passed() {
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
