use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use rbsg_core::harness::{
    load_spec, preset_accuracy_check, preset_kl_convergence, preset_selection_table, preset_utility_comparison,
    run_spec, write_outputs, ExperimentSpec, PresetOutput,
};

#[derive(Parser, Debug)]
#[command(
    name = "rbsg",
    version,
    about = "Repeated Bayesian sequential game self-play experiments"
)]
struct Cli {
    /// Base seed; repetition r uses seed + r. At most 2^63 - 1 so the manifest can record it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    seed: Option<u64>,

    /// Output directory for CSV reports and manifests.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Number of repetitions.
    #[arg(long, global = true)]
    reps: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment described by a spec file (its preset, or plain self-play).
    Run { spec: PathBuf },
    /// Classifier selection percentages and accuracy per concentrated type distribution.
    Table {
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Belief convergence (KL divergence per trial) under both update rules.
    Kl {
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Self-play utility against always using the most hardened classifier.
    Utility {
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Re-estimate the accuracy matrix from the stochastic oracle.
    AccCheck {
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Classifications per cell.
        #[arg(long)]
        samples: Option<usize>,
    },
}

fn resolve(path: Option<&PathBuf>, cli: &Cli) -> anyhow::Result<ExperimentSpec> {
    let mut spec = match path {
        Some(p) => load_spec(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentSpec::default(),
    };
    if let Some(seed) = cli.seed {
        spec.run.seed = seed;
    }
    if let Some(out) = &cli.out {
        spec.output_dir = out.clone();
    }
    if let Some(reps) = cli.reps {
        anyhow::ensure!(reps >= 1, "--reps must be >= 1");
        spec.repetitions = reps;
    }
    Ok(spec)
}

fn execute(cli: &Cli) -> anyhow::Result<()> {
    let (spec, output): (ExperimentSpec, PresetOutput) = match &cli.command {
        Command::Run { spec } => {
            let spec = resolve(Some(spec), cli)?;
            let out = run_spec(&spec)?;
            (spec, out)
        }
        Command::Table { spec } => {
            let spec = resolve(spec.as_ref(), cli)?;
            let (_, out) = preset_selection_table(&spec)?;
            (spec, out)
        }
        Command::Kl { spec } => {
            let spec = resolve(spec.as_ref(), cli)?;
            let (_, out) = preset_kl_convergence(&spec)?;
            (spec, out)
        }
        Command::Utility { spec } => {
            let spec = resolve(spec.as_ref(), cli)?;
            let (_, out) = preset_utility_comparison(&spec)?;
            (spec, out)
        }
        Command::AccCheck { spec, samples } => {
            let mut spec = resolve(spec.as_ref(), cli)?;
            if let Some(n) = samples {
                anyhow::ensure!(*n >= 1, "--samples must be >= 1");
                spec.samples = *n;
            }
            let (_, out) = preset_accuracy_check(&spec)?;
            (spec, out)
        }
    };
    write_outputs(&spec.output_dir, &output.name, &output.rows, &output.manifest)?;
    print!("{}", output.summary);
    log::info!(
        "wrote {} rows to {}",
        output.rows.len(),
        spec.output_dir.join(format!("{}.csv", output.name)).display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
