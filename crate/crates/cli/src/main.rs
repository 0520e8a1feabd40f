use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dimerlab_cli::{execute, load_config, presets, CliError, CliResult, RunConfig};

#[derive(Parser)]
#[command(name = "dimerlab", version, about = "Simulate and fit coupled two-level emitters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Excitation spectrum (CSV: freq_mhz,signal)
    Spectrum(RunArgs),
    /// Intensity correlation g2(tau) (CSV: tau_ns,g2)
    G2(RunArgs),
    /// Decay after preparing a state (CSV: t_ns,rate)
    Lifetime(RunArgs),
    /// Subradiant/superradiant peak ratio against detuning (CSV: delta_mhz,ratio)
    Extinction(RunArgs),
    /// Spectra at increasing drive with Lorentzian peak summaries
    Saturate(RunArgs),
    /// Least-squares fit of pair parameters (JSON result)
    Fit(RunArgs),
    /// Monte Carlo probability of a chance resonance (CSV: n_samples,p_hat,stderr)
    BaselineProb(RunArgs),
    /// Run a bundled parameter set
    Reproduce {
        #[arg(value_parser = presets::names())]
        preset: String,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CommonArgs {
    /// Output directory (overrides `output.dir`; default `out`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides `seed`)
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel scans
    #[arg(long)]
    threads: Option<usize>,
}

fn prepare(command: &str, args: RunArgs) -> CliResult<(RunConfig, CommonArgs)> {
    let config = load_config(&args.config)?;
    if config.task.name() != command {
        return Err(CliError::config(
            "task.kind",
            format!("the config describes a `{}` task but `{command}` was requested", config.task.name()),
        ));
    }
    Ok((config, args.common))
}

fn run(cli: Cli) -> CliResult<()> {
    let (mut config, common, default_dir) = match cli.command {
        Command::Reproduce { preset, common } => {
            (presets::preset(&preset)?, common, PathBuf::from("out").join(&preset))
        }
        cmd => {
            let (name, args) = match cmd {
                Command::Spectrum(a) => ("spectrum", a),
                Command::G2(a) => ("g2", a),
                Command::Lifetime(a) => ("lifetime", a),
                Command::Extinction(a) => ("extinction", a),
                Command::Saturate(a) => ("saturate", a),
                Command::Fit(a) => ("fit", a),
                Command::BaselineProb(a) => ("baseline-prob", a),
                Command::Reproduce { .. } => unreachable!(),
            };
            let (config, common) = prepare(name, args)?;
            (config, common, PathBuf::from("out"))
        }
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
        config.validate()?;
    }
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::config("--threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config("--threads", e.to_string()))?;
    }
    let dir = common.out.or_else(|| config.output.dir.clone()).unwrap_or(default_dir);
    let manifest = execute(&config, &dir, common.threads)?;
    eprintln!(
        "{}: wrote {} file(s) to {} in {:.2} s",
        manifest.task,
        manifest.outputs.len() + 1,
        dir.display(),
        manifest.timings_s.total
    );
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
