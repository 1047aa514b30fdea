use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use holojcas::config::{OutputFormat, RunConfigFile};
use holojcas::harness::{sweep, trial_channel};
use holojcas::output::{write_atomic, write_sweep, write_trace};
use holojcas::validate::{run_checks, Fault};
use holojcas_core::geometry::build_geometry;
use holojcas_core::optimizer::{optimize_with, OptimizeOptions};

/// Holographic joint communication and sensing simulator.
#[derive(Parser)]
#[command(name = "holo-jcas", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; overrides "output" in the config, stdout when neither is set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides "master_seed".
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides "n_trials".
    #[arg(long)]
    trials: Option<usize>,
    /// Overrides "format".
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

impl Common {
    fn load(&self) -> anyhow::Result<RunConfigFile> {
        let mut file = match &self.config {
            Some(path) => RunConfigFile::load(path)?,
            None => RunConfigFile::default(),
        };
        if let Some(seed) = self.seed {
            file.master_seed = seed;
        }
        if let Some(n) = self.trials {
            file.n_trials = n;
        }
        if let Some(f) = self.format {
            file.format = f;
        }
        if let Some(out) = &self.out {
            file.output = Some(out.clone());
        }
        Ok(file)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Per-iteration trace of one seeded optimization (trial 0).
    Convergence(Common),
    /// Proposed vs benchmark averages along the configured sweep axis.
    Sweep(Common),
    /// Run the numerical self-checks.
    Validate {
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<Fault>,
    },
}

fn emit<F>(target: Option<&PathBuf>, body: F) -> anyhow::Result<()>
where
    F: FnOnce(&mut dyn Write) -> holojcas::Result<()>,
{
    match target {
        Some(path) => {
            write_atomic(path, body).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock)?;
            Ok(())
        }
    }
}

fn convergence(common: &Common) -> anyhow::Result<()> {
    let file = common.load()?;
    let config = file.system()?;
    let geometry = build_geometry(&config)?;
    let h = trial_channel(&config, 0);
    let (_, trace) = optimize_with(&config, &h, &geometry, &OptimizeOptions::default(), &mut ())?;
    emit(file.output.as_ref(), |out| {
        write_trace(&trace, file.format, out)
    })?;
    eprintln!(
        "{} iterations, {}",
        trace.iterations(),
        if trace.converged() {
            "tolerance met"
        } else {
            "iteration cap reached"
        }
    );
    Ok(())
}

fn run_sweep(common: &Common) -> anyhow::Result<()> {
    let file = common.load()?;
    let (config, section) = file.validate_sweep()?;
    let result = sweep(&config, section.axis, &section.values, file.n_trials)?;
    emit(file.output.as_ref(), |out| {
        write_sweep(&result, file.format, out)
    })?;
    let failed: usize = result.points.iter().map(|p| p.n_failed).sum();
    if failed > 0 {
        eprintln!("{failed} trial(s) failed and were excluded from the means");
    }
    Ok(())
}

fn validate(fault: Option<Fault>) -> anyhow::Result<()> {
    let results = run_checks(fault);
    for r in &results {
        println!(
            "{} {} ({:.3} s): {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.seconds,
            r.detail
        );
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        bail!("{failed} of {} checks failed", results.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Convergence(c) => convergence(c),
        Command::Sweep(c) => run_sweep(c),
        Command::Validate { inject_fault } => validate(*inject_fault),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
