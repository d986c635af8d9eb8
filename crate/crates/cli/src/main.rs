//! `bgk`: run the BGK solver and its verification suites from a config file.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CommandError;
use output::{write_bare_failures, Failure, OutputDir};

#[derive(Parser)]
#[command(name = "bgk", version, about = "Discrete-velocity BGK solver and verification suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver and write the entropy ledger.
    Simulate(CommonArgs),
    /// Run the randomized invariant suite.
    Verify(CommonArgs),
    /// Sweep the ball and equilibrium stability bounds.
    StabilitySweep(CommonArgs),
    /// Tabulate the endpoint counterexample.
    Counterexample(CommonArgs),
    /// Relaxation-time sweep against an Euler reference.
    HydroLimit(CommonArgs),
    /// Weak-form residuals of a simulated trajectory.
    Weakform(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "BGK_THREADS")]
    threads: Option<usize>,
}

impl Command {
    fn parts(&self) -> (&'static str, &CommonArgs) {
        match self {
            Command::Simulate(a) => ("simulate", a),
            Command::Verify(a) => ("verify", a),
            Command::StabilitySweep(a) => ("stability-sweep", a),
            Command::Counterexample(a) => ("counterexample", a),
            Command::HydroLimit(a) => ("hydro-limit", a),
            Command::Weakform(a) => ("weakform", a),
        }
    }
}

fn run(name: &str, args: &CommonArgs) -> Result<Vec<Failure>, (CommandError, Option<PathBuf>)> {
    if let Some(t) = args.threads {
        if t == 0 {
            return Err((CommandError::Usage("--threads must be at least 1".into()), args.output.clone()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| (CommandError::Usage(e.to_string()), args.output.clone()))?;
    }
    let cfg = config::parse_config(&args.config).map_err(|e| (e.into(), args.output.clone()))?;
    let dir = args.output.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let out = OutputDir::create(&dir, name, &cfg.resolved).map_err(|e| (e.into(), Some(dir.clone())))?;
    out.write_text("resolved_config.txt", &format!("# format = {}\n{}", output::FORMAT_TAG, cfg.resolved_text()))
        .map_err(|e| (e.into(), Some(dir.clone())))?;
    let result = match name {
        "simulate" => commands::simulate(&cfg, &out),
        "verify" => commands::verify(&cfg, &out),
        "stability-sweep" => commands::stability_sweep(&cfg, &out),
        "counterexample" => commands::counterexample(&cfg, &out),
        "hydro-limit" => commands::hydro_limit(&cfg, &out),
        _ => commands::weakform(&cfg, &out),
    };
    match result {
        Ok(failures) => {
            commands::record_failures(&out, &failures).map_err(|e| (e.into(), Some(dir.clone())))?;
            Ok(failures)
        }
        Err(e) => Err((e, Some(dir))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = cli.command.parts();
    match run(name, args) {
        Ok(failures) if failures.is_empty() => ExitCode::SUCCESS,
        Ok(failures) => {
            eprintln!("{} check(s) failed; see failures.csv", failures.len());
            ExitCode::from(1)
        }
        Err((e, dir)) => {
            eprintln!("error: {e}");
            if let Some(dir) = dir {
                let kind = match &e {
                    CommandError::Usage(_) => "usage",
                    CommandError::Config(_) => "config",
                    CommandError::Model(_) => "model",
                    CommandError::Io(_) => "io",
                };
                let _ = write_bare_failures(&dir, name, &[Failure::new(kind, e.to_string())]);
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
