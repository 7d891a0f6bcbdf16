mod commands;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::scenario::{LemmaSpec, Scenario};

/// Generalized Forchheimer flow: simulation, estimate checks, stability sweeps
/// and sequence-lemma checks.
#[derive(Parser)]
#[command(name = "forchflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its time series and final state.
    Simulate(Common),
    /// Run a scenario and check the estimate targets.
    Verify(Common),
    /// Run a perturbation sweep and fit convergence orders.
    Sweep(Common),
    /// Check the geometric-sequence and limsup lemmas numerically.
    LemmaCheck(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed in the scenario file.
    #[arg(long)]
    seed: Option<u64>,
}

const EXIT_CHECKS_FAILED: u8 = 1;
const EXIT_ERROR: u8 = 2;

/// Written to `failure.json` when a command cannot complete.
#[derive(Serialize)]
struct Failure {
    scenario_hash: Option<String>,
    kind: &'static str,
    message: String,
    /// Simulation time of a failed step.
    time: Option<f64>,
    dt: Option<f64>,
}

impl Failure {
    fn new(hash: Option<String>, err: &anyhow::Error) -> Self {
        let core = err.chain().find_map(|e| e.downcast_ref::<forchflow::Error>());
        let (kind, time, dt) = match core {
            Some(forchflow::Error::StepFailure { time, dt, .. }) => ("step_failure", Some(*time), Some(*dt)),
            Some(forchflow::Error::Domain(_)) => ("domain", None, None),
            Some(forchflow::Error::RootNonConvergence { .. }) => ("root_non_convergence", None, None),
            Some(forchflow::Error::InsufficientSamples(_)) => ("insufficient_samples", None, None),
            Some(forchflow::Error::Io(_)) => ("io", None, None),
            Some(forchflow::Error::Parse(_)) => ("parse", None, None),
            None => ("invalid_input", None, None),
        };
        Self {
            scenario_hash: hash,
            kind,
            message: format!("{err:#}"),
            time,
            dt,
        }
    }
}

fn execute(command: &Command, args: &Common, hash: &mut Option<String>) -> Result<bool> {
    let text = scenario::read(&args.scenario)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    if let Command::LemmaCheck(_) = command {
        let mut spec = LemmaSpec::from_json(&text)?;
        if let Some(seed) = args.seed {
            spec.seed = seed;
        }
        spec.validate()?;
        let (dump, h) = scenario::normalized(&spec)?;
        *hash = Some(h.clone());
        write(&args.out, "scenario.json", &dump)?;
        return commands::lemma_check(&spec, &h, &args.out);
    }
    let mut s = Scenario::from_json(&text)?;
    if let Some(seed) = args.seed {
        s.seed = seed;
    }
    let loaded = s.validate()?;
    let (dump, h) = scenario::normalized(&loaded.scenario)?;
    *hash = Some(h.clone());
    write(&args.out, "scenario.json", &dump)?;
    match command {
        Command::Simulate(_) => commands::simulate(&loaded, &h, &args.out),
        Command::Verify(_) => commands::verify(&loaded, &h, &args.out),
        Command::Sweep(_) => commands::sweep(&loaded, &h, &args.out),
        Command::LemmaCheck(_) => unreachable!(),
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = match &cli.command {
        Command::Simulate(a) | Command::Verify(a) | Command::Sweep(a) | Command::LemmaCheck(a) => a,
    };
    let mut hash = None;
    match execute(&cli.command, args, &mut hash) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more applicable checks failed; see the report in {}", args.out.display());
            ExitCode::from(EXIT_CHECKS_FAILED)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            let failure = Failure::new(hash, &err);
            if args.out.is_dir() {
                if let Err(e) = commands::write_json(&args.out, "failure.json", &failure) {
                    eprintln!("could not write failure.json: {e:#}");
                }
            } else if let Ok(text) = serde_json::to_string(&failure) {
                println!("{text}");
            }
            ExitCode::from(EXIT_ERROR)
        }
    }
}
