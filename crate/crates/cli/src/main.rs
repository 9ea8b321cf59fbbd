//! `specdom`: command-line driver for the spectral geometry experiments.
//!
//! Exit codes: 0 success, 1 rejected by the library, 2 usage error.

mod commands;
mod config;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde::Deserialize;
use serde_json::json;

use commands::Failure;
use config::{Cli, Command, Experiment};
use output::OutputDir;

#[derive(Deserialize)]
struct Recorded {
    experiment: Experiment,
    seed: u64,
    threads: usize,
}

fn usage(code: &'static str, message: impl Into<String>) -> Failure {
    Failure::Usage {
        code,
        message: message.into(),
    }
}

fn load_recorded(path: &Path) -> Result<Recorded, Failure> {
    let s = fs::read_to_string(path).map_err(|e| usage("input_not_found", format!("{}: {e}", path.display())))?;
    let doc: serde_json::Value =
        serde_json::from_str(&s).map_err(|e| Failure::Domain(specdom::Error::Schema(e.to_string())))?;
    serde_json::from_value(doc["config"].clone())
        .map_err(|e| Failure::Domain(specdom::Error::Schema(format!("no replayable config: {e}"))))
}

fn resolve_inputs(exp: &mut Experiment) -> Result<(), Failure> {
    for p in exp.inputs_mut() {
        *p = fs::canonicalize(&*p).map_err(|e| usage("input_not_found", format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let (mut exp, seed, threads) = match cli.command {
        Command::Experiment(e) => (e, cli.seed, cli.threads),
        Command::Replay { input } => {
            let r = load_recorded(&input)?;
            (r.experiment, r.seed, r.threads)
        }
    };
    if threads == 0 {
        return Err(usage("invalid_threads", "--threads must be at least 1"));
    }
    resolve_inputs(&mut exp)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| usage("invalid_threads", e.to_string()))?;
    let out_dir: PathBuf = cli.output_dir;
    let header = json!({ "experiment": exp, "seed": seed, "threads": threads });
    let out = OutputDir::prepare(&out_dir, commands::output_names(&exp), cli.force, header)
        .map_err(|m| usage("output_exists", m))?;
    log::info!("running {} with seed {seed} on {threads} thread(s)", exp.name());
    commands::run(&exp, seed, &out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SPECDOM_LOG", "error")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (status, doc) = match f {
                Failure::Domain(e) => (1, json!({ "error": e.code(), "message": e.to_string() })),
                Failure::Io(m) => (1, json!({ "error": "io", "message": m })),
                Failure::Usage { code, message } => (2, json!({ "error": code, "message": message })),
            };
            log::error!("{}", doc["message"]);
            eprintln!("{doc}");
            ExitCode::from(status)
        }
    }
}
