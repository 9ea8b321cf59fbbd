//! Command-line arguments. Every experiment's arguments serialize into the
//! resolved config embedded in its outputs, and `replay` reads them back.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use specdom::PerturbMode;

#[derive(Debug, Parser)]
#[command(name = "specdom", version, about = "Spectral geometry experiments on weighted complexes")]
pub struct Cli {
    /// Directory receiving the output files.
    #[arg(long, global = true, default_value = ".")]
    pub output_dir: PathBuf,

    /// Base seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for parallel loops.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    /// Overwrite existing output files.
    #[arg(long, global = true)]
    pub force: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    #[command(flatten)]
    Experiment(Experiment),

    /// Re-run the experiment recorded in an output JSON file.
    Replay {
        /// JSON output of an earlier run.
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Experiment {
    /// Lowest eigenpairs of a complex.
    Spectrum(SpectrumArgs),
    /// Morse-seeded fundamental domain in a truncated cover, then local search.
    Domain(DomainArgs),
    /// Bottom of the spectrum of truncated covers over a radius sweep.
    Cover(CoverArgs),
    /// Killed random walk: survival decay or harmonic extension.
    Mc(McArgs),
    /// Randomized perturbation experiments.
    Generic(GenericArgs),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Spectrum(_) => "spectrum",
            Experiment::Domain(_) => "domain",
            Experiment::Cover(_) => "cover",
            Experiment::Mc(_) => "mc",
            Experiment::Generic(_) => "generic",
        }
    }

    pub fn inputs_mut(&mut self) -> Vec<&mut PathBuf> {
        match self {
            Experiment::Spectrum(a) => vec![&mut a.input],
            Experiment::Domain(a) => vec![&mut a.input, &mut a.voltage],
            Experiment::Cover(a) => vec![&mut a.input, &mut a.voltage],
            Experiment::Mc(a) => {
                let mut v = vec![&mut a.input];
                if let Some(b) = a.boundary.as_mut() {
                    v.push(b);
                }
                v
            }
            Experiment::Generic(a) => vec![&mut a.input],
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SpectrumArgs {
    /// Complex JSON.
    #[arg(long)]
    pub input: PathBuf,
    /// Number of eigenpairs; defaults to min(6, dimension).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Include eigenvectors in the JSON output.
    #[arg(long)]
    pub vectors: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DomainArgs {
    /// Base complex JSON.
    #[arg(long)]
    pub input: PathBuf,
    /// Voltage assignment JSON.
    #[arg(long)]
    pub voltage: PathBuf,
    /// Truncation radius in the word metric.
    #[arg(long, default_value_t = 3)]
    pub radius: usize,
    /// Eigenvalue evaluations allowed to the local search.
    #[arg(long, default_value_t = 500)]
    pub budget: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CoverArgs {
    /// Base complex JSON.
    #[arg(long)]
    pub input: PathBuf,
    /// Voltage assignment JSON.
    #[arg(long)]
    pub voltage: PathBuf,
    /// Radius or inclusive range, e.g. `5` or `3..9`.
    #[arg(long, default_value = "1..4", value_parser = parse_range)]
    pub radius: RadiusRange,
    /// Floquet samples per dimension for abelian groups.
    #[arg(long, default_value_t = specdom::covering::FLOQUET_GRID)]
    pub grid: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadiusRange {
    pub from: usize,
    pub to: usize,
}

fn parse_range(s: &str) -> Result<RadiusRange, String> {
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("bad radius {x:?}: {e}"));
    let (from, to) = match s.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
        None => {
            let r = parse(s)?;
            (r, r)
        }
    };
    if from > to {
        return Err(format!("empty radius range {s}"));
    }
    Ok(RadiusRange { from, to })
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct McArgs {
    /// Complex JSON.
    #[arg(long)]
    pub input: PathBuf,
    /// Start vertex for the survival curve.
    #[arg(long, default_value_t = 0)]
    pub start: usize,
    /// Walks per start vertex.
    #[arg(long, default_value_t = 100_000)]
    pub paths: u64,
    #[arg(long, default_value_t = 10.0)]
    pub horizon: f64,
    /// Grid points in (0, horizon].
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    /// Estimate the λ-harmonic extension instead of the survival curve.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// JSON array of boundary values per vertex (default all ones).
    #[arg(long)]
    pub boundary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Simplicity,
    Morse,
    Continuity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ModeArg {
    Conductances,
    EdgeLengths,
    Measures,
}

impl From<ModeArg> for PerturbMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Conductances => PerturbMode::Conductances,
            ModeArg::EdgeLengths => PerturbMode::EdgeLengths,
            ModeArg::Measures => PerturbMode::Measures,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenericArgs {
    /// Complex JSON.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Study::Simplicity)]
    pub study: Study,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Eigenvalues compared by the simplicity and continuity studies.
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Smallest gap counted as split.
    #[arg(long, default_value_t = 1e-6)]
    pub gap: f64,
    /// Eigenfunction examined by the Morse study.
    #[arg(long, default_value_t = 1)]
    pub index: usize,
    /// Perturbed quantity; defaults to edge lengths on surfaces, conductances otherwise.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Comma-separated ε values for the continuity study.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.01,0.001")]
    pub sweep: Vec<f64>,
}
