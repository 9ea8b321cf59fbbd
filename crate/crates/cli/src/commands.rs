//! Thin drivers from parsed arguments to library calls and output files.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use specdom::covering::FloquetResult;
use specdom::spectral::DENSE_LIMIT;
use specdom::stochastic::{exact_survival, harmonic_oracle, ORACLE_LIMIT};
use specdom::{
    assemble_laplacian, build_fundamental_domain, continuity_sweep, derive_cover, floquet_lambda0,
    harmonic_extension_mc, improve_domain, lowest_eigenpairs, morse_experiment, simplicity_experiment,
    simulate_survival, spectral, CoverSpec, DeckGroup, Error, PerturbMode, PerturbationSpec, SolverOptions,
    VoltageAssignment, WalkConfig, WeightedComplex,
};

use crate::config::*;
use crate::output::OutputDir;

pub enum Failure {
    /// Rejected by the library; exit 1.
    Domain(Error),
    /// Bad invocation; exit 2.
    Usage { code: &'static str, message: String },
    /// Failed to write results; exit 1.
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

/// Output files each experiment writes, checked before it runs.
pub fn output_names(exp: &Experiment) -> &'static [&'static str] {
    match exp {
        Experiment::Spectrum(_) => &["spectrum.csv", "spectrum.json"],
        Experiment::Domain(_) => &["domain.json", "domain_report.json"],
        Experiment::Cover(_) => &["cover.csv", "cover.json"],
        Experiment::Mc(a) if a.lambda.is_some() => &["harmonic.csv", "mc.json"],
        Experiment::Mc(_) => &["survival.csv", "mc.json"],
        Experiment::Generic(a) if a.study == Study::Continuity => &["continuity.csv", "generic.json"],
        Experiment::Generic(_) => &["generic.json"],
    }
}

pub fn run(exp: &Experiment, seed: u64, out: &OutputDir) -> Outcome {
    match exp {
        Experiment::Spectrum(a) => spectrum(a, out),
        Experiment::Domain(a) => domain(a, out),
        Experiment::Cover(a) => cover(a, out),
        Experiment::Mc(a) => mc(a, seed, out),
        Experiment::Generic(a) => generic(a, seed, out),
    }
}

fn read_voltage(base: &WeightedComplex, path: &Path) -> Result<VoltageAssignment, Failure> {
    let s = fs::read_to_string(path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    Ok(VoltageAssignment::from_json(base, &s)?)
}

fn ground_state(c: &WeightedComplex, tol: f64) -> Result<(f64, Vec<f64>), Failure> {
    let op = assemble_laplacian(c)?;
    let res = lowest_eigenpairs(&op, 1, tol)?;
    Ok((res.lambda0(), op.extend_vector(&res.eigenvectors[0])))
}

fn spectrum(a: &SpectrumArgs, out: &OutputDir) -> Outcome {
    let c = WeightedComplex::read(&a.input)?;
    let op = assemble_laplacian(&c)?;
    let k = a.k.unwrap_or(op.dim().min(6));
    let res = lowest_eigenpairs(&op, k, a.tol)?;
    log::info!("lambda0 = {}", res.lambda0());
    out.csv("spectrum.csv", &res.to_csv())?;
    out.json(
        "spectrum.json",
        json!({ "free_vertices": op.free, "result": res.to_json(a.vectors) }),
    )?;
    Ok(())
}

fn domain(a: &DomainArgs, out: &OutputDir) -> Outcome {
    let base = WeightedComplex::read(&a.input)?;
    let voltage = read_voltage(&base, &a.voltage)?;
    let cover = derive_cover(&CoverSpec::new(base.clone(), voltage, a.radius)?)?;
    let (l0, phi) = ground_state(&cover.base, spectral::DEFAULT_TOL)?;
    let seeded = build_fundamental_domain(&cover, &phi)?;
    log::info!("seeded domain lambda0 = {}", seeded.lambda0_neumann);
    let search = improve_domain(&seeded, &cover, &phi, a.budget)?;
    let best = &search.domain;
    log::info!("searched domain lambda0 = {} after {} evaluations", best.lambda0_neumann, search.evaluations);
    out.json("domain.json", json!({ "domain": best.to_json(), "seeded": seeded.to_json() }))?;
    out.json(
        "domain_report.json",
        json!({
            "lambda0_base": l0,
            "lambda0_seeded": seeded.lambda0_neumann,
            "lambda0_searched": best.lambda0_neumann,
            "max_defect": best.max_defect(),
            "gap": l0 - best.lambda0_neumann,
            "relative_gap": if l0 > 0.0 { (l0 - best.lambda0_neumann) / l0 } else { 0.0 },
            "evaluations": search.evaluations,
            "history": search.history,
            "cover_vertices": cover.num_vertices(),
        }),
    )?;
    Ok(())
}

fn cover(a: &CoverArgs, out: &OutputDir) -> Outcome {
    let base = WeightedComplex::read(&a.input)?;
    let voltage = read_voltage(&base, &a.voltage)?;
    let (l0, _) = ground_state(&base, a.tol)?;
    let opts = SolverOptions::with_tol(a.tol);
    let mut csv = String::from("radius,vertices,free_vertices,lambda0\n");
    let mut rows = Vec::new();
    for r in a.radius.from..=a.radius.to {
        let c = derive_cover(&CoverSpec::new(base.clone(), voltage.clone(), r)?)?;
        let free = c.complex.vertices().iter().filter(|v| !v.tag.is_dirichlet()).count();
        let lambda = c.lambda0(&opts)?;
        log::info!("radius {r}: {} vertices, lambda0 = {lambda}", c.num_vertices());
        csv.push_str(&format!("{r},{},{free},{lambda:?}\n", c.num_vertices()));
        rows.push(json!({ "radius": r, "vertices": c.num_vertices(), "free_vertices": free, "lambda0": lambda }));
    }
    let floquet: Option<FloquetResult> = match voltage.group() {
        DeckGroup::FreeAbelian(_) => Some(floquet_lambda0(&base, &voltage, a.grid)?),
        _ => None,
    };
    out.csv("cover.csv", &csv)?;
    out.json(
        "cover.json",
        json!({
            "group": voltage.group().spec(),
            "lambda0_base": l0,
            "truncations": rows,
            "floquet": floquet,
        }),
    )?;
    Ok(())
}

fn read_boundary(path: Option<&Path>, n: usize) -> Result<Vec<f64>, Failure> {
    match path {
        None => Ok(vec![1.0; n]),
        Some(p) => {
            let s = fs::read_to_string(p).map_err(|e| Error::Schema(format!("{}: {e}", p.display())))?;
            let f: Vec<f64> = serde_json::from_str(&s).map_err(Error::from)?;
            if f.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: f.len() }.into());
            }
            Ok(f)
        }
    }
}

fn mc(a: &McArgs, seed: u64, out: &OutputDir) -> Outcome {
    let c = WeightedComplex::read(&a.input)?;
    let op = assemble_laplacian(&c)?;
    match a.lambda {
        None => {
            let cfg = WalkConfig::uniform(a.start, a.paths, a.horizon, a.points, seed)?;
            let curve = simulate_survival(&op, &cfg)?;
            let oracle = if op.dim() <= ORACLE_LIMIT {
                Some(exact_survival(&op, a.start, &curve.times)?)
            } else {
                None
            };
            let lambda0 = if op.dim() <= DENSE_LIMIT {
                Some(lowest_eigenpairs(&op, 1, spectral::DEFAULT_TOL)?.lambda0())
            } else {
                None
            };
            if let Some(f) = &curve.fit {
                log::info!("fitted rate {} ± {}", f.rate, f.rate_stderr);
            }
            out.csv("survival.csv", &curve.to_csv())?;
            out.json(
                "mc.json",
                json!({
                    "fit": curve.fit_json(),
                    "times": curve.times,
                    "counts": curve.counts,
                    "oracle_survival": oracle,
                    "lambda0": lambda0,
                }),
            )?;
        }
        Some(lambda) => {
            let f = read_boundary(a.boundary.as_deref(), c.num_vertices())?;
            let cfg = WalkConfig::uniform(a.start, a.paths, 1.0, 1, seed)?;
            let est = harmonic_extension_mc(&op, lambda, &f, &cfg)?;
            let oracle = harmonic_oracle(&op, lambda, &f)?;
            let mut csv = String::from("vertex,mean,stderr,oracle\n");
            for i in 0..est.vertices.len() {
                csv.push_str(&format!("{},{:?},{:?},{:?}\n", est.vertices[i], est.mean[i], est.stderr[i], oracle[i]));
            }
            out.csv("harmonic.csv", &csv)?;
            out.json(
                "mc.json",
                json!({ "estimate": est, "oracle": oracle.iter().copied().collect::<Vec<f64>>() }),
            )?;
        }
    }
    Ok(())
}

fn generic(a: &GenericArgs, seed: u64, out: &OutputDir) -> Outcome {
    let c = WeightedComplex::read(&a.input)?;
    let mode = a.mode.map(PerturbMode::from).unwrap_or(if c.is_surface() {
        PerturbMode::EdgeLengths
    } else {
        PerturbMode::Conductances
    });
    let spec = PerturbationSpec::everywhere(&c, a.epsilon, seed, mode);
    let fixture = a.input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let convention = "multipliers uniform in [1-epsilon, 1+epsilon]; epsilon is a modeling stand-in for neighborhood size";
    let body: Value = match a.study {
        Study::Simplicity => {
            let r = simplicity_experiment(&c, &spec, a.trials, a.gap, a.k)?;
            log::info!("split fraction {} ({:?})", r.fraction, r.wilson_interval);
            let mut v = r.to_json(&fixture, &spec, true);
            v["epsilon_convention"] = json!(convention);
            v
        }
        Study::Morse => {
            let r = morse_experiment(&c, &spec, a.trials, a.index)?;
            log::info!("tie-free fraction {} ({:?})", r.tolerance.fraction, r.tolerance.wilson_interval);
            let mut v = r.tolerance.to_json(&fixture, &spec, true);
            v["exact"] = r.exact.to_json(&fixture, &spec, true);
            v["eigen_index"] = json!(a.index);
            v["epsilon_convention"] = json!(convention);
            v
        }
        Study::Continuity => {
            let t = continuity_sweep(&c, &spec, &a.sweep, a.k, a.trials)?;
            let mut csv = String::from("epsilon,median_deviation,max_deviation\n");
            for r in &t.rows {
                csv.push_str(&format!("{:?},{:?},{:?}\n", r.epsilon, r.median_deviation, r.max_deviation));
            }
            out.csv("continuity.csv", &csv)?;
            json!({
                "fixture": fixture,
                "spec": spec,
                "table": t,
                "decreasing": t.decreasing(),
                "epsilon_convention": convention,
            })
        }
    };
    out.json("generic.json", body)?;
    Ok(())
}
