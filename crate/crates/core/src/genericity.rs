//! Localized multiplicative perturbations and the statistics built on them:
//! eigenvalue continuity, simplicity, and Morse (tie-free) eigenfunctions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complex::{edge_key, Edge, Vertex, WeightedComplex};
use crate::error::{Error, Result};
use crate::laplacian::assemble_laplacian;
use crate::morse::{classify_critical_with_tol, CriticalKind};
use crate::rng::{derive_seed, derive_stream_seed, unit_from_bits};
use crate::spectral::{lowest_eigenpairs, DEFAULT_TOL};

/// Tolerance used for near-ties in the Morse experiment.
pub const TIE_TOL: f64 = 1e-12;
const WILSON_Z: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbMode {
    Conductances,
    EdgeLengths,
    Measures,
}

impl PerturbMode {
    fn stream(self) -> u64 {
        match self {
            PerturbMode::Conductances => 1,
            PerturbMode::EdgeLengths => 2,
            PerturbMode::Measures => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub support: Vec<usize>,
    pub epsilon: f64,
    pub seed: u64,
    pub mode: PerturbMode,
}

impl PerturbationSpec {
    pub fn everywhere(complex: &WeightedComplex, epsilon: f64, seed: u64, mode: PerturbMode) -> Self {
        PerturbationSpec {
            support: (0..complex.num_vertices()).collect(),
            epsilon,
            seed,
            mode,
        }
    }

    fn with(&self, epsilon: f64, seed: u64) -> Self {
        PerturbationSpec {
            epsilon,
            seed,
            ..self.clone()
        }
    }

    /// Multiplier of quantity `q`, uniform in `[1 − ε, 1 + ε]`; exactly 1 at `ε = 0`.
    pub fn multiplier(&self, q: usize) -> f64 {
        let u = unit_from_bits(derive_stream_seed(self.seed, self.mode.stream(), q as u64));
        1.0 + self.epsilon * (2.0 * u - 1.0)
    }
}

/// Perturbs every quantity incident to the support; everything else is
/// copied unchanged.
pub fn perturb(complex: &WeightedComplex, spec: &PerturbationSpec) -> Result<WeightedComplex> {
    let n = complex.num_vertices();
    if spec.support.is_empty() {
        return Err(Error::InvalidPerturbation("empty support".into()));
    }
    if let Some(&v) = spec.support.iter().find(|&&v| v >= n) {
        return Err(Error::InvalidPerturbation(format!("support vertex {v} does not exist")));
    }
    if !(0.0..1.0).contains(&spec.epsilon) {
        return Err(Error::InvalidPerturbation(format!("epsilon {} outside [0, 1)", spec.epsilon)));
    }
    let mut inside = vec![false; n];
    for &v in &spec.support {
        inside[v] = true;
    }
    let touches = |e: &Edge| inside[e.u] || inside[e.v];
    match spec.mode {
        PerturbMode::Conductances => {
            if complex.is_surface() {
                return Err(Error::InvalidPerturbation(
                    "surface weights come from edge lengths; perturb edge_lengths".into(),
                ));
            }
            if !complex.edges().iter().any(touches) {
                return Err(Error::InvalidPerturbation("support touches no edges".into()));
            }
            let edges = complex
                .edges()
                .iter()
                .enumerate()
                .map(|(k, e)| Edge {
                    conductance: if touches(e) { e.conductance * spec.multiplier(k) } else { e.conductance },
                    ..e.clone()
                })
                .collect();
            WeightedComplex::new(complex.vertices().to_vec(), edges)
        }
        PerturbMode::EdgeLengths => {
            let Some(lengths) = complex.edge_lengths() else {
                return Err(Error::InvalidPerturbation("edge_lengths mode needs a triangulated surface".into()));
            };
            let mut lengths = lengths.clone();
            let mut any = false;
            for (k, e) in complex.edges().iter().enumerate() {
                if touches(e) {
                    any = true;
                    if let Some(l) = lengths.get_mut(&edge_key(e.u, e.v)) {
                        *l *= spec.multiplier(k);
                    }
                }
            }
            if !any {
                return Err(Error::InvalidPerturbation("support touches no edges".into()));
            }
            complex.replace_parts(complex.vertices().to_vec(), complex.edges().to_vec(), Some(lengths))
        }
        PerturbMode::Measures => {
            if complex.is_surface() {
                return Err(Error::InvalidPerturbation(
                    "surface measures come from triangle areas; perturb edge_lengths".into(),
                ));
            }
            let vertices = complex
                .vertices()
                .iter()
                .map(|v| Vertex {
                    measure: if inside[v.id] { v.measure * spec.multiplier(v.id) } else { v.measure },
                    ..v.clone()
                })
                .collect();
            WeightedComplex::new(vertices, complex.edges().to_vec())
        }
    }
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

fn lowest(complex: &WeightedComplex, k: usize) -> Result<crate::spectral::SpectralResult> {
    let op = assemble_laplacian(complex)?;
    lowest_eigenpairs(&op, k, DEFAULT_TOL)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityRow {
    pub epsilon: f64,
    /// Median over seeds of `max_j |λ_j(ε) − λ_j(0)|`.
    pub median_deviation: f64,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityTable {
    pub rows: Vec<ContinuityRow>,
    /// `max over ε > 0 of max_deviation / ε`.
    pub lipschitz: f64,
    pub seeds: usize,
}

impl ContinuityTable {
    /// Median deviations strictly shrink as `ε` decreases through its positive values.
    pub fn decreasing(&self) -> bool {
        let mut rows: Vec<&ContinuityRow> = self.rows.iter().filter(|r| r.epsilon > 0.0).collect();
        rows.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
        rows.windows(2).all(|w| w[1].median_deviation < w[0].median_deviation)
    }
}

/// Deviation of the `k` lowest eigenvalues at each `ε`, over `seeds`
/// independent perturbations derived from `spec.seed`.
pub fn continuity_sweep(
    complex: &WeightedComplex,
    spec: &PerturbationSpec,
    epsilons: &[f64],
    k: usize,
    seeds: usize,
) -> Result<ContinuityTable> {
    let base = lowest(complex, k)?.eigenvalues;
    let mut rows = Vec::with_capacity(epsilons.len());
    let mut lipschitz: f64 = 0.0;
    for &eps in epsilons {
        let mut devs: Vec<f64> = (0..seeds)
            .into_par_iter()
            .map(|s| {
                let p = perturb(complex, &spec.with(eps, derive_seed(spec.seed, s as u64)))?;
                let ev = lowest(&p, k)?.eigenvalues;
                Ok(ev.iter().zip(&base).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            })
            .collect::<Result<_>>()?;
        devs.sort_by(f64::total_cmp);
        let median = if devs.is_empty() {
            0.0
        } else if devs.len() % 2 == 1 {
            devs[devs.len() / 2]
        } else {
            0.5 * (devs[devs.len() / 2 - 1] + devs[devs.len() / 2])
        };
        let max = devs.last().copied().unwrap_or(0.0);
        if eps > 0.0 {
            lipschitz = lipschitz.max(max / eps);
        }
        rows.push(ContinuityRow {
            epsilon: eps,
            median_deviation: median,
            max_deviation: max,
        });
    }
    Ok(ContinuityTable { rows, lipschitz, seeds })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub trials: usize,
    pub successes: usize,
    pub fraction: f64,
    pub wilson_interval: (f64, f64),
    /// Per-trial statistic: smallest gap (simplicity) or tie count (Morse).
    pub per_trial: Vec<f64>,
}

impl ExperimentReport {
    fn from_outcomes(outcomes: Vec<(bool, f64)>) -> Self {
        let trials = outcomes.len();
        let successes = outcomes.iter().filter(|o| o.0).count();
        ExperimentReport {
            trials,
            successes,
            fraction: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
            wilson_interval: wilson_interval(successes, trials),
            per_trial: outcomes.into_iter().map(|o| o.1).collect(),
        }
    }

    /// `{fixture, spec, trials, fraction, wilson_interval, per_trial?}`
    pub fn to_json(&self, fixture: &str, spec: &PerturbationSpec, per_trial: bool) -> serde_json::Value {
        let mut v = serde_json::json!({
            "fixture": fixture,
            "spec": spec,
            "trials": self.trials,
            "fraction": self.fraction,
            "wilson_interval": [self.wilson_interval.0, self.wilson_interval.1],
        });
        if per_trial {
            v["per_trial"] = serde_json::json!(self.per_trial);
        }
        v
    }
}

/// Fraction of perturbations whose lowest `k` eigenvalues are pairwise
/// separated by more than `gap_tol`. Trial `t` uses seed `derive_seed(spec.seed, t)`.
pub fn simplicity_experiment(
    complex: &WeightedComplex,
    spec: &PerturbationSpec,
    trials: usize,
    gap_tol: f64,
    k: usize,
) -> Result<ExperimentReport> {
    let outcomes: Vec<(bool, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let p = perturb(complex, &spec.with(spec.epsilon, derive_seed(spec.seed, t as u64)))?;
            let ev = lowest(&p, k)?.eigenvalues;
            let gap = ev.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
            Ok((gap > gap_tol, gap))
        })
        .collect::<Result<_>>()?;
    Ok(ExperimentReport::from_outcomes(outcomes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MorseReport {
    /// Ties counted within [`TIE_TOL`].
    pub tolerance: ExperimentReport,
    /// Ties counted by exact equality.
    pub exact: ExperimentReport,
}

/// Fraction of perturbations whose `i`-th eigenfunction has no tie across a
/// free–free edge and, on surfaces, no degenerate vertex link.
pub fn morse_experiment(
    complex: &WeightedComplex,
    spec: &PerturbationSpec,
    trials: usize,
    i: usize,
) -> Result<MorseReport> {
    let outcomes: Vec<((bool, f64), (bool, f64))> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let p = perturb(complex, &spec.with(spec.epsilon, derive_seed(spec.seed, t as u64)))?;
            let op = assemble_laplacian(&p)?;
            let res = lowest_eigenpairs(&op, i + 1, DEFAULT_TOL)?;
            let phi = op.extend_vector(&res.eigenvectors[i]);
            let judge = |tol: f64| -> Result<(bool, f64)> {
                let report = classify_critical_with_tol(&p, &phi, tol)?;
                let free = |v: usize| !p.tag(v).is_dirichlet();
                let ties = report
                    .degenerate_ties
                    .iter()
                    .filter(|&&(u, v)| free(u) && free(v))
                    .count();
                let bad_links = if p.is_surface() {
                    report
                        .kinds
                        .iter()
                        .enumerate()
                        .filter(|&(v, k)| free(v) && matches!(k, CriticalKind::Saddle(2..)))
                        .count()
                } else {
                    0
                };
                Ok((ties == 0 && bad_links == 0, (ties + bad_links) as f64))
            };
            Ok((judge(TIE_TOL)?, judge(0.0)?))
        })
        .collect::<Result<_>>()?;
    let (tol, exact): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
    Ok(MorseReport {
        tolerance: ExperimentReport::from_outcomes(tol),
        exact: ExperimentReport::from_outcomes(exact),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(200, 200);
        assert!((lo - 0.98116).abs() < 1e-4 && hi == 1.0);
        let (lo, hi) = wilson_interval(0, 10);
        assert!(lo == 0.0 && hi > 0.2);
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo + hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_epsilon_is_identity() {
        let c = fixtures::c6_mixed();
        for mode in [PerturbMode::Conductances, PerturbMode::Measures] {
            let spec = PerturbationSpec::everywhere(&c, 0.0, 9, mode);
            assert_eq!(perturb(&c, &spec).unwrap(), c);
        }
        let s = fixtures::octahedron();
        let spec = PerturbationSpec::everywhere(&s, 0.0, 9, PerturbMode::EdgeLengths);
        assert_eq!(perturb(&s, &spec).unwrap(), s);
    }

    #[test]
    fn mode_mismatch_rejected() {
        let s = fixtures::octahedron();
        for mode in [PerturbMode::Conductances, PerturbMode::Measures] {
            let spec = PerturbationSpec::everywhere(&s, 0.1, 1, mode);
            assert!(matches!(perturb(&s, &spec), Err(Error::InvalidPerturbation(_))));
        }
        let g = fixtures::c4();
        let spec = PerturbationSpec::everywhere(&g, 0.1, 1, PerturbMode::EdgeLengths);
        assert!(perturb(&g, &spec).is_err());
        let lonely = WeightedComplex::from_graph(&[crate::Tag::Neumann; 3], &[(0, 1, 1.0)]).unwrap();
        let spec = PerturbationSpec {
            support: vec![2],
            epsilon: 0.1,
            seed: 0,
            mode: PerturbMode::Conductances,
        };
        assert!(matches!(perturb(&lonely, &spec), Err(Error::InvalidPerturbation(_))));
    }

    #[test]
    fn trivial_outcomes() {
        let p = fixtures::p5();
        let spec = PerturbationSpec::everywhere(&p, 0.0, 1, PerturbMode::Conductances);
        let r = simplicity_experiment(&p, &spec, 5, 1e-6, 5).unwrap();
        assert_eq!(r.fraction, 1.0);
        let r = simplicity_experiment(&p, &spec, 5, 10.0, 5).unwrap();
        assert_eq!(r.fraction, 0.0);
    }
}
