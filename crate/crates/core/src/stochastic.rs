//! Killed continuous-time random walk: survival curves, decay-rate fits,
//! λ-weighted harmonic extension, and dense semigroup oracles.
//!
//! From free vertex `v` the walk waits an exponential time of rate
//! `diag(K)_v / μ(v)` and then jumps along an edge chosen with probability
//! proportional to its conductance. A jump onto a dirichlet vertex kills the
//! walk; Neumann vertices simply have no edge to leave through.
//!
//! Path `p` draws from its own generator seeded by
//! `splitmix64(seed ^ splitmix64(p + 1))`, so results do not depend on how
//! paths are spread over threads.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::laplacian::LaplacianOperator;
use crate::rng::{item_rng, stream_rng};
use crate::spectral::{lowest_eigenpairs, SpectralResult, DEFAULT_TOL};

/// Largest dimension accepted by the dense oracles.
pub const ORACLE_LIMIT: usize = 500;
pub const DEFAULT_MAX_STEPS: u64 = 100_000_000;
/// Fraction of the grid, counted from the end, used by the decay fit.
pub const FIT_TAIL_FRACTION: f64 = 0.4;
/// Minimum expected surviving paths for a fit point.
pub const FIT_MIN_COUNT: f64 = 25.0;
pub const FIT_BATCHES: usize = 20;
pub const HARMONIC_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkConfig {
    /// Complex vertex id of the start.
    pub start: usize,
    pub paths: u64,
    pub horizon: f64,
    /// Sorted observation times in `(0, horizon]`.
    pub grid: Vec<f64>,
    pub seed: u64,
    /// Jump budget per path.
    pub max_steps: u64,
}

impl WalkConfig {
    /// `points` equally spaced grid times ending at `horizon`.
    pub fn uniform(start: usize, paths: u64, horizon: f64, points: usize, seed: u64) -> Result<Self> {
        let grid = (1..=points).map(|i| horizon * i as f64 / points as f64).collect();
        let cfg = WalkConfig {
            start,
            paths,
            horizon,
            grid,
            seed,
            max_steps: DEFAULT_MAX_STEPS,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidConfig(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.paths == 0 {
            return Err(Error::InvalidConfig("need at least one path".into()));
        }
        if self.grid.is_empty() || self.grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidConfig("grid must be nonempty and strictly increasing".into()));
        }
        if !(self.grid[0] > 0.0) || self.grid[self.grid.len() - 1] > self.horizon {
            return Err(Error::InvalidConfig("grid must lie in (0, horizon]".into()));
        }
        Ok(())
    }
}

/// Jump table of the walk.
struct Chain {
    rate: Vec<f64>,
    /// Per free vertex: `(destination, cumulative weight)`; destination is
    /// `Ok(free index)` or `Err(dirichlet vertex id)`.
    moves: Vec<Vec<(std::result::Result<usize, usize>, f64)>>,
}

impl Chain {
    fn new(op: &LaplacianOperator) -> Self {
        let n = op.dim();
        let mut rate = Vec::with_capacity(n);
        let mut moves = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = 0.0;
            let mut row = Vec::new();
            for (j, k) in op.stiffness.row(i) {
                if j != i && k < 0.0 {
                    acc += -k;
                    row.push((Ok(j), acc));
                }
            }
            for &(d, c) in &op.boundary_coupling[i] {
                acc += c;
                row.push((Err(d), acc));
            }
            rate.push(acc / op.mass[i]);
            moves.push(row);
        }
        Chain { rate, moves }
    }

    /// Runs until absorption or until time exceeds `horizon`. Returns the
    /// absorption time and vertex, or `None` if the walk outlives the horizon.
    fn run(&self, mut i: usize, horizon: f64, max_steps: u64, rng: &mut ChaCha8Rng) -> Result<Option<(f64, usize)>> {
        let mut t = 0.0;
        for _ in 0..max_steps {
            let q = self.rate[i];
            if q == 0.0 {
                return Ok(None);
            }
            let u: f64 = rng.random();
            t += -(1.0 - u).ln() / q;
            if t > horizon {
                return Ok(None);
            }
            let row = &self.moves[i];
            let target = rng.random::<f64>() * row[row.len() - 1].1;
            let pos = row.partition_point(|&(_, c)| c <= target).min(row.len() - 1);
            match row[pos].0 {
                Ok(j) => i = j,
                Err(d) => return Ok(Some((t, d))),
            }
        }
        Err(Error::WalkBudget(max_steps))
    }
}

fn start_index(op: &LaplacianOperator, start: usize) -> Result<usize> {
    op.index_of
        .get(start)
        .copied()
        .flatten()
        .ok_or_else(|| Error::InvalidConfig(format!("start vertex {start} is not a free vertex")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    /// Batch-means standard error of the rate.
    pub rate_stderr: f64,
    /// 95% normal interval.
    pub rate_ci: (f64, f64),
    pub window: (f64, f64),
    /// `C` in `S(t) ≈ C e^{−rate·t}`.
    pub prefactor: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    /// Surviving paths at each grid time.
    pub counts: Vec<u64>,
    pub survival: Vec<f64>,
    /// Binomial standard error `sqrt(S(1 − S)/N)`.
    pub stderr: Vec<f64>,
    pub paths: u64,
    pub seed: u64,
    pub fit: Option<DecayFit>,
}

impl SurvivalCurve {
    /// Columns `t,survival,stderr`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,survival,stderr\n");
        for i in 0..self.times.len() {
            s.push_str(&format!("{},{},{}\n", self.times[i], self.survival[i], self.stderr[i]));
        }
        s
    }

    /// `{rate, rate_stderr, window:[t_lo,t_hi], paths, seed}`, or `None` without a fit.
    pub fn fit_json(&self) -> Option<serde_json::Value> {
        self.fit.as_ref().map(|f| {
            serde_json::json!({
                "rate": f.rate,
                "rate_stderr": f.rate_stderr,
                "window": [f.window.0, f.window.1],
                "paths": self.paths,
                "seed": self.seed,
            })
        })
    }
}

/// Monte Carlo survival curve `P(τ > t)` and tail decay fit.
pub fn simulate_survival(op: &LaplacianOperator, cfg: &WalkConfig) -> Result<SurvivalCurve> {
    cfg.validate()?;
    let start = start_index(op, cfg.start)?;
    let chain = Chain::new(op);
    let conservative = !op.has_dirichlet();
    let taus: Vec<f64> = (0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            if conservative {
                return Ok(f64::INFINITY);
            }
            let mut rng = item_rng(cfg.seed, p);
            Ok(match chain.run(start, cfg.horizon, cfg.max_steps, &mut rng)? {
                Some((t, _)) => t,
                None => f64::INFINITY,
            })
        })
        .collect::<Result<_>>()?;
    let counts = survival_counts(&taus, &cfg.grid);
    let n = cfg.paths as f64;
    let survival: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let stderr = survival.iter().map(|&s| (s * (1.0 - s) / n).sqrt()).collect();
    let fit = if !conservative {
        Some(fit_decay(&taus, &cfg.grid, &counts, cfg.paths)?)
    } else {
        None
    };
    Ok(SurvivalCurve {
        times: cfg.grid.clone(),
        counts,
        survival,
        stderr,
        paths: cfg.paths,
        seed: cfg.seed,
        fit,
    })
}

fn survival_counts(taus: &[f64], grid: &[f64]) -> Vec<u64> {
    grid.iter().map(|&t| taus.iter().filter(|&&x| x > t).count() as u64).collect()
}

/// Weighted least squares of `log S` on `t`, weights `N S / (1 − S)`.
fn wls(times: &[f64], counts: &[u64], paths: u64) -> Option<(f64, f64)> {
    let n = paths as f64;
    let (mut sw, mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut used = 0;
    for (&t, &c) in times.iter().zip(counts) {
        if c == 0 {
            continue;
        }
        let s = c as f64 / n;
        let w = if s < 1.0 { n * s / (1.0 - s) } else { n };
        let y = s.ln();
        sw += w;
        st += w * t;
        sy += w * y;
        stt += w * t * t;
        sty += w * t * y;
        used += 1;
    }
    let det = sw * stt - st * st;
    if used < 2 || det <= 0.0 {
        return None;
    }
    let slope = (sw * sty - st * sy) / det;
    let intercept = (sy - slope * st) / sw;
    Some((-slope, intercept.exp()))
}

fn fit_decay(taus: &[f64], grid: &[f64], counts: &[u64], paths: u64) -> Result<DecayFit> {
    if grid.len() < 2 || counts[1] == 0 {
        return Err(Error::FitFailure(format!(
            "all {paths} paths absorbed before the second grid time; counts {counts:?}"
        )));
    }
    let first = ((1.0 - FIT_TAIL_FRACTION) * grid.len() as f64).floor() as usize;
    let floor = FIT_MIN_COUNT / paths as f64;
    let window: Vec<usize> = (first..grid.len())
        .filter(|&i| counts[i] as f64 / paths as f64 >= floor)
        .collect();
    if window.len() < 2 {
        return Err(Error::FitFailure(format!(
            "fewer than two tail grid points with survival ≥ {floor:e}; counts {counts:?}"
        )));
    }
    let times: Vec<f64> = window.iter().map(|&i| grid[i]).collect();
    let wc: Vec<u64> = window.iter().map(|&i| counts[i]).collect();
    let (rate, prefactor) =
        wls(&times, &wc, paths).ok_or_else(|| Error::FitFailure("degenerate tail window".into()))?;
    // batch means over contiguous path blocks
    let per = taus.len() / FIT_BATCHES;
    let mut rates = Vec::with_capacity(FIT_BATCHES);
    if per > 0 {
        for b in 0..FIT_BATCHES {
            let chunk = &taus[b * per..(b + 1) * per];
            let c = survival_counts(chunk, &times);
            if let Some((r, _)) = wls(&times, &c, per as u64) {
                rates.push(r);
            }
        }
    }
    let rate_stderr = if rates.len() >= 2 {
        let m = rates.iter().sum::<f64>() / rates.len() as f64;
        let var = rates.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (rates.len() - 1) as f64;
        (var / rates.len() as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(DecayFit {
        rate,
        rate_stderr,
        rate_ci: (rate - 1.96 * rate_stderr, rate + 1.96 * rate_stderr),
        window: (times[0], times[times.len() - 1]),
        prefactor,
        points: times.len(),
    })
}

fn check_oracle_dim(op: &LaplacianOperator) -> Result<()> {
    if op.dim() > ORACLE_LIMIT {
        return Err(Error::TooLarge {
            dim: op.dim(),
            limit: ORACLE_LIMIT,
        });
    }
    Ok(())
}

/// Dense `e^{−t M⁻¹K}` over the free vertices.
pub fn heat_kernel_oracle(op: &LaplacianOperator, t: f64) -> Result<DMatrix<f64>> {
    check_oracle_dim(op)?;
    Ok((op.generator_dense() * -t).exp())
}

/// `Σ_k e^{−λ_k t} φ_k φ_kᵀ M` from a full spectral decomposition.
pub fn spectral_heat_kernel(op: &LaplacianOperator, spectrum: &SpectralResult, t: f64) -> DMatrix<f64> {
    let n = op.dim();
    let mut h = DMatrix::zeros(n, n);
    for (l, phi) in spectrum.eigenvalues.iter().zip(&spectrum.eigenvectors) {
        let w = (-l * t).exp();
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] += w * phi[i] * phi[j] * op.mass[j];
            }
        }
    }
    h
}

/// `P_x(τ > t)`: the start row sum of the heat kernel.
pub fn exact_survival(op: &LaplacianOperator, start: usize, times: &[f64]) -> Result<Vec<f64>> {
    let i = start_index(op, start)?;
    times
        .iter()
        .map(|&t| Ok(heat_kernel_oracle(op, t)?.row(i).sum()))
        .collect()
}

/// Sum over dirichlet neighbors of `c · f(d)`, per free vertex.
fn boundary_load(op: &LaplacianOperator, f: &[f64]) -> Result<DVector<f64>> {
    if f.len() != op.num_vertices() {
        return Err(Error::DimensionMismatch {
            expected: op.num_vertices(),
            got: f.len(),
        });
    }
    Ok(DVector::from_iterator(
        op.dim(),
        op.boundary_coupling.iter().map(|row| row.iter().map(|&(d, c)| c * f[d]).sum()),
    ))
}

/// Solves `(Δ − λ) u = 0` on free vertices with `u = f` on dirichlet vertices.
pub fn harmonic_oracle(op: &LaplacianOperator, lambda: f64, f: &[f64]) -> Result<DVector<f64>> {
    if op.dim() > crate::spectral::DENSE_LIMIT {
        return Err(Error::TooLarge {
            dim: op.dim(),
            limit: crate::spectral::DENSE_LIMIT,
        });
    }
    let b = boundary_load(op, f)?;
    let mut a = op.stiffness.to_dense();
    for i in 0..op.dim() {
        a[(i, i)] -= lambda * op.mass[i];
    }
    a.lu()
        .solve(&b)
        .ok_or_else(|| Error::InvalidConfig("harmonic system is singular".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicEstimate {
    /// Complex vertex id per entry.
    pub vertices: Vec<usize>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub lambda: f64,
    pub lambda0: f64,
    pub paths: u64,
    pub seed: u64,
}

/// Estimates `E_x[e^{λτ} f(X_τ)]` at every free vertex with `cfg.paths`
/// walks each. Requires `λ < (1 − 5%) λ0`.
pub fn harmonic_extension_mc(op: &LaplacianOperator, lambda: f64, f: &[f64], cfg: &WalkConfig) -> Result<HarmonicEstimate> {
    if f.len() != op.num_vertices() {
        return Err(Error::DimensionMismatch {
            expected: op.num_vertices(),
            got: f.len(),
        });
    }
    if !op.has_dirichlet() {
        return Err(Error::InvalidConfig("harmonic extension needs a dirichlet boundary".into()));
    }
    if cfg.paths == 0 {
        return Err(Error::InvalidConfig("need at least one path".into()));
    }
    let lambda0 = lowest_eigenpairs(op, 1, DEFAULT_TOL)?.lambda0();
    if lambda > 0.0 && lambda >= (1.0 - HARMONIC_MARGIN) * lambda0 {
        return Err(Error::LambdaTooLarge { lambda, lambda0 });
    }
    let chain = Chain::new(op);
    let mut mean = Vec::with_capacity(op.dim());
    let mut stderr = Vec::with_capacity(op.dim());
    for i in 0..op.dim() {
        let samples: Vec<f64> = (0..cfg.paths)
            .into_par_iter()
            .map(|p| {
                let mut rng = stream_rng(cfg.seed, i as u64, p);
                match chain.run(i, f64::INFINITY, cfg.max_steps, &mut rng)? {
                    Some((t, d)) => Ok(if lambda == 0.0 { f[d] } else { (lambda * t).exp() * f[d] }),
                    None => Err(Error::InvalidConfig("walk cannot reach the boundary".into())),
                }
            })
            .collect::<Result<_>>()?;
        let n = samples.len() as f64;
        let m = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        mean.push(m);
        stderr.push((var / n).sqrt());
    }
    Ok(HarmonicEstimate {
        vertices: op.free.clone(),
        mean,
        stderr,
        lambda,
        lambda0,
        paths: cfg.paths,
        seed: cfg.seed,
    })
}

/// `(Δ − λ)u` at free vertices for an estimate, with the standard error
/// propagated from independent per-vertex estimates.
pub fn extension_residual(op: &LaplacianOperator, est: &HarmonicEstimate, f: &[f64]) -> Result<Vec<(f64, f64)>> {
    let b = boundary_load(op, f)?;
    let u = DVector::from_column_slice(&est.mean);
    let ku = op.stiffness.apply(&u);
    let mut out = Vec::with_capacity(op.dim());
    for i in 0..op.dim() {
        let r = (ku[i] - b[i]) / op.mass[i] - est.lambda * u[i];
        let mut var = 0.0;
        for (j, k) in op.stiffness.row(i) {
            let a = k / op.mass[i] - if i == j { est.lambda } else { 0.0 };
            var += (a * est.stderr[j]).powi(2);
        }
        out.push((r, var.sqrt()));
    }
    Ok(out)
}
