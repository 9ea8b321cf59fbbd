//! Bottom of the spectrum: eigenpairs, Rayleigh quotients, Barta bounds,
//! exhaustion sequences and the deflated resolvent.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::complex::{restrict, ExhaustionSpec, WeightedComplex};
use crate::error::{Error, Result};
use crate::lanczos;
use crate::laplacian::{assemble_laplacian, LaplacianOperator};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Residual tolerance, relative to `max(1, ‖M⁻¹K‖_∞)`.
    pub tol: f64,
    /// Largest dimension handled by the dense reference path.
    pub dense_limit: usize,
    /// Krylov vectors per Lanczos cycle.
    pub krylov_dim: usize,
    /// Lanczos restarts per eigenpair.
    pub max_restarts: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: DEFAULT_TOL,
            dense_limit: DENSE_LIMIT,
            krylov_dim: 300,
            max_restarts: 30,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions {
            tol,
            ..Self::default()
        }
    }
}

/// Ascending eigenvalues with mass-orthonormal eigenvectors over the free vertices.
#[derive(Debug, Clone)]
pub struct SpectralResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<DVector<f64>>,
    /// `‖Kφ − λMφ‖ / ‖Mφ‖` per pair.
    pub residuals: Vec<f64>,
}

impl SpectralResult {
    pub fn lambda0(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn to_json(&self, include_vectors: bool) -> serde_json::Value {
        #[derive(Serialize)]
        struct Doc<'a> {
            eigenvalues: &'a [f64],
            residuals: &'a [f64],
            #[serde(skip_serializing_if = "Option::is_none")]
            vectors: Option<Vec<Vec<f64>>>,
        }
        let vectors = include_vectors
            .then(|| self.eigenvectors.iter().map(|v| v.iter().copied().collect()).collect());
        serde_json::to_value(Doc {
            eigenvalues: &self.eigenvalues,
            residuals: &self.residuals,
            vectors,
        })
        .expect("serializable")
    }

    /// One row per eigenvalue: `index,eigenvalue,residual`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,eigenvalue,residual\n");
        for (i, (l, r)) in self.eigenvalues.iter().zip(&self.residuals).enumerate() {
            s.push_str(&format!("{i},{l:?},{r:?}\n"));
        }
        s
    }
}

pub(crate) fn residual(op: &LaplacianOperator, lambda: f64, phi: &DVector<f64>) -> f64 {
    let k = op.stiffness.apply(phi);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..phi.len() {
        let mphi = op.mass[i] * phi[i];
        num += (k[i] - lambda * mphi).powi(2);
        den += mphi * mphi;
    }
    (num / den).sqrt()
}

/// `max(1, ‖M⁻¹K‖_∞)`, the scale residual tolerances are measured against.
pub(crate) fn operator_scale(op: &LaplacianOperator) -> f64 {
    let mut s: f64 = 1.0;
    for i in 0..op.dim() {
        let row: f64 = op.stiffness.row(i).map(|(_, v)| v.abs()).sum();
        s = s.max(row / op.mass[i]);
    }
    s
}

/// First vector summed positive; others with their largest-magnitude entry positive.
pub(crate) fn normalize_signs(vectors: &mut [DVector<f64>]) {
    for (idx, v) in vectors.iter_mut().enumerate() {
        let flip = if idx == 0 {
            v.sum() < 0.0
        } else {
            let mut best = 0usize;
            for i in 0..v.len() {
                if v[i].abs() > v[best].abs() {
                    best = i;
                }
            }
            v[best] < 0.0
        };
        if flip {
            v.neg_mut();
        }
    }
}

/// The `k` smallest generalized eigenpairs of `(stiffness, mass)`.
pub fn lowest_eigenpairs(op: &LaplacianOperator, k: usize, tol: f64) -> Result<SpectralResult> {
    lowest_eigenpairs_with(op, k, &SolverOptions::with_tol(tol))
}

pub fn lowest_eigenpairs_with(
    op: &LaplacianOperator,
    k: usize,
    opts: &SolverOptions,
) -> Result<SpectralResult> {
    let dim = op.dim();
    if k == 0 || k > dim {
        return Err(Error::KTooLarge { k, dim });
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if dim <= opts.dense_limit {
        dense_eigenpairs(op, k, opts.tol)
    } else {
        lanczos::shift_invert_eigenpairs(op, k, opts)
    }
}

/// Dense reference path: full symmetric eigendecomposition of `M^{-1/2} K M^{-1/2}`.
pub fn dense_eigenpairs(op: &LaplacianOperator, k: usize, tol: f64) -> Result<SpectralResult> {
    let dim = op.dim();
    if k == 0 || k > dim {
        return Err(Error::KTooLarge { k, dim });
    }
    let eig = SymmetricEigen::new(op.symmetric_dense());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let inv_sqrt: Vec<f64> = op.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut eigenvalues = Vec::with_capacity(k);
    let mut eigenvectors = Vec::with_capacity(k);
    for &j in order.iter().take(k) {
        eigenvalues.push(eig.eigenvalues[j]);
        let col = eig.eigenvectors.column(j);
        eigenvectors.push(DVector::from_iterator(
            dim,
            col.iter().zip(&inv_sqrt).map(|(x, s)| x * s),
        ));
    }
    normalize_signs(&mut eigenvectors);
    let residuals: Vec<f64> = eigenvalues
        .iter()
        .zip(&eigenvectors)
        .map(|(&l, v)| residual(op, l, v))
        .collect();
    let limit = tol * operator_scale(op);
    if residuals.iter().any(|&r| !(r <= limit)) {
        return Err(Error::NonConvergence {
            iterations: 0,
            residuals,
        });
    }
    Ok(SpectralResult {
        eigenvalues,
        eigenvectors,
        residuals,
    })
}

/// Full dense spectrum, for oracles and small fixtures.
pub fn full_spectrum(op: &LaplacianOperator) -> Result<SpectralResult> {
    dense_eigenpairs(op, op.dim(), DEFAULT_TOL)
}

/// `fᵀKf / fᵀMf` for `f` over the free vertices.
pub fn rayleigh(op: &LaplacianOperator, f: &DVector<f64>) -> Result<f64> {
    check_len(op, f)?;
    let den = op.mass_dot(f, f);
    if den == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(op.quadratic_form(f) / den)
}

fn check_len(op: &LaplacianOperator, f: &DVector<f64>) -> Result<()> {
    if f.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: f.len(),
        });
    }
    Ok(())
}

/// Two-sided bracket of `λ0` from a positive test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BartaBound {
    pub lower: f64,
    pub upper: f64,
    pub argmin_vertex: usize,
    pub argmax_vertex: usize,
}

/// `min` and `max` of `(Δφ)/φ` over the free vertices; these bracket `λ0`.
pub fn barta_bound(op: &LaplacianOperator, phi: &DVector<f64>) -> Result<BartaBound> {
    check_len(op, phi)?;
    if let Some((index, &value)) = phi.iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
        return Err(Error::NotPositive { index, value });
    }
    let lap = op.apply(phi);
    let mut b = BartaBound {
        lower: f64::INFINITY,
        upper: f64::NEG_INFINITY,
        argmin_vertex: 0,
        argmax_vertex: 0,
    };
    for i in 0..phi.len() {
        let q = lap[i] / phi[i];
        if q < b.lower {
            b.lower = q;
            b.argmin_vertex = op.free[i];
        }
        if q > b.upper {
            b.upper = q;
            b.argmax_vertex = op.free[i];
        }
    }
    Ok(b)
}

/// `λ0` of every stage of an exhaustion.
pub fn exhaustion_lambda0(
    complex: &WeightedComplex,
    exhaustion: &ExhaustionSpec,
    opts: &SolverOptions,
) -> Result<Vec<(usize, f64)>> {
    (0..exhaustion.len())
        .map(|j| {
            let stage = restrict(complex, exhaustion, j)?;
            let op = assemble_laplacian(&stage)?;
            let res = lowest_eigenpairs_with(&op, 1, opts)?;
            Ok((j, res.lambda0()))
        })
        .collect()
}

/// Gap threshold below which an eigenvalue is treated as degenerate.
pub fn simplicity_threshold(lambda: f64) -> f64 {
    1e-8 * (1.0 + lambda.abs())
}

/// Mass-orthogonality tolerance for the deflated resolvent's right-hand side.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// Solves `(Δ − λ_i) u = f` with `u` mass-orthogonal to `φ_i`.
///
/// This is the discrete modified Green function: `u = Σ_{j≠i} ⟨f, φ_j⟩ φ_j / (λ_j − λ_i)`.
/// Computed through the bordered system
/// `[[K − λM, Mφ], [φᵀM, 0]] [u; η] = [Mf; 0]`, which never touches the
/// rest of the spectrum.
pub fn deflated_resolvent(
    op: &LaplacianOperator,
    spectrum: &SpectralResult,
    i: usize,
    f: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_len(op, f)?;
    let dim = op.dim();
    if i >= spectrum.len() {
        return Err(Error::KTooLarge { k: i + 1, dim: spectrum.len() });
    }
    if dim > DENSE_LIMIT {
        return Err(Error::TooLarge { dim, limit: DENSE_LIMIT });
    }
    let lambda = spectrum.eigenvalues[i];
    let threshold = simplicity_threshold(lambda);
    let mut gap = f64::INFINITY;
    if i > 0 {
        gap = gap.min(lambda - spectrum.eigenvalues[i - 1]);
    }
    if i + 1 < spectrum.len() {
        gap = gap.min(spectrum.eigenvalues[i + 1] - lambda);
    } else if i + 1 < dim {
        return Err(Error::InvalidConfig(format!(
            "spectrum must contain eigenvalue {} to certify simplicity of eigenvalue {i}",
            i + 1
        )));
    }
    if !(gap > threshold) {
        return Err(Error::NearDegenerate { index: i, gap, threshold });
    }
    let phi = &spectrum.eigenvectors[i];
    let phi_norm = op.mass_norm(phi);
    let f_norm = op.mass_norm(f);
    let overlap = op.mass_dot(f, phi) / (phi_norm * f_norm.max(f64::MIN_POSITIVE));
    if overlap.abs() > ORTHOGONALITY_TOL {
        return Err(Error::NotOrthogonal { overlap });
    }
    let mut a = DMatrix::zeros(dim + 1, dim + 1);
    let k = op.stiffness.to_dense();
    for r in 0..dim {
        for c in 0..dim {
            a[(r, c)] = k[(r, c)];
        }
        a[(r, r)] -= lambda * op.mass[r];
        a[(r, dim)] = op.mass[r] * phi[r];
        a[(dim, r)] = op.mass[r] * phi[r];
    }
    let mut rhs = DVector::zeros(dim + 1);
    for r in 0..dim {
        rhs[r] = op.mass[r] * f[r];
    }
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or(Error::NearDegenerate { index: i, gap, threshold })?;
    Ok(sol.rows(0, dim).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::Tag;
    use crate::laplacian::assemble_laplacian;

    fn path(tags: &[Tag]) -> LaplacianOperator {
        let edges: Vec<_> = (0..tags.len() - 1).map(|i| (i, i + 1, 1.0)).collect();
        assemble_laplacian(&WeightedComplex::from_graph(tags, &edges).unwrap()).unwrap()
    }

    fn cycle(n: usize) -> LaplacianOperator {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
        assemble_laplacian(&WeightedComplex::from_graph(&vec![Tag::Neumann; n], &edges).unwrap()).unwrap()
    }

    /// Characteristic-polynomial roots for small symmetric matrices: bisection
    /// on the Sturm count of a tridiagonal matrix.
    fn tridiagonal_eigs(diag: &[f64], off: &[f64]) -> Vec<f64> {
        let n = diag.len();
        let count_below = |x: f64| {
            let mut c = 0;
            let mut d = 1.0;
            for i in 0..n {
                let o = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
                d = diag[i] - x - if i > 0 { o / d } else { 0.0 };
                if d == 0.0 {
                    d = 1e-300;
                }
                if d < 0.0 {
                    c += 1;
                }
            }
            c
        };
        (0..n)
            .map(|k| {
                let (mut lo, mut hi) = (-10.0, 10.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if count_below(mid) > k {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect()
    }

    #[test]
    fn p3_neumann_spectrum() {
        let oracle = tridiagonal_eigs(&[1.0, 2.0, 1.0], &[-1.0, -1.0]);
        let r = lowest_eigenpairs(&path(&[Tag::Neumann; 3]), 3, DEFAULT_TOL).unwrap();
        for (a, b) in r.eigenvalues.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in r.eigenvalues.iter().zip([0.0, 1.0, 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn c4_degenerate_pair() {
        let r = lowest_eigenpairs(&cycle(4), 4, DEFAULT_TOL).unwrap();
        for (a, b) in r.eigenvalues.iter().zip([0.0, 2.0, 2.0, 4.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn p3_one_end_dirichlet() {
        let op = path(&[Tag::Neumann, Tag::Neumann, Tag::Dirichlet]);
        let r = lowest_eigenpairs(&op, 2, DEFAULT_TOL).unwrap();
        let s5 = 5f64.sqrt();
        assert!((r.eigenvalues[0] - (3.0 - s5) / 2.0).abs() < 1e-12);
        assert!((r.eigenvalues[1] - (3.0 + s5) / 2.0).abs() < 1e-12);
        assert!(lowest_eigenpairs(&op, 3, DEFAULT_TOL).is_err());
        assert!(matches!(lowest_eigenpairs(&op, 0, DEFAULT_TOL), Err(Error::KTooLarge { .. })));
    }

    #[test]
    fn eigenvectors_mass_orthonormal_and_perron_positive() {
        let c = WeightedComplex::new(
            (0..4)
                .map(|id| crate::complex::Vertex { id, measure: 0.5 + id as f64, tag: Tag::Neumann })
                .collect(),
            vec![
                crate::complex::Edge { u: 0, v: 1, conductance: 2.0 },
                crate::complex::Edge { u: 1, v: 2, conductance: 0.3 },
                crate::complex::Edge { u: 2, v: 3, conductance: 1.1 },
                crate::complex::Edge { u: 3, v: 0, conductance: 0.7 },
            ],
        )
        .unwrap()
        .with_tags(&[Tag::Dirichlet, Tag::Neumann, Tag::Neumann, Tag::Neumann])
        .unwrap();
        let op = assemble_laplacian(&c).unwrap();
        let r = full_spectrum(&op).unwrap();
        for i in 0..r.len() {
            for j in 0..r.len() {
                let d = op.mass_dot(&r.eigenvectors[i], &r.eigenvectors[j]);
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((d - e).abs() < 1e-10);
            }
        }
        assert!(r.eigenvectors[0].iter().all(|&x| x > 0.0));
    }

    #[test]
    fn rayleigh_examples() {
        let op = path(&[Tag::Neumann; 3]);
        let ones = DVector::from_element(3, 1.0);
        assert_eq!(rayleigh(&op, &ones).unwrap(), 0.0);
        let f = DVector::from_vec(vec![1.0, 0.0, -1.0]);
        assert!((rayleigh(&op, &f).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(rayleigh(&op, &DVector::zeros(3)).unwrap_err(), Error::ZeroDenominator);
        let r = lowest_eigenpairs(&op, 3, DEFAULT_TOL).unwrap();
        assert!((rayleigh(&op, &r.eigenvectors[1]).unwrap() - r.eigenvalues[1]).abs() < 1e-12);
    }

    #[test]
    fn barta_examples() {
        let op = path(&[Tag::Neumann, Tag::Neumann, Tag::Dirichlet]);
        let b = barta_bound(&op, &DVector::from_element(2, 1.0)).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 1.0));
        assert_eq!((b.argmin_vertex, b.argmax_vertex), (0, 1));
        let r = lowest_eigenpairs(&op, 1, DEFAULT_TOL).unwrap();
        let b = barta_bound(&op, &r.eigenvectors[0]).unwrap();
        assert!((b.lower - r.lambda0()).abs() < 1e-8 && (b.upper - r.lambda0()).abs() < 1e-8);
        let op = path(&[Tag::Neumann; 3]);
        let b = barta_bound(&op, &DVector::from_element(3, 2.0)).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 0.0));
        assert!(matches!(
            barta_bound(&op, &DVector::from_vec(vec![1.0, 0.0, 1.0])),
            Err(Error::NotPositive { index: 1, .. })
        ));
    }

    #[test]
    fn exhaustion_p5() {
        let p5 = WeightedComplex::from_graph(
            &[Tag::Neumann; 5],
            &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0)],
        )
        .unwrap();
        let ex = ExhaustionSpec::new(5, vec![vec![2], vec![1, 2, 3], (0..5).collect()]).unwrap();
        let seq = exhaustion_lambda0(&p5, &ex, &SolverOptions::default()).unwrap();
        // stage 0: single vertex with two dirichlet neighbors → 2
        // stage 1: P3 with both ends closing onto dirichlet → 2 − √2
        assert!((seq[0].1 - 2.0).abs() < 1e-12);
        assert!((seq[1].1 - (2.0 - 2f64.sqrt())).abs() < 1e-12);
        assert!(seq[2].1.abs() < 1e-12);
        let single = ExhaustionSpec::new(5, vec![(0..5).collect()]).unwrap();
        assert_eq!(exhaustion_lambda0(&p5, &single, &SolverOptions::default()).unwrap().len(), 1);
    }

    #[test]
    fn deflated_resolvent_eigenbasis_action() {
        let op = path(&[Tag::Neumann; 5]);
        let r = full_spectrum(&op).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                if i == j {
                    continue;
                }
                let u = deflated_resolvent(&op, &r, i, &r.eigenvectors[j]).unwrap();
                let expect = &r.eigenvectors[j] / (r.eigenvalues[j] - r.eigenvalues[i]);
                assert!((u - expect).norm() < 1e-10);
            }
        }
        assert!(matches!(
            deflated_resolvent(&op, &r, 0, &DVector::from_element(5, 1.0)),
            Err(Error::NotOrthogonal { .. })
        ));
    }

    #[test]
    fn deflated_resolvent_rejects_degenerate() {
        let op = cycle(4);
        let r = full_spectrum(&op).unwrap();
        let f = r.eigenvectors[3].clone();
        assert!(matches!(deflated_resolvent(&op, &r, 1, &f), Err(Error::NearDegenerate { .. })));
    }

    #[test]
    fn csv_and_json_exports() {
        let r = lowest_eigenpairs(&path(&[Tag::Neumann; 3]), 3, DEFAULT_TOL).unwrap();
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 4);
        let j = r.to_json(false);
        assert!(j.get("vectors").is_none());
        assert_eq!(r.to_json(true)["vectors"].as_array().unwrap().len(), 3);
    }
}
