//! Iterative path for large operators: shift-invert Lanczos with locking.
//!
//! Works on the symmetrized operator `A = M^{-1/2} K M^{-1/2}` shifted by
//! `δ > 0`, so `(A + δ)` is positive definite and its inverse is applied by
//! conjugate gradients. Eigenpairs are found one at a time: each Lanczos run
//! extracts the lowest eigenpair of `A` in the orthogonal complement of the
//! pairs already locked, which recovers repeated eigenvalues correctly.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::laplacian::LaplacianOperator;
use crate::spectral::{normalize_signs, operator_scale, residual, SolverOptions, SpectralResult};

struct ShiftedOperator<'a> {
    op: &'a LaplacianOperator,
    inv_sqrt_mass: Vec<f64>,
    shift: f64,
    scratch: std::cell::RefCell<(Vec<f64>, Vec<f64>)>,
}

impl<'a> ShiftedOperator<'a> {
    fn new(op: &'a LaplacianOperator, shift: f64) -> Self {
        let n = op.dim();
        ShiftedOperator {
            op,
            inv_sqrt_mass: op.mass.iter().map(|m| 1.0 / m.sqrt()).collect(),
            shift,
            scratch: std::cell::RefCell::new((vec![0.0; n], vec![0.0; n])),
        }
    }

    /// `y = (A + δ) x`.
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut s = self.scratch.borrow_mut();
        let (a, b) = &mut *s;
        for i in 0..x.len() {
            a[i] = x[i] * self.inv_sqrt_mass[i];
        }
        self.op.stiffness.mul_vec(a, b);
        for i in 0..x.len() {
            y[i] = b[i] * self.inv_sqrt_mass[i] + self.shift * x[i];
        }
    }

    /// Conjugate gradients for `(A + δ) x = b` projected off `locked`.
    fn solve(&self, b: &[f64], locked: &[DVector<f64>], rel_tol: f64, max_iter: usize) -> Vec<f64> {
        let n = b.len();
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        project_out(&mut r, locked);
        let b_norm = norm(&r);
        if b_norm == 0.0 {
            return x;
        }
        let mut p = r.clone();
        let mut ap = vec![0.0; n];
        let mut rr = dot(&r, &r);
        for _ in 0..max_iter {
            self.apply(&p, &mut ap);
            project_out(&mut ap, locked);
            let alpha = rr / dot(&p, &ap);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rr_new = dot(&r, &r);
            if rr_new.sqrt() <= rel_tol * b_norm {
                break;
            }
            let beta = rr_new / rr;
            rr = rr_new;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
        }
        project_out(&mut x, locked);
        x
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn project_out(v: &mut [f64], basis: &[DVector<f64>]) {
    for q in basis {
        let c = dot(v, q.as_slice());
        for (vi, qi) in v.iter_mut().zip(q.iter()) {
            *vi -= c * qi;
        }
    }
}

/// Deterministic start vector with all entries positive and distinct.
fn start_vector(n: usize, salt: u64) -> Vec<f64> {
    let mut state = salt.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xD1B5_4A32_D192_ED03;
    (0..n)
        .map(|_| {
            state = crate::rng::splitmix64(state);
            1.0 + (state >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect()
}

pub(crate) fn shift_invert_eigenpairs(
    op: &LaplacianOperator,
    k: usize,
    opts: &SolverOptions,
) -> Result<SpectralResult> {
    let n = op.dim();
    let scale = operator_scale(op);
    let limit = opts.tol * scale;
    let mean_diag = (0..n).map(|i| op.stiffness.get(i, i) / op.mass[i]).sum::<f64>() / n as f64;
    let shift = 1e-2 * mean_diag.max(1e-12);
    let shifted = ShiftedOperator::new(op, shift);
    let cg_tol = 1e-14;
    let cg_iter = 20 * n.max(100);
    let m_max = opts.krylov_dim.min(n).max(2);

    // locked vectors live in the symmetrized (A) space, Euclidean-orthonormal
    let mut locked: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut values: Vec<f64> = Vec::with_capacity(k);
    let mut total_iters = 0usize;

    for target in 0..k {
        let mut start = start_vector(n, target as u64 + 1);
        let mut best_res = f64::INFINITY;
        let mut found: Option<(f64, DVector<f64>)> = None;
        for _restart in 0..=opts.max_restarts {
            project_out(&mut start, &locked);
            project_out(&mut start, &locked);
            let s_norm = norm(&start);
            if s_norm == 0.0 {
                break;
            }
            let mut basis: Vec<DVector<f64>> = vec![DVector::from_vec(start.iter().map(|x| x / s_norm).collect())];
            let mut alphas: Vec<f64> = Vec::new();
            let mut betas: Vec<f64> = Vec::new();
            let mut candidate: Option<(f64, DVector<f64>, f64)> = None;
            loop {
                let m = basis.len();
                let q = &basis[m - 1];
                let mut w = shifted.solve(q.as_slice(), &locked, cg_tol, cg_iter);
                total_iters += 1;
                let alpha = dot(&w, q.as_slice());
                alphas.push(alpha);
                // full reorthogonalization, twice
                for _ in 0..2 {
                    project_out(&mut w, &basis);
                    project_out(&mut w, &locked);
                }
                let beta = norm(&w);
                let exhausted = beta <= 1e-13 * alpha.abs().max(1e-300);
                if m % 5 == 0 || m == m_max || exhausted || m + locked.len() == n {
                    let (theta, y) = top_ritz(&alphas, &betas);
                    // Ritz vector in A space
                    let mut x = DVector::zeros(n);
                    for (yi, qi) in y.iter().zip(&basis) {
                        x.axpy(*yi, qi, 1.0);
                    }
                    project_out(x.as_mut_slice(), &locked);
                    let xn = x.norm();
                    x /= xn;
                    let phi = DVector::from_iterator(n, x.iter().zip(&shifted.inv_sqrt_mass).map(|(a, s)| a * s));
                    let lambda = op.quadratic_form(&phi);
                    let res = residual(op, lambda, &phi);
                    let _ = theta;
                    if res < best_res {
                        best_res = res;
                    }
                    if candidate.as_ref().is_none_or(|c| res < c.2) {
                        candidate = Some((lambda, x.clone(), res));
                    }
                    if res <= limit {
                        found = Some((lambda, x));
                        break;
                    }
                    if m == m_max || exhausted || m + locked.len() == n {
                        break;
                    }
                }
                if exhausted {
                    break;
                }
                betas.push(beta);
                basis.push(DVector::from_vec(w.iter().map(|x| x / beta).collect()));
            }
            if found.is_some() {
                break;
            }
            // restart from the best Ritz vector so far
            if let Some((_, x, _)) = candidate {
                start = x.iter().copied().collect();
            }
        }
        match found {
            Some((lambda, x)) => {
                log::debug!("lanczos: locked eigenpair {target} lambda={lambda:e} after {total_iters} solves");
                values.push(lambda);
                locked.push(x);
            }
            None => {
                let mut residuals: Vec<f64> = values
                    .iter()
                    .zip(&locked)
                    .map(|(&l, x)| {
                        let phi = DVector::from_iterator(n, x.iter().zip(&shifted.inv_sqrt_mass).map(|(a, s)| a * s));
                        residual(op, l, &phi)
                    })
                    .collect();
                residuals.push(best_res);
                return Err(Error::NonConvergence {
                    iterations: total_iters,
                    residuals,
                });
            }
        }
    }

    // final Rayleigh-Ritz on the locked block to order and decouple the pairs
    let kk = locked.len();
    let mut h = DMatrix::zeros(kk, kk);
    let mut ax = vec![0.0; n];
    let mut applied = Vec::with_capacity(kk);
    for x in &locked {
        shifted.apply(x.as_slice(), &mut ax);
        applied.push(DVector::from_vec(ax.iter().zip(x.iter()).map(|(a, xi)| a - shift * xi).collect::<Vec<_>>()));
    }
    for i in 0..kk {
        for j in 0..kk {
            h[(i, j)] = locked[i].dot(&applied[j]);
        }
    }
    let h = (&h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..kk).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut eigenvalues = Vec::with_capacity(kk);
    let mut eigenvectors = Vec::with_capacity(kk);
    for &j in &order {
        let mut x = DVector::zeros(n);
        for (i, li) in locked.iter().enumerate() {
            x.axpy(eig.eigenvectors[(i, j)], li, 1.0);
        }
        let phi = DVector::from_iterator(n, x.iter().zip(&shifted.inv_sqrt_mass).map(|(a, s)| a * s));
        let phi = &phi / op.mass_norm(&phi);
        eigenvalues.push(op.quadratic_form(&phi));
        eigenvectors.push(phi);
    }
    normalize_signs(&mut eigenvectors);
    let residuals: Vec<f64> = eigenvalues
        .iter()
        .zip(&eigenvectors)
        .map(|(&l, v)| residual(op, l, v))
        .collect();
    if residuals.iter().any(|&r| !(r <= limit)) {
        return Err(Error::NonConvergence {
            iterations: total_iters,
            residuals,
        });
    }
    Ok(SpectralResult {
        eigenvalues,
        eigenvectors,
        residuals,
    })
}

/// Largest Ritz value of the Lanczos tridiagonal and its coefficient vector.
fn top_ritz(alphas: &[f64], betas: &[f64]) -> (f64, DVector<f64>) {
    let m = alphas.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut best = 0;
    for i in 1..m {
        if eig.eigenvalues[i] > eig.eigenvalues[best] {
            best = i;
        }
    }
    (eig.eigenvalues[best], eig.eigenvectors.column(best).into_owned())
}

#[cfg(test)]
mod tests {
    use crate::complex::{Tag, WeightedComplex};
    use crate::laplacian::assemble_laplacian;
    use crate::spectral::{dense_eigenpairs, lowest_eigenpairs_with, SolverOptions};

    fn grid(w: usize, h: usize, dirichlet_border: bool) -> WeightedComplex {
        let id = |i: usize, j: usize| i * w + j;
        let mut tags = vec![Tag::Neumann; w * h];
        if dirichlet_border {
            for j in 0..w {
                tags[id(0, j)] = Tag::Dirichlet;
            }
        }
        let mut edges = Vec::new();
        for i in 0..h {
            for j in 0..w {
                let c = 1.0 + 0.1 * ((i * 7 + j * 3) % 5) as f64;
                if j + 1 < w {
                    edges.push((id(i, j), id(i, j + 1), c));
                }
                if i + 1 < h {
                    edges.push((id(i, j), id(i + 1, j), c));
                }
            }
        }
        WeightedComplex::from_graph(&tags, &edges).unwrap()
    }

    #[test]
    fn iterative_matches_dense_on_grid() {
        for dirichlet in [true, false] {
            let op = assemble_laplacian(&grid(12, 10, dirichlet)).unwrap();
            let dense = dense_eigenpairs(&op, 4, 1e-10).unwrap();
            let opts = SolverOptions { dense_limit: 10, ..SolverOptions::default() };
            let it = lowest_eigenpairs_with(&op, 4, &opts).unwrap();
            for (a, b) in it.eigenvalues.iter().zip(&dense.eigenvalues) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
            assert!((it.eigenvectors[0].clone() - dense.eigenvectors[0].clone()).norm() < 1e-6);
        }
    }

    #[test]
    fn iterative_recovers_multiplicity() {
        // square grid with uniform weights: λ1 = λ2 by symmetry
        let id = |i: usize, j: usize| i * 9 + j;
        let mut edges = Vec::new();
        for i in 0..9 {
            for j in 0..9 {
                if j + 1 < 9 {
                    edges.push((id(i, j), id(i, j + 1), 1.0));
                }
                if i + 1 < 9 {
                    edges.push((id(i, j), id(i + 1, j), 1.0));
                }
            }
        }
        let c = WeightedComplex::from_graph(&[Tag::Neumann; 81], &edges).unwrap();
        let op = assemble_laplacian(&c).unwrap();
        let dense = dense_eigenpairs(&op, 4, 1e-10).unwrap();
        let opts = SolverOptions { dense_limit: 10, ..SolverOptions::default() };
        let it = lowest_eigenpairs_with(&op, 4, &opts).unwrap();
        for (a, b) in it.eigenvalues.iter().zip(&dense.eigenvalues) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        assert!((it.eigenvalues[1] - it.eigenvalues[2]).abs() < 1e-9);
    }
}
