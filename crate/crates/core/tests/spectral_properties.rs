use std::f64::consts::PI;

use nalgebra::DVector;
use proptest::prelude::*;
use specdom::fixtures::*;
use specdom::spectral::{full_spectrum, DEFAULT_TOL};
use specdom::*;

fn random_positive(seed: u64, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, random_values(seed, n).into_iter().map(|x| 0.05 + x))
}

fn iterative() -> SolverOptions {
    SolverOptions {
        dense_limit: 50,
        ..SolverOptions::default()
    }
}

#[test]
fn mixed_path_matches_closed_form() {
    for n in [3usize, 5, 9, 20] {
        let op = assemble_laplacian(&path_mixed(n)).unwrap();
        let m = (n - 1) as f64;
        let res = full_spectrum(&op).unwrap();
        for (k, l) in res.eigenvalues.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((2 * k + 1) as f64 * PI / (2.0 * m + 1.0)).cos();
            assert!((l - exact).abs() < 1e-9, "n={n} k={k}: {l} vs {exact}");
        }
    }
}

#[test]
fn lanczos_path_matches_closed_form() {
    let n = 601;
    let op = assemble_laplacian(&path_mixed(n)).unwrap();
    let res = lowest_eigenpairs_with(&op, 3, &iterative()).unwrap();
    let m = (n - 1) as f64;
    for k in 0..3 {
        let exact = 2.0 - 2.0 * ((2 * k + 1) as f64 * PI / (2.0 * m + 1.0)).cos();
        assert!((res.eigenvalues[k] - exact).abs() < 1e-9 * (1.0 + exact));
        assert!(res.residuals[k] < 1e-8);
    }
}

#[test]
fn lanczos_cycle_resolves_double_eigenvalue() {
    let n = 600;
    let op = assemble_laplacian(&cycle(n)).unwrap();
    let res = lowest_eigenpairs_with(&op, 3, &iterative()).unwrap();
    let l1 = 2.0 - 2.0 * (2.0 * PI / n as f64).cos();
    assert!(res.eigenvalues[0].abs() < 1e-10);
    assert!((res.eigenvalues[1] - l1).abs() < 1e-10);
    assert!((res.eigenvalues[2] - l1).abs() < 1e-10);
    let overlap = op.mass_dot(&res.eigenvectors[1], &res.eigenvectors[2]);
    assert!(overlap.abs() < 1e-8);
}

#[test]
fn barta_is_tight_at_ground_state() {
    for seed in 0..10 {
        let op = assemble_laplacian(&random_graph(seed, 12, 6, 2)).unwrap();
        let res = lowest_eigenpairs(&op, 1, DEFAULT_TOL).unwrap();
        let b = barta_bound(&op, &res.eigenvectors[0]).unwrap();
        assert!((b.lower - res.lambda0()).abs() < 1e-8);
        assert!((b.upper - res.lambda0()).abs() < 1e-8);
    }
}

#[test]
fn barta_rejects_nonpositive() {
    let op = assemble_laplacian(&p3()).unwrap();
    let err = barta_bound(&op, &DVector::from_vec(vec![1.0, 0.0, 1.0])).unwrap_err();
    assert_eq!(err.code(), "not_positive");
}

#[test]
fn deflated_resolvent_matches_spectral_sum() {
    for seed in 0..5 {
        let op = assemble_laplacian(&random_graph(seed, 10, 5, 1)).unwrap();
        let spec = full_spectrum(&op).unwrap();
        for i in 0..2 {
            let phi = &spec.eigenvectors[i];
            let mut f = random_positive(seed + 100, op.dim());
            let c = op.mass_dot(&f, phi);
            f -= phi * c;
            let u = deflated_resolvent(&op, &spec, i, &f).unwrap();
            let mut expected = DVector::zeros(op.dim());
            for j in 0..spec.len() {
                if j != i {
                    let pj = &spec.eigenvectors[j];
                    expected += pj * (op.mass_dot(&f, pj) / (spec.eigenvalues[j] - spec.eigenvalues[i]));
                }
            }
            assert!((u - expected).amax() < 1e-9);
        }
    }
}

#[test]
fn deflated_resolvent_rejects_degenerate_and_overlapping() {
    let op = assemble_laplacian(&c4()).unwrap();
    let spec = full_spectrum(&op).unwrap();
    let f = DVector::from_vec(vec![1.0, -1.0, 1.0, -1.0]);
    assert_eq!(deflated_resolvent(&op, &spec, 1, &f).unwrap_err().code(), "near_degenerate");
    let ones = DVector::from_element(4, 1.0);
    assert_eq!(deflated_resolvent(&op, &spec, 0, &ones).unwrap_err().code(), "not_orthogonal");
}

#[test]
fn exhaustion_of_path_decreases_to_full() {
    let c = path_mixed(8);
    let stages: Vec<Vec<usize>> = (2..=8).map(|j| (0..j).collect()).collect();
    let ex = ExhaustionSpec::new(8, stages).unwrap();
    let seq = exhaustion_lambda0(&c, &ex, &SolverOptions::default()).unwrap();
    for w in seq.windows(2) {
        assert!(w[1].1 < w[0].1);
    }
    let full = lowest_eigenpairs(&assemble_laplacian(&c).unwrap(), 1, DEFAULT_TOL).unwrap();
    assert!((seq.last().unwrap().1 - full.lambda0()).abs() < 1e-12);
}

#[test]
fn exhaustion_rejects_non_nested() {
    assert!(ExhaustionSpec::new(3, vec![vec![0, 1], vec![1, 2], vec![0, 1, 2]]).is_err());
    assert!(ExhaustionSpec::new(3, vec![vec![0, 1]]).is_err());
}

#[test]
fn k_too_large() {
    let op = assemble_laplacian(&p3()).unwrap();
    assert_eq!(lowest_eigenpairs(&op, 4, DEFAULT_TOL).unwrap_err().code(), "k_too_large");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn barta_brackets_lambda0(seed in any::<u64>(), n in 3usize..14, d in 0usize..3) {
        let op = assemble_laplacian(&random_graph(seed, n, n / 2, d.min(n - 2))).unwrap();
        let l0 = lowest_eigenpairs(&op, 1, DEFAULT_TOL).unwrap().lambda0();
        let b = barta_bound(&op, &random_positive(seed ^ 1, op.dim())).unwrap();
        prop_assert!(b.lower <= l0 + 1e-12 && l0 <= b.upper + 1e-12);
    }

    #[test]
    fn rayleigh_bounds_lambda0(seed in any::<u64>(), n in 3usize..14) {
        let op = assemble_laplacian(&random_graph(seed, n, 3, 1)).unwrap();
        let l0 = lowest_eigenpairs(&op, 1, DEFAULT_TOL).unwrap().lambda0();
        let f = DVector::from_vec(random_values(seed ^ 2, op.dim())).add_scalar(-0.5);
        prop_assert!(rayleigh(&op, &f).unwrap() >= l0 - 1e-12);
    }

    #[test]
    fn spectrum_is_relabeling_invariant(seed in any::<u64>(), n in 3usize..12) {
        let c = random_graph(seed, n, 4, 1);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.rotate_left(seed as usize % n);
        perm.swap(0, n - 1);
        let a = full_spectrum(&assemble_laplacian(&c).unwrap()).unwrap();
        let b = full_spectrum(&assemble_laplacian(&c.relabel(&perm).unwrap()).unwrap()).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            prop_assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn eigenvectors_are_mass_orthonormal(seed in any::<u64>()) {
        let op = assemble_laplacian(&random_graph(seed, 9, 5, 2)).unwrap();
        let res = lowest_eigenpairs(&op, 4, DEFAULT_TOL).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let d = op.mass_dot(&res.eigenvectors[i], &res.eigenvectors[j]);
                let e = if i == j { 1.0 } else { 0.0 };
                prop_assert!((d - e).abs() < 1e-9);
            }
        }
    }
}
