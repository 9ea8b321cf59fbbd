//! Small reference complexes and covering bases.

use rand::Rng;

use crate::complex::{Edge, Tag, Vertex, WeightedComplex};
use crate::covering::VoltageAssignment;
use crate::group::{DeckGroup, GroupElement};
use crate::rng::item_rng;

fn graph(tags: &[Tag], edges: &[(usize, usize, f64)]) -> WeightedComplex {
    WeightedComplex::from_graph(tags, edges).expect("fixture is valid")
}

pub fn path(n: usize) -> WeightedComplex {
    let e: Vec<_> = (0..n.saturating_sub(1)).map(|i| (i, i + 1, 1.0)).collect();
    graph(&vec![Tag::Neumann; n], &e)
}

/// Path with vertex 0 dirichlet.
pub fn path_mixed(n: usize) -> WeightedComplex {
    let mut tags = vec![Tag::Neumann; n];
    tags[0] = Tag::Dirichlet;
    let e: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
    graph(&tags, &e)
}

pub fn p3() -> WeightedComplex {
    path(3)
}

pub fn p3_mixed() -> WeightedComplex {
    path_mixed(3)
}

pub fn p5() -> WeightedComplex {
    path(5)
}

pub fn p5_mixed() -> WeightedComplex {
    path_mixed(5)
}

pub fn cycle(n: usize) -> WeightedComplex {
    let e: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
    graph(&vec![Tag::Neumann; n], &e)
}

pub fn c4() -> WeightedComplex {
    cycle(4)
}

/// C6 with a heavy vertex 1 (measure 3) and a dirichlet pendant 6 hung
/// on vertex 0 by a weak edge (conductance 0.1).
pub fn c6_mixed() -> WeightedComplex {
    let mut tags = vec![Tag::Neumann; 7];
    tags[6] = Tag::Dirichlet;
    let mut vertices: Vec<Vertex> = tags
        .iter()
        .enumerate()
        .map(|(id, &tag)| Vertex { id, measure: 1.0, tag })
        .collect();
    vertices[1].measure = 3.0;
    let mut edges: Vec<Edge> = (0..6)
        .map(|i| Edge {
            u: i,
            v: (i + 1) % 6,
            conductance: 1.0,
        })
        .collect();
    edges.push(Edge {
        u: 0,
        v: 6,
        conductance: 0.1,
    });
    WeightedComplex::new(vertices, edges).expect("fixture is valid")
}

/// `ℤ` voltage `+1` on edge `(3, 4)` of [`c6_mixed`].
pub fn c6_mixed_voltage(base: &WeightedComplex) -> VoltageAssignment {
    unit_z_voltage(base, 3)
}

/// C6 symmetric under `v ↦ 1 − v (mod 6)`: a dirichlet vertex 6 joined to
/// both 0 and 1; edges `(0,1)` and `(3,4)` have conductance 5.
pub fn c6_symmetric() -> WeightedComplex {
    let mut tags = vec![Tag::Neumann; 7];
    tags[6] = Tag::Dirichlet;
    let mut e: Vec<_> = (0..6).map(|i| (i, (i + 1) % 6, 1.0)).collect();
    e[0].2 = 5.0;
    e[3].2 = 5.0;
    e.push((0, 6, 1.0));
    e.push((1, 6, 1.0));
    graph(&tags, &e)
}

/// `ℤ` voltage `+1` on the mirror-fixed edge `(3, 4)` of [`c6_symmetric`].
pub fn c6_symmetric_voltage(base: &WeightedComplex) -> VoltageAssignment {
    unit_z_voltage(base, 3)
}

fn unit_z_voltage(base: &WeightedComplex, edge: usize) -> VoltageAssignment {
    let v = (0..base.edges().len())
        .map(|k| GroupElement::Abelian(vec![i64::from(k == edge)]))
        .collect();
    VoltageAssignment::new(DeckGroup::FreeAbelian(1), base, v).expect("one voltage per edge")
}

/// One vertex carrying one loop.
pub fn single_loop() -> WeightedComplex {
    graph(&[Tag::Neumann], &[(0, 0, 1.0)])
}

pub fn single_loop_voltage(base: &WeightedComplex) -> VoltageAssignment {
    VoltageAssignment::new(DeckGroup::FreeAbelian(1), base, vec![GroupElement::Abelian(vec![1])])
        .expect("one loop")
}

/// One vertex carrying two loops; its free(2) cover is the 4-regular tree.
pub fn wedge_of_two_loops() -> WeightedComplex {
    graph(&[Tag::Neumann], &[(0, 0, 1.0), (0, 0, 1.0)])
}

pub fn wedge_voltage(base: &WeightedComplex) -> VoltageAssignment {
    VoltageAssignment::new(
        DeckGroup::Free(2),
        base,
        vec![GroupElement::Word(vec![1]), GroupElement::Word(vec![2])],
    )
    .expect("two loops")
}

/// Four-vertex base with `ℤ²` voltages on two edges, a heavy vertex and a
/// dirichlet pendant.
pub fn z2_base() -> (WeightedComplex, VoltageAssignment) {
    let mut tags = vec![Tag::Neumann; 5];
    tags[4] = Tag::Dirichlet;
    let base = graph(
        &tags,
        &[(0, 1, 1.0), (1, 2, 0.7), (2, 3, 1.3), (3, 0, 0.9), (0, 2, 0.5), (3, 4, 0.4)],
    );
    let z = |a: i64, b: i64| GroupElement::Abelian(vec![a, b]);
    let v = vec![z(0, 0), z(1, 0), z(0, 0), z(0, 1), z(0, 0), z(0, 0)];
    let v = VoltageAssignment::new(DeckGroup::FreeAbelian(2), &base, v).expect("one voltage per edge");
    (base, v)
}

/// Theta graph (three parallel edges between 0 and 1) with a tail 1–2–3
/// ending at a dirichlet vertex; free(2) voltages on two theta edges.
pub fn theta_free_base() -> (WeightedComplex, VoltageAssignment) {
    let mut tags = vec![Tag::Neumann; 4];
    tags[3] = Tag::Dirichlet;
    let base = graph(&tags, &[(0, 1, 1.0), (0, 1, 0.6), (0, 1, 1.4), (1, 2, 1.0), (2, 3, 0.8)]);
    let w = |x: Vec<i32>| GroupElement::Word(x);
    let v = vec![w(vec![]), w(vec![1]), w(vec![2]), w(vec![]), w(vec![])];
    let v = VoltageAssignment::new(DeckGroup::Free(2), &base, v).expect("one voltage per edge");
    (base, v)
}

pub const OCTAHEDRON_VERTICES: [[f64; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, 0.0, -1.0],
];

/// Regular octahedron with unit circumradius.
pub fn octahedron() -> WeightedComplex {
    let mut tris = Vec::new();
    for &x in &[0usize, 1] {
        for &y in &[2usize, 3] {
            for &z in &[4usize, 5] {
                tris.push([x, y, z]);
            }
        }
    }
    WeightedComplex::from_intrinsic(6, tris, |a, b| {
        let (p, q) = (OCTAHEDRON_VERTICES[a], OCTAHEDRON_VERTICES[b]);
        (0..3).map(|i| (p[i] - q[i]).powi(2)).sum::<f64>().sqrt()
    })
    .expect("fixture is valid")
}

/// `m × m` flat torus grid, each square split along its main diagonal.
pub fn torus_grid(m: usize) -> WeightedComplex {
    let id = |i: usize, j: usize| (i % m) * m + (j % m);
    let mut tris = Vec::new();
    for i in 0..m {
        for j in 0..m {
            tris.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            tris.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    WeightedComplex::from_intrinsic(m * m, tris, |a, b| {
        let (ai, aj, bi, bj) = (a / m, a % m, b / m, b % m);
        let di = (ai + m - bi) % m;
        let dj = (aj + m - bj) % m;
        let diag = (di == 1 || di == m - 1) && (dj == 1 || dj == m - 1);
        if diag {
            2f64.sqrt()
        } else {
            1.0
        }
    })
    .expect("fixture is valid")
}

/// Random connected graph: a random spanning tree plus `extra` chords,
/// conductances in `[0.2, 2]`, measures in `[0.5, 2]`, and `dirichlet`
/// tagged vertices chosen so the rest stays connected.
pub fn random_graph(seed: u64, n: usize, extra: usize, dirichlet: usize) -> WeightedComplex {
    assert!(n >= 2 && dirichlet < n);
    let mut rng = item_rng(seed, 0);
    let mut edges = Vec::new();
    // vertices n - dirichlet .. n are dirichlet leaves hung on the free tree
    let free = n - dirichlet;
    for v in 1..free {
        let p = rng.random_range(0..v);
        edges.push((p, v, rng.random_range(0.2..2.0)));
    }
    for _ in 0..extra {
        if free < 2 {
            break;
        }
        let a = rng.random_range(0..free);
        let b = rng.random_range(0..free);
        if a != b {
            edges.push((a, b, rng.random_range(0.2..2.0)));
        }
    }
    for d in free..n {
        let a = rng.random_range(0..free);
        edges.push((a, d, rng.random_range(0.2..2.0)));
    }
    let vertices = (0..n)
        .map(|id| Vertex {
            id,
            measure: rng.random_range(0.5..2.0),
            tag: if id >= free { Tag::Dirichlet } else { Tag::Neumann },
        })
        .collect();
    let edges = edges.into_iter().map(|(u, v, conductance)| Edge { u, v, conductance }).collect();
    WeightedComplex::new(vertices, edges).expect("random graph is valid")
}

/// Function on the vertices with independent uniform values in `[0, 1)`;
/// almost surely tie-free.
pub fn random_values(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = item_rng(seed, 1);
    (0..n).map(|_| rng.random::<f64>()).collect()
}
