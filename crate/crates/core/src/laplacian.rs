//! Assembly of the positive weighted Laplacian with mixed boundary conditions.
//!
//! Sign convention: the operator is positive, `(Δf)(v) = (1/μ(v)) Σ c(vw)(f(v) − f(w))`,
//! with `f ≡ 0` on dirichlet vertices. Neumann and interior vertices are both
//! free; a Neumann boundary is simply the absence of further edges.

use nalgebra::{DMatrix, DVector};

use crate::complex::WeightedComplex;
use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from triplets, summing duplicates. Columns are sorted per row.
    pub fn from_triplets(n: usize, mut trips: Vec<(usize, usize, f64)>) -> Self {
        trips.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(trips.len());
        let mut vals: Vec<f64> = Vec::with_capacity(trips.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in trips {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            last = Some((i, j));
            cols.push(j);
            vals.push(v);
            row_ptr[i + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.n);
        self.mul_vec(x.as_slice(), y.as_mut_slice());
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }
}

/// Stiffness and lumped mass restricted to the free (non-dirichlet) vertices.
#[derive(Debug, Clone)]
pub struct LaplacianOperator {
    /// Symmetric, nonnegative definite.
    pub stiffness: SparseMatrix,
    /// Diagonal of the lumped mass matrix.
    pub mass: Vec<f64>,
    /// Per free vertex, total conductance into dirichlet vertices.
    pub dirichlet_closure: Vec<f64>,
    /// Per free vertex, `(dirichlet vertex id, conductance)` aggregated by vertex.
    pub boundary_coupling: Vec<Vec<(usize, f64)>>,
    /// Free index → complex vertex id.
    pub free: Vec<usize>,
    /// Complex vertex id → free index.
    pub index_of: Vec<Option<usize>>,
}

impl LaplacianOperator {
    pub fn dim(&self) -> usize {
        self.free.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.index_of.len()
    }

    pub fn has_dirichlet(&self) -> bool {
        self.dirichlet_closure.iter().any(|&c| c > 0.0)
    }

    /// `(Δf)` on free vertices.
    pub fn apply(&self, f: &DVector<f64>) -> DVector<f64> {
        let mut y = self.stiffness.apply(f);
        for (yi, m) in y.iter_mut().zip(&self.mass) {
            *yi /= m;
        }
        y
    }

    pub fn quadratic_form(&self, f: &DVector<f64>) -> f64 {
        f.dot(&self.stiffness.apply(f))
    }

    pub fn mass_dot(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.iter().zip(b.iter()).zip(&self.mass).map(|((x, y), m)| x * y * m).sum()
    }

    pub fn mass_norm(&self, a: &DVector<f64>) -> f64 {
        self.mass_dot(a, a).sqrt()
    }

    /// Restricts a vector over all complex vertices to the free vertices.
    pub fn restrict_vector(&self, full: &[f64]) -> Result<DVector<f64>> {
        if full.len() != self.num_vertices() {
            return Err(Error::DimensionMismatch {
                expected: self.num_vertices(),
                got: full.len(),
            });
        }
        Ok(DVector::from_iterator(self.dim(), self.free.iter().map(|&v| full[v])))
    }

    /// Extends a free-vertex vector by zero on dirichlet vertices.
    pub fn extend_vector(&self, f: &DVector<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.num_vertices()];
        for (i, &v) in self.free.iter().enumerate() {
            out[v] = f[i];
        }
        out
    }

    /// `M^{-1/2} K M^{-1/2}` as a dense matrix.
    pub fn symmetric_dense(&self) -> DMatrix<f64> {
        let mut a = self.stiffness.to_dense();
        let s: Vec<f64> = self.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                a[(i, j)] *= s[i] * s[j];
            }
        }
        a
    }

    /// Dense `M^{-1} K`.
    pub fn generator_dense(&self) -> DMatrix<f64> {
        let mut a = self.stiffness.to_dense();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                a[(i, j)] /= self.mass[i];
            }
        }
        a
    }
}

/// Assembles the Laplacian of a complex. Rejects negative cotangent weights
/// and a disconnected free subgraph.
pub fn assemble_laplacian(complex: &WeightedComplex) -> Result<LaplacianOperator> {
    let op = assemble_unchecked(complex)?;
    let keep: Vec<bool> = op.index_of.iter().map(Option::is_some).collect();
    let weights = complex.edge_weights()?;
    let (_, count) = complex.components(&keep, &weights);
    if count > 1 {
        return Err(Error::Disconnected { components: count });
    }
    Ok(op)
}

/// Assembly without the connectivity check. The spectrum of a disconnected
/// free part is the union of the component spectra.
pub fn assemble_unchecked(complex: &WeightedComplex) -> Result<LaplacianOperator> {
    let weights = complex.edge_weights()?;
    let measures = complex.vertex_measures();
    let n = complex.num_vertices();
    let mut index_of = vec![None; n];
    let mut free = Vec::new();
    for v in complex.vertices() {
        if !v.tag.is_dirichlet() {
            index_of[v.id] = Some(free.len());
            free.push(v.id);
        }
    }
    let dim = free.len();
    if dim == 0 {
        return Err(Error::EmptyInterior);
    }
    let mut trips = Vec::with_capacity(4 * complex.edges().len() + dim);
    let mut closure = vec![0.0; dim];
    let mut coupling: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
    for (e, &w) in complex.edges().iter().zip(&weights) {
        if e.is_loop() || w == 0.0 {
            continue;
        }
        match (index_of[e.u], index_of[e.v]) {
            (Some(i), Some(j)) => {
                trips.push((i, i, w));
                trips.push((j, j, w));
                trips.push((i, j, -w));
                trips.push((j, i, -w));
            }
            (Some(i), None) => add_closure(&mut trips, &mut closure, &mut coupling, i, e.v, w),
            (None, Some(j)) => add_closure(&mut trips, &mut closure, &mut coupling, j, e.u, w),
            (None, None) => {}
        }
    }
    for i in 0..dim {
        // keeps an explicit diagonal even for isolated vertices
        trips.push((i, i, 0.0));
    }
    let stiffness = SparseMatrix::from_triplets(dim, trips);
    let mass = free.iter().map(|&v| measures[v]).collect();
    Ok(LaplacianOperator {
        stiffness,
        mass,
        dirichlet_closure: closure,
        boundary_coupling: coupling,
        free,
        index_of,
    })
}

fn add_closure(
    trips: &mut Vec<(usize, usize, f64)>,
    closure: &mut [f64],
    coupling: &mut [Vec<(usize, f64)>],
    i: usize,
    d: usize,
    w: f64,
) {
    trips.push((i, i, w));
    closure[i] += w;
    match coupling[i].iter_mut().find(|(x, _)| *x == d) {
        Some(slot) => slot.1 += w,
        None => coupling[i].push((d, w)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{Edge, Tag, Vertex};
    use std::collections::BTreeMap;

    fn path(n: usize, tags: &[Tag]) -> WeightedComplex {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        WeightedComplex::from_graph(tags, &edges).unwrap()
    }

    #[test]
    fn p3_stiffness() {
        let op = assemble_laplacian(&path(3, &[Tag::Neumann; 3])).unwrap();
        let expect = DMatrix::from_row_slice(3, 3, &[1., -1., 0., -1., 2., -1., 0., -1., 1.]);
        assert_eq!(op.stiffness.to_dense(), expect);
        assert!(!op.has_dirichlet());
    }

    #[test]
    fn single_vertex() {
        let c = WeightedComplex::from_graph(&[Tag::Neumann], &[]).unwrap();
        let op = assemble_laplacian(&c).unwrap();
        assert_eq!(op.stiffness.to_dense(), DMatrix::zeros(1, 1));
    }

    #[test]
    fn row_sums_equal_dirichlet_closure() {
        let c = path(4, &[Tag::Dirichlet, Tag::Neumann, Tag::Interior, Tag::Dirichlet]);
        let op = assemble_laplacian(&c).unwrap();
        for i in 0..op.dim() {
            let s: f64 = op.stiffness.row(i).map(|(_, v)| v).sum();
            assert_eq!(s, op.dirichlet_closure[i]);
        }
        assert_eq!(op.dirichlet_closure, vec![1.0, 1.0]);
        assert_eq!(op.boundary_coupling[0], vec![(0, 1.0)]);
    }

    #[test]
    fn disconnected_rejected() {
        let c = path(3, &[Tag::Neumann, Tag::Dirichlet, Tag::Neumann]);
        assert_eq!(
            assemble_laplacian(&c).unwrap_err(),
            Error::Disconnected { components: 2 }
        );
        assert!(assemble_unchecked(&c).is_ok());
        let all_d = path(2, &[Tag::Dirichlet; 2]);
        assert_eq!(assemble_laplacian(&all_d).unwrap_err(), Error::EmptyInterior);
    }

    #[test]
    fn loops_contribute_nothing() {
        let c = WeightedComplex::from_graph(&[Tag::Neumann], &[(0, 0, 1.0)]).unwrap();
        let op = assemble_laplacian(&c).unwrap();
        assert_eq!(op.stiffness.get(0, 0), 0.0);
    }

    #[test]
    fn parallel_edges_add() {
        let c = WeightedComplex::from_graph(&[Tag::Neumann; 2], &[(0, 1, 1.0), (1, 0, 0.5)]).unwrap();
        let op = assemble_laplacian(&c).unwrap();
        assert_eq!(op.stiffness.get(0, 1), -1.5);
        assert_eq!(op.stiffness.get(1, 1), 1.5);
    }

    /// Dense P1 finite-element stiffness of a flat triangle from vertex
    /// coordinates, used as an independent check of the cotangent formula.
    fn fem_stiffness(p: [[f64; 2]; 3]) -> [[f64; 3]; 3] {
        let area = 0.5
            * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
                .abs();
        let mut grads = [[0.0; 2]; 3];
        for i in 0..3 {
            let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
            // gradient of the hat function of vertex i is perpendicular to edge ab
            let g = [-(b[1] - a[1]), b[0] - a[0]];
            let s = 1.0 / (2.0 * area);
            let d = [p[i][0] - a[0], p[i][1] - a[1]];
            let sign = if g[0] * d[0] + g[1] * d[1] > 0.0 { 1.0 } else { -1.0 };
            grads[i] = [sign * g[0] * s, sign * g[1] * s];
        }
        let mut k = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                k[i][j] = area * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
            }
        }
        k
    }

    fn surface(tris: Vec<[usize; 3]>, n: usize, lengths: BTreeMap<(usize, usize), f64>) -> WeightedComplex {
        let vertices = (0..n).map(|id| Vertex { id, measure: 1.0, tag: Tag::Interior }).collect();
        let edges = lengths
            .keys()
            .map(|&(u, v)| Edge { u, v, conductance: 1.0 })
            .collect();
        WeightedComplex::with_triangles(vertices, edges, tris, lengths).unwrap()
    }

    #[test]
    fn equilateral_pillow_cotangent_and_measure() {
        let mut l = BTreeMap::new();
        for k in [(0, 1), (1, 2), (0, 2)] {
            l.insert(k, 1.0);
        }
        let c = surface(vec![[0, 1, 2], [0, 2, 1]], 3, l);
        let w = c.edge_weights().unwrap();
        let cot60 = 1.0 / 3f64.sqrt();
        for x in w {
            assert!((x - cot60).abs() < 1e-14);
        }
        for m in c.vertex_measures() {
            assert!((m - (2.0 / 3.0) * (3f64.sqrt() / 4.0)).abs() < 1e-14);
        }
        // the pillow stiffness equals twice the single-triangle FEM stiffness
        let fem = fem_stiffness([[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]]);
        let op = assemble_laplacian(&c).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((op.stiffness.get(i, j) - 2.0 * fem[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cotangent_matches_fem_on_scalene_triangle() {
        let p = [[0.0, 0.0], [1.3, 0.1], [0.4, 0.9]];
        let d = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let mut l = BTreeMap::new();
        l.insert((0, 1), d(p[0], p[1]));
        l.insert((1, 2), d(p[1], p[2]));
        l.insert((0, 2), d(p[0], p[2]));
        let c = surface(vec![[0, 1, 2]], 3, l);
        let fem = fem_stiffness(p);
        let op = assemble_laplacian(&c).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((op.stiffness.get(i, j) - fem[i][j]).abs() < 1e-12, "{i} {j}");
            }
        }
    }

    #[test]
    fn right_triangle_grid_gives_five_point_stencil() {
        // 3x3 vertex grid on the unit-spaced square, each cell split by a diagonal
        let idx = |i: usize, j: usize| 3 * i + j;
        let mut tris = Vec::new();
        let mut l = BTreeMap::new();
        for i in 0..2 {
            for j in 0..2 {
                let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                tris.push([a, b, c]);
                tris.push([a, c, d]);
                for (x, y) in [(a, b), (b, c), (c, d), (d, a)] {
                    l.insert(crate::complex::edge_key(x, y), 1.0);
                }
                l.insert(crate::complex::edge_key(a, c), 2f64.sqrt());
            }
        }
        let c = surface(tris, 9, l);
        let op = assemble_laplacian(&c).unwrap();
        let center = idx(1, 1);
        assert!((op.stiffness.get(center, center) - 4.0).abs() < 1e-12);
        for nb in [idx(0, 1), idx(2, 1), idx(1, 0), idx(1, 2)] {
            assert!((op.stiffness.get(center, nb) + 1.0).abs() < 1e-12);
        }
        for diag in [idx(0, 0), idx(2, 2)] {
            assert_eq!(op.stiffness.get(center, diag), 0.0);
        }
    }
}
