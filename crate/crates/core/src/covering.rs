//! Derived covering complexes of voltage graphs, word-ball truncations with a
//! dirichlet rim, and Floquet band bottoms for `ℤ^d` voltages.

use std::collections::HashMap;
use std::f64::consts::TAU;

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complex::{Edge, Tag, Vertex, WeightedComplex};
use crate::error::{Error, Result};
use crate::group::{DeckGroup, GroupElement, GroupSpec, WordRepr};
use crate::laplacian::assemble_unchecked;
use crate::spectral::{lowest_eigenpairs_with, SolverOptions};

/// One group element per base edge, read along the edge's `u → v`
/// orientation; the reverse orientation carries the inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageAssignment {
    group: DeckGroup,
    voltages: Vec<GroupElement>,
}

impl VoltageAssignment {
    pub fn new(group: DeckGroup, base: &WeightedComplex, voltages: Vec<GroupElement>) -> Result<Self> {
        if voltages.len() != base.edges().len() {
            return Err(Error::InvalidVoltage(format!(
                "{} voltages for {} edges",
                voltages.len(),
                base.edges().len()
            )));
        }
        Ok(VoltageAssignment { group, voltages })
    }

    /// Every edge carries the identity.
    pub fn trivial(group: DeckGroup, base: &WeightedComplex) -> Self {
        let voltages = vec![group.identity(); base.edges().len()];
        VoltageAssignment { group, voltages }
    }

    pub fn group(&self) -> &DeckGroup {
        &self.group
    }

    pub fn voltages(&self) -> &[GroupElement] {
        &self.voltages
    }

    /// Voltage of edge `k` traversed from `from` to its other endpoint.
    pub fn directed(&self, base: &WeightedComplex, k: usize, from: usize) -> GroupElement {
        let e = &base.edges()[k];
        if e.u == from {
            self.voltages[k].clone()
        } else {
            self.group.inv(&self.voltages[k])
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.voltages.iter().all(|g| self.group.is_identity(g))
    }

    /// Parses `{"group":…,"voltages":[{"u","v","word"},…]}`. Entries match base
    /// edges by position; an entry written against the edge orientation is inverted.
    pub fn from_json(base: &WeightedComplex, s: &str) -> Result<Self> {
        let doc: VoltageDoc = serde_json::from_str(s)?;
        let group = DeckGroup::from_spec(&doc.group)?;
        if doc.voltages.len() != base.edges().len() {
            return Err(Error::InvalidVoltage(format!(
                "{} voltages for {} edges",
                doc.voltages.len(),
                base.edges().len()
            )));
        }
        let mut voltages = Vec::with_capacity(doc.voltages.len());
        for (k, (entry, e)) in doc.voltages.iter().zip(base.edges()).enumerate() {
            let g = group.parse_word(&entry.word)?;
            if (entry.u, entry.v) == (e.u, e.v) {
                voltages.push(g);
            } else if (entry.u, entry.v) == (e.v, e.u) {
                voltages.push(group.inv(&g));
            } else {
                return Err(Error::InvalidVoltage(format!(
                    "entry {k} is ({}, {}) but edge {k} is ({}, {})",
                    entry.u, entry.v, e.u, e.v
                )));
            }
        }
        Ok(VoltageAssignment { group, voltages })
    }

    pub fn to_json(&self, base: &WeightedComplex) -> String {
        let doc = VoltageDoc {
            group: self.group.spec(),
            voltages: base
                .edges()
                .iter()
                .zip(&self.voltages)
                .map(|(e, g)| VoltageEntry {
                    u: e.u,
                    v: e.v,
                    word: self.group.format_word(g),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("voltage document serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VoltageDoc {
    group: GroupSpec,
    voltages: Vec<VoltageEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VoltageEntry {
    u: usize,
    v: usize,
    word: WordRepr,
}

/// Base, voltages and truncation radius in the word metric.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverSpec {
    pub base: WeightedComplex,
    pub voltage: VoltageAssignment,
    pub radius: usize,
}

impl CoverSpec {
    pub fn new(base: WeightedComplex, voltage: VoltageAssignment, radius: usize) -> Result<Self> {
        if voltage.voltages.len() != base.edges().len() {
            return Err(Error::InvalidVoltage("voltage count does not match base edges".into()));
        }
        Ok(CoverSpec {
            base,
            voltage,
            radius,
        })
    }
}

/// Truncated derived complex. Cover vertex `i` is the lift `(i mod n, element(i / n))`
/// of base vertex `i mod n`, with elements in BFS order so the identity sheet
/// comes first.
#[derive(Debug, Clone)]
pub struct Cover {
    pub complex: WeightedComplex,
    group: DeckGroup,
    elements: Vec<GroupElement>,
    element_index: HashMap<GroupElement, usize>,
    base_vertices: usize,
    /// Base edge each cover edge lifts.
    pub edge_origin: Vec<usize>,
    /// Vertices retagged dirichlet because an edge leaves the truncation.
    pub rim: Vec<bool>,
    /// Graph form of the base (cotangent weights baked in for surfaces).
    pub base: WeightedComplex,
    pub voltage: VoltageAssignment,
}

impl Cover {
    pub fn num_vertices(&self) -> usize {
        self.complex.num_vertices()
    }

    pub fn projection(&self, i: usize) -> usize {
        i % self.base_vertices
    }

    pub fn element(&self, i: usize) -> &GroupElement {
        &self.elements[i / self.base_vertices]
    }

    pub fn group(&self) -> &DeckGroup {
        &self.group
    }

    /// Cover vertex `(v, g)` if it lies inside the truncation.
    pub fn vertex(&self, v: usize, g: &GroupElement) -> Option<usize> {
        self.element_index.get(g).map(|&s| s * self.base_vertices + v)
    }

    /// Deck transformation `(v, g) ↦ (v, γg)`; `None` when it leaves the truncation.
    pub fn deck_action(&self, gamma: &GroupElement, i: usize) -> Option<usize> {
        let g = self.group.mul(gamma, self.element(i));
        self.vertex(self.projection(i), &g)
    }

    /// Cover vertex reached from `(v, g)` along base edge `k`, if inside.
    pub fn lift_neighbor(&self, i: usize, k: usize) -> Option<usize> {
        let v = self.projection(i);
        let e = &self.base.edges()[k];
        let sigma = self.voltage.directed(&self.base, k, v);
        self.vertex(e.other(v), &self.group.mul(self.element(i), &sigma))
    }

    pub fn projections(&self) -> Vec<usize> {
        (0..self.num_vertices()).map(|i| self.projection(i)).collect()
    }

    /// `λ0` of the truncation (dirichlet rim, inherited tags).
    pub fn lambda0(&self, opts: &SolverOptions) -> Result<f64> {
        let op = assemble_unchecked(&self.complex)?;
        Ok(lowest_eigenpairs_with(&op, 1, opts)?.lambda0())
    }
}

/// Builds the derived complex over the word ball of the given radius.
///
/// A vertex is put on the dirichlet rim when one of its lifted edges leaves
/// the ball; edges leaving the ball are dropped.
pub fn derive_cover(spec: &CoverSpec) -> Result<Cover> {
    let base = spec.base.materialize()?;
    let n = base.num_vertices();
    let keep = vec![true; n];
    let ones = vec![1.0; base.edges().len()];
    let (_, count) = base.components(&keep, &ones);
    if count > 1 {
        return Err(Error::Disconnected { components: count });
    }
    let voltage = &spec.voltage;
    let group = voltage.group.clone();
    if spec.radius == 0 && !voltage.is_trivial() {
        return Err(Error::NoInterior);
    }
    let elements = group.ball(spec.radius);
    let element_index: HashMap<GroupElement, usize> =
        elements.iter().cloned().enumerate().map(|(i, g)| (g, i)).collect();
    let mut rim = vec![false; n * elements.len()];
    let mut edges = Vec::new();
    let mut edge_origin = Vec::new();
    for (s, g) in elements.iter().enumerate() {
        for (k, e) in base.edges().iter().enumerate() {
            let h = group.mul(g, &voltage.voltages[k]);
            match element_index.get(&h) {
                Some(&t) => {
                    edges.push(Edge {
                        u: s * n + e.u,
                        v: t * n + e.v,
                        conductance: e.conductance,
                    });
                    edge_origin.push(k);
                }
                None => rim[s * n + e.u] = true,
            }
            let h_rev = group.mul(g, &group.inv(&voltage.voltages[k]));
            if !element_index.contains_key(&h_rev) {
                rim[s * n + e.v] = true;
            }
        }
    }
    let vertices: Vec<Vertex> = (0..n * elements.len())
        .map(|i| {
            let b = &base.vertices()[i % n];
            Vertex {
                id: i,
                measure: b.measure,
                tag: if rim[i] { Tag::Dirichlet } else { b.tag },
            }
        })
        .collect();
    if vertices.iter().all(|v| v.tag.is_dirichlet()) {
        return Err(Error::NoInterior);
    }
    let complex = WeightedComplex::new(vertices, edges)?;
    Ok(Cover {
        complex,
        group,
        elements,
        element_index,
        base_vertices: n,
        edge_origin,
        rim,
        base,
        voltage: voltage.clone(),
    })
}

/// Pullback `(v, g) ↦ f(v)`.
pub fn lift_function(cover: &Cover, f: &[f64]) -> Result<Vec<f64>> {
    if f.len() != cover.base_vertices {
        return Err(Error::DimensionMismatch {
            expected: cover.base_vertices,
            got: f.len(),
        });
    }
    Ok((0..cover.num_vertices()).map(|i| f[cover.projection(i)]).collect())
}

pub const FLOQUET_GRID: usize = 64;
pub const FLOQUET_THETA_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FloquetResult {
    /// Minimum of the bottom band.
    pub lambda0: f64,
    /// Minimizer, each coordinate in `[0, 2π)`.
    pub theta: Vec<f64>,
    /// Smallest value seen on the grid.
    pub grid_minimum: f64,
    /// Largest bottom-band value seen on the grid.
    pub grid_maximum: f64,
    pub samples_per_dim: usize,
}

fn abelian_parts(voltage: &VoltageAssignment) -> Result<(usize, Vec<Vec<f64>>)> {
    let DeckGroup::FreeAbelian(d) = voltage.group else {
        return Err(Error::InvalidVoltage(format!(
            "Floquet reduction needs a free abelian group, got {}",
            voltage.group.kind()
        )));
    };
    let sigma = voltage
        .voltages
        .iter()
        .map(|g| match g {
            GroupElement::Abelian(x) => x.iter().map(|&c| c as f64).collect(),
            _ => unreachable!("abelian group holds integer vectors"),
        })
        .collect();
    Ok((d, sigma))
}

/// `M^{-1/2} H(θ) M^{-1/2}` over the free base vertices, where `H(θ)` is the
/// stiffness twisted by `e^{iθ·σ}` along each edge.
pub fn twisted_operator(
    base: &WeightedComplex,
    voltage: &VoltageAssignment,
    theta: &[f64],
) -> Result<DMatrix<Complex<f64>>> {
    let base = base.materialize()?;
    let (d, sigma) = abelian_parts(voltage)?;
    if theta.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: theta.len(),
        });
    }
    let mut index_of = vec![None; base.num_vertices()];
    let mut free = Vec::new();
    for v in base.vertices() {
        if !v.tag.is_dirichlet() {
            index_of[v.id] = Some(free.len());
            free.push(v.id);
        }
    }
    if free.is_empty() {
        return Err(Error::EmptyInterior);
    }
    let dim = free.len();
    let mut h = DMatrix::<Complex<f64>>::zeros(dim, dim);
    for (e, s) in base.edges().iter().zip(&sigma) {
        let phase: f64 = theta.iter().zip(s).map(|(t, x)| t * x).sum();
        let c = e.conductance;
        match (index_of[e.u], index_of[e.v]) {
            (Some(i), Some(j)) if i == j => {
                h[(i, i)] += Complex::new(c * (2.0 - 2.0 * phase.cos()), 0.0);
            }
            (Some(i), Some(j)) => {
                h[(i, i)] += Complex::new(c, 0.0);
                h[(j, j)] += Complex::new(c, 0.0);
                let z = Complex::from_polar(c, phase);
                h[(i, j)] -= z;
                h[(j, i)] -= z.conj();
            }
            (Some(i), None) | (None, Some(i)) => h[(i, i)] += Complex::new(c, 0.0),
            (None, None) => {}
        }
    }
    let defect = (&h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if defect > 1e-12 {
        return Err(Error::NonHermitian(defect));
    }
    let s: Vec<f64> = free.iter().map(|&v| 1.0 / base.vertices()[v].measure.sqrt()).collect();
    for i in 0..dim {
        for j in 0..dim {
            h[(i, j)] *= s[i] * s[j];
        }
    }
    Ok(h)
}

/// Eigenvalues of the twisted operator at `θ`, ascending.
pub fn floquet_band(base: &WeightedComplex, voltage: &VoltageAssignment, theta: &[f64]) -> Result<Vec<f64>> {
    let h = twisted_operator(base, voltage, theta)?;
    let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

fn bottom(base: &WeightedComplex, voltage: &VoltageAssignment, theta: &[f64]) -> Result<f64> {
    Ok(floquet_band(base, voltage, theta)?[0])
}

/// Minimum over `θ ∈ [0, 2π)^d` of the bottom Floquet band: a grid search
/// followed by coordinatewise golden-section refinement.
pub fn floquet_lambda0(base: &WeightedComplex, voltage: &VoltageAssignment, grid: usize) -> Result<FloquetResult> {
    let base = base.materialize()?;
    let (d, _) = abelian_parts(voltage)?;
    if grid == 0 {
        return Err(Error::InvalidConfig("Floquet grid needs at least one sample".into()));
    }
    let total = grid.checked_pow(d as u32).filter(|&t| t <= 1 << 22).ok_or_else(|| {
        Error::InvalidConfig(format!("{grid}^{d} Floquet samples is too many"))
    })?;
    let step = TAU / grid as f64;
    let point = |mut idx: usize| -> Vec<f64> {
        (0..d)
            .map(|_| {
                let t = (idx % grid) as f64 * step;
                idx /= grid;
                t
            })
            .collect()
    };
    let values: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|i| bottom(&base, voltage, &point(i)))
        .collect::<Result<_>>()?;
    let (best_idx, &grid_minimum) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is nonempty");
    let grid_maximum = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut theta = point(best_idx);
    let mut value = grid_minimum;
    if d > 0 {
        let mut refined = theta.clone();
        let mut refined_value = value;
        for _ in 0..3 {
            for c in 0..d {
                let centre = refined[c];
                let f = |t: f64| {
                    let mut th = refined.clone();
                    th[c] = t;
                    bottom(&base, voltage, &th)
                };
                let (t, v) = golden_section(f, centre - step, centre + step, FLOQUET_THETA_TOL)?;
                if v < refined_value {
                    refined[c] = t;
                    refined_value = v;
                }
            }
        }
        if refined_value < value - 1e-14 * (1.0 + value.abs()) {
            theta = refined;
            value = refined_value;
        }
    }
    for t in &mut theta {
        *t = t.rem_euclid(TAU);
        if TAU - *t < FLOQUET_THETA_TOL {
            *t = 0.0;
        }
    }
    Ok(FloquetResult {
        lambda0: value,
        theta,
        grid_minimum,
        grid_maximum,
        samples_per_dim: grid,
    })
}

fn golden_section(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::FiniteGroup;
    use crate::laplacian::assemble_laplacian;

    fn loop_base() -> WeightedComplex {
        WeightedComplex::from_graph(&[Tag::Neumann], &[(0, 0, 1.0)]).unwrap()
    }

    fn z1(base: &WeightedComplex, v: &[i64]) -> VoltageAssignment {
        VoltageAssignment::new(
            DeckGroup::FreeAbelian(1),
            base,
            v.iter().map(|&x| GroupElement::Abelian(vec![x])).collect(),
        )
        .unwrap()
    }

    #[test]
    fn loop_cover_is_a_path() {
        let base = loop_base();
        let cover = derive_cover(&CoverSpec::new(base.clone(), z1(&base, &[1]), 2).unwrap()).unwrap();
        assert_eq!(cover.num_vertices(), 5);
        assert_eq!(cover.complex.edges().len(), 4);
        let dirichlet: Vec<i64> = (0..5)
            .filter(|&i| cover.complex.tag(i).is_dirichlet())
            .map(|i| match cover.element(i) {
                GroupElement::Abelian(x) => x[0],
                _ => unreachable!(),
            })
            .collect();
        let mut d = dirichlet;
        d.sort();
        assert_eq!(d, vec![-2, 2]);
    }

    fn triangle_cover(ones: &[bool]) -> (Cover, GroupElement) {
        let base = WeightedComplex::from_graph(&[Tag::Neumann; 3], &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap();
        let group = DeckGroup::Finite(FiniteGroup::cyclic(3));
        let a = group.parse_word(&WordRepr::Letters("a".into())).unwrap();
        let v = ones.iter().map(|&o| if o { a.clone() } else { group.identity() }).collect();
        let v = VoltageAssignment::new(group, &base, v).unwrap();
        (derive_cover(&CoverSpec::new(base, v, 5).unwrap()).unwrap(), a)
    }

    #[test]
    fn cyclic_cover_with_unit_holonomy_is_c9() {
        let (cover, a) = triangle_cover(&[true, false, false]);
        assert_eq!(cover.num_vertices(), 9);
        assert_eq!(cover.complex.edges().len(), 9);
        assert!(cover.rim.iter().all(|&r| !r));
        assert!(cover.complex.adjacency().iter().all(|a| a.len() == 2));
        assert_eq!(assemble_laplacian(&cover.complex).unwrap().dim(), 9);
        for i in 0..9 {
            let j = cover.deck_action(&a, i).unwrap();
            assert_eq!(cover.projection(j), cover.projection(i));
            assert_ne!(i, j);
        }
    }

    #[test]
    fn cyclic_cover_with_all_unit_voltages_splits() {
        // holonomy a^3 = 1 around the triangle
        let (cover, _) = triangle_cover(&[true, true, true]);
        assert_eq!(cover.complex.edges().len(), 9);
        assert_eq!(
            assemble_laplacian(&cover.complex).unwrap_err(),
            Error::Disconnected { components: 3 }
        );
    }

    #[test]
    fn trivial_voltage_radius_zero_is_base() {
        let base = WeightedComplex::from_graph(&[Tag::Neumann; 3], &[(0, 1, 1.0), (1, 2, 2.0)]).unwrap();
        let cover = derive_cover(&CoverSpec::new(base.clone(), z1(&base, &[0, 0]), 0).unwrap()).unwrap();
        assert_eq!(cover.complex, base);
        let copies = derive_cover(&CoverSpec::new(base.clone(), z1(&base, &[0, 0]), 1).unwrap()).unwrap();
        assert_eq!(copies.num_vertices(), 9);
        assert!(assemble_laplacian(&copies.complex).is_err());
    }

    #[test]
    fn radius_zero_nontrivial_is_rejected() {
        let base = loop_base();
        let err = derive_cover(&CoverSpec::new(base.clone(), z1(&base, &[1]), 0).unwrap()).unwrap_err();
        assert_eq!(err, Error::NoInterior);
    }

    #[test]
    fn voltage_json_round_trip_and_orientation() {
        let base = WeightedComplex::from_graph(&[Tag::Neumann; 2], &[(0, 1, 1.0), (1, 1, 1.0)]).unwrap();
        let s = r#"{"group":{"kind":"free","rank":2},"voltages":[{"u":1,"v":0,"word":"ab"},{"u":1,"v":1,"word":"b"}]}"#;
        let v = VoltageAssignment::from_json(&base, s).unwrap();
        assert_eq!(v.voltages()[0], GroupElement::Word(vec![-2, -1]));
        let again = VoltageAssignment::from_json(&base, &v.to_json(&base)).unwrap();
        assert_eq!(again, v);
        let bad = r#"{"group":{"kind":"free","rank":2},"voltages":[{"u":0,"v":0,"word":"a"},{"u":1,"v":1,"word":"b"}]}"#;
        assert!(VoltageAssignment::from_json(&base, bad).is_err());
        let z = r#"{"group":{"kind":"free_abelian","rank":2},"voltages":[{"u":0,"v":1,"word":[1,0]},{"u":1,"v":1,"word":[0,-1]}]}"#;
        let v = VoltageAssignment::from_json(&base, z).unwrap();
        assert_eq!(v.voltages()[1], GroupElement::Abelian(vec![0, -1]));
    }

    #[test]
    fn floquet_single_loop() {
        let base = loop_base();
        let v = z1(&base, &[1]);
        for t in [0.0, 0.7, 2.0, 3.1] {
            let b = floquet_band(&base, &v, &[t]).unwrap();
            assert!((b[0] - (2.0 - 2.0 * f64::cos(t))).abs() < 1e-14);
        }
        let r = floquet_lambda0(&base, &v, FLOQUET_GRID).unwrap();
        assert!(r.lambda0.abs() < 1e-14);
        assert_eq!(r.theta, vec![0.0]);
        assert!((r.grid_maximum - 4.0).abs() < 1e-12);
    }

    #[test]
    fn floquet_wrong_group_rejected() {
        let base = loop_base();
        let v = VoltageAssignment::trivial(DeckGroup::Free(1), &base);
        assert!(matches!(floquet_lambda0(&base, &v, 8), Err(Error::InvalidVoltage(_))));
    }
}
