//! Weighted complexes: the discrete stand-in for a manifold with a metric.
//!
//! A complex is a list of vertices (each with a positive measure and a
//! boundary tag) and a list of edges with positive conductances. When
//! triangles are present the conductances are ignored and edge weights are
//! recomputed intrinsically from edge lengths with the cotangent formula;
//! vertex measures then become lumped areas.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Cotangent weights whose magnitude is below this are treated as exactly
/// zero (right angles on both sides of an edge).
pub const COTANGENT_ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    Interior,
    Neumann,
    Dirichlet,
}

impl Tag {
    pub fn is_dirichlet(self) -> bool {
        self == Tag::Dirichlet
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vertex {
    pub id: usize,
    pub measure: f64,
    pub tag: Tag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub conductance: f64,
}

impl Edge {
    pub fn is_loop(&self) -> bool {
        self.u == self.v
    }

    /// The endpoint opposite to `x`.
    pub fn other(&self, x: usize) -> usize {
        if self.u == x {
            self.v
        } else {
            self.u
        }
    }
}

/// Ordered pair `(min, max)` used as the key of the edge-length map.
pub fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Vertices, edges, and optionally a triangulation with intrinsic edge lengths.
///
/// Self-loops are accepted (they carry voltages in covering bases) and
/// contribute nothing to the Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedComplex {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    triangles: Option<Vec<[usize; 3]>>,
    edge_lengths: Option<BTreeMap<(usize, usize), f64>>,
}

impl WeightedComplex {
    /// Graph complex from raw parts. Fails if any structural invariant is violated.
    pub fn new(vertices: Vec<Vertex>, edges: Vec<Edge>) -> Result<Self> {
        let c = WeightedComplex {
            vertices,
            edges,
            triangles: None,
            edge_lengths: None,
        };
        c.validate()?;
        Ok(c)
    }

    /// Triangulated surface. Every triangle edge must appear exactly once in
    /// `edges` and have an entry in `edge_lengths`.
    pub fn with_triangles(
        vertices: Vec<Vertex>,
        edges: Vec<Edge>,
        triangles: Vec<[usize; 3]>,
        edge_lengths: BTreeMap<(usize, usize), f64>,
    ) -> Result<Self> {
        let c = WeightedComplex {
            vertices,
            edges,
            triangles: Some(triangles),
            edge_lengths: Some(edge_lengths),
        };
        c.validate()?;
        Ok(c)
    }

    /// Closed surface from triangles and an intrinsic length per edge.
    pub fn from_intrinsic(n: usize, triangles: Vec<[usize; 3]>, length: impl Fn(usize, usize) -> f64) -> Result<WeightedComplex> {
        let mut lengths = BTreeMap::new();
        for t in &triangles {
            for i in 0..3 {
                let (a, b) = (t[i], t[(i + 1) % 3]);
                lengths.insert(edge_key(a, b), length(a, b));
            }
        }
        let edges = lengths
            .keys()
            .map(|&(u, v)| Edge { u, v, conductance: 1.0 })
            .collect();
        let vertices = (0..n)
            .map(|id| Vertex {
                id,
                measure: 1.0,
                tag: Tag::Interior,
            })
            .collect();
        WeightedComplex::with_triangles(vertices, edges, triangles, lengths)
    }

    /// Convenience constructor: unit measures, given tags and edges with conductances.
    pub fn from_graph(tags: &[Tag], edges: &[(usize, usize, f64)]) -> Result<Self> {
        let vertices = tags
            .iter()
            .enumerate()
            .map(|(id, &tag)| Vertex {
                id,
                measure: 1.0,
                tag,
            })
            .collect();
        let edges = edges
            .iter()
            .map(|&(u, v, conductance)| Edge { u, v, conductance })
            .collect();
        Self::new(vertices, edges)
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn triangles(&self) -> Option<&[[usize; 3]]> {
        self.triangles.as_deref()
    }

    pub fn edge_lengths(&self) -> Option<&BTreeMap<(usize, usize), f64>> {
        self.edge_lengths.as_ref()
    }

    pub fn is_surface(&self) -> bool {
        self.triangles.is_some()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn tag(&self, v: usize) -> Tag {
        self.vertices[v].tag
    }

    pub fn dirichlet_count(&self) -> usize {
        self.vertices.iter().filter(|v| v.tag.is_dirichlet()).count()
    }

    fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        for (i, v) in self.vertices.iter().enumerate() {
            if v.id != i {
                return Err(Error::InvalidComplex(format!(
                    "vertex ids must be dense and in order: position {i} has id {}",
                    v.id
                )));
            }
            if !(v.measure.is_finite() && v.measure > 0.0) {
                return Err(Error::InvalidComplex(format!(
                    "vertex {i} has non-positive measure {}",
                    v.measure
                )));
            }
        }
        for (k, e) in self.edges.iter().enumerate() {
            if e.u >= n || e.v >= n {
                return Err(Error::InvalidComplex(format!(
                    "edge {k} ({}, {}) references a missing vertex",
                    e.u, e.v
                )));
            }
            if !(e.conductance.is_finite() && e.conductance > 0.0) {
                return Err(Error::InvalidComplex(format!(
                    "edge {k} has non-positive conductance {}",
                    e.conductance
                )));
            }
        }
        match (&self.triangles, &self.edge_lengths) {
            (None, None) => Ok(()),
            (Some(tris), Some(lengths)) => self.validate_surface(tris, lengths),
            _ => Err(Error::InvalidComplex(
                "edge_lengths must be present exactly when triangles are".into(),
            )),
        }
    }

    fn validate_surface(
        &self,
        tris: &[[usize; 3]],
        lengths: &BTreeMap<(usize, usize), f64>,
    ) -> Result<()> {
        let n = self.vertices.len();
        let mut tri_edges = BTreeSet::new();
        for t in tris {
            if t.iter().any(|&x| x >= n) || t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::InvalidComplex(format!("bad triangle {t:?}")));
            }
            let mut ls = [0.0; 3];
            for (slot, (a, b)) in [(t[1], t[2]), (t[2], t[0]), (t[0], t[1])].into_iter().enumerate() {
                let key = edge_key(a, b);
                let l = *lengths.get(&key).ok_or_else(|| {
                    Error::InvalidComplex(format!("missing length for edge {}-{}", key.0, key.1))
                })?;
                ls[slot] = l;
                tri_edges.insert(key);
            }
            if !(ls[0] < ls[1] + ls[2] && ls[1] < ls[0] + ls[2] && ls[2] < ls[0] + ls[1]) {
                return Err(Error::InvalidComplex(format!(
                    "triangle {t:?} violates the strict triangle inequality ({ls:?})"
                )));
            }
        }
        for (&(a, b), &l) in lengths {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidComplex(format!("edge {a}-{b} has length {l}")));
            }
            if !tri_edges.contains(&(a, b)) {
                return Err(Error::InvalidComplex(format!(
                    "edge length {a}-{b} belongs to no triangle"
                )));
            }
        }
        let mut seen = HashSet::new();
        for e in &self.edges {
            let key = edge_key(e.u, e.v);
            if !tri_edges.contains(&key) {
                return Err(Error::InvalidComplex(format!(
                    "edge {}-{} belongs to no triangle",
                    e.u, e.v
                )));
            }
            if !seen.insert(key) {
                return Err(Error::InvalidComplex(format!(
                    "duplicate edge {}-{} on a triangulated surface",
                    e.u, e.v
                )));
            }
        }
        if seen.len() != tri_edges.len() {
            return Err(Error::InvalidComplex(
                "every triangle edge must be listed in edges".into(),
            ));
        }
        Ok(())
    }

    /// Effective conductance of every edge, in edge order.
    ///
    /// On graph complexes these are the stored conductances. On surfaces each
    /// edge gets half the sum of the cotangents of the angles opposite to it.
    /// Loops always get weight 0 in the operator but keep their stored value here.
    pub fn edge_weights(&self) -> Result<Vec<f64>> {
        let Some(tris) = &self.triangles else {
            return Ok(self.edges.iter().map(|e| e.conductance).collect());
        };
        let lengths = self.edge_lengths.as_ref().expect("validated");
        let mut cot: BTreeMap<(usize, usize), (f64, [usize; 3])> = BTreeMap::new();
        for t in tris {
            let area = triangle_area(t, lengths);
            for i in 0..3 {
                let (a, b, opp) = (t[(i + 1) % 3], t[(i + 2) % 3], t[i]);
                let la = lengths[&edge_key(opp, a)];
                let lb = lengths[&edge_key(opp, b)];
                let lc = lengths[&edge_key(a, b)];
                // angle at `opp`, facing edge (a, b)
                let c = (la * la + lb * lb - lc * lc) / (4.0 * area);
                let entry = cot.entry(edge_key(a, b)).or_insert((0.0, *t));
                entry.0 += 0.5 * c;
                if c < 0.0 {
                    entry.1 = *t;
                }
            }
        }
        self.edges
            .iter()
            .map(|e| {
                let key = edge_key(e.u, e.v);
                let (w, t) = cot[&key];
                if w.abs() <= COTANGENT_ZERO_TOL {
                    Ok(0.0)
                } else if w < 0.0 {
                    Err(Error::NonPositiveCotangent {
                        edge: key,
                        triangle: t,
                        weight: w,
                    })
                } else {
                    Ok(w)
                }
            })
            .collect()
    }

    /// Effective vertex measures: stored measures, or one third of the
    /// adjacent triangle areas on surfaces.
    pub fn vertex_measures(&self) -> Vec<f64> {
        let Some(tris) = &self.triangles else {
            return self.vertices.iter().map(|v| v.measure).collect();
        };
        let lengths = self.edge_lengths.as_ref().expect("validated");
        let mut m = vec![0.0; self.vertices.len()];
        for t in tris {
            let a = triangle_area(t, lengths) / 3.0;
            for &x in t {
                m[x] += a;
            }
        }
        m
    }

    /// Graph copy with effective weights and measures baked in and the
    /// triangulation dropped.
    pub fn materialize(&self) -> Result<WeightedComplex> {
        if !self.is_surface() {
            return Ok(self.clone());
        }
        let w = self.edge_weights()?;
        let m = self.vertex_measures();
        let vertices = self
            .vertices
            .iter()
            .zip(&m)
            .map(|(v, &measure)| Vertex {
                id: v.id,
                measure: if measure > 0.0 { measure } else { v.measure },
                tag: v.tag,
            })
            .collect();
        let edges = self
            .edges
            .iter()
            .zip(&w)
            .filter(|(_, &w)| w > 0.0)
            .map(|(e, &conductance)| Edge {
                u: e.u,
                v: e.v,
                conductance,
            })
            .collect();
        WeightedComplex::new(vertices, edges)
    }

    /// Same complex with new tags. Structure is unchanged.
    pub fn with_tags(&self, tags: &[Tag]) -> Result<WeightedComplex> {
        if tags.len() != self.vertices.len() {
            return Err(Error::DimensionMismatch {
                expected: self.vertices.len(),
                got: tags.len(),
            });
        }
        let mut c = self.clone();
        for (v, &t) in c.vertices.iter_mut().zip(tags) {
            v.tag = t;
        }
        Ok(c)
    }

    pub(crate) fn replace_parts(
        &self,
        vertices: Vec<Vertex>,
        edges: Vec<Edge>,
        edge_lengths: Option<BTreeMap<(usize, usize), f64>>,
    ) -> Result<WeightedComplex> {
        let c = WeightedComplex {
            vertices,
            edges,
            triangles: self.triangles.clone(),
            edge_lengths,
        };
        c.validate()?;
        Ok(c)
    }

    /// Neighbor lists `(neighbor, edge index)` including loops once.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for (k, e) in self.edges.iter().enumerate() {
            adj[e.u].push((e.v, k));
            if !e.is_loop() {
                adj[e.v].push((e.u, k));
            }
        }
        adj
    }

    /// Connected components of the subgraph induced by `keep`, using only
    /// edges whose weight is positive. Returns a component id per kept vertex
    /// (`usize::MAX` elsewhere) and the component count.
    pub(crate) fn components(&self, keep: &[bool], weights: &[f64]) -> (Vec<usize>, usize) {
        let n = self.vertices.len();
        let adj = self.adjacency();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        for s in 0..n {
            if !keep[s] || comp[s] != usize::MAX {
                continue;
            }
            comp[s] = count;
            let mut stack = vec![s];
            while let Some(x) = stack.pop() {
                for &(y, k) in &adj[x] {
                    if keep[y] && comp[y] == usize::MAX && weights[k] > 0.0 {
                        comp[y] = count;
                        stack.push(y);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }

    /// Vertex-relabeled copy: vertex `v` becomes `perm[v]`. Edge order is kept.
    pub fn relabel(&self, perm: &[usize]) -> Result<WeightedComplex> {
        let n = self.vertices.len();
        if perm.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: perm.len(),
            });
        }
        let mut vertices = vec![None; n];
        for v in &self.vertices {
            vertices[perm[v.id]] = Some(Vertex {
                id: perm[v.id],
                measure: v.measure,
                tag: v.tag,
            });
        }
        let vertices = vertices
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::InvalidComplex("relabeling is not a permutation".into()))?;
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                u: perm[e.u],
                v: perm[e.v],
                conductance: e.conductance,
            })
            .collect();
        let triangles = self
            .triangles
            .as_ref()
            .map(|ts| ts.iter().map(|t| [perm[t[0]], perm[t[1]], perm[t[2]]]).collect());
        let edge_lengths = self.edge_lengths.as_ref().map(|m| {
            m.iter()
                .map(|(&(a, b), &l)| (edge_key(perm[a], perm[b]), l))
                .collect()
        });
        let c = WeightedComplex {
            vertices,
            edges,
            triangles,
            edge_lengths,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ComplexDoc = serde_json::from_str(s)?;
        doc.into_complex()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ComplexDocRef::from(self)).expect("serializable")
    }

    pub fn read(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }
}

fn triangle_area(t: &[usize; 3], lengths: &BTreeMap<(usize, usize), f64>) -> f64 {
    let mut l = [
        lengths[&edge_key(t[0], t[1])],
        lengths[&edge_key(t[1], t[2])],
        lengths[&edge_key(t[2], t[0])],
    ];
    l.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let (a, b, c) = (l[0], l[1], l[2]);
    // Kahan's stable Heron formula, a >= b >= c
    0.25 * ((a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))).sqrt()
}

/// Nested vertex subsets `M_0 ⊂ M_1 ⊂ …`; at stage `j` every vertex outside
/// `M_j` is treated as dirichlet.
#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustionSpec {
    stages: Vec<Vec<usize>>,
}

impl ExhaustionSpec {
    pub fn new(num_vertices: usize, stages: Vec<Vec<usize>>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidExhaustion("no stages".into()));
        }
        let mut prev: Option<BTreeSet<usize>> = None;
        let mut sets = Vec::with_capacity(stages.len());
        for (j, s) in stages.iter().enumerate() {
            let set: BTreeSet<usize> = s.iter().copied().collect();
            if set.len() != s.len() {
                return Err(Error::InvalidExhaustion(format!("stage {j} repeats a vertex")));
            }
            if let Some(&bad) = set.iter().find(|&&v| v >= num_vertices) {
                return Err(Error::InvalidExhaustion(format!(
                    "stage {j} references missing vertex {bad}"
                )));
            }
            if let Some(p) = &prev {
                if !(p.is_subset(&set) && p.len() < set.len()) {
                    return Err(Error::InvalidExhaustion(format!(
                        "stage {j} does not strictly contain stage {}",
                        j - 1
                    )));
                }
            }
            sets.push(set.iter().copied().collect());
            prev = Some(set);
        }
        if prev.map(|p| p.len()) != Some(num_vertices) {
            return Err(Error::InvalidExhaustion(
                "last stage must be the full vertex set".into(),
            ));
        }
        Ok(ExhaustionSpec { stages: sets })
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn stage(&self, j: usize) -> &[usize] {
        &self.stages[j]
    }
}

/// Stage `j` of an exhaustion: vertices outside `M_j` become dirichlet, edges
/// with both endpoints outside are dropped, cut edges are kept.
///
/// Surfaces are materialized first (cotangent weights become conductances).
pub fn restrict(
    complex: &WeightedComplex,
    exhaustion: &ExhaustionSpec,
    j: usize,
) -> Result<WeightedComplex> {
    if j >= exhaustion.len() {
        return Err(Error::InvalidExhaustion(format!(
            "stage {j} out of range ({} stages)",
            exhaustion.len()
        )));
    }
    let base = complex.materialize()?;
    let mut inside = vec![false; base.num_vertices()];
    for &v in exhaustion.stage(j) {
        inside[v] = true;
    }
    let vertices: Vec<Vertex> = base
        .vertices
        .iter()
        .map(|v| Vertex {
            id: v.id,
            measure: v.measure,
            tag: if inside[v.id] { v.tag } else { Tag::Dirichlet },
        })
        .collect();
    if vertices.iter().all(|v| v.tag.is_dirichlet()) {
        return Err(Error::EmptyInterior);
    }
    let edges = base
        .edges
        .iter()
        .filter(|e| inside[e.u] || inside[e.v])
        .cloned()
        .collect();
    WeightedComplex::new(vertices, edges)
}

// ---------------------------------------------------------------------------
// JSON document

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ComplexDoc {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    #[serde(default)]
    triangles: Option<Vec<[usize; 3]>>,
    #[serde(default)]
    edge_lengths: Option<EdgeLengths>,
}

impl ComplexDoc {
    fn into_complex(self) -> Result<WeightedComplex> {
        let c = WeightedComplex {
            vertices: self.vertices,
            edges: self.edges,
            triangles: self.triangles,
            edge_lengths: self.edge_lengths.map(|l| l.0),
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Serialize)]
struct ComplexDocRef<'a> {
    vertices: &'a [Vertex],
    edges: &'a [Edge],
    #[serde(skip_serializing_if = "Option::is_none")]
    triangles: Option<&'a [[usize; 3]]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    edge_lengths: Option<EdgeLengthsRef<'a>>,
}

impl<'a> From<&'a WeightedComplex> for ComplexDocRef<'a> {
    fn from(c: &'a WeightedComplex) -> Self {
        ComplexDocRef {
            vertices: &c.vertices,
            edges: &c.edges,
            triangles: c.triangles.as_deref(),
            edge_lengths: c.edge_lengths.as_ref().map(EdgeLengthsRef),
        }
    }
}

struct EdgeLengthsRef<'a>(&'a BTreeMap<(usize, usize), f64>);

impl Serialize for EdgeLengthsRef<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (&(a, b), l) in self.0 {
            map.serialize_entry(&format!("{a}-{b}"), l)?;
        }
        map.end()
    }
}

struct EdgeLengths(BTreeMap<(usize, usize), f64>);

impl<'de> Deserialize<'de> for EdgeLengths {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = EdgeLengths;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a map from \"u-v\" to positive lengths")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut m: A) -> std::result::Result<EdgeLengths, A::Error> {
                let mut out = BTreeMap::new();
                while let Some((k, l)) = m.next_entry::<String, f64>()? {
                    let (a, b) = k
                        .split_once('-')
                        .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
                        .ok_or_else(|| de::Error::custom(format!("bad edge key {k:?}")))?;
                    if out.insert(edge_key(a, b), l).is_some() {
                        return Err(de::Error::custom(format!("duplicate edge key {k:?}")));
                    }
                }
                Ok(EdgeLengths(out))
            }
        }
        d.deserialize_map(V)
    }
}
