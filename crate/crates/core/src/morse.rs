//! Discrete Morse analysis: critical vertices, Banchoff indices and
//! steepest-ascent basins.

use serde::Serialize;

use crate::complex::WeightedComplex;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    Regular,
    LocalMax,
    LocalMin,
    /// Multiplicity: one less than the number of descending sectors.
    Saddle(usize),
    /// Some neighbor has an equal value.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalReport {
    pub kinds: Vec<CriticalKind>,
    /// Banchoff index `1 − alternations/2`, only where the vertex link is a closed cycle.
    pub index: Vec<Option<i64>>,
    /// Non-loop edges whose endpoint values are equal within the tolerance.
    pub degenerate_ties: Vec<(usize, usize)>,
}

impl CriticalReport {
    /// Index sum when every vertex has a Banchoff index.
    pub fn index_sum(&self) -> Option<i64> {
        self.index.iter().copied().sum()
    }

    pub fn count(&self, kind: CriticalKind) -> usize {
        self.kinds.iter().filter(|&&k| k == kind).count()
    }

    pub fn has_ties(&self) -> bool {
        !self.degenerate_ties.is_empty()
    }

    /// Vertices whose link pattern is degenerate: a tie, or a saddle of multiplicity ≥ 2.
    pub fn degenerate_links(&self) -> Vec<usize> {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| matches!(k, CriticalKind::Degenerate | CriticalKind::Saddle(2..)))
            .map(|(v, _)| v)
            .collect()
    }
}

/// Classifies every vertex, reporting ties by exact equality.
pub fn classify_critical(complex: &WeightedComplex, f: &[f64]) -> Result<CriticalReport> {
    classify_critical_with_tol(complex, f, 0.0)
}

/// As [`classify_critical`], with `|f(u) − f(v)| ≤ tol` counted as a tie.
///
/// On triangulated surfaces the link of a vertex is its cyclic ring of
/// neighbors and the class follows the sign alternations around it. On plain
/// graphs the link is the subgraph induced on the neighbors; a mixed vertex
/// whose lower link has `k ≥ 2` components is a saddle of multiplicity `k − 1`.
pub fn classify_critical_with_tol(complex: &WeightedComplex, f: &[f64], tol: f64) -> Result<CriticalReport> {
    let n = complex.num_vertices();
    if f.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: f.len() });
    }
    let tie = |a: usize, b: usize| (f[a] - f[b]).abs() <= tol;
    let degenerate_ties: Vec<(usize, usize)> = complex
        .edges()
        .iter()
        .filter(|e| !e.is_loop() && tie(e.u, e.v))
        .map(|e| (e.u, e.v))
        .collect();
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in complex.edges().iter().filter(|e| !e.is_loop()) {
        neighbors[e.u].push(e.v);
        neighbors[e.v].push(e.u);
    }
    for nb in &mut neighbors {
        nb.sort_unstable();
        nb.dedup();
    }
    let rings = complex.triangles().map(|t| vertex_rings(n, t));
    let mut kinds = Vec::with_capacity(n);
    let mut index = Vec::with_capacity(n);
    for v in 0..n {
        if neighbors[v].iter().any(|&w| tie(v, w)) {
            kinds.push(CriticalKind::Degenerate);
            index.push(None);
            continue;
        }
        let above = |w: usize| f[w] > f[v];
        match rings.as_ref().and_then(|r| r[v].as_ref()) {
            Some(ring) => {
                let alternations = (0..ring.len())
                    .filter(|&i| above(ring[i]) != above(ring[(i + 1) % ring.len()]))
                    .count();
                let kind = match alternations {
                    0 if above(ring[0]) => CriticalKind::LocalMin,
                    0 => CriticalKind::LocalMax,
                    2 => CriticalKind::Regular,
                    a => CriticalKind::Saddle(a / 2 - 1),
                };
                kinds.push(kind);
                index.push(Some(1 - (alternations / 2) as i64));
            }
            None => {
                kinds.push(graph_kind(&neighbors, v, f));
                index.push(None);
            }
        }
    }
    Ok(CriticalReport {
        kinds,
        index,
        degenerate_ties,
    })
}

fn graph_kind(neighbors: &[Vec<usize>], v: usize, f: &[f64]) -> CriticalKind {
    let nb = &neighbors[v];
    let lower: Vec<usize> = nb.iter().copied().filter(|&w| f[w] < f[v]).collect();
    if lower.len() == nb.len() {
        return CriticalKind::LocalMax;
    }
    if lower.is_empty() {
        return CriticalKind::LocalMin;
    }
    // components of the lower link, linked through shared edges
    let mut comp: Vec<usize> = (0..lower.len()).collect();
    fn find(c: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while c[r] != r {
            r = c[r];
        }
        c[x] = r;
        r
    }
    for i in 0..lower.len() {
        for j in i + 1..lower.len() {
            if neighbors[lower[i]].binary_search(&lower[j]).is_ok() {
                let (a, b) = (find(&mut comp, i), find(&mut comp, j));
                comp[a] = b;
            }
        }
    }
    let k = (0..lower.len()).filter(|&i| find(&mut comp, i) == i).count();
    if k >= 2 {
        CriticalKind::Saddle(k - 1)
    } else {
        CriticalKind::Regular
    }
}

/// Cyclic neighbor ring of each vertex whose incident triangles close up
/// into a single cycle; `None` for boundary or non-manifold vertices.
fn vertex_rings(n: usize, triangles: &[[usize; 3]]) -> Vec<Option<Vec<usize>>> {
    let mut opposite: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for t in triangles {
        for i in 0..3 {
            opposite[t[i]].push((t[(i + 1) % 3], t[(i + 2) % 3]));
        }
    }
    opposite
        .into_iter()
        .map(|mut segs| {
            if segs.is_empty() {
                return None;
            }
            let (start, mut cur) = segs.swap_remove(0);
            let mut ring = vec![start];
            while cur != start {
                ring.push(cur);
                let pos = segs.iter().position(|&(a, b)| a == cur || b == cur)?;
                let (a, b) = segs.swap_remove(pos);
                cur = if a == cur { b } else { a };
            }
            segs.is_empty().then_some(ring)
        })
        .collect()
}

/// Steepest-ascent forest of a tie-free function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasinDecomposition {
    /// `(parent vertex, edge index)`; `None` at local maxima.
    pub parent: Vec<Option<(usize, usize)>>,
    pub basin: Vec<usize>,
    /// Local maximum of each basin, ascending; basin ids follow this order.
    pub roots: Vec<usize>,
    /// Edge indices joining distinct basins.
    pub ridge_edges: Vec<usize>,
}

impl BasinDecomposition {
    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn members(&self, b: usize) -> Vec<usize> {
        (0..self.basin.len()).filter(|&v| self.basin[v] == b).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.roots.len()];
        for &b in &self.basin {
            s[b] += 1;
        }
        s
    }
}

/// Points each non-maximal vertex at its largest neighbor. Rejects the first
/// edge (by index) with equal endpoint values.
pub fn ascend_basins(complex: &WeightedComplex, f: &[f64]) -> Result<BasinDecomposition> {
    let n = complex.num_vertices();
    if f.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: f.len() });
    }
    if let Some(e) = complex.edges().iter().find(|e| !e.is_loop() && f[e.u] == f[e.v]) {
        return Err(Error::Tie(e.u, e.v));
    }
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    for (k, e) in complex.edges().iter().enumerate() {
        if e.is_loop() {
            continue;
        }
        for (a, b) in [(e.u, e.v), (e.v, e.u)] {
            if f[b] > f[a] && parent[a].is_none_or(|(p, _)| f[b] > f[p]) {
                parent[a] = Some((b, k));
            }
        }
    }
    let roots: Vec<usize> = (0..n).filter(|&v| parent[v].is_none()).collect();
    let mut root_id = vec![usize::MAX; n];
    for (i, &r) in roots.iter().enumerate() {
        root_id[r] = i;
    }
    let mut basin = vec![usize::MAX; n];
    for v in 0..n {
        let mut path = vec![v];
        let mut x = v;
        while basin[x] == usize::MAX {
            match parent[x] {
                Some((p, _)) => {
                    x = p;
                    path.push(x);
                }
                None => break,
            }
        }
        let b = if basin[x] != usize::MAX { basin[x] } else { root_id[x] };
        for y in path {
            basin[y] = b;
        }
    }
    let ridge_edges = complex
        .edges()
        .iter()
        .enumerate()
        .filter(|(_, e)| basin[e.u] != basin[e.v])
        .map(|(k, _)| k)
        .collect();
    Ok(BasinDecomposition {
        parent,
        basin,
        roots,
        ridge_edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::Tag;

    fn path(n: usize) -> WeightedComplex {
        let e: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        WeightedComplex::from_graph(&vec![Tag::Neumann; n], &e).unwrap()
    }

    #[test]
    fn p3_peak() {
        let r = classify_critical(&path(3), &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(
            r.kinds,
            vec![CriticalKind::LocalMin, CriticalKind::LocalMax, CriticalKind::LocalMin]
        );
        assert!(!r.has_ties());
        assert_eq!(r.count(CriticalKind::Saddle(0)), 0);
    }

    #[test]
    fn constant_is_fully_degenerate() {
        let r = classify_critical(&path(4), &[2.0; 4]).unwrap();
        assert_eq!(r.degenerate_ties.len(), 3);
        assert!(r.kinds.iter().all(|&k| k == CriticalKind::Degenerate));
        assert_eq!(r.degenerate_links(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn tolerance_ties() {
        let f = [0.0, 1.0, 1.0 + 1e-13];
        assert!(!classify_critical(&path(3), &f).unwrap().has_ties());
        assert!(classify_critical_with_tol(&path(3), &f, 1e-12).unwrap().has_ties());
    }

    #[test]
    fn star_center_is_graph_saddle() {
        let g = WeightedComplex::from_graph(&[Tag::Neumann; 4], &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]).unwrap();
        let r = classify_critical(&g, &[1.0, 0.0, 0.5, 2.0]).unwrap();
        assert_eq!(r.kinds[0], CriticalKind::Saddle(1));
        assert_eq!(r.index[0], None);
    }

    #[test]
    fn p5_basins() {
        let b = ascend_basins(&path(5), &[5.0, 1.0, 3.0, 2.0, 4.0]).unwrap();
        assert_eq!(b.roots, vec![0, 2, 4]);
        assert_eq!(b.basin, vec![0, 0, 1, 2, 2]);
        assert_eq!(b.members(2), vec![3, 4]);
        assert_eq!(b.ridge_edges, vec![1, 2]);
        assert_eq!(b.parent[1], Some((0, 0)));
        assert_eq!(b.parent[3], Some((4, 3)));
    }

    #[test]
    fn single_max_single_basin() {
        let b = ascend_basins(&path(5), &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(b.len(), 1);
        assert!(b.basin.iter().all(|&x| x == 0));
        assert!(b.ridge_edges.is_empty());
    }

    #[test]
    fn ties_rejected() {
        assert_eq!(
            ascend_basins(&path(3), &[1.0, 2.0, 2.0]).unwrap_err(),
            Error::Tie(1, 2)
        );
    }
}
