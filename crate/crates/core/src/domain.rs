//! Fundamental domains in truncated covers: greedy construction from ascent
//! basins, Neumann evaluation, flux defect, local search and superlevel sets.

use std::collections::VecDeque;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::Serialize;

use crate::complex::{Edge, Vertex, WeightedComplex};
use crate::covering::Cover;
use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::laplacian::assemble_unchecked;
use crate::morse::ascend_basins;
use crate::rng::item_rng;
use crate::spectral::{lowest_eigenpairs, DEFAULT_TOL};

/// One lift per base vertex in a truncated cover.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalDomain {
    /// Base vertex → selected cover vertex.
    pub selection: Vec<usize>,
    /// Cover edges `(selected, unselected)` with exactly one endpoint selected.
    pub cut_edges: Vec<(usize, usize)>,
    /// Per boundary base vertex, `|Σ_cut c(φ̃(v) − φ̃(w))| / (μ(v) φ̃(v))`.
    pub defect: Vec<(usize, f64)>,
    pub lambda0_neumann: f64,
}

impl FundamentalDomain {
    pub fn max_defect(&self) -> f64 {
        self.defect.iter().map(|d| d.1).fold(0.0, f64::max)
    }

    /// `{"selection":[[base, cover],…],"cut_edges":[[u,v],…],"lambda0":…,"max_defect":…}`
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Doc {
            selection: Vec<[usize; 2]>,
            cut_edges: Vec<[usize; 2]>,
            lambda0: f64,
            max_defect: f64,
        }
        serde_json::to_value(Doc {
            selection: self.selection.iter().enumerate().map(|(b, &c)| [b, c]).collect(),
            cut_edges: self.cut_edges.iter().map(|&(u, v)| [u, v]).collect(),
            lambda0: self.lambda0_neumann,
            max_defect: self.max_defect(),
        })
        .expect("domain serializes")
    }
}

/// Base edge `k` is kept in `D` when its lift at `selection[u]` lands on `selection[v]`.
fn internal_edges(cover: &Cover, selection: &[usize]) -> Vec<bool> {
    let base = &cover.base;
    let group = cover.group();
    base.edges()
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let h = group.mul(cover.element(selection[e.u]), &cover.voltage.voltages()[k]);
            *cover.element(selection[e.v]) == h
        })
        .collect()
}

/// Checks the fundamental-domain invariants of a selection.
pub fn validate_selection(cover: &Cover, selection: &[usize]) -> Result<()> {
    let n = cover.base.num_vertices();
    if selection.len() != n {
        return Err(Error::InvalidDomain(format!("{} lifts for {n} base vertices", selection.len())));
    }
    for (v, &c) in selection.iter().enumerate() {
        if c >= cover.num_vertices() || cover.projection(c) != v {
            return Err(Error::InvalidDomain(format!("cover vertex {c} is not a lift of {v}")));
        }
        if cover.rim[c] {
            return Err(Error::InvalidDomain(format!("lift {c} of {v} lies on the rim")));
        }
    }
    if !selection_connected(cover, selection) {
        return Err(Error::InvalidDomain("selection is disconnected".into()));
    }
    Ok(())
}

fn selection_connected(cover: &Cover, selection: &[usize]) -> bool {
    let n = selection.len();
    let keep = internal_edges(cover, selection);
    let mut adj = vec![Vec::new(); n];
    for (e, &k) in cover.base.edges().iter().zip(&keep) {
        if k && !e.is_loop() {
            adj[e.u].push(e.v);
            adj[e.v].push(e.u);
        }
    }
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut stack = vec![0];
    let mut count = 1;
    while let Some(x) = stack.pop() {
        for &y in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                count += 1;
                stack.push(y);
            }
        }
    }
    count == n
}

/// The Neumann domain as a complex on the base vertex ids: cut edges are absent,
/// tags are inherited from the cover.
pub fn domain_complex(cover: &Cover, selection: &[usize]) -> Result<WeightedComplex> {
    validate_selection(cover, selection)?;
    let keep = internal_edges(cover, selection);
    let vertices = cover
        .base
        .vertices()
        .iter()
        .map(|v| Vertex {
            id: v.id,
            measure: v.measure,
            tag: cover.complex.tag(selection[v.id]),
        })
        .collect();
    let edges = cover
        .base
        .edges()
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(e, _)| e.clone())
        .collect();
    WeightedComplex::new(vertices, edges)
}

/// `λ0` of the selected subcomplex with Neumann cuts.
pub fn lambda0_of_selection(cover: &Cover, selection: &[usize]) -> Result<f64> {
    let d = domain_complex(cover, selection)?;
    let op = assemble_unchecked(&d)?;
    Ok(lowest_eigenpairs(&op, 1, DEFAULT_TOL)?.lambda0())
}

pub fn lambda0_of_domain(domain: &FundamentalDomain, cover: &Cover) -> Result<f64> {
    lambda0_of_selection(cover, &domain.selection)
}

/// Completes a selection into a domain: cut edges, defect against the lift of
/// `f`, and `λ0`.
pub fn evaluate_domain(cover: &Cover, selection: Vec<usize>, f: &[f64]) -> Result<FundamentalDomain> {
    let lambda0_neumann = lambda0_of_selection(cover, &selection)?;
    let mut selected = vec![false; cover.num_vertices()];
    for &c in &selection {
        selected[c] = true;
    }
    let mut cut_edges = Vec::new();
    let mut flux = vec![0.0; selection.len()];
    let mut boundary = vec![false; selection.len()];
    for e in cover.complex.edges() {
        for (a, b) in [(e.u, e.v), (e.v, e.u)] {
            if selected[a] && !selected[b] {
                cut_edges.push((a, b));
                let v = cover.projection(a);
                flux[v] += e.conductance * (f[v] - f[cover.projection(b)]);
                boundary[v] = true;
            }
        }
    }
    let defect = (0..selection.len())
        .filter(|&v| boundary[v] && !cover.complex.tag(selection[v]).is_dirichlet() && f[v] != 0.0)
        .map(|v| (v, flux[v].abs() / (cover.base.vertices()[v].measure * f[v].abs())))
        .collect();
    Ok(FundamentalDomain {
        selection,
        cut_edges,
        defect,
        lambda0_neumann,
    })
}

/// Greedy domain: lift the largest basin, then repeatedly attach the
/// smallest-id uncovered basin across its first ridge edge to the covered
/// region, lifting its ascent tree from the attachment vertex.
pub fn build_fundamental_domain(cover: &Cover, f: &[f64]) -> Result<FundamentalDomain> {
    let base = &cover.base;
    let n = base.num_vertices();
    if f.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: f.len() });
    }
    let basins = ascend_basins(base, f)?;
    let group = cover.group();
    // undirected ascent-tree adjacency
    let mut tree: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (v, p) in basins.parent.iter().enumerate() {
        if let Some((w, k)) = *p {
            tree[v].push((w, k));
            tree[w].push((v, k));
        }
    }
    let mut selection: Vec<Option<usize>> = vec![None; n];
    let place = |selection: &mut Vec<Option<usize>>, v: usize, g: &GroupElement, b: usize| -> Result<()> {
        match cover.vertex(v, g) {
            Some(c) if !cover.rim[c] => {
                selection[v] = Some(c);
                Ok(())
            }
            _ => Err(Error::TruncationTooSmall { basin: b }),
        }
    };
    let lift_basin = |selection: &mut Vec<Option<usize>>, start: usize, g: GroupElement, b: usize| -> Result<()> {
        place(selection, start, &g, b)?;
        let mut queue = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            let gx = cover.element(selection[x].expect("placed")).clone();
            for &(y, k) in &tree[x] {
                if selection[y].is_none() {
                    let gy = group.mul(&gx, &cover.voltage.directed(base, k, x));
                    place(selection, y, &gy, b)?;
                    queue.push_back(y);
                }
            }
        }
        Ok(())
    };
    let sizes = basins.sizes();
    let first = (0..basins.len())
        .max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)))
        .expect("at least one basin");
    let mut covered = vec![false; basins.len()];
    lift_basin(&mut selection, basins.roots[first], group.identity(), first)?;
    covered[first] = true;
    while covered.iter().any(|c| !c) {
        let mut next: Option<(usize, usize)> = None;
        for &k in &basins.ridge_edges {
            let e = &base.edges()[k];
            for (x, y) in [(e.u, e.v), (e.v, e.u)] {
                let (bx, by) = (basins.basin[x], basins.basin[y]);
                if covered[bx] && !covered[by] && next.is_none_or(|(b, _)| by < b) {
                    next = Some((by, k));
                }
            }
        }
        let Some((b, k)) = next else {
            return Err(Error::NoAttachment("no uncovered basin touches the covered region".into()));
        };
        let e = &base.edges()[k];
        let (x, y) = if covered[basins.basin[e.u]] { (e.u, e.v) } else { (e.v, e.u) };
        let gx = cover.element(selection[x].expect("covered basins are selected")).clone();
        let gy = group.mul(&gx, &cover.voltage.directed(base, k, x));
        lift_basin(&mut selection, y, gy, b)?;
        covered[b] = true;
    }
    let selection: Vec<usize> = selection.into_iter().map(|s| s.expect("all basins covered")).collect();
    evaluate_domain(cover, selection, f)
}

/// Lifts of `v` reachable through one edge from the current lifts of its neighbors.
fn candidate_lifts(cover: &Cover, selection: &[usize], v: usize) -> Vec<usize> {
    let base = &cover.base;
    let group = cover.group();
    let mut out = Vec::new();
    for (k, e) in base.edges().iter().enumerate() {
        if e.is_loop() || (e.u != v && e.v != v) {
            continue;
        }
        let w = e.other(v);
        let g = group.mul(cover.element(selection[w]), &cover.voltage.directed(base, k, w));
        if let Some(c) = cover.vertex(v, &g) {
            if c != selection[v] && !cover.rim[c] && !out.contains(&c) {
                out.push(c);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub domain: FundamentalDomain,
    /// `λ0(D)` at the start and after every accepted move.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

/// Steepest-ascent hill climbing over single-vertex lift swaps. Each move
/// replaces one lift by a neighbor-adjacent translate; only strict
/// improvements are accepted. `budget` bounds the number of `λ0` evaluations.
pub fn improve_domain(domain: &FundamentalDomain, cover: &Cover, f: &[f64], budget: usize) -> Result<SearchOutcome> {
    let mut current = domain.selection.clone();
    let mut value = domain.lambda0_neumann;
    let mut history = vec![value];
    let mut evaluations = 0;
    'outer: loop {
        let mut best: Option<(f64, Vec<usize>)> = None;
        for v in 0..current.len() {
            for c in candidate_lifts(cover, &current, v) {
                let mut trial = current.clone();
                trial[v] = c;
                if !selection_connected(cover, &trial) {
                    continue;
                }
                if evaluations == budget {
                    if let Some((bv, bs)) = best.take() {
                        current = bs;
                        value = bv;
                        history.push(value);
                    }
                    break 'outer;
                }
                evaluations += 1;
                let l = lambda0_of_selection(cover, &trial)?;
                if l > value && best.as_ref().is_none_or(|(bv, _)| l > *bv) {
                    best = Some((l, trial));
                }
            }
        }
        match best {
            Some((bv, bs)) => {
                current = bs;
                value = bv;
                history.push(value);
            }
            None => break,
        }
    }
    let domain = if current == domain.selection {
        domain.clone()
    } else {
        evaluate_domain(cover, current, f)?
    };
    Ok(SearchOutcome {
        domain,
        history,
        evaluations,
    })
}

/// Random valid selection: a random spanning tree of the base lifted from a
/// random non-rim lift of a random root, followed by `swaps` random valid
/// lift swaps. Returns `None` if no lift avoids the rim within a few retries.
pub fn random_selection(cover: &Cover, seed: u64, swaps: usize) -> Option<Vec<usize>> {
    let base = &cover.base;
    let n = base.num_vertices();
    let group = cover.group();
    let mut rng = item_rng(seed, 0);
    'attempt: for _ in 0..32 {
        let mut order: Vec<usize> = (0..base.edges().len()).filter(|&k| !base.edges()[k].is_loop()).collect();
        order.shuffle(&mut rng);
        let root = rng.random_range(0..n);
        let lifts: Vec<usize> = (0..cover.num_vertices())
            .filter(|&c| cover.projection(c) == root && !cover.rim[c])
            .collect();
        let Some(&start) = lifts.choose(&mut rng) else { return None };
        let mut selection: Vec<Option<usize>> = vec![None; n];
        selection[root] = Some(start);
        let mut placed = 1;
        // grow a random tree: repeatedly take the first shuffled edge with one placed end
        while placed < n {
            let Some(&k) = order.iter().find(|&&k| {
                let e = &base.edges()[k];
                selection[e.u].is_some() != selection[e.v].is_some()
            }) else {
                return None;
            };
            let e = &base.edges()[k];
            let (x, y) = if selection[e.u].is_some() { (e.u, e.v) } else { (e.v, e.u) };
            let g = group.mul(cover.element(selection[x].unwrap()), &cover.voltage.directed(base, k, x));
            match cover.vertex(y, &g) {
                Some(c) if !cover.rim[c] => selection[y] = Some(c),
                _ => continue 'attempt,
            }
            placed += 1;
        }
        let mut sel: Vec<usize> = selection.into_iter().map(Option::unwrap).collect();
        for _ in 0..swaps {
            let v = rng.random_range(0..n);
            let cands = candidate_lifts(cover, &sel, v);
            if let Some(&c) = cands.choose(&mut rng) {
                let old = sel[v];
                sel[v] = c;
                if !selection_connected(cover, &sel) {
                    sel[v] = old;
                }
            }
        }
        return Some(sel);
    }
    None
}

/// Every valid selection of the truncation, by exhaustive product over the
/// non-rim lifts of each base vertex. Intended for small truncations only.
pub fn enumerate_selections(cover: &Cover) -> Vec<Vec<usize>> {
    let n = cover.base.num_vertices();
    let mut lifts: Vec<Vec<usize>> = vec![Vec::new(); n];
    for c in 0..cover.num_vertices() {
        if !cover.rim[c] {
            lifts[cover.projection(c)].push(c);
        }
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; n];
    if lifts.iter().any(Vec::is_empty) {
        return out;
    }
    loop {
        let sel: Vec<usize> = (0..n).map(|v| lifts[v][idx[v]]).collect();
        if selection_connected(cover, &sel) {
            out.push(sel);
        }
        let mut i = 0;
        loop {
            if i == n {
                return out;
            }
            idx[i] += 1;
            if idx[i] < lifts[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuperlevelReport {
    /// `{v : f(v) ≥ a}`, ascending.
    pub set: Vec<usize>,
    /// Largest value of `f` on a free vertex adjacent to a dirichlet vertex.
    pub rim_threshold: f64,
    /// No vertex of the set is dirichlet or adjacent to one.
    pub avoids_rim: bool,
}

/// Superlevel set of a function that is positive on free vertices and
/// nonnegative on dirichlet vertices.
pub fn superlevel_check(complex: &WeightedComplex, f: &[f64], a: f64) -> Result<SuperlevelReport> {
    let n = complex.num_vertices();
    if f.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: f.len() });
    }
    for (v, &x) in f.iter().enumerate() {
        let ok = if complex.tag(v).is_dirichlet() { x >= 0.0 } else { x > 0.0 };
        if !ok {
            return Err(Error::NotPositive { index: v, value: x });
        }
    }
    let mut near_rim = vec![false; n];
    for Edge { u, v, .. } in complex.edges() {
        for (a, b) in [(*u, *v), (*v, *u)] {
            if complex.tag(b).is_dirichlet() {
                near_rim[a] = true;
            }
        }
    }
    for v in 0..n {
        if complex.tag(v).is_dirichlet() {
            near_rim[v] = true;
        }
    }
    let rim_threshold = (0..n)
        .filter(|&v| near_rim[v] && !complex.tag(v).is_dirichlet())
        .map(|v| f[v])
        .fold(0.0, f64::max);
    let set: Vec<usize> = (0..n).filter(|&v| f[v] >= a).collect();
    let avoids_rim = set.iter().all(|&v| !near_rim[v]);
    Ok(SuperlevelReport {
        set,
        rim_threshold,
        avoids_rim,
    })
}
