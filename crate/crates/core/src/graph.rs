//! The AP overlap graph a device builds from its own scans.
//!
//! Vertices are APs, an edge means the two coverage areas were observed to
//! overlap at a level of at least `tau`. Vertices are stored in first-seen
//! order with sorted adjacency lists, so iteration order is deterministic.

use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::rng_from_seed;
use crate::world::{permutation, ApId, Fingerprint};

pub const GRAPH_FILE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("malformed graph file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OverlapGraph {
    ids: Vec<ApId>,
    index: HashMap<ApId, u32>,
    adj: Vec<Vec<u32>>,
    edge_count: usize,
    /// Cached clustering coefficients by vertex index. May be shorter than
    /// `ids` when vertices were added after the last recompute.
    coefficients: Option<Vec<f64>>,
    dirty: bool,
}

impl OverlapGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn contains(&self, id: ApId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn vertices(&self) -> &[ApId] {
        &self.ids
    }

    /// Edges as `(a, b)` with `a` inserted before `b`.
    pub fn edges(&self) -> impl Iterator<Item = (ApId, ApId)> + '_ {
        self.adj.iter().enumerate().flat_map(move |(i, ns)| {
            ns.iter()
                .filter(move |&&j| (j as usize) > i)
                .map(move |&j| (self.ids[i], self.ids[j as usize]))
        })
    }

    pub fn add_vertex(&mut self, id: ApId) -> u32 {
        if let Some(&i) = self.index.get(&id) {
            return i;
        }
        let i = self.ids.len() as u32;
        self.ids.push(id);
        self.index.insert(id, i);
        self.adj.push(Vec::new());
        self.dirty = true;
        i
    }

    /// Adds the undirected edge; returns `false` if it already existed or
    /// would be a self-loop. Missing endpoints are added as vertices.
    pub fn add_edge(&mut self, a: ApId, b: ApId) -> bool {
        if a == b {
            return false;
        }
        let ia = self.add_vertex(a);
        let ib = self.add_vertex(b);
        match self.adj[ia as usize].binary_search(&ib) {
            Ok(_) => false,
            Err(pos) => {
                self.adj[ia as usize].insert(pos, ib);
                let pos = self.adj[ib as usize]
                    .binary_search(&ia)
                    .expect_err("adjacency is symmetric");
                self.adj[ib as usize].insert(pos, ia);
                self.edge_count += 1;
                self.dirty = true;
                true
            }
        }
    }

    pub fn has_edge(&self, a: ApId, b: ApId) -> bool {
        match (self.index.get(&a), self.index.get(&b)) {
            (Some(&ia), Some(&ib)) => self.adjacent(ia, ib),
            _ => false,
        }
    }

    pub(crate) fn index_of(&self, id: ApId) -> Option<u32> {
        self.index.get(&id).copied()
    }

    pub(crate) fn id_at(&self, i: u32) -> ApId {
        self.ids[i as usize]
    }

    pub(crate) fn adjacent(&self, a: u32, b: u32) -> bool {
        self.adj[a as usize].binary_search(&b).is_ok()
    }

    pub(crate) fn neighbor_indices(&self, i: u32) -> &[u32] {
        &self.adj[i as usize]
    }

    pub fn degree(&self, id: ApId) -> usize {
        self.index
            .get(&id)
            .map_or(0, |&i| self.adj[i as usize].len())
    }

    pub fn neighbors(&self, id: ApId) -> impl Iterator<Item = ApId> + '_ {
        self.index
            .get(&id)
            .into_iter()
            .flat_map(move |&i| self.adj[i as usize].iter().map(move |&j| self.ids[j as usize]))
    }

    /// Folds one scan into the graph.
    ///
    /// Every sensed AP joins the vertex set whatever its strength. A pair that
    /// is not yet adjacent gets an edge when both readings reach `tau`; pairs
    /// already adjacent are skipped and the remaining pairs are still
    /// processed.
    pub fn scsoa_update(&mut self, scan: &Fingerprint, tau: f64) {
        let obs = scan.observations();
        let idx: Vec<u32> = obs.iter().map(|o| self.add_vertex(o.ap)).collect();
        for i in 0..obs.len() {
            if obs[i].rssi < tau {
                continue;
            }
            for j in (i + 1)..obs.len() {
                if self.adjacent(idx[i], idx[j]) {
                    continue;
                }
                if obs[j].rssi >= tau {
                    self.add_edge(obs[i].ap, obs[j].ap);
                }
            }
        }
    }

    /// Edges among the neighbours of vertex `i`.
    fn neighbor_edges(&self, i: u32) -> usize {
        let ns = &self.adj[i as usize];
        let mut count = 0;
        for &u in ns {
            count += sorted_intersection_len(ns, &self.adj[u as usize]);
        }
        count / 2
    }

    fn local_coefficient(&self, i: u32) -> f64 {
        let d = self.adj[i as usize].len();
        if d < 2 {
            return 0.0;
        }
        2.0 * self.neighbor_edges(i) as f64 / (d * (d - 1)) as f64
    }

    pub fn recompute_coefficients(&mut self) {
        let n = self.ids.len() as u32;
        let coeffs = crate::par::map_trials(n as usize, |i| self.local_coefficient(i as u32));
        self.coefficients = Some(coeffs);
        self.dirty = false;
    }

    pub fn coefficients_dirty(&self) -> bool {
        self.dirty
    }

    pub fn has_coefficients(&self) -> bool {
        self.coefficients.is_some()
    }

    /// Cached coefficient, possibly stale. `None` if never computed or the
    /// vertex joined after the last recompute.
    pub fn coefficient(&self, id: ApId) -> Option<f64> {
        let i = *self.index.get(&id)?;
        self.cached_coefficient(i)
    }

    pub(crate) fn cached_coefficient(&self, i: u32) -> Option<f64> {
        self.coefficients.as_ref()?.get(i as usize).copied()
    }

    pub(crate) fn cached_coefficients(&self) -> Option<&[f64]> {
        self.coefficients.as_deref()
    }

    /// Coefficient computed from the current adjacency, ignoring the cache.
    pub fn fresh_coefficient(&self, id: ApId) -> Option<f64> {
        self.index.get(&id).map(|&i| self.local_coefficient(i))
    }

    /// `true` iff every pair of `set` is adjacent (duplicates ignored).
    /// Sets of size 0 or 1 are trivially cliques.
    pub fn is_clique(&self, set: &[ApId]) -> bool {
        let mut ids = set.to_vec();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() <= 1 {
            return true;
        }
        let Some(idx) = ids
            .iter()
            .map(|id| self.index.get(id).copied())
            .collect::<Option<Vec<u32>>>()
        else {
            return false;
        };
        idx.iter()
            .enumerate()
            .all(|(k, &a)| idx[k + 1..].iter().all(|&b| self.adjacent(a, b)))
    }

    /// Subgraph induced by `keep` (vertex order follows `self`). Coefficients
    /// are recomputed on the result.
    pub fn induced(&self, keep: &[ApId]) -> OverlapGraph {
        let mut g = OverlapGraph::new();
        let mut keep_sorted = keep.to_vec();
        keep_sorted.sort_unstable();
        for &id in &self.ids {
            if keep_sorted.binary_search(&id).is_ok() {
                g.add_vertex(id);
            }
        }
        for (a, b) in self.edges() {
            if g.contains(a) && g.contains(b) {
                g.add_edge(a, b);
            }
        }
        g.recompute_coefficients();
        g
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            version: GRAPH_FILE_VERSION,
            vertices: self.ids.clone(),
            edges: self.edges().collect(),
            coefficients: self.coefficients.as_ref().map(|c| {
                c.iter()
                    .enumerate()
                    .map(|(i, &value)| CoefficientRecord {
                        id: self.ids[i],
                        value,
                    })
                    .collect()
            }),
            coefficients_dirty: self.dirty,
        }
    }

    pub fn from_file(file: GraphFile) -> Result<Self, GraphError> {
        if file.version != GRAPH_FILE_VERSION {
            return Err(GraphError::Malformed(format!(
                "unsupported graph file version {}",
                file.version
            )));
        }
        let mut g = OverlapGraph::new();
        for id in file.vertices {
            if g.contains(id) {
                return Err(GraphError::Malformed(format!("duplicate vertex {id}")));
            }
            g.add_vertex(id);
        }
        for (a, b) in file.edges {
            if a == b {
                return Err(GraphError::Malformed(format!("self-loop on {a}")));
            }
            if !g.contains(a) || !g.contains(b) {
                return Err(GraphError::Malformed(format!("edge {a}-{b} has unknown endpoint")));
            }
            g.add_edge(a, b);
        }
        if let Some(records) = file.coefficients {
            let mut coeffs = Vec::with_capacity(records.len());
            for (i, r) in records.into_iter().enumerate() {
                if g.ids.get(i) != Some(&r.id) {
                    return Err(GraphError::Malformed(
                        "coefficient table out of vertex order".into(),
                    ));
                }
                if !(0.0..=1.0).contains(&r.value) {
                    return Err(GraphError::Malformed(format!(
                        "coefficient {} out of range for {}",
                        r.value, r.id
                    )));
                }
                coeffs.push(r.value);
            }
            g.coefficients = Some(coeffs);
        }
        g.dirty = file.coefficients_dirty;
        Ok(g)
    }

    pub fn save(&self, path: &Path) -> Result<(), GraphError> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_file())?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, GraphError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_file(serde_json::from_str(&text)?)
    }

    /// Order-independent fingerprint of the vertex and edge sets, for report
    /// provenance.
    pub fn digest(&self) -> u64 {
        let mut ids: Vec<u64> = self.ids.iter().map(|id| id.raw()).collect();
        ids.sort_unstable();
        let mut edges: Vec<(u64, u64)> = self
            .edges()
            .map(|(a, b)| (a.raw().min(b.raw()), a.raw().max(b.raw())))
            .collect();
        edges.sort_unstable();
        let mut h = crate::rng::derive_seed(ids.len() as u64, &ids);
        for (a, b) in edges {
            h = crate::rng::derive_seed(h, &[a, b]);
        }
        h
    }
}

fn sorted_intersection_len(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub version: u32,
    pub vertices: Vec<ApId>,
    pub edges: Vec<(ApId, ApId)>,
    #[serde(default)]
    pub coefficients: Option<Vec<CoefficientRecord>>,
    #[serde(default)]
    pub coefficients_dirty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRecord {
    pub id: ApId,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("clique search exceeded its deadline")]
pub struct SearchTimeout;

/// Exhaustive m-clique search, the baseline the coefficient-guided generator
/// is compared against. Vertices are visited in a seeded random order and
/// m-subsets are enumerated in that order, abandoning a prefix as soon as it
/// is not complete. Returns the members sorted by id.
pub fn brute_force_clique(g: &OverlapGraph, m: usize, seed: u64) -> Option<Vec<ApId>> {
    brute_force_clique_until(g, m, seed, None).expect("no deadline set")
}

/// [`brute_force_clique`] with an optional wall-clock deadline.
pub fn brute_force_clique_until(
    g: &OverlapGraph,
    m: usize,
    seed: u64,
    deadline: Option<Instant>,
) -> Result<Option<Vec<ApId>>, SearchTimeout> {
    let n = g.vertex_count();
    if m == 0 || m > n {
        return Ok(None);
    }
    let mut rng = rng_from_seed(seed);
    let order: Vec<u32> = permutation(n, &mut rng)
        .into_iter()
        .map(|i| i as u32)
        .collect();
    if m == 1 {
        return Ok(Some(vec![g.id_at(order[0])]));
    }

    // positions into `order`; chosen[k] < chosen[k + 1]
    let mut chosen: Vec<usize> = Vec::with_capacity(m);
    let mut next = 0usize;
    let mut ticks = 0u32;
    loop {
        ticks = ticks.wrapping_add(1);
        if ticks & 0x3fff == 0 {
            if let Some(d) = deadline {
                if Instant::now() >= d {
                    return Err(SearchTimeout);
                }
            }
        }
        // not enough positions left to complete the subset
        if next + (m - chosen.len()) > n {
            match chosen.pop() {
                Some(p) => {
                    next = p + 1;
                    continue;
                }
                None => return Ok(None),
            }
        }
        let v = order[next];
        if chosen.iter().all(|&p| g.adjacent(order[p], v)) {
            chosen.push(next);
            if chosen.len() == m {
                let mut out: Vec<ApId> = chosen.iter().map(|&p| g.id_at(order[p])).collect();
                out.sort_unstable();
                return Ok(Some(out));
            }
        }
        next += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Observation;

    fn id(n: u64) -> ApId {
        ApId::new(n)
    }

    fn graph(edges: &[(u64, u64)]) -> OverlapGraph {
        let mut g = OverlapGraph::new();
        for &(a, b) in edges {
            g.add_edge(id(a), id(b));
        }
        g.recompute_coefficients();
        g
    }

    fn complete(n: u64) -> OverlapGraph {
        let mut e = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                e.push((a, b));
            }
        }
        graph(&e)
    }

    fn fp(obs: &[(u64, f64)]) -> Fingerprint {
        Fingerprint::new(
            obs.iter()
                .map(|&(a, rssi)| Observation { ap: id(a), rssi })
                .collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn scsoa_trace() {
        let mut g = OverlapGraph::new();
        g.scsoa_update(&fp(&[(1, -40.0), (2, -45.0), (3, -80.0)]), -70.0);
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(id(1), id(2))]);
        assert!(g.coefficients_dirty());
    }

    #[test]
    fn scsoa_single_and_empty() {
        let mut g = OverlapGraph::new();
        g.scsoa_update(&fp(&[]), -70.0);
        assert_eq!(g.vertex_count(), 0);
        g.scsoa_update(&fp(&[(9, -90.0)]), -70.0);
        assert_eq!(g.vertex_count(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn scsoa_existing_edge_does_not_stop_later_pairs() {
        let mut g = OverlapGraph::new();
        g.add_edge(id(1), id(2));
        g.scsoa_update(&fp(&[(1, -40.0), (2, -41.0), (3, -42.0)]), -70.0);
        assert!(g.has_edge(id(1), id(3)));
        assert!(g.has_edge(id(2), id(3)));
    }

    #[test]
    fn coefficient_examples() {
        let k3 = complete(3);
        for v in k3.vertices() {
            assert_eq!(k3.coefficient(*v), Some(1.0));
        }
        let star = graph(&[(0, 1), (0, 2), (0, 3)]);
        for v in 0..4 {
            assert_eq!(star.coefficient(id(v)), Some(0.0));
        }
        // v=0 with neighbours a,b,c and neighbour edges ab, bc
        let g = graph(&[(0, 1), (0, 2), (0, 3), (1, 2), (2, 3)]);
        assert!((g.coefficient(id(0)).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cache_goes_stale_on_mutation() {
        let mut g = complete(3);
        assert!(!g.coefficients_dirty());
        g.add_edge(id(0), id(7));
        assert!(g.coefficients_dirty());
        assert_eq!(g.coefficient(id(0)), Some(1.0));
        assert_eq!(g.coefficient(id(7)), None);
        assert!((g.fresh_coefficient(id(0)).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn clique_checks() {
        let g = graph(&[(0, 1), (2, 3)]);
        assert!(g.is_clique(&[id(0)]));
        assert!(g.is_clique(&[]));
        assert!(!g.is_clique(&[id(0), id(2)]));
        assert!(!g.is_clique(&[id(0), id(99)]));
        let k5 = complete(5);
        assert!(k5.is_clique(&[id(4), id(1), id(3)]));
    }

    #[test]
    fn brute_force_examples() {
        let p4 = graph(&[(0, 1), (1, 2), (2, 3)]);
        assert_eq!(brute_force_clique(&p4, 3, 1), None);
        let k4 = complete(4);
        for seed in 0..10 {
            let s = brute_force_clique(&k4, 3, seed).unwrap();
            assert_eq!(s.len(), 3);
            assert!(k4.is_clique(&s));
        }
        assert_eq!(brute_force_clique(&k4, 5, 0), None);
        assert_eq!(brute_force_clique(&k4, 0, 0), None);
    }

    #[test]
    fn brute_force_deadline() {
        let g = complete(30);
        let past = Instant::now() - std::time::Duration::from_secs(1);
        // K30 finds a clique before the first clock check
        assert!(brute_force_clique_until(&g, 5, 0, Some(past)).is_ok());
        let sparse = graph(&(0..2000u64).map(|i| (i, i + 1)).collect::<Vec<_>>());
        assert_eq!(
            brute_force_clique_until(&sparse, 3, 0, Some(past)),
            Err(SearchTimeout)
        );
    }

    #[test]
    fn file_roundtrip_preserves_everything() {
        let mut g = graph(&[(0, 1), (1, 2), (0, 2), (2, 3)]);
        g.add_vertex(id(11));
        let back = OverlapGraph::from_file(g.to_file()).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.digest(), g.digest());
    }

    #[test]
    fn malformed_files_rejected() {
        let mut f = graph(&[(0, 1)]).to_file();
        f.edges.push((id(0), id(5)));
        assert!(OverlapGraph::from_file(f).is_err());
        let mut f = graph(&[(0, 1)]).to_file();
        f.edges.push((id(0), id(0)));
        assert!(OverlapGraph::from_file(f).is_err());
    }
}
