//! Geometric graphs in the plane: points, Euclidean-weighted edges, failure
//! sets, and the shortest-path and net primitives everything else builds on.

mod dijkstra;
mod format;
mod net;
mod truth;

pub use dijkstra::{
    dijkstra, dijkstra_filtered, multi_source_dijkstra, DijkstraWorkspace, ShortestPathTree,
};
pub use format::{parse_graph, write_graph};
pub use net::{build_net, build_net_extending, Net};
pub use truth::{ground_truth_distance, ground_truth_path, shortest_safe_path};

use serde::{Deserialize, Serialize};

use crate::error::{OracleError, Result};

pub type VertexId = usize;

/// Relative tolerance used when comparing stored edge weights to point distances.
pub const WEIGHT_REL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(&self, other: &Point, a: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * a,
            self.y + (other.y - self.y) * a,
        )
    }
}

/// Stretch, failure budget and partial-spanner radius an input graph claims.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpannerParams {
    pub t: f64,
    pub f: usize,
    /// Pairs with `|uv| <= l` enjoy the stretch guarantee; `f64::INFINITY` for a full spanner.
    pub l: f64,
}

impl SpannerParams {
    pub fn new(t: f64, f: usize, l: f64) -> Result<Self> {
        if !(t >= 1.0) || !t.is_finite() {
            return Err(OracleError::InvalidParameter(format!("stretch t = {t} must be >= 1")));
        }
        if !(l >= 0.0) {
            return Err(OracleError::InvalidParameter(format!("radius L = {l} must be >= 0")));
        }
        Ok(Self { t, f, l })
    }
}

/// Undirected geometric graph with sorted adjacency. Edge weights are the
/// Euclidean distances of the endpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoGraph {
    points: Vec<Point>,
    edges: Vec<(VertexId, VertexId)>,
    weights: Vec<f64>,
    adj_start: Vec<usize>,
    adj: Vec<(VertexId, f64)>,
    pub params: SpannerParams,
}

impl GeoGraph {
    pub fn new(
        points: Vec<Point>,
        edges: impl IntoIterator<Item = (VertexId, VertexId)>,
        params: SpannerParams,
    ) -> Result<Self> {
        let n = points.len();
        if let Some(bad) = points.iter().position(|p| !p.is_finite()) {
            return Err(OracleError::InvalidGraph(format!("vertex {bad} has a non-finite coordinate")));
        }
        let mut norm = Vec::new();
        for (u, v) in edges {
            if u >= n {
                return Err(OracleError::InvalidVertex(u));
            }
            if v >= n {
                return Err(OracleError::InvalidVertex(v));
            }
            if u == v {
                return Err(OracleError::InvalidGraph(format!("self-loop at vertex {u}")));
            }
            norm.push((u.min(v), u.max(v)));
        }
        norm.sort_unstable();
        if let Some(w) = norm.windows(2).find(|w| w[0] == w[1]) {
            return Err(OracleError::InvalidGraph(format!(
                "duplicate edge ({}, {})",
                w[0].0, w[0].1
            )));
        }
        Ok(Self::from_sorted_edges(points, norm, params))
    }

    /// Builds from edges already normalized (`u < v`), sorted and deduplicated.
    pub(crate) fn from_sorted_edges(
        points: Vec<Point>,
        edges: Vec<(VertexId, VertexId)>,
        params: SpannerParams,
    ) -> Self {
        let n = points.len();
        let weights: Vec<f64> = edges
            .iter()
            .map(|&(u, v)| points[u].dist(&points[v]))
            .collect();
        let mut deg = vec![0usize; n + 1];
        for &(u, v) in &edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        let mut adj_start = vec![0usize; n + 1];
        for i in 0..n {
            adj_start[i + 1] = adj_start[i] + deg[i];
        }
        let mut fill = adj_start.clone();
        let mut adj = vec![(0usize, 0.0f64); adj_start[n]];
        for (k, &(u, v)) in edges.iter().enumerate() {
            adj[fill[u]] = (v, weights[k]);
            fill[u] += 1;
            adj[fill[v]] = (u, weights[k]);
            fill[v] += 1;
        }
        for i in 0..n {
            adj[adj_start[i]..adj_start[i + 1]].sort_unstable_by_key(|&(w, _)| w);
        }
        Self {
            points,
            edges,
            weights,
            adj_start,
            adj,
            params,
        }
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, v: VertexId) -> Point {
        self.points[v]
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(VertexId, VertexId)] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn neighbors(&self, v: VertexId) -> &[(VertexId, f64)] {
        &self.adj[self.adj_start[v]..self.adj_start[v + 1]]
    }

    pub fn euclid(&self, u: VertexId, v: VertexId) -> f64 {
        self.points[u].dist(&self.points[v])
    }

    pub fn edge_weight(&self, u: VertexId, v: VertexId) -> Option<f64> {
        let nb = self.neighbors(u);
        nb.binary_search_by_key(&v, |&(w, _)| w).ok().map(|i| nb[i].1)
    }

    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        self.edge_weight(u, v).is_some()
    }

    pub fn check_vertex(&self, v: VertexId) -> Result<()> {
        if v < self.n() {
            Ok(())
        } else {
            Err(OracleError::InvalidVertex(v))
        }
    }

    pub fn max_edge_length(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// Length of a vertex walk, or `None` if two consecutive vertices are not adjacent.
    pub fn walk_length(&self, walk: &[VertexId]) -> Option<f64> {
        let mut total = 0.0;
        for w in walk.windows(2) {
            total += self.edge_weight(w[0], w[1])?;
        }
        Some(total)
    }

    /// Same vertex set, keeping only edges accepted by `keep(u, v, weight)`.
    pub fn filter_edges(&self, mut keep: impl FnMut(VertexId, VertexId, f64) -> bool) -> GeoGraph {
        let edges: Vec<_> = self
            .edges
            .iter()
            .zip(&self.weights)
            .filter(|(&(u, v), &w)| keep(u, v, w))
            .map(|(&e, _)| e)
            .collect();
        GeoGraph::from_sorted_edges(self.points.clone(), edges, self.params)
    }

    /// Subgraph induced by `vertices` (sorted, distinct). Local id `i` maps to `vertices[i]`.
    pub fn induced(&self, vertices: &[VertexId], params: SpannerParams) -> GeoGraph {
        let mut local = vec![usize::MAX; self.n()];
        for (i, &v) in vertices.iter().enumerate() {
            local[v] = i;
        }
        let points = vertices.iter().map(|&v| self.points[v]).collect();
        let mut edges = Vec::new();
        for &(u, v) in &self.edges {
            if local[u] != usize::MAX && local[v] != usize::MAX {
                let (a, b) = (local[u], local[v]);
                edges.push((a.min(b), a.max(b)));
            }
        }
        edges.sort_unstable();
        GeoGraph::from_sorted_edges(points, edges, params)
    }

    /// Verifies stored weights against point distances.
    pub fn check_invariants(&self) -> Result<()> {
        for (k, &(u, v)) in self.edges.iter().enumerate() {
            let d = self.euclid(u, v);
            if (self.weights[k] - d).abs() > WEIGHT_REL_TOL * d.max(f64::MIN_POSITIVE) {
                return Err(OracleError::InvalidGraph(format!(
                    "edge ({u}, {v}) weight {} differs from |uv| = {d}",
                    self.weights[k]
                )));
            }
        }
        Ok(())
    }
}

/// Set of failed vertices, kept sorted and deduplicated.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FailureSet {
    failed: Vec<VertexId>,
}

impl FailureSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Validates ids against `n` and the size against `max_failures`.
    pub fn new(ids: impl IntoIterator<Item = VertexId>, n: usize, max_failures: usize) -> Result<Self> {
        let set = Self::from_ids(ids);
        if let Some(&bad) = set.failed.iter().find(|&&v| v >= n) {
            return Err(OracleError::InvalidVertex(bad));
        }
        if set.len() > max_failures {
            return Err(OracleError::TooManyFailures {
                size: set.len(),
                max: max_failures,
            });
        }
        Ok(set)
    }

    /// Unchecked constructor; ids are sorted and deduplicated.
    pub fn from_ids(ids: impl IntoIterator<Item = VertexId>) -> Self {
        let mut failed: Vec<_> = ids.into_iter().collect();
        failed.sort_unstable();
        failed.dedup();
        Self { failed }
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.failed.binary_search(&v).is_ok()
    }

    pub fn len(&self) -> usize {
        self.failed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.failed.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.failed.iter().copied()
    }

    pub fn as_slice(&self) -> &[VertexId] {
        &self.failed
    }

    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for &v in &self.failed {
            if v < n {
                mask[v] = true;
            }
        }
        mask
    }

    /// Failures translated through `map` (global id -> optional local id).
    pub fn restrict(&self, map: impl Fn(VertexId) -> Option<VertexId>) -> FailureSet {
        FailureSet::from_ids(self.failed.iter().filter_map(|&v| map(v)))
    }
}
