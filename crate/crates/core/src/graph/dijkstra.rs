use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{FailureSet, GeoGraph, VertexId};
use crate::error::{OracleError, Result};

const NO_PRED: usize = usize::MAX;

/// Distances and predecessors from one source. Unreached vertices carry `+inf`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShortestPathTree {
    pub source: VertexId,
    pub dist: Vec<f64>,
    pub pred: Vec<Option<VertexId>>,
}

impl ShortestPathTree {
    pub fn distance(&self, v: VertexId) -> f64 {
        self.dist[v]
    }

    /// Source-to-`target` vertex sequence, or `None` when unreachable.
    pub fn path_to(&self, target: VertexId) -> Option<Vec<VertexId>> {
        if !self.dist[target].is_finite() {
            return None;
        }
        let mut path = vec![target];
        let mut cur = target;
        while let Some(p) = self.pred[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        Some(path)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Entry {
    dist: f64,
    label: VertexId,
    vertex: VertexId,
}

impl Eq for Entry {}

impl Ord for Entry {
    // BinaryHeap is a max-heap; reverse so the smallest (dist, label, vertex) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.label.cmp(&self.label))
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Reusable Dijkstra buffers. Only touched entries are reset between runs,
/// so many small bounded searches on a large graph stay cheap.
#[derive(Clone, Debug)]
pub struct DijkstraWorkspace {
    dist: Vec<f64>,
    pred: Vec<usize>,
    label: Vec<usize>,
    done: Vec<bool>,
    touched: Vec<VertexId>,
    heap: BinaryHeap<Entry>,
}

impl DijkstraWorkspace {
    pub fn new(n: usize) -> Self {
        Self {
            dist: vec![f64::INFINITY; n],
            pred: vec![NO_PRED; n],
            label: vec![NO_PRED; n],
            done: vec![false; n],
            touched: Vec::new(),
            heap: BinaryHeap::new(),
        }
    }

    fn reset(&mut self, n: usize) {
        if self.dist.len() != n {
            *self = Self::new(n);
            return;
        }
        for &v in &self.touched {
            self.dist[v] = f64::INFINITY;
            self.pred[v] = NO_PRED;
            self.label[v] = NO_PRED;
            self.done[v] = false;
        }
        self.touched.clear();
        self.heap.clear();
    }

    fn seed(&mut self, v: VertexId, d: f64) {
        if d < self.dist[v] || (d == self.dist[v] && v < self.label[v]) {
            if self.dist[v].is_infinite() && self.label[v] == NO_PRED {
                self.touched.push(v);
            }
            self.dist[v] = d;
            self.label[v] = v;
            self.pred[v] = NO_PRED;
            self.heap.push(Entry {
                dist: d,
                label: v,
                vertex: v,
            });
        }
    }

    /// Multi-source run with initial offsets. Each vertex ends with the
    /// lexicographically smallest `(distance, source id)` label. Ties between
    /// equal-length paths from the same source prefer the smaller predecessor.
    pub fn run<V, E>(
        &mut self,
        g: &GeoGraph,
        sources: &[(VertexId, f64)],
        vertex_ok: V,
        edge_ok: E,
        radius_cap: Option<f64>,
        target: Option<VertexId>,
    ) where
        V: Fn(VertexId) -> bool,
        E: Fn(VertexId, VertexId) -> bool,
    {
        self.reset(g.n());
        let cap = radius_cap.unwrap_or(f64::INFINITY);
        for &(s, d) in sources {
            if vertex_ok(s) && d <= cap {
                self.seed(s, d);
            }
        }
        while let Some(Entry { dist, label, vertex }) = self.heap.pop() {
            if self.done[vertex] || dist != self.dist[vertex] || label != self.label[vertex] {
                continue;
            }
            self.done[vertex] = true;
            if Some(vertex) == target {
                break;
            }
            for &(w, wt) in g.neighbors(vertex) {
                if self.done[w] || !vertex_ok(w) || !edge_ok(vertex, w) {
                    continue;
                }
                let nd = dist + wt;
                if nd > cap {
                    continue;
                }
                let better = match nd.total_cmp(&self.dist[w]) {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => {
                        label < self.label[w] || (label == self.label[w] && vertex < self.pred[w])
                    }
                };
                if better {
                    if self.label[w] == NO_PRED {
                        self.touched.push(w);
                    }
                    self.dist[w] = nd;
                    self.label[w] = label;
                    self.pred[w] = vertex;
                    self.heap.push(Entry {
                        dist: nd,
                        label,
                        vertex: w,
                    });
                }
            }
        }
    }

    pub fn dist(&self, v: VertexId) -> f64 {
        self.dist[v]
    }

    /// Source that owns `v`'s label, if reached.
    pub fn owner(&self, v: VertexId) -> Option<VertexId> {
        (self.label[v] != NO_PRED && self.dist[v].is_finite()).then_some(self.label[v])
    }

    pub fn pred(&self, v: VertexId) -> Option<VertexId> {
        (self.pred[v] != NO_PRED).then_some(self.pred[v])
    }

    /// Vertices reached by the last run, with their distances.
    pub fn reached(&self) -> impl Iterator<Item = (VertexId, f64)> + '_ {
        self.touched
            .iter()
            .filter(|&&v| self.dist[v].is_finite())
            .map(|&v| (v, self.dist[v]))
    }

    pub fn path_to(&self, target: VertexId) -> Option<Vec<VertexId>> {
        if !self.dist[target].is_finite() {
            return None;
        }
        let mut path = vec![target];
        let mut cur = target;
        while self.pred[cur] != NO_PRED {
            cur = self.pred[cur];
            path.push(cur);
        }
        path.reverse();
        Some(path)
    }

    pub fn to_tree(&self, source: VertexId) -> ShortestPathTree {
        ShortestPathTree {
            source,
            dist: self.dist.clone(),
            pred: self
                .pred
                .iter()
                .map(|&p| (p != NO_PRED).then_some(p))
                .collect(),
        }
    }
}

/// Single-source shortest paths in `g - avoid`.
pub fn dijkstra(
    g: &GeoGraph,
    source: VertexId,
    avoid: &FailureSet,
    radius_cap: Option<f64>,
) -> Result<ShortestPathTree> {
    g.check_vertex(source)?;
    if avoid.contains(source) {
        return Err(OracleError::FailedSource(source));
    }
    Ok(dijkstra_filtered(
        g,
        source,
        |v| !avoid.contains(v),
        |_, _| true,
        radius_cap,
        None,
    ))
}

/// Single-source shortest paths restricted to accepted vertices and edges.
/// With a `target`, the search stops once it is settled.
pub fn dijkstra_filtered<V, E>(
    g: &GeoGraph,
    source: VertexId,
    vertex_ok: V,
    edge_ok: E,
    radius_cap: Option<f64>,
    target: Option<VertexId>,
) -> ShortestPathTree
where
    V: Fn(VertexId) -> bool,
    E: Fn(VertexId, VertexId) -> bool,
{
    let mut ws = DijkstraWorkspace::new(g.n());
    ws.run(g, &[(source, 0.0)], vertex_ok, edge_ok, radius_cap, target);
    ws.to_tree(source)
}

/// Distance to the nearest source and that source's id (smallest id on ties).
pub fn multi_source_dijkstra(
    g: &GeoGraph,
    sources: &[VertexId],
    radius_cap: Option<f64>,
) -> (Vec<f64>, Vec<Option<VertexId>>) {
    let mut ws = DijkstraWorkspace::new(g.n());
    let seeds: Vec<_> = sources.iter().map(|&s| (s, 0.0)).collect();
    ws.run(g, &seeds, |_| true, |_, _| true, radius_cap, None);
    let owners = (0..g.n()).map(|v| ws.owner(v)).collect();
    (ws.dist.clone(), owners)
}
