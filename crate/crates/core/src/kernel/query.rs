use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use super::{near_factor, KernelOracle};
use crate::error::{OracleError, Result};
use crate::graph::{DijkstraWorkspace, FailureSet, VertexId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    /// Weight is the length of a replacement path avoiding the failures.
    FtPath,
    /// Endpoints are close in the graph; weight is the fixed short-edge bound.
    Short,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelEdge {
    /// `a < b`.
    pub a: VertexId,
    pub b: VertexId,
    /// Scale level whose rule produced the edge.
    pub level: usize,
    pub weight: f64,
    pub kind: EdgeKind,
    /// For `FtPath` edges, the replacement path from `a` to `b`.
    pub path: Option<Vec<VertexId>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub s: VertexId,
    pub s2: VertexId,
    /// Level `i*` of the query pair.
    pub level: usize,
    /// Sorted.
    pub vertices: Vec<VertexId>,
    /// Sorted by `(a, b, level)`; parallel edges from different levels are kept.
    pub edges: Vec<KernelEdge>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct HeapItem {
    dist: f64,
    vertex: VertexId,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A step along a kernel shortest path: the edge index and traversal direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KernelStep {
    pub edge: usize,
    pub from: VertexId,
    pub to: VertexId,
}

impl Kernel {
    pub fn contains_vertex(&self, v: VertexId) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }

    pub fn contains_edge(&self, e: &KernelEdge) -> bool {
        self.edges
            .binary_search_by(|x| (x.a, x.b, x.level).cmp(&(e.a, e.b, e.level)))
            .map(|i| self.edges[i].kind == e.kind && self.edges[i].weight == e.weight)
            .unwrap_or(false)
    }

    /// Shortest `s -> s'` path in the kernel, as the list of traversed edges.
    pub fn shortest_path(&self) -> Option<(f64, Vec<KernelStep>)> {
        let index: BTreeMap<VertexId, usize> = self.vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let k = self.vertices.len();
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); k];
        for (ei, e) in self.edges.iter().enumerate() {
            let (ia, ib) = (index[&e.a], index[&e.b]);
            adj[ia].push((ib, ei));
            adj[ib].push((ia, ei));
        }
        let (src, dst) = (index[&self.s], index[&self.s2]);
        let mut dist = vec![f64::INFINITY; k];
        let mut via: Vec<Option<(usize, usize)>> = vec![None; k];
        let mut done = vec![false; k];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(HeapItem { dist: 0.0, vertex: src });
        while let Some(HeapItem { dist: d, vertex: x }) = heap.pop() {
            if done[x] {
                continue;
            }
            done[x] = true;
            if x == dst {
                break;
            }
            for &(y, ei) in &adj[x] {
                let nd = d + self.edges[ei].weight;
                if nd < dist[y] {
                    dist[y] = nd;
                    via[y] = Some((x, ei));
                    heap.push(HeapItem { dist: nd, vertex: y });
                }
            }
        }
        if !dist[dst].is_finite() {
            return None;
        }
        let mut steps = Vec::new();
        let mut cur = dst;
        while let Some((prev, ei)) = via[cur] {
            steps.push(KernelStep {
                edge: ei,
                from: self.vertices[prev],
                to: self.vertices[cur],
            });
            cur = prev;
        }
        steps.reverse();
        Some((dist[dst], steps))
    }

    pub fn distance(&self) -> f64 {
        self.shortest_path().map_or(f64::INFINITY, |(d, _)| d)
    }
}

/// Per-query cache of bounded graph distances from kernel vertices.
struct ShortRule<'a> {
    oracle: &'a KernelOracle,
    ws: DijkstraWorkspace,
    cache: BTreeMap<(VertexId, usize), BTreeMap<VertexId, f64>>,
}

impl<'a> ShortRule<'a> {
    fn new(oracle: &'a KernelOracle) -> Self {
        Self {
            oracle,
            ws: DijkstraWorkspace::new(oracle.graph().n()),
            cache: BTreeMap::new(),
        }
    }

    fn radius(&self, j: usize) -> f64 {
        near_factor(self.oracle.t()) * self.oracle.eps_prime * self.oracle.levels.w(j)
    }

    fn within(&mut self, a: VertexId, b: VertexId, j: usize) -> bool {
        let radius = self.radius(j);
        let g = self.oracle.graph();
        let ws = &mut self.ws;
        let ball = self.cache.entry((a, j)).or_insert_with(|| {
            ws.run(g, &[(a, 0.0)], |_| true, |_, _| true, Some(radius), None);
            ws.reached().collect()
        });
        ball.get(&b).is_some_and(|&d| d <= radius)
    }
}

impl KernelOracle {
    fn check_query(&self, s: VertexId, s2: VertexId, failures: &FailureSet) -> Result<usize> {
        let g = self.graph();
        let n0 = self.split.original_n;
        for v in [s, s2] {
            g.check_vertex(v)?;
            if v >= n0 {
                return Err(OracleError::InvalidVertex(v));
            }
        }
        if failures.len() > self.f() {
            return Err(OracleError::TooManyFailures {
                size: failures.len(),
                max: self.f(),
            });
        }
        for x in failures.iter() {
            if x >= n0 {
                return Err(OracleError::InvalidVertex(x));
            }
        }
        for v in [s, s2] {
            if failures.contains(v) {
                return Err(OracleError::FailedQueryVertex(v));
            }
        }
        self.query_level(s, s2)
    }

    /// Edge between `a` and `b` under the level-`j` rule, if any.
    fn rule_edge(
        &self,
        rule: &mut ShortRule<'_>,
        a: VertexId,
        b: VertexId,
        j: usize,
        failures: &FailureSet,
    ) -> Option<KernelEdge> {
        let (a, b) = (a.min(b), a.max(b));
        if let Some(p) = self.ft_path(a, b, j, failures) {
            return Some(KernelEdge {
                a,
                b,
                level: j,
                weight: p.length,
                kind: EdgeKind::FtPath,
                path: Some(p.path),
            });
        }
        rule.within(a, b, j).then(|| KernelEdge {
            a,
            b,
            level: j,
            weight: 40.0 * self.t().powi(3) * self.eps_prime * self.levels.w(j),
            kind: EdgeKind::Short,
            path: None,
        })
    }

    fn single_level_vertices(&self, s: VertexId, s2: VertexId, j: usize, failures: &FailureSet) -> BTreeSet<VertexId> {
        let net = self.net(j);
        let mut vs: BTreeSet<VertexId> = [s, s2, net.closest[s], net.closest[s2]].into_iter().collect();
        for x in failures.iter() {
            vs.extend(self.near.get(x, j).iter().map(|&(p, _)| p));
        }
        vs.retain(|&v| !failures.contains(v));
        vs
    }

    /// Kernel for a moderately far pair: vertices near the failures at level
    /// `i*` plus the query pair and their nearest net vertices.
    pub fn kernel_query(&self, s: VertexId, s2: VertexId, failures: &FailureSet) -> Result<Kernel> {
        let level = self.check_query(s, s2, failures)?;
        let vertices = self.single_level_vertices(s, s2, level, failures);
        let mut rule = ShortRule::new(self);
        let vs: Vec<VertexId> = vertices.into_iter().collect();
        let mut edges = Vec::new();
        for (i, &a) in vs.iter().enumerate() {
            for &b in &vs[i + 1..] {
                edges.extend(self.rule_edge(&mut rule, a, b, level, failures));
            }
        }
        edges.sort_by(|x, y| (x.a, x.b, x.level).cmp(&(y.a, y.b, y.level)));
        Ok(Kernel {
            s,
            s2,
            level,
            vertices: vs,
            edges,
        })
    }

    /// Kernel whose shortest-path edges each carry a replacement path or join
    /// vertices at most `tL/m^6` apart in the surviving graph.
    pub fn pp_kernel_query(&self, s: VertexId, s2: VertexId, failures: &FailureSet) -> Result<Kernel> {
        let top = self.check_query(s, s2, failures)?;
        let mut vertices = self.single_level_vertices(s, s2, top, failures);
        for j in 1..=top {
            for x in failures.iter().chain([s, s2]) {
                vertices.extend(
                    self.near
                        .get(x, j)
                        .iter()
                        .map(|&(p, _)| p)
                        .filter(|&p| !failures.contains(p)),
                );
            }
        }
        let vs: Vec<VertexId> = vertices.into_iter().collect();
        let mut rule = ShortRule::new(self);
        let mut edges: BTreeMap<(VertexId, VertexId, usize), KernelEdge> = BTreeMap::new();
        for (i, &a) in vs.iter().enumerate() {
            for &b in &vs[i + 1..] {
                if let Some(e) = self.rule_edge(&mut rule, a, b, top, failures) {
                    edges.insert((e.a, e.b, e.level), e);
                }
            }
        }
        for j in 1..=top {
            let members: Vec<VertexId> = vs.iter().copied().filter(|&v| self.net(j).contains(v)).collect();
            for (i, &a) in members.iter().enumerate() {
                for &b in &members[i + 1..] {
                    if edges.contains_key(&(a, b, j)) {
                        continue;
                    }
                    if let Some(e) = self.rule_edge(&mut rule, a, b, j, failures) {
                        edges.insert((a, b, j), e);
                    }
                }
            }
        }
        Ok(Kernel {
            s,
            s2,
            level: top,
            vertices: vs,
            edges: edges.into_values().collect(),
        })
    }
}
