use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::connection::{vertex_classes, SequenceLevels};
use crate::error::Result;
use crate::graph::{GeoGraph, SpannerParams, VertexId};
use crate::spanner_gen::greedy_ft_edges;

/// The graph `S_i` for position `i` of a sequence: vertices
/// `V_{i-1} ∪ V_i ∪ V_{i+1}`, their edges `E_{i-1} ∪ E_i ∪ E_{i+1}`, and a
/// fault-tolerant `(1 + eps)`-spanner on each component of `G_{i-2}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialSpanner {
    pub index: usize,
    pub scale: f64,
    /// Local graph; vertex `k` is input vertex `global[k]`.
    pub graph: GeoGraph,
    pub global: Vec<VertexId>,
    /// Per local edge: not an edge of the input graph.
    pub synthetic: Vec<bool>,
}

impl PartialSpanner {
    pub fn local(&self, v: VertexId) -> Option<VertexId> {
        self.global.binary_search(&v).ok()
    }

    /// Builds `S_i`; `None` when it has no vertices.
    pub fn build(g: &GeoGraph, levels: &SequenceLevels, i: usize, eps: f64) -> Result<Option<Self>> {
        let p = g.params;
        let classes = vertex_classes(g, levels)?;
        let wanted = (1u64 << (i - 1)) | (1u64 << i) | (1u64 << (i + 1));
        let global: Vec<VertexId> = (0..g.n()).filter(|&v| classes[v] & wanted != 0).collect();
        if global.is_empty() {
            return Ok(None);
        }
        let local: BTreeMap<VertexId, VertexId> = global.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let mut edges: BTreeMap<(VertexId, VertexId), bool> = BTreeMap::new();
        for (&(a, b), &w) in g.edges().iter().zip(g.weights()) {
            let c = levels.class_of(w);
            if c + 1 >= i && c <= i + 1 {
                edges.insert((local[&a], local[&b]), false);
            }
        }

        // Components of G_{i-2} restricted to the vertex set.
        let low = if i >= 3 { levels.l(i - 2) } else { -1.0 };
        let mut parent: Vec<usize> = (0..g.n()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (&(a, b), &w) in g.edges().iter().zip(g.weights()) {
            if w <= low {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut groups: BTreeMap<usize, Vec<VertexId>> = BTreeMap::new();
        for &v in &global {
            groups.entry(find(&mut parent, v)).or_default().push(v);
        }
        for group in groups.values().filter(|grp| grp.len() > 1) {
            let pts: Vec<_> = group.iter().map(|&v| g.point(v)).collect();
            for (a, b) in greedy_ft_edges(&pts, 1.0 + eps, p.f) {
                let (la, lb) = (local[&group[a]], local[&group[b]]);
                let key = (la.min(lb), la.max(lb));
                edges.entry(key).or_insert(!g.has_edge(group[a], group[b]));
            }
        }
        let synthetic: Vec<bool> = edges.values().copied().collect();
        let params = SpannerParams::new((1.0 + eps) * p.t, p.f, 4.0 * levels.l(i))?;
        let points = global.iter().map(|&v| g.point(v)).collect();
        let graph = GeoGraph::new(points, edges.keys().copied(), params)?;
        Ok(Some(Self {
            index: i,
            scale: levels.l(i),
            graph,
            global,
            synthetic,
        }))
    }

    pub fn is_synthetic(&self, a: VertexId, b: VertexId) -> bool {
        let key = (a.min(b), a.max(b));
        self.graph
            .edges()
            .binary_search(&key)
            .map(|k| self.synthetic[k])
            .unwrap_or(false)
    }
}
