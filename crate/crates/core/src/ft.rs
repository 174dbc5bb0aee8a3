//! Replacement-path trees for one vertex pair at one scale.
//!
//! Each node holds a shortest `u`-`v` path in a subgraph of the vicinity
//! graph. The path is cut into segments of length about `tW/4`; the child for
//! a segment additionally loses that segment and a small ball around one of
//! its interior vertices. A failure set is answered by walking down through
//! segments that contain failed vertices.
//!
//! Segments are half-open: segment `j` owns path positions
//! `b_{j-1} + 1 ..= b_j`, so every path vertex other than `u` belongs to
//! exactly one segment. The child removes the owned vertices (never `u` or
//! `v`) and every edge of the closed segment. The root sits at level 1, so a
//! tree has at most `f + 1` levels.

use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{OracleError, Result};
use crate::graph::{DijkstraWorkspace, FailureSet, GeoGraph, VertexId};

pub type NodeId = usize;

pub const DEFAULT_MAX_NODES: usize = 200_000;
pub const DEFAULT_DENSE_THRESHOLD: usize = 1 << 20;

/// Which radius defines the vicinity graph of a pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VicinityMode {
    /// `max(|pu|, |pv|) <= 2t|uv|`.
    #[default]
    Pair,
    /// `max(|pu|, |pv|) <= 2(1+eps)t^2 W` for the level scale `W`.
    Level,
}

impl FromStr for VicinityMode {
    type Err = OracleError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pair" => Ok(VicinityMode::Pair),
            "level" => Ok(VicinityMode::Level),
            other => Err(OracleError::InvalidParameter(format!("unknown vicinity mode {other:?}"))),
        }
    }
}

impl VicinityMode {
    pub fn radius(self, t: f64, uv: f64, eps: f64, level_scale: f64) -> f64 {
        match self {
            VicinityMode::Pair => 2.0 * t * uv,
            VicinityMode::Level => (2.0 * (1.0 + eps) * t * t * level_scale).max(2.0 * t * uv),
        }
    }
}

/// Everything that determines a tree, apart from the graph.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FtSpec {
    pub u: VertexId,
    pub v: VertexId,
    /// Scale parameter; segments have length about `t * w / 4`.
    pub w: f64,
    pub f: usize,
    pub t: f64,
    pub vicinity_radius: f64,
}

impl FtSpec {
    pub fn new(g: &GeoGraph, u: VertexId, v: VertexId, w: f64, f: usize, vicinity_radius: f64) -> Result<Self> {
        g.check_vertex(u)?;
        g.check_vertex(v)?;
        if u == v {
            return Err(OracleError::InvalidParameter(format!("FT pair needs distinct vertices, got {u} twice")));
        }
        if !(w > 0.0) {
            return Err(OracleError::InvalidParameter(format!("FT scale w = {w} must be positive")));
        }
        Ok(Self {
            u,
            v,
            w,
            f,
            t: g.params.t,
            vicinity_radius,
        })
    }

    /// Pair-mode spec: vicinity radius `2t|uv|`.
    pub fn pair(g: &GeoGraph, u: VertexId, v: VertexId, w: f64, f: usize) -> Result<Self> {
        let r = 2.0 * g.params.t * g.euclid(u, v);
        Self::new(g, u, v, w, f, r)
    }

    pub fn in_vicinity(&self, g: &GeoGraph, p: VertexId) -> bool {
        let pt = g.point(p);
        pt.dist(&g.point(self.u)).max(pt.dist(&g.point(self.v))) <= self.vicinity_radius
    }

    pub fn segment_step(&self) -> f64 {
        self.t * self.w / 4.0
    }

    pub fn ball_radius(&self) -> f64 {
        self.t * self.w / 4.0
    }

    pub fn max_path_length(&self, g: &GeoGraph) -> f64 {
        2.0 * self.t * g.euclid(self.u, self.v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FtNode {
    pub level: usize,
    pub parent: Option<NodeId>,
    /// Vertices removed relative to the parent's graph.
    pub removed_vertices: Vec<VertexId>,
    /// Edges (`a < b`) removed relative to the parent's graph.
    pub removed_edges: Vec<(VertexId, VertexId)>,
    pub path: Option<Vec<VertexId>>,
    /// Length of `path`, `+inf` when absent.
    pub length: f64,
    pub leaf: bool,
    /// Path positions closing each segment; the last equals `path.len() - 1`.
    pub boundaries: Vec<usize>,
    /// Ball centre chosen for each segment, if it has an interior vertex.
    pub seeds: Vec<Option<VertexId>>,
    /// Child per segment (empty for leaves).
    pub children: Vec<NodeId>,
}

impl FtNode {
    /// Segment owning path position `pos >= 1`.
    pub fn segment_of_position(&self, pos: usize) -> usize {
        self.boundaries.partition_point(|&b| b < pos)
    }
}

/// `(vertex, node) -> child` lookup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Assistant {
    Sparse(BTreeMap<(VertexId, NodeId), NodeId>),
    Dense {
        vicinity: Vec<VertexId>,
        table: Vec<u32>,
    },
}

impl Assistant {
    pub fn child(&self, vertex: VertexId, node: NodeId) -> Option<NodeId> {
        match self {
            Assistant::Sparse(map) => map.get(&(vertex, node)).copied(),
            Assistant::Dense { vicinity, table } => {
                let local = vicinity.binary_search(&vertex).ok()?;
                let c = table[node * vicinity.len() + local];
                (c != u32::MAX).then_some(c as NodeId)
            }
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self, Assistant::Dense { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FtLimits {
    pub max_nodes: usize,
    /// Dense assistant when `|vicinity| * #nodes` is at most this.
    pub dense_threshold: usize,
}

impl Default for FtLimits {
    fn default() -> Self {
        Self {
            max_nodes: DEFAULT_MAX_NODES,
            dense_threshold: DEFAULT_DENSE_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FtTree {
    pub spec: FtSpec,
    pub nodes: Vec<FtNode>,
    pub assistant: Assistant,
    pub vicinity_size: usize,
}

/// Result of a failure query against a tree.
#[derive(Clone, Debug, PartialEq)]
pub struct FtPath {
    pub path: Vec<VertexId>,
    pub length: f64,
    pub level: usize,
}

/// Cumulative removal state of the node being evaluated.
struct Removal {
    count: Vec<u32>,
    edges: Vec<(VertexId, VertexId)>,
}

impl Removal {
    fn new(n: usize) -> Self {
        Self {
            count: vec![0; n],
            edges: Vec::new(),
        }
    }

    fn apply(&mut self, vertices: &[VertexId], edges: &[(VertexId, VertexId)]) {
        for &x in vertices {
            self.count[x] += 1;
        }
        self.edges.extend_from_slice(edges);
    }

    fn revert(&mut self, vertices: &[VertexId], edges: &[(VertexId, VertexId)]) {
        for &x in vertices {
            self.count[x] -= 1;
        }
        self.edges.truncate(self.edges.len() - edges.len());
    }

    fn edge_removed(&self, a: VertexId, b: VertexId) -> bool {
        let e = (a.min(b), a.max(b));
        self.edges.contains(&e)
    }
}

/// Shared machinery for building and for on-demand descent.
struct Evaluator<'g> {
    g: &'g GeoGraph,
    spec: FtSpec,
    ws: DijkstraWorkspace,
    ball_ws: DijkstraWorkspace,
    balls: HashMap<VertexId, Vec<VertexId>>,
}

impl<'g> Evaluator<'g> {
    fn new(g: &'g GeoGraph, spec: FtSpec) -> Self {
        Self {
            g,
            spec,
            ws: DijkstraWorkspace::new(g.n()),
            ball_ws: DijkstraWorkspace::new(g.n()),
            balls: HashMap::new(),
        }
    }

    fn shortest(&mut self, removal: &Removal) -> (Option<Vec<VertexId>>, f64) {
        let (g, spec) = (self.g, self.spec);
        self.ws.run(
            g,
            &[(spec.u, 0.0)],
            |p| removal.count[p] == 0 && spec.in_vicinity(g, p),
            |a, b| !removal.edge_removed(a, b),
            None,
            Some(spec.v),
        );
        match self.ws.path_to(spec.v) {
            Some(p) => (Some(p), self.ws.dist(spec.v)),
            None => (None, f64::INFINITY),
        }
    }

    /// Vertices of the vicinity within `tW/4` of `centre` in the whole graph.
    fn ball(&mut self, centre: VertexId) -> Vec<VertexId> {
        if let Some(b) = self.balls.get(&centre) {
            return b.clone();
        }
        let (g, spec) = (self.g, self.spec);
        let ws = &mut self.ball_ws;
        ws.run(g, &[(centre, 0.0)], |_| true, |_, _| true, Some(spec.ball_radius()), None);
        let mut ball: Vec<VertexId> = ws
            .reached()
            .map(|(p, _)| p)
            .filter(|&p| p != spec.u && p != spec.v && spec.in_vicinity(g, p))
            .collect();
        ball.sort_unstable();
        self.balls.insert(centre, ball.clone());
        ball
    }

    /// Removal delta of the child for segment `seg` of `path`.
    fn child_delta(
        &mut self,
        path: &[VertexId],
        boundaries: &[usize],
        seeds: &[Option<VertexId>],
        seg: usize,
    ) -> (Vec<VertexId>, Vec<(VertexId, VertexId)>) {
        let start = if seg == 0 { 0 } else { boundaries[seg - 1] };
        let end = boundaries[seg];
        let mut vertices: Vec<VertexId> = path[start + 1..=end]
            .iter()
            .copied()
            .filter(|&p| p != self.spec.u && p != self.spec.v)
            .collect();
        if let Some(c) = seeds[seg] {
            vertices.extend(self.ball(c));
        }
        vertices.sort_unstable();
        vertices.dedup();
        let edges = path[start..=end]
            .windows(2)
            .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
            .collect();
        (vertices, edges)
    }

    fn segments(&self, path: &[VertexId]) -> (Vec<usize>, Vec<Option<VertexId>>) {
        let boundaries = segment_boundaries(self.g, path, self.spec.segment_step());
        let mut seeds = Vec::with_capacity(boundaries.len());
        let mut start = 0;
        for &end in &boundaries {
            let interior = end.saturating_sub(start + 1);
            seeds.push((interior > 0).then(|| path[start + 1 + (interior - 1) / 2]));
            start = end;
        }
        (boundaries, seeds)
    }

    fn is_leaf(&self, level: usize, length: f64) -> bool {
        level >= self.spec.f + 1 || !length.is_finite() || length > self.spec.max_path_length(self.g)
    }

    fn make_node(
        &mut self,
        level: usize,
        parent: Option<NodeId>,
        removed_vertices: Vec<VertexId>,
        removed_edges: Vec<(VertexId, VertexId)>,
        removal: &Removal,
    ) -> FtNode {
        let (path, length) = self.shortest(removal);
        let leaf = self.is_leaf(level, length);
        let (boundaries, seeds) = match (&path, leaf) {
            (Some(p), false) => self.segments(p),
            _ => (Vec::new(), Vec::new()),
        };
        FtNode {
            level,
            parent,
            removed_vertices,
            removed_edges,
            path,
            length,
            leaf,
            boundaries,
            seeds,
            children: Vec::new(),
        }
    }
}

/// Path positions closing each segment: position `k` closes one when some
/// integer `i >= 1` has `D_k <= i * step < D_{k+1}` (prefix lengths `D`), and
/// the last position always does. Empty segments never arise.
pub fn segment_boundaries(g: &GeoGraph, path: &[VertexId], step: f64) -> Vec<usize> {
    let last = path.len().saturating_sub(1);
    let mut prefix = Vec::with_capacity(path.len());
    let mut acc = 0.0;
    prefix.push(0.0);
    for w in path.windows(2) {
        acc += g.edge_weight(w[0], w[1]).expect("path edge");
        prefix.push(acc);
    }
    let mut out = Vec::new();
    for k in 1..last {
        let (dk, next) = (prefix[k], prefix[k + 1]);
        let mut i = ((dk / step).ceil()).max(1.0);
        while i > 1.0 && (i - 1.0) * step >= dk {
            i -= 1.0;
        }
        while i * step < dk {
            i += 1.0;
        }
        if i * step < next {
            out.push(k);
        }
    }
    if last > 0 {
        out.push(last);
    }
    out
}

/// Builds the full tree.
pub fn build_ft(g: &GeoGraph, spec: FtSpec, limits: FtLimits) -> Result<FtTree> {
    let mut ev = Evaluator::new(g, spec);
    let mut removal = Removal::new(g.n());
    let root = ev.make_node(1, None, Vec::new(), Vec::new(), &removal);
    let mut nodes = vec![root];
    expand(&mut ev, &mut nodes, 0, &mut removal, limits.max_nodes)?;

    let vicinity: Vec<VertexId> = (0..g.n()).filter(|&p| spec.in_vicinity(g, p)).collect();
    let vicinity_size = vicinity.len();
    let assistant = if vicinity.len().saturating_mul(nodes.len()) <= limits.dense_threshold {
        let mut table = vec![u32::MAX; vicinity.len() * nodes.len()];
        for (id, node) in nodes.iter().enumerate() {
            for_each_assignment(node, |x, child| {
                let local = vicinity.binary_search(&x).expect("path vertex in vicinity");
                table[id * vicinity.len() + local] = child as u32;
            });
        }
        Assistant::Dense { vicinity, table }
    } else {
        let mut map = BTreeMap::new();
        for (id, node) in nodes.iter().enumerate() {
            for_each_assignment(node, |x, child| {
                map.insert((x, id), child);
            });
        }
        Assistant::Sparse(map)
    };
    Ok(FtTree {
        spec,
        nodes,
        assistant,
        vicinity_size,
    })
}

fn for_each_assignment(node: &FtNode, mut f: impl FnMut(VertexId, NodeId)) {
    if node.leaf {
        return;
    }
    let path = node.path.as_ref().expect("internal node has a path");
    let mut start = 0;
    for (seg, &end) in node.boundaries.iter().enumerate() {
        for &x in &path[start + 1..=end] {
            f(x, node.children[seg]);
        }
        start = end;
    }
}

fn expand(
    ev: &mut Evaluator<'_>,
    nodes: &mut Vec<FtNode>,
    id: NodeId,
    removal: &mut Removal,
    max_nodes: usize,
) -> Result<()> {
    if nodes[id].leaf {
        return Ok(());
    }
    let path = nodes[id].path.clone().expect("internal node has a path");
    let boundaries = nodes[id].boundaries.clone();
    let seeds = nodes[id].seeds.clone();
    let level = nodes[id].level + 1;
    for seg in 0..boundaries.len() {
        if nodes.len() >= max_nodes {
            return Err(OracleError::NodeCapExceeded {
                u: ev.spec.u,
                v: ev.spec.v,
                level,
                cap: max_nodes,
            });
        }
        let (dv, de) = ev.child_delta(&path, &boundaries, &seeds, seg);
        removal.apply(&dv, &de);
        let child = ev.make_node(level, Some(id), dv, de, removal);
        let cid = nodes.len();
        nodes.push(child);
        nodes[id].children.push(cid);
        let res = expand(ev, nodes, cid, removal, max_nodes);
        let (dv, de) = (nodes[cid].removed_vertices.clone(), nodes[cid].removed_edges.clone());
        removal.revert(&dv, &de);
        res?;
    }
    Ok(())
}

fn first_failed_position(path: &[VertexId], failures: &FailureSet) -> Option<usize> {
    failures
        .iter()
        .filter_map(|x| path.iter().position(|&p| p == x))
        .next()
}

impl FtTree {
    pub fn root(&self) -> &FtNode {
        &self.nodes[0]
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.level).max().unwrap_or(0)
    }

    /// Walks down from the root, following the segment of the first failed
    /// vertex (in id order) on each stored path.
    pub fn query(&self, failures: &FailureSet) -> Option<FtPath> {
        let mut id = 0;
        loop {
            let node = &self.nodes[id];
            let path = node.path.as_ref()?;
            let hit = failures.iter().find(|&x| path.contains(&x));
            match hit {
                None => {
                    return Some(FtPath {
                        path: path.clone(),
                        length: node.length,
                        level: node.level,
                    })
                }
                Some(_) if node.leaf => return None,
                Some(_) => {
                    let next = failures
                        .iter()
                        .find_map(|x| self.assistant.child(x, id))
                        .expect("assistant covers every path vertex but u");
                    id = next;
                }
            }
        }
    }

    /// Cumulative removed vertices and edges of `id`, root first.
    pub fn removed_at(&self, id: NodeId) -> (Vec<VertexId>, Vec<(VertexId, VertexId)>) {
        let mut vs = Vec::new();
        let mut es = Vec::new();
        let mut cur = Some(id);
        while let Some(c) = cur {
            vs.extend_from_slice(&self.nodes[c].removed_vertices);
            es.extend_from_slice(&self.nodes[c].removed_edges);
            cur = self.nodes[c].parent;
        }
        vs.sort_unstable();
        vs.dedup();
        es.sort_unstable();
        es.dedup();
        (vs, es)
    }
}

/// Answers a failure query without materializing the tree: evaluates only
/// the nodes on the descent, which are identical to the built tree's.
pub fn ft_query_on_demand(g: &GeoGraph, spec: FtSpec, failures: &FailureSet) -> Option<FtPath> {
    let mut ev = Evaluator::new(g, spec);
    let mut removal = Removal::new(g.n());
    let mut node = ev.make_node(1, None, Vec::new(), Vec::new(), &removal);
    loop {
        let path = node.path.as_ref()?;
        let Some(_) = first_failed_position(path, failures) else {
            return Some(FtPath {
                path: path.clone(),
                length: node.length,
                level: node.level,
            });
        };
        if node.leaf {
            return None;
        }
        let pos = failures
            .iter()
            .find_map(|x| path.iter().skip(1).position(|&p| p == x).map(|i| i + 1))
            .expect("failed vertex on path is not u");
        let seg = node.segment_of_position(pos);
        let path = path.clone();
        let (dv, de) = ev.child_delta(&path, &node.boundaries, &node.seeds, seg);
        removal.apply(&dv, &de);
        node = ev.make_node(node.level + 1, None, dv, de, &removal);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::params;
    use crate::graph::{ground_truth_distance, shortest_safe_path, Point};
    use crate::spanner_gen::{generate_ft_spanner, Distribution, SpannerSpec};
    use proptest::prelude::*;

    fn grid(cols: usize, rows: usize) -> GeoGraph {
        let pts = (0..rows * cols)
            .map(|i| Point::new((i % cols) as f64, (i / cols) as f64))
            .collect();
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                if c + 1 < cols {
                    edges.push((i, i + 1));
                }
                if r + 1 < rows {
                    edges.push((i, i + cols));
                }
            }
        }
        GeoGraph::new(pts, edges, params()).unwrap()
    }

    /// Independent Bellman-Ford on the node's reconstructed graph.
    fn reference_length(g: &GeoGraph, tree: &FtTree, id: NodeId) -> f64 {
        let (vs, es) = tree.removed_at(id);
        let spec = tree.spec;
        let alive = |p: VertexId| spec.in_vicinity(g, p) && vs.binary_search(&p).is_err();
        let mut d = vec![f64::INFINITY; g.n()];
        d[spec.u] = 0.0;
        for _ in 0..g.n() {
            let mut changed = false;
            for (k, &(a, b)) in g.edges().iter().enumerate() {
                if !alive(a) || !alive(b) || es.binary_search(&(a, b)).is_ok() {
                    continue;
                }
                let w = g.weights()[k];
                if d[a] + w < d[b] {
                    d[b] = d[a] + w;
                    changed = true;
                }
                if d[b] + w < d[a] {
                    d[a] = d[b] + w;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        d[spec.v]
    }

    #[test]
    fn boundaries_follow_prefix_lengths() {
        let g = grid(8, 1);
        let path: Vec<_> = (0..8).collect();
        assert_eq!(segment_boundaries(&g, &path, 2.0), vec![2, 4, 6, 7]);
        assert_eq!(segment_boundaries(&g, &path, 0.5), vec![1, 2, 3, 4, 5, 6, 7]);
        assert_eq!(segment_boundaries(&g, &path, 100.0), vec![7]);
        assert_eq!(segment_boundaries(&g, &[0, 1], 0.3), vec![1]);
    }

    #[test]
    fn adjacent_pair_with_no_failures_budget() {
        let g = grid(3, 1);
        let spec = FtSpec::pair(&g, 0, 1, 16.0, 0).unwrap();
        let tree = build_ft(&g, spec, FtLimits::default()).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.root().path, Some(vec![0, 1]));
        assert!(tree.root().leaf);
    }

    #[test]
    fn empty_failure_set_returns_root_path() {
        let g = grid(5, 5);
        let spec = FtSpec::pair(&g, 0, 24, 1.0, 1).unwrap();
        let tree = build_ft(&g, spec, FtLimits::default()).unwrap();
        let got = tree.query(&FailureSet::empty()).unwrap();
        assert_eq!(Some(got.path), tree.root().path.clone());
        assert_eq!(got.length, 8.0);
    }

    #[test]
    fn failures_outside_vicinity_are_ignored() {
        let g = grid(9, 9);
        let spec = FtSpec::pair(&g, 0, 1, 1.0, 1).unwrap();
        let tree = build_ft(&g, spec, FtLimits::default()).unwrap();
        let far = FailureSet::from_ids([80]);
        assert!(!spec.in_vicinity(&g, 80));
        assert_eq!(tree.query(&far).unwrap().path, vec![0, 1]);
    }

    #[test]
    fn single_edge_path_child_drops_the_edge() {
        let g = grid(3, 2);
        let spec = FtSpec::pair(&g, 0, 1, 0.5, 1).unwrap();
        let tree = build_ft(&g, spec, FtLimits::default()).unwrap();
        let child = &tree.nodes[tree.root().children[0]];
        assert_eq!(child.removed_edges, vec![(0, 1)]);
        assert_eq!(child.path, Some(vec![0, 3, 4, 1]));
    }

    #[test]
    fn tiny_scale_gives_exact_replacement_paths() {
        let spec = SpannerSpec::new(50, 1.5, 2, 4, Distribution::UniformSquare).unwrap();
        let g = generate_ft_spanner(&spec).unwrap();
        let (u, v) = (3, 41);
        let fspec = FtSpec::new(&g, u, v, 1e-6, 2, f64::INFINITY).unwrap();
        let tree = build_ft(&g, fspec, FtLimits::default()).unwrap();
        for a in 0..g.n() {
            for b in [a, (a * 7 + 1) % g.n()] {
                let fs = FailureSet::from_ids([a, b]);
                if fs.contains(u) || fs.contains(v) {
                    continue;
                }
                let exact = ground_truth_distance(&g, u, v, &fs).unwrap();
                let got = tree.query(&fs).map_or(f64::INFINITY, |p| p.length);
                assert!(
                    (exact.is_infinite() && got.is_infinite()) || (got - exact).abs() <= 1e-9 * exact,
                    "F={:?}: {got} vs {exact}",
                    fs.as_slice()
                );
            }
        }
    }

    #[test]
    fn node_cap_is_enforced() {
        let g = grid(6, 6);
        let spec = FtSpec::new(&g, 0, 35, 0.1, 3, f64::INFINITY).unwrap();
        let err = build_ft(
            &g,
            spec,
            FtLimits {
                max_nodes: 10,
                ..FtLimits::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, OracleError::NodeCapExceeded { cap: 10, .. }));
    }

    #[test]
    fn sparse_and_dense_assistants_agree() {
        let g = grid(5, 4);
        let spec = FtSpec::pair(&g, 0, 19, 1.0, 2).unwrap();
        let dense = build_ft(&g, spec, FtLimits::default()).unwrap();
        let sparse = build_ft(
            &g,
            spec,
            FtLimits {
                dense_threshold: 0,
                ..FtLimits::default()
            },
        )
        .unwrap();
        assert!(dense.assistant.is_dense() && !sparse.assistant.is_dense());
        for x in 0..g.n() {
            for id in 0..dense.nodes.len() {
                assert_eq!(dense.assistant.child(x, id), sparse.assistant.child(x, id));
            }
        }
    }

    fn check_tree(g: &GeoGraph, tree: &FtTree) {
        let spec = tree.spec;
        assert!(tree.depth() <= spec.f + 1);
        let bound = (8.0 * spec.t * g.euclid(spec.u, spec.v) / spec.w).powi(spec.f as i32 + 1);
        assert!(tree.nodes.len() as f64 <= bound.max(1.0));
        for (id, node) in tree.nodes.iter().enumerate() {
            if let Some(p) = &node.path {
                assert_eq!(p.first(), Some(&spec.u));
                assert_eq!(p.last(), Some(&spec.v));
                let len = g.walk_length(p).unwrap();
                assert!((len - node.length).abs() <= 1e-9 * len);
                let reference = reference_length(g, tree, id);
                assert!((reference - node.length).abs() <= 1e-9 * reference);
                if !node.leaf {
                    assert!(node.length <= spec.max_path_length(g));
                    let children = node.children.len() as f64;
                    assert!(children <= 8.0 * spec.t * g.euclid(spec.u, spec.v) / spec.w + 1e-9);
                }
            } else {
                assert!(node.leaf);
            }
            if let Some(pid) = node.parent {
                assert!(node.length >= tree.nodes[pid].length * (1.0 - 1e-12));
                assert_eq!(node.level, tree.nodes[pid].level + 1);
            }
        }
    }

    #[test]
    fn built_trees_satisfy_structural_bounds() {
        let spec = SpannerSpec::new(60, 1.5, 1, 8, Distribution::UniformSquare).unwrap();
        let g = generate_ft_spanner(&spec).unwrap();
        for (u, v) in [(0, 1), (5, 40), (12, 33), (7, 59)] {
            let uv = g.euclid(u, v);
            for w in [uv / 4.0, uv / 2.0, uv] {
                let tree = build_ft(&g, FtSpec::pair(&g, u, v, w, 1).unwrap(), FtLimits::default()).unwrap();
                check_tree(&g, &tree);
            }
        }
    }

    #[test]
    fn safe_path_domination_on_grid() {
        // Grid with diagonals: longest edge D = sqrt(2), W = 4D, |uv| well above tW.
        let cols = 40;
        let pts: Vec<_> = (0..cols * cols)
            .map(|i| Point::new((i % cols) as f64, (i / cols) as f64))
            .collect();
        let mut edges = Vec::new();
        for r in 0..cols {
            for c in 0..cols {
                let i = r * cols + c;
                if c + 1 < cols {
                    edges.push((i, i + 1));
                }
                if r + 1 < cols {
                    edges.push((i, i + cols));
                    if c + 1 < cols {
                        edges.push((i, i + cols + 1));
                    }
                }
            }
        }
        let g = GeoGraph::new(pts, edges, params()).unwrap();
        let w = 4.0 * 2f64.sqrt();
        let t = g.params.t;
        let at = |c: usize, r: usize| r * cols + c;
        let (u, v) = (at(2, 20), at(37, 20));
        let spec = FtSpec::pair(&g, u, v, w, 2).unwrap();
        let mut checked = 0;
        for fs in [
            vec![at(19, 20)],
            vec![at(18, 20), at(19, 9)],
            vec![at(16, 20), at(25, 30)],
            vec![at(20, 21), at(20, 19)],
        ] {
            let fs = FailureSet::from_ids(fs);
            let (len, _) = shortest_safe_path(&g, u, v, &fs, t, w).unwrap().expect("safe path");
            assert!(len <= 2.0 * t * g.euclid(u, v));
            checked += 1;
            let got = ft_query_on_demand(&g, spec, &fs).expect("FT-path exists");
            assert!(got.length <= len * (1.0 + 1e-9));
            assert!(got.path.iter().all(|&x| !fs.contains(x)));
        }
        assert_eq!(checked, 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn on_demand_matches_built_tree(seed in 0u64..500, a in 0usize..40, b in 0usize..40, c in 0usize..40, scale in 0.05f64..1.5) {
            let spec = SpannerSpec::new(40, 1.5, 2, seed, Distribution::Clustered).unwrap();
            let g = generate_ft_spanner(&spec).unwrap();
            let (u, v) = (seed as usize % 40, (seed as usize * 13 + 7) % 40);
            prop_assume!(u != v);
            let fspec = FtSpec::pair(&g, u, v, g.euclid(u, v) * scale, 2).unwrap();
            let tree = build_ft(&g, fspec, FtLimits::default()).unwrap();
            let fs = FailureSet::from_ids([a, b, c].into_iter().filter(|&x| x != u && x != v).take(2));
            let built = tree.query(&fs);
            let lazy = ft_query_on_demand(&g, fspec, &fs);
            prop_assert_eq!(&built, &lazy);
            if let Some(p) = built {
                prop_assert!(p.path.iter().all(|&x| !fs.contains(x)));
            }
        }
    }
}
