use serde::{Deserialize, Serialize};

use crate::error::{OracleError, Result};
use crate::graph::{FailureSet, GeoGraph, VertexId};

/// Level bookkeeping for one scale sequence `L_1 < ... < L_r`, with
/// `L_0 = 0` and `L_{r+1} = inf`. `G_j` holds the edges of length `<= L_j`
/// and `E_j` the edges with length in `[L_{j-1}, L_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceLevels {
    pub scales: Vec<f64>,
}

impl SequenceLevels {
    pub fn r(&self) -> usize {
        self.scales.len()
    }

    /// `L_j` for `j` in `0..=r+1`.
    pub fn l(&self, j: usize) -> f64 {
        match j {
            0 => 0.0,
            j if j <= self.r() => self.scales[j - 1],
            _ => f64::INFINITY,
        }
    }

    /// The `j` with `w` in `[L_{j-1}, L_j)`.
    pub fn class_of(&self, w: f64) -> usize {
        1 + self.scales.partition_point(|&l| l <= w)
    }

    /// Smallest `j` with `w <= L_j`.
    pub fn join_level(&self, w: f64) -> usize {
        1 + self.scales.partition_point(|&l| l < w)
    }
}

/// Per-vertex bitmask of the classes `j` with `v` in `V_j`.
pub fn vertex_classes(g: &GeoGraph, levels: &SequenceLevels) -> Result<Vec<u64>> {
    if levels.r() + 3 > 64 {
        return Err(OracleError::InvalidParameter(format!(
            "scale sequence with {} elements is too long",
            levels.r()
        )));
    }
    let mut mask = vec![0u64; g.n()];
    for (&(a, b), &w) in g.edges().iter().zip(g.weights()) {
        let bit = 1u64 << levels.class_of(w);
        mask[a] |= bit;
        mask[b] |= bit;
    }
    Ok(mask)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    /// Smallest `j` at which the leaves below are connected in `G_j`.
    pub level: usize,
    pub parent: Option<usize>,
    /// Vertices stored on the edge to the parent.
    pub stored: Vec<VertexId>,
    pub leaf: Option<VertexId>,
    pub children: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProxyFailure {
    /// The pair lies in different components of the input graph.
    DisconnectedInG,
    /// Every stored candidate on the governing tree edge has failed.
    DisconnectedByFailures,
}

/// Merge tree of the components of `G_0 ⊆ G_1 ⊆ ... ⊆ G_{r+1}`. Leaves are
/// vertices `0..n`; a virtual root joins the components of a disconnected graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectionTree {
    pub levels: SequenceLevels,
    pub f: usize,
    pub nodes: Vec<TreeNode>,
    pub root: usize,
    pub virtual_root: bool,
    depth: Vec<u32>,
    first: Vec<u32>,
    /// Sparse table over the Euler tour; entries are node ids.
    table: Vec<Vec<u32>>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

impl ConnectionTree {
    pub fn build(g: &GeoGraph, levels: SequenceLevels, f: usize) -> Result<Self> {
        let n = g.n();
        let classes = vertex_classes(g, &levels)?;
        let r = levels.r();
        let mut nodes: Vec<TreeNode> = (0..n)
            .map(|v| TreeNode {
                level: 0,
                parent: None,
                stored: Vec::new(),
                leaf: Some(v),
                children: Vec::new(),
            })
            .collect();
        let mut uf = UnionFind {
            parent: (0..n).collect(),
        };
        let mut top: Vec<usize> = (0..n).collect();
        let mut members: Vec<Vec<VertexId>> = (0..n).map(|v| vec![v]).collect();

        let mut by_level: Vec<Vec<(VertexId, VertexId)>> = vec![Vec::new(); r + 2];
        for (&(a, b), &w) in g.edges().iter().zip(g.weights()) {
            by_level[levels.join_level(w)].push((a, b));
        }
        let attach = |nodes: &mut Vec<TreeNode>, level: usize, olds: &[usize], top: &[usize], members: &[Vec<VertexId>]| {
            let id = nodes.len();
            let wanted = (1u64 << level) | (1u64 << (level + 1));
            let mut children = Vec::with_capacity(olds.len());
            for &old in olds {
                let child = top[old];
                let mut cand: Vec<VertexId> = members[old].iter().copied().filter(|&v| classes[v] & wanted != 0).collect();
                cand.sort_unstable();
                cand.truncate(f + 1);
                nodes[child].parent = Some(id);
                nodes[child].stored = cand;
                children.push(child);
            }
            nodes.push(TreeNode {
                level,
                parent: None,
                stored: Vec::new(),
                leaf: None,
                children,
            });
            id
        };

        for (j, edges) in by_level.iter().enumerate().skip(1) {
            let pairs: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (uf.find(a), uf.find(b))).collect();
            let mut touched: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
            touched.sort_unstable();
            touched.dedup();
            for &(a, b) in &pairs {
                let (ra, rb) = (uf.find(a), uf.find(b));
                if ra != rb {
                    uf.parent[ra.max(rb)] = ra.min(rb);
                }
            }
            let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
            for &old in &touched {
                groups.entry(uf.find(old)).or_default().push(old);
            }
            for (new_root, olds) in groups {
                if olds.len() < 2 {
                    continue;
                }
                let id = attach(&mut nodes, j, &olds, &top, &members);
                let mut merged = Vec::new();
                for &old in &olds {
                    merged.append(&mut members[old]);
                }
                members[new_root] = merged;
                top[new_root] = id;
            }
        }
        let mut roots: Vec<usize> = (0..n).filter(|&v| uf.find(v) == v).collect();
        roots.sort_unstable();
        let (root, virtual_root) = if roots.len() == 1 {
            (top[roots[0]], false)
        } else {
            (attach(&mut nodes, r + 2, &roots, &top, &members), true)
        };

        let mut tree = Self {
            levels,
            f,
            nodes,
            root,
            virtual_root,
            depth: Vec::new(),
            first: Vec::new(),
            table: Vec::new(),
        };
        tree.index();
        Ok(tree)
    }

    fn index(&mut self) {
        let k = self.nodes.len();
        self.depth = vec![0; k];
        self.first = vec![0; k];
        let mut euler: Vec<u32> = Vec::with_capacity(2 * k);
        let mut stack = vec![(self.root, 0usize)];
        while let Some(&mut (x, ref mut next)) = stack.last_mut() {
            if *next == 0 {
                self.first[x] = euler.len() as u32;
            }
            euler.push(x as u32);
            if *next < self.nodes[x].children.len() {
                let c = self.nodes[x].children[*next];
                *next += 1;
                self.depth[c] = self.depth[x] + 1;
                stack.push((c, 0));
            } else {
                stack.pop();
            }
        }
        let shallower = |a: u32, b: u32, depth: &[u32]| if depth[a as usize] <= depth[b as usize] { a } else { b };
        let mut table = vec![euler];
        let mut span = 1;
        while 2 * span <= table[0].len() {
            let prev = table.last().unwrap();
            let row: Vec<u32> = (0..prev.len() - span)
                .map(|i| shallower(prev[i], prev[i + span], &self.depth))
                .collect();
            table.push(row);
            span *= 2;
        }
        self.table = table;
    }

    pub fn leaf(&self, v: VertexId) -> usize {
        v
    }

    pub fn lca(&self, a: usize, b: usize) -> usize {
        let (mut i, mut j) = (self.first[a] as usize, self.first[b] as usize);
        if i > j {
            std::mem::swap(&mut i, &mut j);
        }
        let k = (usize::BITS - 1 - (j - i + 1).leading_zeros()) as usize;
        let (x, y) = (self.table[k][i], self.table[k][j + 1 - (1 << k)]);
        if self.depth[x as usize] <= self.depth[y as usize] {
            x as usize
        } else {
            y as usize
        }
    }

    /// Child of `ancestor` on the way down to `node`.
    pub fn child_toward(&self, ancestor: usize, node: usize) -> usize {
        let mut x = node;
        while self.nodes[x].parent != Some(ancestor) {
            x = self.nodes[x].parent.expect("ancestor above node");
        }
        x
    }

    /// Non-failed vertex connected to `s` in `G_{i-2}` and lying in
    /// `V_{i-1} ∪ V_i ∪ V_{i+1}`, taken from the stored candidates below `c`.
    pub fn proxy(&self, c: usize, s: VertexId, i: usize, failures: &FailureSet) -> std::result::Result<VertexId, ProxyFailure> {
        if self.virtual_root && c == self.root {
            return Err(ProxyFailure::DisconnectedInG);
        }
        let mut child = self.child_toward(c, self.leaf(s));
        while self.nodes[child].level + 2 > i && self.nodes[child].leaf.is_none() {
            child = self.child_toward(child, self.leaf(s));
        }
        self.nodes[child]
            .stored
            .iter()
            .copied()
            .find(|&p| !failures.contains(p))
            .ok_or(ProxyFailure::DisconnectedByFailures)
    }

    /// Proxies for a pair at sequence position `i` (1-based), after checking
    /// that their lowest common ancestor has level `i - 1` or `i`.
    pub fn proxies(
        &self,
        s: VertexId,
        s2: VertexId,
        i: usize,
        failures: &FailureSet,
    ) -> Result<std::result::Result<(VertexId, VertexId), ProxyFailure>> {
        let c = self.lca(self.leaf(s), self.leaf(s2));
        if self.virtual_root && c == self.root {
            return Ok(Err(ProxyFailure::DisconnectedInG));
        }
        let lv = self.nodes[c].level;
        if lv + 1 != i && lv != i {
            return Err(OracleError::InvalidGraph(format!(
                "pair ({s}, {s2}) at scale index {i} merges at level {lv}; the input is not a spanner"
            )));
        }
        Ok(self
            .proxy(c, s, i, failures)
            .and_then(|p| self.proxy(c, s2, i, failures).map(|q| (p, q))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::general::scales::{effective_m, ScaleSequences};
    use crate::graph::{Point, SpannerParams};
    use crate::spanner_gen::{generate_ft_spanner, Distribution, SpannerSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn components(g: &GeoGraph, max_len: f64) -> Vec<usize> {
        let mut uf = UnionFind {
            parent: (0..g.n()).collect(),
        };
        for (&(a, b), &w) in g.edges().iter().zip(g.weights()) {
            if w <= max_len {
                let (ra, rb) = (uf.find(a), uf.find(b));
                uf.parent[ra] = rb;
            }
        }
        (0..g.n()).map(|v| uf.find(v)).collect()
    }

    fn leaves(tree: &ConnectionTree, x: usize) -> Vec<VertexId> {
        let mut out = Vec::new();
        let mut stack = vec![x];
        while let Some(y) = stack.pop() {
            out.extend(tree.nodes[y].leaf);
            stack.extend(&tree.nodes[y].children);
        }
        out
    }

    fn check_tree(g: &GeoGraph, tree: &ConnectionTree) {
        let classes = vertex_classes(g, &tree.levels).unwrap();
        for (x, node) in tree.nodes.iter().enumerate() {
            if node.leaf.is_some() || (tree.virtual_root && x == tree.root) {
                continue;
            }
            let below = leaves(tree, x);
            let at = components(g, tree.levels.l(node.level));
            assert!(below.iter().all(|&v| at[v] == at[below[0]]));
            let before = components(g, if node.level == 1 { -1.0 } else { tree.levels.l(node.level - 1) });
            assert!(below.iter().any(|&v| before[v] != before[below[0]]));
            let wanted = (1u64 << node.level) | (1u64 << (node.level + 1));
            for &c in &node.children {
                let pool: Vec<_> = leaves(tree, c).into_iter().filter(|&v| classes[v] & wanted != 0).collect();
                assert_eq!(tree.nodes[c].stored.len(), pool.len().min(tree.f + 1));
                assert!(tree.nodes[c].stored.iter().all(|v| pool.contains(v)));
            }
        }
    }

    fn naive_lca(tree: &ConnectionTree, a: usize, b: usize) -> usize {
        let mut up = vec![a];
        while let Some(p) = tree.nodes[*up.last().unwrap()].parent {
            up.push(p);
        }
        let mut x = b;
        loop {
            if up.contains(&x) {
                return x;
            }
            x = tree.nodes[x].parent.unwrap();
        }
    }

    #[test]
    fn tree_invariants_and_lca_levels() {
        for (dist, seed) in [(Distribution::UniformSquare, 1), (Distribution::Hierarchical, 2), (Distribution::Clustered, 3)] {
            let g = generate_ft_spanner(&SpannerSpec::new(45, 1.5, 1, seed, dist).unwrap()).unwrap();
            let m = effective_m(g.m(), 1.5);
            let seqs = ScaleSequences::build(&g, m).unwrap();
            let trees: Vec<_> = seqs
                .sequences
                .iter()
                .map(|s| ConnectionTree::build(&g, SequenceLevels { scales: s.clone() }, 1).unwrap())
                .collect();
            for t in &trees {
                check_tree(&g, t);
                assert!(!t.virtual_root);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..1000 {
                let (s, s2) = (rng.gen_range(0..45), rng.gen_range(0..45));
                if s == s2 {
                    continue;
                }
                let (k, pos, _) = seqs.lookup(g.euclid(s, s2)).unwrap();
                let tree = &trees[k];
                let c = tree.lca(s, s2);
                assert_eq!(c, naive_lca(tree, s, s2));
                let i = pos + 1;
                assert!(tree.nodes[c].level == i || tree.nodes[c].level + 1 == i);
            }
        }
    }

    #[test]
    fn disconnected_graph_gets_virtual_root() {
        let pts = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(10.0, 0.0), Point::new(11.0, 0.0)];
        let g = GeoGraph::new(pts, [(0, 1), (2, 3)], SpannerParams::new(2.0, 0, f64::INFINITY).unwrap()).unwrap();
        let tree = ConnectionTree::build(&g, SequenceLevels { scales: vec![5.0] }, 0).unwrap();
        assert!(tree.virtual_root);
        assert_eq!(tree.nodes[tree.root].level, 3);
        assert_eq!(
            tree.proxies(0, 2, 1, &FailureSet::empty()).unwrap(),
            Err(ProxyFailure::DisconnectedInG)
        );
    }

    #[test]
    fn pigeonhole_candidate_survives() {
        // Hub 0 at the origin with a far cluster {4, 5, 6} linked to 1, 2, 3.
        let mut pts = vec![Point::new(0.0, 0.0), Point::new(0.1, 0.0), Point::new(0.0, 0.1), Point::new(-0.1, 0.0)];
        pts.extend([Point::new(100.0, 0.0), Point::new(100.0, 0.1), Point::new(100.1, 0.0)]);
        let edges = [(0, 1), (0, 2), (0, 3), (1, 4), (2, 5), (3, 6), (4, 5), (4, 6)];
        let g = GeoGraph::new(pts, edges, SpannerParams::new(2.0, 2, f64::INFINITY).unwrap()).unwrap();
        let tree = ConnectionTree::build(&g, SequenceLevels { scales: vec![1.0, 10.0, 1e6] }, 2).unwrap();
        let (p, _) = tree.proxies(0, 4, 3, &FailureSet::from_ids([1, 2])).unwrap().unwrap();
        assert_eq!(p, 3);
        let (p, _) = tree.proxies(0, 4, 3, &FailureSet::empty()).unwrap().unwrap();
        assert_eq!(p, 1);
        assert_eq!(
            tree.proxies(0, 4, 3, &FailureSet::from_ids([1, 2, 3])).unwrap(),
            Err(ProxyFailure::DisconnectedByFailures)
        );
    }
}
