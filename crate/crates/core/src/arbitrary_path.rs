//! Connectivity and arbitrary-path queries under vertex failures, on the
//! subgraph of edges up to a length threshold.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::graph::{FailureSet, GeoGraph, VertexId};

const NONE: usize = usize::MAX;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathOracle {
    base: GeoGraph,
    max_len: f64,
    failures: FailureSet,
    label: Vec<usize>,
    parent: Vec<usize>,
    depth: Vec<u32>,
}

impl PathOracle {
    /// Oracle over the edges of `g` of length at most `max_len`.
    pub fn build(g: &GeoGraph, max_len: f64) -> Self {
        let base = g.filter_edges(|_, _, w| w <= max_len);
        let mut o = Self {
            base,
            max_len,
            failures: FailureSet::empty(),
            label: Vec::new(),
            parent: Vec::new(),
            depth: Vec::new(),
        };
        o.activate(&FailureSet::empty());
        o
    }

    pub fn base(&self) -> &GeoGraph {
        &self.base
    }

    pub fn max_len(&self) -> f64 {
        self.max_len
    }

    /// Relabels components of `base - failures` with a BFS forest rooted at
    /// the smallest id of each component.
    pub fn activate(&mut self, failures: &FailureSet) {
        let n = self.base.n();
        self.failures = failures.clone();
        self.label = vec![NONE; n];
        self.parent = vec![NONE; n];
        self.depth = vec![0; n];
        let dead = failures.mask(n);
        let mut queue = VecDeque::new();
        for root in 0..n {
            if dead[root] || self.label[root] != NONE {
                continue;
            }
            self.label[root] = root;
            queue.push_back(root);
            while let Some(x) = queue.pop_front() {
                for &(y, _) in self.base.neighbors(x) {
                    if dead[y] || self.label[y] != NONE {
                        continue;
                    }
                    self.label[y] = root;
                    self.parent[y] = x;
                    self.depth[y] = self.depth[x] + 1;
                    queue.push_back(y);
                }
            }
        }
    }

    pub fn failures(&self) -> &FailureSet {
        &self.failures
    }

    /// Component label of `v` in `base - F`; `None` for failed vertices.
    pub fn component(&self, v: VertexId) -> Option<VertexId> {
        (self.label[v] != NONE).then_some(self.label[v])
    }

    pub fn connected(&self, u: VertexId, v: VertexId) -> bool {
        self.component(u).is_some() && self.component(u) == self.component(v)
    }

    /// A failure-free path from `u` to `v` through the BFS forest.
    pub fn any_path(&self, u: VertexId, v: VertexId) -> Option<Vec<VertexId>> {
        if !self.connected(u, v) {
            return None;
        }
        let (mut a, mut b) = (u, v);
        let mut up = vec![a];
        let mut down = vec![b];
        while self.depth[a] > self.depth[b] {
            a = self.parent[a];
            up.push(a);
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b];
            down.push(b);
        }
        while a != b {
            a = self.parent[a];
            b = self.parent[b];
            up.push(a);
            down.push(b);
        }
        down.pop();
        up.extend(down.into_iter().rev());
        Some(up)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::{params, path_graph};
    use crate::graph::Point;
    use crate::spanner_gen::{generate_ft_spanner, Distribution, SpannerSpec};
    use proptest::prelude::*;

    struct UnionFind(Vec<usize>);

    impl UnionFind {
        fn find(&mut self, x: usize) -> usize {
            if self.0[x] != x {
                let r = self.find(self.0[x]);
                self.0[x] = r;
            }
            self.0[x]
        }
        fn union(&mut self, a: usize, b: usize) {
            let (ra, rb) = (self.find(a), self.find(b));
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }

    fn star(leaves: usize) -> GeoGraph {
        let mut pts = vec![Point::new(0.0, 0.0)];
        pts.extend((0..leaves).map(|i| {
            let a = i as f64 * std::f64::consts::TAU / leaves as f64;
            Point::new(a.cos(), a.sin())
        }));
        GeoGraph::new(pts, (1..=leaves).map(|i| (0, i)), params()).unwrap()
    }

    #[test]
    fn threshold_extremes() {
        let g = path_graph(5);
        let o = PathOracle::build(&g, 0.0);
        assert_eq!(o.base().m(), 0);
        assert!(!o.connected(0, 1));
        assert_eq!(o.any_path(2, 2), Some(vec![2]));
        let o = PathOracle::build(&g, f64::INFINITY);
        assert_eq!(o.base().m(), g.m());
        assert_eq!(o.any_path(4, 0), Some(vec![4, 3, 2, 1, 0]));
    }

    #[test]
    fn star_with_failed_hub() {
        let mut o = PathOracle::build(&star(6), f64::INFINITY);
        assert!(o.connected(1, 4));
        o.activate(&FailureSet::from_ids([0]));
        for a in 1..=6 {
            for b in 1..=6 {
                assert_eq!(o.connected(a, b), a == b);
            }
        }
        assert_eq!(o.component(0), None);
    }

    #[test]
    fn filter_matches_direct_comparison() {
        let spec = SpannerSpec::new(60, 1.5, 1, 3, Distribution::UniformSquare).unwrap();
        let g = generate_ft_spanner(&spec).unwrap();
        let cut = g.max_edge_length() / 2.0;
        let o = PathOracle::build(&g, cut);
        let want: Vec<_> = g
            .edges()
            .iter()
            .zip(g.weights())
            .filter(|(_, &w)| w <= cut)
            .map(|(&e, _)| e)
            .collect();
        assert_eq!(o.base().edges(), &want[..]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn labels_match_union_find(seed in 0u64..1000, k in 0usize..4, cut in 0.3f64..2.0) {
            let spec = SpannerSpec::new(40, 2.0, 0, seed, Distribution::UniformSquare).unwrap();
            let g = generate_ft_spanner(&spec).unwrap();
            let failures = FailureSet::from_ids((0..k).map(|i| (seed as usize * 7 + i * 13) % 40));
            let mut o = PathOracle::build(&g, cut);
            o.activate(&failures);
            let mut uf = UnionFind((0..40).collect());
            for (&(a, b), &w) in g.edges().iter().zip(g.weights()) {
                if w <= cut && !failures.contains(a) && !failures.contains(b) {
                    uf.union(a, b);
                }
            }
            for u in 0..40 {
                for v in 0..40 {
                    let alive = !failures.contains(u) && !failures.contains(v);
                    let want = alive && uf.find(u) == uf.find(v);
                    prop_assert_eq!(o.connected(u, v), want);
                    if let Some(p) = o.any_path(u, v) {
                        prop_assert!(want);
                        prop_assert_eq!((p[0], *p.last().unwrap()), (u, v));
                        prop_assert!(p.iter().all(|&x| !failures.contains(x) && o.component(x) == o.component(u)));
                        prop_assert!(o.base().walk_length(&p).is_some());
                    } else {
                        prop_assert!(!want);
                    }
                }
            }
        }
    }
}
