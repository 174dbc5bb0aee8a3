use serde::{Deserialize, Serialize};

use super::{DijkstraWorkspace, GeoGraph, VertexId};

/// An r-net under graph distance: members are pairwise at least `r` apart and
/// every vertex has a member within `r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Net {
    pub r: f64,
    /// Sorted member ids.
    pub members: Vec<VertexId>,
    /// Nearest member of each vertex (smallest id on ties).
    pub closest: Vec<VertexId>,
    /// Graph distance to `closest`.
    pub closest_dist: Vec<f64>,
}

impl Net {
    pub fn contains(&self, v: VertexId) -> bool {
        self.members.binary_search(&v).is_ok()
    }
}

/// Greedy r-net, scanning vertices in id order.
pub fn build_net(g: &GeoGraph, r: f64) -> Net {
    build_net_extending(g, r, &[])
}

/// Greedy r-net containing `seeds`, which must already be pairwise `>= r`
/// apart. Seeds from a coarser net make the nets nested.
pub fn build_net_extending(g: &GeoGraph, r: f64, seeds: &[VertexId]) -> Net {
    assert!(r > 0.0, "net radius must be positive");
    let n = g.n();
    let mut ws = DijkstraWorkspace::new(n);
    let mut near = vec![f64::INFINITY; n];
    let mut is_member = vec![false; n];
    let starts: Vec<_> = seeds.iter().map(|&s| (s, 0.0)).collect();
    ws.run(g, &starts, |_| true, |_, _| true, Some(r), None);
    for (v, d) in ws.reached() {
        near[v] = d;
    }
    for &s in seeds {
        is_member[s] = true;
    }
    for x in 0..n {
        if is_member[x] || near[x] < r {
            continue;
        }
        // `near[x] >= r`: x is far enough from every member so far.
        is_member[x] = true;
        ws.run(g, &[(x, 0.0)], |_| true, |_, _| true, Some(r), None);
        for (v, d) in ws.reached() {
            if d < near[v] {
                near[v] = d;
            }
        }
    }
    let members: Vec<VertexId> = (0..n).filter(|&v| is_member[v]).collect();
    let seeds_all: Vec<_> = members.iter().map(|&s| (s, 0.0)).collect();
    ws.run(g, &seeds_all, |_| true, |_, _| true, None, None);
    let closest = (0..n).map(|v| ws.owner(v).unwrap_or(v)).collect();
    let closest_dist = (0..n).map(|v| ws.dist(v)).collect();
    Net {
        r,
        members,
        closest,
        closest_dist,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::path_graph;
    use crate::graph::{dijkstra, FailureSet};
    use crate::spanner_gen::{generate_ft_spanner, Distribution, SpannerSpec};

    fn check_invariants(g: &GeoGraph, net: &Net) {
        let all = (0..g.n())
            .map(|v| dijkstra(g, v, &FailureSet::empty(), None).unwrap().dist)
            .collect::<Vec<_>>();
        for (i, &a) in net.members.iter().enumerate() {
            for &b in &net.members[i + 1..] {
                assert!(all[a][b] >= net.r * (1.0 - 1e-9), "members {a} {b} at {}", all[a][b]);
            }
        }
        for v in 0..g.n() {
            let best = net
                .members
                .iter()
                .map(|&m| all[v][m])
                .fold(f64::INFINITY, f64::min);
            assert!(best <= net.r * (1.0 + 1e-12));
            assert!((best - net.closest_dist[v]).abs() <= 1e-9 * best.max(1e-300));
            assert!((all[v][net.closest[v]] - best).abs() <= 1e-9 * best.max(1e-300));
        }
    }

    #[test]
    fn single_vertex() {
        let g = path_graph(1);
        assert_eq!(build_net(&g, 3.0).members, vec![0]);
    }

    #[test]
    fn path_graph_half_radius() {
        let g = path_graph(3);
        let net = build_net(&g, 1.5);
        check_invariants(&g, &net);
        assert_eq!(net.members, vec![0, 2]);
    }

    #[test]
    fn nested_nets_keep_invariants() {
        let spec = SpannerSpec::new(60, 1.5, 1, 11, Distribution::UniformSquare).unwrap();
        let g = generate_ft_spanner(&spec).unwrap();
        let coarse = build_net(&g, 0.4);
        let fine = build_net_extending(&g, 0.2, &coarse.members);
        check_invariants(&g, &coarse);
        check_invariants(&g, &fine);
        assert!(coarse.members.iter().all(|&m| fine.contains(m)));
    }

    #[test]
    fn packing_bound_on_random_spanner() {
        let spec = SpannerSpec::new(100, 1.5, 0, 5, Distribution::UniformSquare).unwrap();
        let g = generate_ft_spanner(&spec).unwrap();
        let all = (0..g.n())
            .map(|v| dijkstra(&g, v, &FailureSet::empty(), None).unwrap().dist)
            .collect::<Vec<_>>();
        let diam = all
            .iter()
            .flatten()
            .copied()
            .filter(|d| d.is_finite())
            .fold(0.0, f64::max);
        let net = build_net(&g, diam / 10.0);
        check_invariants(&g, &net);
        for c in 1..=3 {
            let bound = 4 * (c + 1) * (c + 1);
            for v in 0..g.n() {
                let cnt = net
                    .members
                    .iter()
                    .filter(|&&m| all[v][m] <= c as f64 * net.r)
                    .count();
                assert!(cnt <= bound, "vertex {v}, c {c}: {cnt} > {bound}");
            }
        }
    }
}
