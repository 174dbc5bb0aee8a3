//! Instance generation: fault-tolerant greedy spanners over seeded point
//! sets, and a validator for the fault-tolerant stretch predicate.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{OracleError, Result};
use crate::graph::{dijkstra_filtered, FailureSet, GeoGraph, Point, SpannerParams, VertexId};

/// Relative slack applied to every stretch comparison.
pub const STRETCH_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Distribution {
    UniformSquare,
    Clustered,
    Grid,
    /// Nested clusters of three whose spacing grows by a large factor per level.
    Hierarchical,
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distribution::UniformSquare => "uniform-square",
            Distribution::Clustered => "clustered",
            Distribution::Grid => "grid",
            Distribution::Hierarchical => "hierarchical",
        })
    }
}

impl FromStr for Distribution {
    type Err = OracleError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-square" | "uniform" => Ok(Distribution::UniformSquare),
            "clustered" => Ok(Distribution::Clustered),
            "grid" => Ok(Distribution::Grid),
            "hierarchical" => Ok(Distribution::Hierarchical),
            other => Err(OracleError::InvalidParameter(format!("unknown distribution {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpannerSpec {
    pub n: usize,
    pub t: f64,
    pub f: usize,
    pub seed: u64,
    pub distribution: Distribution,
}

impl SpannerSpec {
    pub fn new(n: usize, t: f64, f: usize, seed: u64, distribution: Distribution) -> Result<Self> {
        if n < 2 {
            return Err(OracleError::InvalidParameter(format!("n = {n} must be >= 2")));
        }
        if !(t > 1.0) || !t.is_finite() {
            return Err(OracleError::InvalidParameter(format!("t = {t} must be > 1")));
        }
        Ok(Self {
            n,
            t,
            f,
            seed,
            distribution,
        })
    }
}

/// Hierarchical spacing factor between consecutive cluster levels.
pub const HIERARCHY_RATIO: f64 = 2.0e4;

/// Minimum points per cluster in the hierarchical distribution.
pub const HIERARCHY_BRANCHING: usize = 4;

/// Cluster levels are capped so coordinates keep unit-scale precision;
/// larger inputs get wider clusters instead.
pub const HIERARCHY_MAX_DEPTH: u32 = 3;

pub fn generate_points(spec: &SpannerSpec) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n;
    let side = (n as f64).sqrt();
    match spec.distribution {
        Distribution::UniformSquare => (0..n)
            .map(|_| Point::new(rng.gen::<f64>() * side, rng.gen::<f64>() * side))
            .collect(),
        Distribution::Clustered => {
            let k = ((n as f64).sqrt() / 2.0).round().max(1.0) as usize;
            let centers: Vec<Point> = (0..k)
                .map(|_| Point::new(rng.gen::<f64>() * side, rng.gen::<f64>() * side))
                .collect();
            let normal = Normal::new(0.0, 0.15 * side / (k as f64).sqrt()).unwrap();
            (0..n)
                .map(|i| {
                    let c = centers[i % k];
                    Point::new(c.x + normal.sample(&mut rng), c.y + normal.sample(&mut rng))
                })
                .collect()
        }
        Distribution::Grid => {
            let cols = (n as f64).sqrt().ceil() as usize;
            (0..n)
                .map(|i| Point::new((i % cols) as f64, (i / cols) as f64))
                .collect()
        }
        Distribution::Hierarchical => {
            let mut branching = HIERARCHY_BRANCHING;
            while branching.pow(HIERARCHY_MAX_DEPTH) < n {
                branching += 1;
            }
            let mut depth = 1;
            while branching.pow(depth) < n {
                depth += 1;
            }
            // Jitter is shared by all points below the same cluster.
            let jitter: Vec<Vec<f64>> = (0..depth)
                .map(|k| {
                    let clusters = n.div_ceil(branching.pow(k)) + 1;
                    (0..clusters).map(|_| rng.gen::<f64>() * 0.08).collect()
                })
                .collect();
            (0..n)
                .map(|i| {
                    let (mut x, mut y) = (0.0, 0.0);
                    let mut scale = 1.0;
                    for (k, row) in jitter.iter().enumerate() {
                        let prefix = i / branching.pow(k as u32);
                        let slot = (prefix % branching) as f64 + row[prefix];
                        let angle = std::f64::consts::TAU * slot / branching as f64;
                        x += scale * angle.cos();
                        y += scale * angle.sin();
                        scale *= HIERARCHY_RATIO;
                    }
                    Point::new(x, y)
                })
                .collect()
        }
    }
}

/// Greedy f-fault-tolerant t-spanner on `spec`'s point set.
pub fn generate_ft_spanner(spec: &SpannerSpec) -> Result<GeoGraph> {
    let points = generate_points(spec);
    let edges = greedy_ft_edges(&points, spec.t, spec.f);
    GeoGraph::new(points, edges, SpannerParams::new(spec.t, spec.f, f64::INFINITY)?)
}

/// Fault-tolerant greedy: scan pairs by increasing `|uv|` (ids break ties) and
/// add `uv` unless every failure set of size `<= f` avoiding `u, v` leaves a
/// path of length `<= t|uv|`. Returns sorted edges with `u < v`.
pub fn greedy_ft_edges(points: &[Point], t: f64, f: usize) -> Vec<(VertexId, VertexId)> {
    let n = points.len();
    let mut pairs: Vec<(f64, VertexId, VertexId)> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for u in 0..n {
        for v in u + 1..n {
            pairs.push((points[u].dist(&points[v]), u, v));
        }
    }
    pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut adj: Vec<Vec<(VertexId, f64)>> = vec![Vec::new(); n];
    let mut search = BoundedSearch::new(n);
    let mut edges = Vec::new();
    for (d, u, v) in pairs {
        let bound = t * d;
        let bad = search.worst_failure(points, |x| &adj[x], u, v, f, bound);
        if bad.is_some() {
            adj[u].push((v, d));
            adj[v].push((u, d));
            edges.push((u, v));
        }
    }
    edges.sort_unstable();
    edges
}

#[derive(Clone, Copy, PartialEq)]
struct Item {
    key: f64,
    vertex: VertexId,
}

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A* from `u` to `v` with the Euclidean heuristic, abandoning anything that
/// cannot finish within a length bound.
struct BoundedSearch {
    dist: Vec<f64>,
    pred: Vec<VertexId>,
    stamp: Vec<u32>,
    closed: Vec<u32>,
    epoch: u32,
    heap: BinaryHeap<Item>,
}

impl BoundedSearch {
    fn new(n: usize) -> Self {
        Self {
            dist: vec![0.0; n],
            pred: vec![0; n],
            stamp: vec![0; n],
            closed: vec![0; n],
            epoch: 0,
            heap: BinaryHeap::new(),
        }
    }

    fn path<'a, N>(
        &mut self,
        points: &[Point],
        neighbors: &N,
        u: VertexId,
        v: VertexId,
        blocked: &[VertexId],
        bound: f64,
    ) -> Option<Vec<VertexId>>
    where
        N: Fn(VertexId) -> &'a [(VertexId, f64)],
    {
        if self.epoch == u32::MAX {
            self.stamp.fill(0);
            self.closed.fill(0);
            self.epoch = 0;
        }
        self.epoch += 1;
        let ep = self.epoch;
        self.heap.clear();
        let prune = bound * (1.0 + 1e-12);
        let target = points[v];
        self.dist[u] = 0.0;
        self.stamp[u] = ep;
        self.pred[u] = u;
        self.heap.push(Item {
            key: points[u].dist(&target),
            vertex: u,
        });
        while let Some(Item { vertex: x, .. }) = self.heap.pop() {
            if self.closed[x] == ep {
                continue;
            }
            self.closed[x] = ep;
            if x == v {
                if self.dist[v] > bound {
                    return None;
                }
                let mut path = vec![v];
                let mut cur = v;
                while cur != u {
                    cur = self.pred[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            for &(y, w) in neighbors(x) {
                if self.closed[y] == ep || blocked.contains(&y) {
                    continue;
                }
                let nd = self.dist[x] + w;
                let key = nd + points[y].dist(&target);
                if key > prune {
                    continue;
                }
                if self.stamp[y] != ep || nd < self.dist[y] {
                    self.stamp[y] = ep;
                    self.dist[y] = nd;
                    self.pred[y] = x;
                    self.heap.push(Item { key, vertex: y });
                }
            }
        }
        None
    }

    /// A failure set of size `<= f` that pushes `d(u, v)` above `bound`, if
    /// one exists. Exact: any such set must hit the interior of the current
    /// shortest path, so branching on those vertices is exhaustive.
    fn worst_failure<'a, N>(
        &mut self,
        points: &[Point],
        neighbors: N,
        u: VertexId,
        v: VertexId,
        f: usize,
        bound: f64,
    ) -> Option<Vec<VertexId>>
    where
        N: Fn(VertexId) -> &'a [(VertexId, f64)],
    {
        let mut failed = Vec::with_capacity(f);
        if self.descend(points, &neighbors, u, v, f, bound, &mut failed) {
            Some(failed)
        } else {
            None
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn descend<'a, N>(
        &mut self,
        points: &[Point],
        neighbors: &N,
        u: VertexId,
        v: VertexId,
        f: usize,
        bound: f64,
        failed: &mut Vec<VertexId>,
    ) -> bool
    where
        N: Fn(VertexId) -> &'a [(VertexId, f64)],
    {
        let Some(path) = self.path(points, neighbors, u, v, failed, bound) else {
            return true;
        };
        if failed.len() == f || path.len() == 2 {
            return false;
        }
        // k + 1 internally disjoint short paths survive any k further failures.
        let budget = f - failed.len();
        let mut blocked = failed.clone();
        let mut found = 1;
        let mut last = path.clone();
        while found <= budget {
            blocked.extend_from_slice(&last[1..last.len() - 1]);
            match self.path(points, neighbors, u, v, &blocked, bound) {
                Some(p) if p.len() == 2 => return false,
                Some(p) => {
                    found += 1;
                    last = p;
                }
                None => break,
            }
        }
        if found > budget {
            return false;
        }
        for &x in &path[1..path.len() - 1] {
            failed.push(x);
            if self.descend(points, neighbors, u, v, f, bound, failed) {
                return true;
            }
            failed.pop();
        }
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValidationMode {
    /// Every failure set of size `<= f`.
    Exhaustive,
    /// Failure sets drawn from vertices of current shortest paths.
    OnPath,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub u: VertexId,
    pub v: VertexId,
    pub failures: Vec<VertexId>,
    pub dist: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub mode: ValidationMode,
    pub t: f64,
    pub f: usize,
    pub l: f64,
    pub pairs_checked: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// Line-oriented `key=value` rendering.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let mode = match self.mode {
            ValidationMode::Exhaustive => "exhaustive",
            ValidationMode::OnPath => "on-path",
        };
        let _ = writeln!(out, "valid={}", self.is_valid());
        let _ = writeln!(out, "mode={mode}");
        let _ = writeln!(out, "t={:?}", self.t);
        let _ = writeln!(out, "f={}", self.f);
        let _ = writeln!(out, "L={:?}", self.l);
        let _ = writeln!(out, "pairs_checked={}", self.pairs_checked);
        let _ = writeln!(out, "violations={}", self.violations.len());
        for x in &self.violations {
            let fs: Vec<String> = x.failures.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(
                out,
                "violation u={} v={} F={} dist={:?} bound={:?}",
                x.u,
                x.v,
                fs.join(","),
                x.dist,
                x.bound
            );
        }
        out
    }
}

/// Largest `n` for which validation enumerates every failure set.
pub const EXHAUSTIVE_MAX_N: usize = 12;

/// Checks `d_{G-F}(u,v) <= t|uv|` for every pair with `|uv| <= l` and every
/// admissible `F`: exhaustively for small graphs, otherwise by the exact
/// on-path search.
pub fn validate_ft_spanner(g: &GeoGraph, t: f64, f: usize, l: f64) -> ValidationReport {
    if g.n() <= EXHAUSTIVE_MAX_N && f <= 2 {
        validate_exhaustive(g, t, f, l)
    } else {
        let pairs = (0..g.n()).flat_map(|u| (u + 1..g.n()).map(move |v| (u, v)));
        validate_pairs(g, t, f, l, pairs)
    }
}

/// On-path validation over `samples` random pairs.
pub fn validate_ft_spanner_sampled(
    g: &GeoGraph,
    t: f64,
    f: usize,
    l: f64,
    samples: usize,
    seed: u64,
) -> ValidationReport {
    let n = g.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<_> = if n < 2 {
        Vec::new()
    } else {
        (0..samples)
            .map(|_| {
                let u = rng.gen_range(0..n);
                let mut v = rng.gen_range(0..n - 1);
                if v >= u {
                    v += 1;
                }
                (u.min(v), u.max(v))
            })
            .collect()
    };
    validate_pairs(g, t, f, l, pairs)
}

fn exact_dist(g: &GeoGraph, u: VertexId, v: VertexId, failures: &[VertexId]) -> f64 {
    dijkstra_filtered(g, u, |x| !failures.contains(&x), |_, _| true, None, Some(v)).dist[v]
}

fn validate_pairs(
    g: &GeoGraph,
    t: f64,
    f: usize,
    l: f64,
    pairs: impl IntoIterator<Item = (VertexId, VertexId)>,
) -> ValidationReport {
    let mut search = BoundedSearch::new(g.n());
    let mut report = ValidationReport {
        mode: ValidationMode::OnPath,
        t,
        f,
        l,
        pairs_checked: 0,
        violations: Vec::new(),
    };
    for (u, v) in pairs {
        let d = g.euclid(u, v);
        if d > l {
            continue;
        }
        report.pairs_checked += 1;
        let bound = t * d;
        if let Some(failures) =
            search.worst_failure(g.points(), |x| g.neighbors(x), u, v, f, bound * (1.0 + STRETCH_SLACK))
        {
            let dist = exact_dist(g, u, v, &failures);
            let mut failures = failures;
            failures.sort_unstable();
            report.violations.push(Violation {
                u,
                v,
                failures,
                dist,
                bound,
            });
        }
    }
    report
}

fn subsets(n: usize, k: usize) -> Vec<Vec<VertexId>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::new();
        for s in &frontier {
            let start = s.last().map_or(0, |&x: &VertexId| x + 1);
            for x in start..n {
                let mut t = s.clone();
                t.push(x);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn validate_exhaustive(g: &GeoGraph, t: f64, f: usize, l: f64) -> ValidationReport {
    let n = g.n();
    let mut report = ValidationReport {
        mode: ValidationMode::Exhaustive,
        t,
        f,
        l,
        pairs_checked: 0,
        violations: Vec::new(),
    };
    for u in 0..n {
        for v in u + 1..n {
            if g.euclid(u, v) <= l {
                report.pairs_checked += 1;
            }
        }
    }
    for failures in subsets(n, f.min(n)) {
        let set = FailureSet::from_ids(failures.iter().copied());
        for u in (0..n).filter(|&u| !set.contains(u)) {
            let tree = dijkstra_filtered(g, u, |x| !set.contains(x), |_, _| true, None, None);
            for v in (u + 1..n).filter(|&v| !set.contains(v)) {
                let d = g.euclid(u, v);
                if d > l {
                    continue;
                }
                let bound = t * d;
                if !(tree.dist[v] <= bound * (1.0 + STRETCH_SLACK)) {
                    report.violations.push(Violation {
                        u,
                        v,
                        failures: failures.clone(),
                        dist: tree.dist[v],
                        bound,
                    });
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{dijkstra, parse_graph, write_graph};
    use proptest::prelude::*;

    fn spec(n: usize, t: f64, f: usize, seed: u64, d: Distribution) -> SpannerSpec {
        SpannerSpec::new(n, t, f, seed, d).unwrap()
    }

    #[test]
    fn two_points_get_one_edge() {
        for f in 0..3 {
            let g = generate_ft_spanner(&spec(2, 2.0, f, 1, Distribution::UniformSquare)).unwrap();
            assert_eq!(g.edges(), &[(0, 1)]);
        }
    }

    #[test]
    fn spec_rejects_bad_parameters() {
        assert!(SpannerSpec::new(1, 2.0, 0, 0, Distribution::Grid).is_err());
        assert!(SpannerSpec::new(5, 1.0, 0, 0, Distribution::Grid).is_err());
    }

    #[test]
    fn small_generated_spanners_pass_exhaustive_validation() {
        for (n, f) in [(5, 1), (8, 2), (12, 2), (12, 1)] {
            for d in [Distribution::UniformSquare, Distribution::Clustered, Distribution::Grid] {
                let g = generate_ft_spanner(&spec(n, 2.0, f, 7, d)).unwrap();
                let r = validate_ft_spanner(&g, 2.0, f, f64::INFINITY);
                assert_eq!(r.mode, ValidationMode::Exhaustive);
                assert!(r.is_valid(), "{d} n={n} f={f}: {}", r.to_kv());
            }
        }
    }

    #[test]
    fn plain_greedy_has_stretch_t_everywhere() {
        let g = generate_ft_spanner(&spec(300, 1.5, 0, 3, Distribution::UniformSquare)).unwrap();
        for u in 0..g.n() {
            let tree = dijkstra(&g, u, &FailureSet::empty(), None).unwrap();
            for v in 0..g.n() {
                assert!(tree.dist[v] <= 1.5 * g.euclid(u, v) * (1.0 + STRETCH_SLACK));
            }
        }
    }

    #[test]
    fn on_path_validation_agrees_with_exhaustive() {
        // Remove one edge from a valid spanner and compare both modes.
        for seed in 0..6 {
            let g = generate_ft_spanner(&spec(10, 1.5, 2, seed, Distribution::UniformSquare)).unwrap();
            let (du, dv) = g.edges()[seed as usize % g.m()];
            let broken = g.filter_edges(|a, b, _| (a, b) != (du, dv));
            let ex = validate_exhaustive(&broken, 1.5, 2, f64::INFINITY);
            let pairs = (0..10).flat_map(|u| (u + 1..10).map(move |v| (u, v)));
            let op = validate_pairs(&broken, 1.5, 2, f64::INFINITY, pairs);
            let bad_ex: std::collections::BTreeSet<_> = ex.violations.iter().map(|x| (x.u, x.v)).collect();
            let bad_op: std::collections::BTreeSet<_> = op.violations.iter().map(|x| (x.u, x.v)).collect();
            assert_eq!(bad_ex, bad_op);
            assert!(!bad_ex.is_empty());
        }
    }

    #[test]
    fn complete_graph_is_always_valid() {
        let pts = generate_points(&spec(7, 2.0, 0, 9, Distribution::UniformSquare));
        let edges = (0..7).flat_map(|u| (u + 1..7).map(move |v| (u, v)));
        let g = GeoGraph::new(pts, edges, SpannerParams::new(1.0, 5, f64::INFINITY).unwrap()).unwrap();
        assert!(validate_ft_spanner(&g, 1.0, 5, f64::INFINITY).is_valid());
    }

    #[test]
    fn star_fails_when_hub_fails() {
        let mut pts = vec![Point::new(0.0, 0.0)];
        pts.extend((0..5).map(|i| {
            let a = i as f64 * 1.2;
            Point::new(a.cos(), a.sin())
        }));
        let g = GeoGraph::new(pts, (1..6).map(|i| (0, i)), SpannerParams::new(2.0, 1, f64::INFINITY).unwrap())
            .unwrap();
        let r = validate_ft_spanner(&g, 10.0, 1, f64::INFINITY);
        assert!(!r.is_valid());
        assert!(r.violations.iter().any(|x| x.failures == vec![0]));
        assert!(r.to_kv().starts_with("valid=false\n"));
    }

    #[test]
    fn partial_radius_limits_checked_pairs() {
        let g = parse_graph("3 1 2 0 1.5\n0 0 0\n1 1 0\n2 5 0\n0 1\n").unwrap();
        let r = validate_ft_spanner(&g, 2.0, 0, 1.5);
        assert_eq!(r.pairs_checked, 1);
        assert!(r.is_valid());
        assert!(!validate_ft_spanner(&g, 2.0, 0, f64::INFINITY).is_valid());
    }

    #[test]
    fn generation_is_reproducible() {
        for d in [Distribution::Clustered, Distribution::Hierarchical] {
            let a = generate_ft_spanner(&spec(40, 2.0, 1, 5, d)).unwrap();
            let b = generate_ft_spanner(&spec(40, 2.0, 1, 5, d)).unwrap();
            assert_eq!(write_graph(&a), write_graph(&b));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn generated_spanners_are_fault_tolerant(seed in 0u64..1000, n in 13usize..40, f in 0usize..3) {
            let g = generate_ft_spanner(&spec(n, 1.8, f, seed, Distribution::Clustered)).unwrap();
            let r = validate_ft_spanner(&g, 1.8, f, f64::INFINITY);
            prop_assert!(r.is_valid(), "{}", r.to_kv());
        }
    }
}
