//! Preprocessing for moderately far queries: long-edge splitting, the scale
//! ladder `W_j = 2^j W_0`, aligned nets per scale, near-net lists, and the
//! bank of replacement-path trees. Queries live in [`query`].

mod query;

pub use query::{EdgeKind, Kernel, KernelEdge, KernelStep};

use std::collections::BTreeMap;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{OracleError, Result};
use crate::ft::{build_ft, ft_query_on_demand, FtLimits, FtPath, FtSpec, FtTree, VicinityMode};
use crate::graph::{
    build_net, build_net_extending, DijkstraWorkspace, FailureSet, GeoGraph, Net, Point, VertexId,
};

/// How long edges are subdivided before nets are built.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SplitMode {
    /// Split as prescribed, failing if the vertex budget is exceeded.
    Literal,
    /// Never split.
    Off,
    /// Split when within budget, otherwise leave edges whole.
    #[default]
    Auto,
}

impl FromStr for SplitMode {
    type Err = OracleError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(SplitMode::Literal),
            "off" => Ok(SplitMode::Off),
            "auto" => Ok(SplitMode::Auto),
            other => Err(OracleError::InvalidParameter(format!("unknown split mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// Replaces the derived fine-scale factor; for structural testing only.
    pub eps_prime_override: Option<f64>,
    pub split: SplitMode,
    pub max_split_vertices: usize,
    pub vicinity_mode: VicinityMode,
    pub ft_limits: FtLimits,
    /// Materialize every tree at build time instead of evaluating on demand.
    pub eager_ft: bool,
    /// Lower bound on the edge count used for the scale ladder.
    pub m_ref: Option<usize>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            eps_prime_override: None,
            split: SplitMode::Auto,
            max_split_vertices: DEFAULT_SPLIT_BUDGET,
            vicinity_mode: VicinityMode::Pair,
            ft_limits: FtLimits::default(),
            eager_ft: false,
            m_ref: None,
        }
    }
}

/// Extra vertices `SplitMode::Auto` may add before falling back to no splitting.
pub const DEFAULT_SPLIT_BUDGET: usize = 4096;

/// `eps / (500 t^3 (f + 1))`.
pub fn derived_eps_prime(eps: f64, t: f64, f: usize) -> f64 {
    eps / (500.0 * t.powi(3) * (f as f64 + 1.0))
}

/// Radius factor `4t^2 + 8t + 5` of the near-failure and short-edge rules.
pub fn near_factor(t: f64) -> f64 {
    4.0 * t * t + 8.0 * t + 5.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Original,
    /// Interior point of the original edge `(a, b)`.
    Split(VertexId, VertexId),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitGraph {
    pub graph: GeoGraph,
    pub original_n: usize,
    pub origin: Vec<Origin>,
    pub eps_prime: f64,
    /// Edges of the input dropped for being at least `2L` long.
    pub dropped_long: usize,
    pub split_applied: bool,
}

impl SplitGraph {
    /// Maps a walk in the split graph to the input graph by dropping
    /// subdivision points and repeated vertices.
    pub fn collapse_walk(&self, walk: &[VertexId]) -> Vec<VertexId> {
        let mut out: Vec<VertexId> = Vec::with_capacity(walk.len());
        for &x in walk {
            if x < self.original_n && out.last() != Some(&x) {
                out.push(x);
            }
        }
        out
    }
}

/// `W_j = 2^j W_0` for `j` in `1..=count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleLevels {
    pub w0: f64,
    pub count: usize,
    /// Edge count `m` the ladder was derived from.
    pub m: usize,
    pub l: f64,
}

impl ScaleLevels {
    pub fn new(l: f64, m: usize) -> Self {
        let m = m.max(2);
        let mf = m as f64;
        let count = (6.0 * mf.log2()).ceil() as usize + 1;
        Self {
            w0: l / (2.0 * mf.powi(6)),
            count,
            m,
            l,
        }
    }

    pub fn w(&self, j: usize) -> f64 {
        self.w0 * 2f64.powi(j as i32)
    }

    /// The level with `d` in `[W_j / 2, W_j)`, if it lies in range.
    pub fn level_of(&self, d: f64) -> Option<usize> {
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let mut j = ((d / self.w0).log2().floor() + 1.0).max(1.0) as i64;
        while j > 1 && d < self.w(j as usize) / 2.0 {
            j -= 1;
        }
        while d >= self.w(j as usize) {
            j += 1;
        }
        let j = j as usize;
        (j >= 1 && j <= self.count && d >= self.w(j) / 2.0).then_some(j)
    }

    /// Moderately far range `[L / m^2, L / t)`.
    pub fn moderate_range(&self, t: f64) -> (f64, f64) {
        let mf = self.m as f64;
        (self.l / (mf * mf), self.l / t)
    }
}

/// Net members within `near_factor(t) * eps' * W_j` of each vertex, per level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearLists {
    /// Per level: CSR offsets and `(member, distance)` entries sorted by member.
    levels: Vec<(Vec<u32>, Vec<(VertexId, f64)>)>,
}

impl NearLists {
    pub fn get(&self, x: VertexId, j: usize) -> &[(VertexId, f64)] {
        let (off, entries) = &self.levels[j - 1];
        &entries[off[x] as usize..off[x + 1] as usize]
    }
}

/// Replacement-path trees keyed by `(u, v, j)` with `u < v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FtBank {
    OnDemand,
    Eager(BTreeMap<(VertexId, VertexId, usize), FtTree>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelOracle {
    pub split: SplitGraph,
    pub eps: f64,
    pub eps_prime: f64,
    pub levels: ScaleLevels,
    /// `nets[j - 1]` has radius `eps' * W_j`.
    pub nets: Vec<Net>,
    pub near: NearLists,
    pub bank: FtBank,
    pub config: KernelConfig,
}

fn split_graph(g0: &GeoGraph, eps_prime: f64, config: &KernelConfig, m_lv: usize) -> Result<SplitGraph> {
    let l = g0.params.l;
    let kept: Vec<(VertexId, VertexId)> = g0
        .edges()
        .iter()
        .zip(g0.weights())
        .filter(|(_, &w)| w < 2.0 * l)
        .map(|(&e, _)| e)
        .collect();
    let dropped_long = g0.m() - kept.len();
    let base = GeoGraph::from_sorted_edges(g0.points().to_vec(), kept, g0.params);

    let ladder = ScaleLevels::new(l, m_lv);
    let threshold = eps_prime * l / (4.0 * (m_lv as f64).powi(6));
    let t = g0.params.t;
    let mut plan = Vec::new();
    let mut needed = 0usize;
    for (&(a, b), &w) in base.edges().iter().zip(base.weights()) {
        if w <= threshold {
            continue;
        }
        let mut j = 1usize;
        while 4.0 * t * ladder.w(j) < w {
            j += 1;
        }
        let piece = eps_prime * ladder.w(j) / 4.0;
        let pieces = (w / piece).ceil().max(1.0);
        if pieces > 1.0 {
            let extra = pieces as usize - 1;
            needed = needed.saturating_add(extra);
            plan.push((a, b, extra + 1));
        }
    }
    let apply = match config.split {
        SplitMode::Off => false,
        SplitMode::Literal if needed > config.max_split_vertices => {
            return Err(OracleError::SplitBudgetExceeded {
                needed,
                budget: config.max_split_vertices,
            })
        }
        SplitMode::Literal => true,
        SplitMode::Auto => needed <= config.max_split_vertices,
    };
    let n0 = base.n();
    if !apply || plan.is_empty() {
        return Ok(SplitGraph {
            graph: base,
            original_n: n0,
            origin: vec![Origin::Original; n0],
            eps_prime,
            dropped_long,
            split_applied: apply,
        });
    }
    let mut points = base.points().to_vec();
    let mut origin = vec![Origin::Original; n0];
    let split_edges: std::collections::BTreeSet<(VertexId, VertexId)> =
        plan.iter().map(|&(a, b, _)| (a, b)).collect();
    let mut edges: Vec<(VertexId, VertexId)> = base
        .edges()
        .iter()
        .copied()
        .filter(|e| !split_edges.contains(e))
        .collect();
    for &(a, b, pieces) in &plan {
        let (pa, pb): (Point, Point) = (base.point(a), base.point(b));
        let mut prev = a;
        for k in 1..pieces {
            let id = points.len();
            points.push(pa.lerp(&pb, k as f64 / pieces as f64));
            origin.push(Origin::Split(a, b));
            edges.push((prev.min(id), prev.max(id)));
            prev = id;
        }
        edges.push((prev.min(b), prev.max(b)));
    }
    edges.sort_unstable();
    Ok(SplitGraph {
        graph: GeoGraph::from_sorted_edges(points, edges, g0.params),
        original_n: n0,
        origin,
        eps_prime,
        dropped_long,
        split_applied: true,
    })
}

fn build_nets(g: &GeoGraph, levels: &ScaleLevels, eps_prime: f64) -> Vec<Net> {
    let mut nets: Vec<Net> = Vec::with_capacity(levels.count);
    for j in (1..=levels.count).rev() {
        let r = eps_prime * levels.w(j);
        let net = match nets.last() {
            None => build_net(g, r),
            Some(coarser) => build_net_extending(g, r, &coarser.members),
        };
        nets.push(net);
    }
    nets.reverse();
    nets
}

fn build_near_lists(g: &GeoGraph, levels: &ScaleLevels, nets: &[Net], eps_prime: f64) -> NearLists {
    let factor = near_factor(g.params.t);
    let per_level = (1..=levels.count)
        .into_par_iter()
        .map(|j| {
            let net = &nets[j - 1];
            let mut member = vec![false; g.n()];
            for &x in &net.members {
                member[x] = true;
            }
            let radius = factor * eps_prime * levels.w(j);
            let mut ws = DijkstraWorkspace::new(g.n());
            let mut off = Vec::with_capacity(g.n() + 1);
            let mut entries = Vec::new();
            off.push(0u32);
            for x in 0..g.n() {
                ws.run(g, &[(x, 0.0)], |_| true, |_, _| true, Some(radius), None);
                let mut list: Vec<(VertexId, f64)> = ws.reached().filter(|&(p, _)| member[p]).collect();
                list.sort_unstable_by_key(|&(p, _)| p);
                entries.extend(list);
                off.push(entries.len() as u32);
            }
            (off, entries)
        })
        .collect();
    NearLists { levels: per_level }
}

impl KernelOracle {
    /// Preprocesses `g0` (an `L`-partial `f`-fault-tolerant `t`-spanner with
    /// finite `L`) for accuracy `eps`.
    pub fn build(g0: &GeoGraph, eps: f64, config: KernelConfig) -> Result<Self> {
        let p = g0.params;
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(OracleError::InvalidParameter(format!("eps = {eps} must be positive")));
        }
        if !(p.l > 0.0) || !p.l.is_finite() {
            return Err(OracleError::InvalidParameter(format!(
                "moderately far oracles need a finite positive L, got {}",
                p.l
            )));
        }
        let eps_prime = config.eps_prime_override.unwrap_or_else(|| derived_eps_prime(eps, p.t, p.f));
        if !(eps_prime > 0.0) {
            return Err(OracleError::InvalidParameter(format!("eps' = {eps_prime} must be positive")));
        }
        let m_pre = g0.m().max(config.m_ref.unwrap_or(0));
        let split = split_graph(g0, eps_prime, &config, m_pre)?;
        let m_lv = split.graph.m().max(config.m_ref.unwrap_or(0));
        let levels = ScaleLevels::new(p.l, m_lv);
        let nets = build_nets(&split.graph, &levels, eps_prime);
        let near = build_near_lists(&split.graph, &levels, &nets, eps_prime);
        let mut oracle = Self {
            split,
            eps,
            eps_prime,
            levels,
            nets,
            near,
            bank: FtBank::OnDemand,
            config,
        };
        if config.eager_ft {
            let keys = oracle.bank_keys();
            let trees: Result<Vec<_>> = keys
                .par_iter()
                .map(|&(u, v, j)| {
                    let spec = oracle.ft_spec(u, v, j)?;
                    Ok(((u, v, j), build_ft(oracle.graph(), spec, config.ft_limits)?))
                })
                .collect();
            oracle.bank = FtBank::Eager(trees?.into_iter().collect());
        }
        Ok(oracle)
    }

    pub fn graph(&self) -> &GeoGraph {
        &self.split.graph
    }

    pub fn net(&self, j: usize) -> &Net {
        &self.nets[j - 1]
    }

    pub fn t(&self) -> f64 {
        self.graph().params.t
    }

    pub fn f(&self) -> usize {
        self.graph().params.f
    }

    /// Whether `(u, v, j)` is a bank pair: distinct level-`j` net members with
    /// `|uv| <= (1 + eps) t W_j`.
    pub fn in_bank(&self, u: VertexId, v: VertexId, j: usize) -> bool {
        u != v
            && j >= 1
            && j <= self.levels.count
            && self.net(j).contains(u)
            && self.net(j).contains(v)
            && self.graph().euclid(u, v) <= (1.0 + self.eps) * self.t() * self.levels.w(j)
    }

    /// All bank keys `(u, v, j)` with `u < v`, sorted.
    pub fn bank_keys(&self) -> Vec<(VertexId, VertexId, usize)> {
        let mut keys = Vec::new();
        let g = self.graph();
        for u in 0..g.n() {
            for v in u + 1..g.n() {
                let d = g.euclid(u, v);
                for j in 1..=self.levels.count {
                    if d <= (1.0 + self.eps) * self.t() * self.levels.w(j)
                        && self.net(j).contains(u)
                        && self.net(j).contains(v)
                    {
                        keys.push((u, v, j));
                    }
                }
            }
        }
        keys.sort_unstable();
        keys
    }

    pub fn ft_spec(&self, u: VertexId, v: VertexId, j: usize) -> Result<FtSpec> {
        let (a, b) = (u.min(v), u.max(v));
        let g = self.graph();
        let radius = self
            .config
            .vicinity_mode
            .radius(self.t(), g.euclid(a, b), self.eps, self.levels.w(j));
        FtSpec::new(g, a, b, self.eps_prime * self.levels.w(j), self.f(), radius)
    }

    /// FT-path of the bank tree `(u, v, j)` under `failures`, oriented `min -> max`.
    pub fn ft_path(&self, u: VertexId, v: VertexId, j: usize, failures: &FailureSet) -> Option<FtPath> {
        if !self.in_bank(u, v, j) {
            return None;
        }
        let key = (u.min(v), u.max(v), j);
        match &self.bank {
            FtBank::Eager(trees) => trees.get(&key).and_then(|tree| tree.query(failures)),
            FtBank::OnDemand => {
                let spec = self.ft_spec(u, v, j).ok()?;
                ft_query_on_demand(self.graph(), spec, failures)
            }
        }
    }

    /// Builds a single bank tree.
    pub fn build_tree(&self, u: VertexId, v: VertexId, j: usize) -> Result<FtTree> {
        let spec = self.ft_spec(u, v, j)?;
        build_ft(self.graph(), spec, self.config.ft_limits)
    }

    /// Level-`j` net members within `radius` of `x`.
    pub fn near_net_lookup(&self, x: VertexId, j: usize, radius: f64) -> Result<Vec<VertexId>> {
        self.graph().check_vertex(x)?;
        if j == 0 || j > self.levels.count {
            return Err(OracleError::InvalidParameter(format!("level {j} out of range")));
        }
        let cap = near_factor(self.t()) * self.eps_prime * self.levels.w(j);
        if radius > cap * (1.0 + 1e-12) {
            return Err(OracleError::InvalidParameter(format!(
                "lookup radius {radius} exceeds the precomputed {cap}"
            )));
        }
        Ok(self
            .near
            .get(x, j)
            .iter()
            .filter(|&&(_, d)| d <= radius)
            .map(|&(p, _)| p)
            .collect())
    }

    /// Checks the moderately far precondition and returns the level `i*`.
    pub fn query_level(&self, s: VertexId, s2: VertexId) -> Result<usize> {
        let d = self.graph().euclid(s, s2);
        let (lo, hi) = self.levels.moderate_range(self.t());
        if !(d >= lo && d < hi) {
            return Err(OracleError::NotModeratelyFar {
                s,
                t: s2,
                dist: d,
                lo,
                hi,
            });
        }
        self.levels.level_of(d).ok_or_else(|| {
            OracleError::Internal(format!("no scale level for moderately far distance {d}"))
        })
    }
}
