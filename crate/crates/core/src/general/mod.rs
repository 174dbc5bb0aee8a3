//! Reduction from arbitrary query pairs to moderately far pairs on partial
//! spanners, one family of partial spanners per scale sequence.

pub mod connection;
pub mod partial;
pub mod scales;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use connection::{ConnectionTree, ProxyFailure, SequenceLevels};
pub use partial::PartialSpanner;
pub use scales::{effective_m, ScaleSequences};

use crate::arbitrary_path::PathOracle;
use crate::error::{OracleError, Result};
use crate::far::{check_path, loop_erase, FarOracle};
use crate::graph::{FailureSet, GeoGraph, VertexId};
use crate::kernel::KernelConfig;

/// Structures for one scale `L_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleStructures {
    pub partial: PartialSpanner,
    pub far: FarOracle,
    /// Input edges of length at most `tL/m^3`.
    pub short_edges: PathOracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceFamily {
    pub levels: SequenceLevels,
    pub tree: ConnectionTree,
    /// Indexed by position in the sequence; `None` for an empty `S_i`.
    pub scales: Vec<Option<ScaleStructures>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unreachable {
    DisconnectedInG,
    DisconnectedByFailures,
}

impl From<ProxyFailure> for Unreachable {
    fn from(p: ProxyFailure) -> Self {
        match p {
            ProxyFailure::DisconnectedInG => Unreachable::DisconnectedInG,
            ProxyFailure::DisconnectedByFailures => Unreachable::DisconnectedByFailures,
        }
    }
}

/// Query diagnostics shared by distance and path answers.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryTrace {
    /// `(sequence, position)` of the governing scale.
    pub scale: Option<(usize, usize)>,
    pub proxies: Option<(VertexId, VertexId)>,
    pub kernel_vertices: usize,
    pub kernel_edges: usize,
    pub unreachable: Option<Unreachable>,
    /// The edge count is below `16t/eps_int`, where the additive term of the
    /// reduction is not formally within the accuracy budget.
    pub small_instance: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralDistance {
    pub value: f64,
    pub trace: QueryTrace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralPath {
    /// Empty when unreachable.
    pub path: Vec<VertexId>,
    pub length: f64,
    pub trace: QueryTrace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralOracle {
    pub graph: GeoGraph,
    pub eps_user: f64,
    pub eps_int: f64,
    pub m: usize,
    pub sequences: ScaleSequences,
    pub families: Vec<SequenceFamily>,
}

enum Resolved<'a> {
    Same,
    Unreachable(QueryTrace),
    Proxies {
        st: &'a ScaleStructures,
        l: f64,
        p: VertexId,
        q: VertexId,
        local_f: FailureSet,
        trace: QueryTrace,
    },
}

impl GeneralOracle {
    /// Builds the oracle for an `f`-fault-tolerant `t`-spanner with accuracy
    /// `eps_user`; internal structures use `eps_user / 8`.
    pub fn build(g: &GeoGraph, eps_user: f64, config: KernelConfig) -> Result<Self> {
        if !(eps_user > 0.0 && eps_user < 1.0) {
            return Err(OracleError::InvalidParameter(format!("eps = {eps_user} must lie in (0, 1)")));
        }
        if g.n() < 2 {
            return Err(OracleError::InvalidGraph("need at least two vertices".into()));
        }
        let eps_int = eps_user / 8.0;
        let t = g.params.t;
        let m = effective_m(g.m(), t);
        let sequences = ScaleSequences::build(g, m)?;
        let config = KernelConfig {
            m_ref: Some(m),
            ..config
        };
        let jobs: Vec<(usize, usize)> = sequences
            .sequences
            .iter()
            .enumerate()
            .flat_map(|(k, s)| (0..s.len()).map(move |pos| (k, pos)))
            .collect();
        let built: Vec<Option<ScaleStructures>> = jobs
            .par_iter()
            .map(|&(k, pos)| {
                let levels = SequenceLevels {
                    scales: sequences.sequences[k].clone(),
                };
                let Some(partial) = PartialSpanner::build(g, &levels, pos + 1, eps_int)? else {
                    return Ok(None);
                };
                let far = FarOracle::build(&partial.graph, eps_int, config)?;
                let l = levels.l(pos + 1);
                let short_edges = PathOracle::build(g, t * l / (m as f64).powi(3));
                Ok(Some(ScaleStructures {
                    partial,
                    far,
                    short_edges,
                }))
            })
            .collect::<Result<_>>()?;
        let mut built = built.into_iter();
        let families = sequences
            .sequences
            .iter()
            .map(|s| {
                let levels = SequenceLevels { scales: s.clone() };
                let tree = ConnectionTree::build(g, levels.clone(), g.params.f)?;
                Ok(SequenceFamily {
                    levels,
                    tree,
                    scales: built.by_ref().take(s.len()).collect(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            graph: g.clone(),
            eps_user,
            eps_int,
            m,
            sequences,
            families,
        })
    }

    pub fn small_instance(&self) -> bool {
        (self.m as f64) < 16.0 * self.graph.params.t / self.eps_int
    }

    fn validate(&self, s: VertexId, s2: VertexId, failures: &FailureSet) -> Result<()> {
        let g = &self.graph;
        g.check_vertex(s)?;
        g.check_vertex(s2)?;
        if failures.len() > g.params.f {
            return Err(OracleError::TooManyFailures {
                size: failures.len(),
                max: g.params.f,
            });
        }
        for x in failures.iter() {
            g.check_vertex(x)?;
        }
        for v in [s, s2] {
            if failures.contains(v) {
                return Err(OracleError::FailedQueryVertex(v));
            }
        }
        Ok(())
    }

    fn resolve(&self, s: VertexId, s2: VertexId, failures: &FailureSet) -> Result<Resolved<'_>> {
        self.validate(s, s2, failures)?;
        if s == s2 {
            return Ok(Resolved::Same);
        }
        let d = self.graph.euclid(s, s2);
        let (k, pos, l) = self
            .sequences
            .lookup(d)
            .ok_or_else(|| OracleError::Internal(format!("no scale covers distance {d}")))?;
        let family = &self.families[k];
        let mut trace = QueryTrace {
            scale: Some((k, pos)),
            small_instance: self.small_instance(),
            ..QueryTrace::default()
        };
        let (p, q) = match family.tree.proxies(s, s2, pos + 1, failures)? {
            Ok(pq) => pq,
            Err(why) => {
                trace.unreachable = Some(why.into());
                return Ok(Resolved::Unreachable(trace));
            }
        };
        trace.proxies = Some((p, q));
        let st = family.scales[pos]
            .as_ref()
            .ok_or_else(|| OracleError::Internal(format!("empty partial spanner at scale {l}")))?;
        let local = |v: VertexId| {
            st.partial
                .local(v)
                .ok_or_else(|| OracleError::Internal(format!("proxy {v} outside the partial spanner")))
        };
        let (p, q) = (local(p)?, local(q)?);
        let local_f = failures.restrict(|x| st.partial.local(x));
        Ok(Resolved::Proxies {
            st,
            l,
            p,
            q,
            local_f,
            trace,
        })
    }

    fn additive(&self, l: f64) -> f64 {
        2.0 * self.graph.params.t * l / (self.m as f64).powi(2)
    }

    pub fn distance(&self, s: VertexId, s2: VertexId, failures: &FailureSet) -> Result<GeneralDistance> {
        match self.resolve(s, s2, failures)? {
            Resolved::Same => Ok(GeneralDistance {
                value: 0.0,
                trace: QueryTrace::default(),
            }),
            Resolved::Unreachable(trace) => Ok(GeneralDistance {
                value: f64::INFINITY,
                trace,
            }),
            Resolved::Proxies {
                st,
                l,
                p,
                q,
                local_f,
                mut trace,
            } => {
                let d = st.far.distance_moderate(p, q, &local_f)?;
                trace.kernel_vertices = d.kernel_vertices;
                trace.kernel_edges = d.kernel_edges;
                if d.value.is_infinite() {
                    trace.unreachable = Some(Unreachable::DisconnectedByFailures);
                }
                Ok(GeneralDistance {
                    value: d.value + self.additive(l),
                    trace,
                })
            }
        }
    }

    pub fn path(&self, s: VertexId, s2: VertexId, failures: &FailureSet, simplify: bool) -> Result<GeneralPath> {
        let (st, p, q, local_f, mut trace) = match self.resolve(s, s2, failures)? {
            Resolved::Same => {
                return Ok(GeneralPath {
                    path: vec![s],
                    length: 0.0,
                    trace: QueryTrace::default(),
                })
            }
            Resolved::Unreachable(trace) => {
                return Ok(GeneralPath {
                    path: Vec::new(),
                    length: f64::INFINITY,
                    trace,
                })
            }
            Resolved::Proxies {
                st,
                p,
                q,
                local_f,
                trace,
                ..
            } => (st, p, q, local_f, trace),
        };
        let Some(mid) = st.far.path_moderate(p, q, &local_f, false)? else {
            trace.unreachable = Some(Unreachable::DisconnectedByFailures);
            return Ok(GeneralPath {
                path: Vec::new(),
                length: f64::INFINITY,
                trace,
            });
        };
        trace.kernel_vertices = mid.kernel_vertices;
        trace.kernel_edges = mid.kernel_edges;
        let mut short = st.short_edges.clone();
        short.activate(failures);
        let connect = |a: VertexId, b: VertexId| {
            short.any_path(a, b).ok_or_else(|| {
                OracleError::Internal(format!("{a} and {b} are not joined by short surviving edges"))
            })
        };
        let partial = &st.partial;
        let local_walk = st.far.kernel.split.collapse_walk(&mid.path);
        let (gp, gq) = (partial.global[p], partial.global[q]);
        let mut walk = connect(s, gp)?;
        for w in local_walk.windows(2) {
            let (a, b) = (partial.global[w[0]], partial.global[w[1]]);
            if partial.is_synthetic(w[0], w[1]) {
                walk.extend_from_slice(&connect(a, b)?[1..]);
            } else {
                walk.push(b);
            }
        }
        walk.extend_from_slice(&connect(gq, s2)?[1..]);
        if simplify {
            walk = loop_erase(&walk);
        }
        let length = check_path(&self.graph, &walk, s, s2, failures)?;
        Ok(GeneralPath {
            path: walk,
            length,
            trace,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ground_truth_distance;
    use crate::spanner_gen::{generate_ft_spanner, Distribution, SpannerSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn random_query(rng: &mut ChaCha8Rng, n: usize, f: usize) -> (VertexId, VertexId, FailureSet) {
        let (s, s2) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let k = rng.gen_range(0..=f);
        let mut fs = BTreeSet::new();
        while fs.len() < k {
            let x = rng.gen_range(0..n);
            if x != s && x != s2 {
                fs.insert(x);
            }
        }
        (s, s2, FailureSet::from_ids(fs))
    }

    fn sandwich(dist: Distribution, n: usize, t: f64, f: usize, eps: f64, seed: u64) {
        let g = generate_ft_spanner(&SpannerSpec::new(n, t, f, seed, dist).unwrap()).unwrap();
        let o = GeneralOracle::build(&g, eps, KernelConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..60 {
            let (s, s2, fs) = random_query(&mut rng, n, f);
            let truth = ground_truth_distance(&g, s, s2, &fs).unwrap();
            let d = o.distance(s, s2, &fs).unwrap();
            let p = o.path(s, s2, &fs, false).unwrap();
            if truth.is_infinite() {
                assert!(d.value.is_infinite() && p.path.is_empty());
                assert!(d.trace.unreachable.is_some());
                continue;
            }
            assert!(d.value >= truth * (1.0 - 1e-9), "{} < {truth}", d.value);
            assert!(d.value <= (1.0 + eps) * truth * (1.0 + 1e-9), "{} > (1+eps) {truth}", d.value);
            assert!(p.length >= truth * (1.0 - 1e-9));
            assert!(p.length <= (1.0 + eps) * truth * (1.0 + 1e-9), "path {} vs {truth}", p.length);
            check_path(&g, &p.path, s, s2, &fs).unwrap();
            if let Some((a, b)) = d.trace.proxies {
                assert!(!fs.contains(a) && !fs.contains(b));
            }
        }
    }

    #[test]
    fn uniform_sandwich() {
        sandwich(Distribution::UniformSquare, 60, 2.0, 1, 0.5, 41);
    }

    #[test]
    fn clustered_sandwich_f2() {
        sandwich(Distribution::Clustered, 50, 1.5, 2, 0.25, 42);
    }

    #[test]
    fn hierarchical_sandwich() {
        sandwich(Distribution::Hierarchical, 27, 1.5, 1, 0.25, 43);
    }

    #[test]
    fn same_vertex_and_adjacent_pair() {
        let g = generate_ft_spanner(&SpannerSpec::new(20, 2.0, 1, 44, Distribution::UniformSquare).unwrap()).unwrap();
        let o = GeneralOracle::build(&g, 0.5, KernelConfig::default()).unwrap();
        assert_eq!(o.distance(3, 3, &FailureSet::empty()).unwrap().value, 0.0);
        assert_eq!(o.path(3, 3, &FailureSet::empty(), false).unwrap().path, vec![3]);
        let (a, b) = g.edges()[0];
        let p = o.path(a, b, &FailureSet::empty(), true).unwrap();
        let truth = ground_truth_distance(&g, a, b, &FailureSet::empty()).unwrap();
        assert!(p.length <= 1.5 * truth);
        assert!(matches!(
            o.distance(a, b, &FailureSet::from_ids([a])),
            Err(OracleError::FailedQueryVertex(_))
        ));
    }
}
