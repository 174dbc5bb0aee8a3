//! Distance and path queries for moderately far pairs, answered on kernels.

use serde::{Deserialize, Serialize};

use crate::arbitrary_path::PathOracle;
use crate::error::{OracleError, Result};
use crate::graph::{FailureSet, GeoGraph, VertexId};
use crate::kernel::{EdgeKind, KernelConfig, KernelOracle};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceAnswer {
    pub value: f64,
    pub kernel_vertices: usize,
    pub kernel_edges: usize,
    pub level: usize,
    /// A net vertex of the query level had failed, so the answer was taken
    /// from the path-preserving kernel.
    pub fallback: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub from: VertexId,
    pub to: VertexId,
    pub level: usize,
    pub kind: EdgeKind,
    /// Length of the subpath substituted for the kernel edge.
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathAnswer {
    /// Walk in the split graph.
    pub path: Vec<VertexId>,
    pub length: f64,
    pub expansion_log: Vec<Expansion>,
    pub kernel_vertices: usize,
    pub kernel_edges: usize,
    pub level: usize,
}

/// Removes cycles from a walk, keeping its endpoints.
pub fn loop_erase(walk: &[VertexId]) -> Vec<VertexId> {
    let mut out: Vec<VertexId> = Vec::with_capacity(walk.len());
    let mut pos = std::collections::HashMap::new();
    for &x in walk {
        if let Some(&i) = pos.get(&x) {
            for y in out.drain(i + 1..) {
                pos.remove(&y);
            }
        } else {
            pos.insert(x, out.len());
            out.push(x);
        }
    }
    out
}

/// Checks that `path` runs from `s` to `s2` along edges of `g` avoiding `failures`.
pub fn check_path(g: &GeoGraph, path: &[VertexId], s: VertexId, s2: VertexId, failures: &FailureSet) -> Result<f64> {
    if path.first() != Some(&s) || path.last() != Some(&s2) {
        return Err(OracleError::Internal(format!("path does not join {s} and {s2}")));
    }
    if let Some(&x) = path.iter().find(|&&x| failures.contains(x)) {
        return Err(OracleError::Internal(format!("path visits failed vertex {x}")));
    }
    g.walk_length(path)
        .ok_or_else(|| OracleError::Internal("path uses a non-edge".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FarOracle {
    pub kernel: KernelOracle,
    /// Edges of length at most `tL/m^6`, used to expand short kernel edges.
    pub short_paths: PathOracle,
}

impl FarOracle {
    pub fn build(g: &GeoGraph, eps: f64, config: KernelConfig) -> Result<Self> {
        let kernel = KernelOracle::build(g, eps, config)?;
        let lv = kernel.levels;
        let tiny = kernel.t() * lv.l / (lv.m as f64).powi(6);
        let short_paths = PathOracle::build(kernel.graph(), tiny);
        Ok(Self { kernel, short_paths })
    }

    pub fn graph(&self) -> &GeoGraph {
        self.kernel.graph()
    }

    /// Kernel distance. A failed net vertex of the query level can cut the
    /// kernel's only route, so then the path-preserving kernel, which
    /// contains the kernel, answers instead.
    pub fn distance_moderate(&self, s: VertexId, s2: VertexId, failures: &FailureSet) -> Result<DistanceAnswer> {
        let h = self.kernel.kernel_query(s, s2, failures)?;
        let net = self.kernel.net(h.level);
        let fallback = failures.iter().any(|v| net.contains(v));
        let h = if fallback {
            self.kernel.pp_kernel_query(s, s2, failures)?
        } else {
            h
        };
        Ok(DistanceAnswer {
            value: h.distance(),
            kernel_vertices: h.vertices.len(),
            kernel_edges: h.edges.len(),
            level: h.level,
            fallback,
        })
    }

    /// Shortest path of the path-preserving kernel with every edge replaced
    /// by a path of the surviving graph. `None` when the kernel has no path.
    pub fn path_moderate(
        &self,
        s: VertexId,
        s2: VertexId,
        failures: &FailureSet,
        simplify: bool,
    ) -> Result<Option<PathAnswer>> {
        let h = self.kernel.pp_kernel_query(s, s2, failures)?;
        let Some((_, steps)) = h.shortest_path() else {
            return Ok(None);
        };
        let g = self.graph();
        let mut active: Option<PathOracle> = None;
        let mut walk = vec![s];
        let mut log = Vec::with_capacity(steps.len());
        for st in steps {
            let e = &h.edges[st.edge];
            let mut sub = match e.kind {
                EdgeKind::FtPath => e.path.clone().expect("ft edge carries its path"),
                EdgeKind::Short => {
                    let o = active.get_or_insert_with(|| {
                        let mut o = self.short_paths.clone();
                        o.activate(failures);
                        o
                    });
                    o.any_path(e.a, e.b).ok_or_else(|| {
                        OracleError::Internal(format!(
                            "short kernel edge ({}, {}) at level {} has no replacement among tiny edges",
                            e.a, e.b, e.level
                        ))
                    })?
                }
            };
            if sub[0] != st.from {
                sub.reverse();
            }
            let length = g
                .walk_length(&sub)
                .ok_or_else(|| OracleError::Internal("replacement is not a walk".into()))?;
            if e.kind == EdgeKind::FtPath && (length - e.weight).abs() > 1e-12 * e.weight.max(1.0) {
                return Err(OracleError::Internal(format!(
                    "replacement length {length} differs from edge weight {}",
                    e.weight
                )));
            }
            log.push(Expansion {
                from: st.from,
                to: st.to,
                level: e.level,
                kind: e.kind,
                length,
            });
            walk.extend_from_slice(&sub[1..]);
        }
        if simplify {
            walk = loop_erase(&walk);
        }
        let length = check_path(g, &walk, s, s2, failures)?;
        Ok(Some(PathAnswer {
            path: walk,
            length,
            expansion_log: log,
            kernel_vertices: h.vertices.len(),
            kernel_edges: h.edges.len(),
            level: h.level,
        }))
    }
}
