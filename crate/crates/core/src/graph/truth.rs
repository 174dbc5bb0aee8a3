//! Exact reference answers computed directly on `G - F`.

use super::{dijkstra_filtered, multi_source_dijkstra, FailureSet, GeoGraph, VertexId};
use crate::error::{OracleError, Result};

fn check_query(g: &GeoGraph, s: VertexId, t: VertexId, failures: &FailureSet) -> Result<()> {
    g.check_vertex(s)?;
    g.check_vertex(t)?;
    for v in [s, t] {
        if failures.contains(v) {
            return Err(OracleError::FailedQueryVertex(v));
        }
    }
    Ok(())
}

/// `d_{G-F}(s, t)`, `+inf` when disconnected.
pub fn ground_truth_distance(
    g: &GeoGraph,
    s: VertexId,
    t: VertexId,
    failures: &FailureSet,
) -> Result<f64> {
    check_query(g, s, t, failures)?;
    let tree = dijkstra_filtered(g, s, |v| !failures.contains(v), |_, _| true, None, Some(t));
    Ok(tree.dist[t])
}

/// One shortest `s`-`t` path in `G - F`, `None` when disconnected.
pub fn ground_truth_path(
    g: &GeoGraph,
    s: VertexId,
    t: VertexId,
    failures: &FailureSet,
) -> Result<Option<Vec<VertexId>>> {
    check_query(g, s, t, failures)?;
    let tree = dijkstra_filtered(g, s, |v| !failures.contains(v), |_, _| true, None, Some(t));
    Ok(tree.path_to(t))
}

/// Shortest path whose vertices all lie at graph distance `>= t * r` from
/// every failed vertex, found by deleting that ball around `F`.
pub fn shortest_safe_path(
    g: &GeoGraph,
    u: VertexId,
    v: VertexId,
    failures: &FailureSet,
    t: f64,
    r: f64,
) -> Result<Option<(f64, Vec<VertexId>)>> {
    check_query(g, u, v, failures)?;
    let radius = t * r;
    let (near, _) = multi_source_dijkstra(g, failures.as_slice(), Some(radius));
    let tree = dijkstra_filtered(g, u, |x| !(near[x] < radius), |_, _| true, None, Some(v));
    if near[u] < radius {
        return Ok(None);
    }
    Ok(tree.path_to(v).map(|p| (tree.dist[v], p)))
}
