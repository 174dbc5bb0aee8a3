use serde::{Deserialize, Serialize};

use crate::error::{OracleError, Result};
use crate::graph::GeoGraph;

/// Scales `L` covering every vertex-pair distance `d` with `d` in `[L/m, L/t)`,
/// partitioned into sequences whose consecutive elements grow by `>= m^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleSequences {
    pub m: f64,
    pub t: f64,
    /// Each sequence is increasing.
    pub sequences: Vec<Vec<f64>>,
    /// All scales ascending as `(lower cover bound, L, sequence, position)`;
    /// the bound is the distance that produced `L`, equal to `L/m` up to rounding.
    all: Vec<(f64, f64, usize, usize)>,
}

/// Effective edge count used by the reduction: at least 5 and above `t`.
pub fn effective_m(m: usize, t: f64) -> usize {
    m.max(5).max(t.floor() as usize + 1)
}

impl ScaleSequences {
    pub fn build(g: &GeoGraph, m: usize) -> Result<Self> {
        let mut dists = Vec::with_capacity(g.n() * g.n().saturating_sub(1) / 2);
        for u in 0..g.n() {
            for v in u + 1..g.n() {
                let d = g.euclid(u, v);
                if !(d > 0.0) {
                    return Err(OracleError::InvalidGraph(format!("vertices {u} and {v} coincide")));
                }
                dists.push(d);
            }
        }
        dists.sort_unstable_by(f64::total_cmp);
        Ok(Self::from_sorted_distances(&dists, m as f64, g.params.t))
    }

    pub fn from_sorted_distances(dists: &[f64], m: f64, t: f64) -> Self {
        let mut scales = Vec::new();
        let mut covered_below = f64::NEG_INFINITY;
        for &d in dists {
            if d < covered_below {
                continue;
            }
            let l = m * d;
            scales.push((d, l));
            covered_below = l / t;
        }
        let mut sequences: Vec<Vec<f64>> = Vec::new();
        let mut all = Vec::with_capacity(scales.len());
        for &(lo, l) in &scales {
            let slot = sequences
                .iter()
                .position(|s| l >= m * m * s.last().copied().unwrap_or(0.0));
            let k = match slot {
                Some(k) => k,
                None => {
                    sequences.push(Vec::new());
                    sequences.len() - 1
                }
            };
            all.push((lo, l, k, sequences[k].len()));
            sequences[k].push(l);
        }
        Self { m, t, sequences, all }
    }

    /// `(sequence, position, L)` with `d` in `[L/m, L/t)`.
    pub fn lookup(&self, d: f64) -> Option<(usize, usize, f64)> {
        let idx = self.all.partition_point(|&(lo, ..)| lo <= d);
        let &(_, l, k, i) = self.all.get(idx.checked_sub(1)?)?;
        (d < l / self.t).then_some((k, i, l))
    }

    pub fn scale_count(&self) -> usize {
        self.all.len()
    }
}
