//! Query files, answer lines and ground-truth verification.
//!
//! A query line reads `s s' k F_1 .. F_k kind` with `kind` one of
//! `distance` or `path`; `#` starts a comment.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{OracleError, Result};
use crate::far::check_path;
use crate::general::{GeneralOracle, QueryTrace, Unreachable};
use crate::graph::{ground_truth_distance, FailureSet, GeoGraph, VertexId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueryKind {
    Distance,
    Path,
}

impl FromStr for QueryKind {
    type Err = OracleError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distance" | "dist" => Ok(QueryKind::Distance),
            "path" => Ok(QueryKind::Path),
            other => Err(OracleError::InvalidParameter(format!("unknown query kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub s: VertexId,
    pub s2: VertexId,
    pub failures: Vec<VertexId>,
    pub kind: QueryKind,
}

impl QueryRecord {
    pub fn to_line(&self) -> String {
        let mut out = format!("{} {} {}", self.s, self.s2, self.failures.len());
        for x in &self.failures {
            let _ = write!(out, " {x}");
        }
        out.push_str(match self.kind {
            QueryKind::Distance => " distance",
            QueryKind::Path => " path",
        });
        out
    }

    /// Checks ids and the failure budget against `g`.
    pub fn check(&self, g: &GeoGraph) -> Result<FailureSet> {
        g.check_vertex(self.s)?;
        g.check_vertex(self.s2)?;
        FailureSet::new(self.failures.iter().copied(), g.n(), g.params.f)
    }
}

fn parse_line(line: &str, lineno: usize) -> Result<QueryRecord> {
    let err = |msg: String| OracleError::Parse { line: lineno, msg };
    let toks: Vec<&str> = line.split_whitespace().collect();
    let num = |i: usize, what: &str| -> Result<usize> {
        let tok = toks.get(i).ok_or_else(|| err(format!("missing {what}")))?;
        tok.parse().map_err(|_| err(format!("bad {what}: {tok:?}")))
    };
    let s = num(0, "source")?;
    let s2 = num(1, "target")?;
    let k = num(2, "failure count")?;
    let failures = (0..k).map(|i| num(3 + i, "failed vertex")).collect::<Result<Vec<_>>>()?;
    let kind = toks
        .get(3 + k)
        .ok_or_else(|| err("missing query kind".into()))?
        .parse()
        .map_err(|e: OracleError| err(e.to_string()))?;
    if toks.len() > 4 + k {
        return Err(err("trailing fields".into()));
    }
    Ok(QueryRecord { s, s2, failures, kind })
}

/// Parses every non-blank line; bad lines are returned as errors in place.
pub fn parse_queries(text: &str) -> Vec<Result<QueryRecord>> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let line = raw.split('#').next().unwrap_or("").trim();
            (!line.is_empty()).then(|| parse_line(line, i + 1))
        })
        .collect()
}

pub fn write_queries(records: &[QueryRecord]) -> String {
    records.iter().map(|r| r.to_line() + "\n").collect()
}

/// Random queries with uniform endpoints and up to `f` failures avoiding them.
pub fn random_queries(g: &GeoGraph, count: usize, seed: u64, kind: QueryKind) -> Vec<QueryRecord> {
    let n = g.n();
    let f = g.params.f;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let s = rng.gen_range(0..n);
            let s2 = rng.gen_range(0..n);
            let want = rng.gen_range(0..=f).min(n.saturating_sub(2));
            let mut failures: Vec<VertexId> = Vec::with_capacity(want);
            while failures.len() < want {
                let x = rng.gen_range(0..n);
                if x != s && x != s2 && !failures.contains(&x) {
                    failures.push(x);
                }
            }
            failures.sort_unstable();
            QueryRecord { s, s2, failures, kind }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub kind: QueryKind,
    /// Distance estimate, or the length of the returned path.
    pub value: f64,
    pub path: Vec<VertexId>,
    pub trace: QueryTrace,
    pub micros: Option<u128>,
}

pub fn answer(oracle: &GeneralOracle, q: &QueryRecord, timing: bool) -> Result<Answer> {
    let failures = q.check(&oracle.graph)?;
    let start = Instant::now();
    let (value, path, trace) = match q.kind {
        QueryKind::Distance => {
            let d = oracle.distance(q.s, q.s2, &failures)?;
            (d.value, Vec::new(), d.trace)
        }
        QueryKind::Path => {
            let p = oracle.path(q.s, q.s2, &failures, true)?;
            (p.length, p.path, p.trace)
        }
    };
    Ok(Answer {
        kind: q.kind,
        value,
        path,
        trace,
        micros: timing.then(|| start.elapsed().as_micros()),
    })
}

fn reason(u: Option<Unreachable>) -> &'static str {
    match u {
        None => "ok",
        Some(Unreachable::DisconnectedInG) => "disconnected-in-graph",
        Some(Unreachable::DisconnectedByFailures) => "disconnected-by-failures",
    }
}

impl Answer {
    /// One `key=value` line with a fixed field order.
    pub fn to_line(&self, index: usize) -> String {
        let mut out = format!("query={index}");
        match self.kind {
            QueryKind::Distance => {
                let _ = write!(out, " kind=distance value={:?}", self.value);
            }
            QueryKind::Path => {
                let ids: Vec<String> = self.path.iter().map(|v| v.to_string()).collect();
                let _ = write!(out, " kind=path length={:?} path={}", self.value, ids.join(","));
            }
        }
        let tr = &self.trace;
        let _ = write!(out, " reason={}", reason(tr.unreachable));
        match tr.scale {
            Some((k, i)) => {
                let _ = write!(out, " scale={k}:{i}");
            }
            None => out.push_str(" scale=-"),
        }
        match tr.proxies {
            Some((p, q)) => {
                let _ = write!(out, " proxies={p},{q}");
            }
            None => out.push_str(" proxies=-"),
        }
        let _ = write!(
            out,
            " kernel_vertices={} kernel_edges={} small_instance={}",
            tr.kernel_vertices, tr.kernel_edges, tr.small_instance
        );
        if let Some(us) = self.micros {
            let _ = write!(out, " micros={us}");
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub query: QueryRecord,
    pub truth: f64,
    pub got: f64,
    pub what: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checked: usize,
    /// Worst `answer / truth` over reachable queries.
    pub max_ratio: f64,
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "clean={}", self.is_clean());
        let _ = writeln!(out, "checked={}", self.checked);
        let _ = writeln!(out, "max_ratio={:?}", self.max_ratio);
        let _ = writeln!(out, "violations={}", self.violations.len());
        for v in &self.violations {
            let _ = writeln!(
                out,
                "violation query=\"{}\" truth={:?} got={:?} what=\"{}\"",
                v.query.to_line(),
                v.truth,
                v.got,
                v.what
            );
        }
        out
    }
}

/// Runs every query against the oracle and against Dijkstra on `g`, checking
/// `d <= answer <= (1 + eps) d` and, for paths, that the walk lies in `G - F`.
pub fn verify(g: &GeoGraph, oracle: &GeneralOracle, queries: &[QueryRecord]) -> Result<VerifyReport> {
    let eps = oracle.eps_user;
    let slack = 1e-9;
    let mut report = VerifyReport::default();
    for q in queries {
        let failures = q.check(g)?;
        let truth = ground_truth_distance(g, q.s, q.s2, &failures)?;
        let mut flag = |got: f64, what: String| {
            report.violations.push(Violation {
                query: q.clone(),
                truth,
                got,
                what,
            })
        };
        let a = match answer(oracle, q, false) {
            Ok(a) => a,
            Err(e) => {
                flag(f64::NAN, format!("oracle error: {e}"));
                continue;
            }
        };
        report.checked += 1;
        if truth.is_infinite() {
            if a.value.is_finite() {
                flag(a.value, "finite answer for a disconnected pair".into());
            }
            continue;
        }
        if a.value < truth * (1.0 - slack) {
            flag(a.value, "below the true distance".into());
        }
        if !(a.value <= (1.0 + eps) * truth * (1.0 + slack)) {
            flag(a.value, "above (1+eps) times the true distance".into());
        }
        if truth > 0.0 {
            report.max_ratio = report.max_ratio.max(a.value / truth);
        }
        if q.kind == QueryKind::Path {
            match check_path(g, &a.path, q.s, q.s2, &failures) {
                Ok(len) if (len - a.value).abs() <= slack * len.max(1.0) => {}
                Ok(len) => flag(a.value, format!("reported length differs from walk length {len:?}")),
                Err(e) => flag(a.value, format!("invalid walk: {e}")),
            }
        }
    }
    Ok(report)
}
