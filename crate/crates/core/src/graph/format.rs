use std::fmt::Write as _;
use std::str::FromStr;

use super::{GeoGraph, Point, SpannerParams};
use crate::error::{OracleError, Result};

fn field<T: FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| OracleError::Parse {
        line,
        msg: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| OracleError::Parse {
        line,
        msg: format!("bad {what}: {tok:?}"),
    })
}

/// Parses the line-oriented graph format:
///
/// ```text
/// n m t f L
/// id x y      (n lines)
/// u v         (m lines)
/// ```
///
/// `#` starts a comment; blank lines are skipped. `L` may be `inf`.
pub fn parse_graph(text: &str) -> Result<GeoGraph> {
    let mut records = text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    });

    let (hl, header) = records.next().ok_or(OracleError::Parse {
        line: 0,
        msg: "empty input".into(),
    })?;
    let mut tok = header.split_whitespace();
    let n: usize = field(tok.next(), hl, "n")?;
    let m: usize = field(tok.next(), hl, "m")?;
    let t: f64 = field(tok.next(), hl, "t")?;
    let f: usize = field(tok.next(), hl, "f")?;
    let l: f64 = field(tok.next(), hl, "L")?;
    if tok.next().is_some() {
        return Err(OracleError::Parse {
            line: hl,
            msg: "trailing tokens in header".into(),
        });
    }
    let params = SpannerParams::new(t, f, l)?;

    let mut points = vec![None; n];
    for _ in 0..n {
        let (ln, rec) = records.next().ok_or(OracleError::Parse {
            line: 0,
            msg: format!("expected {n} vertex lines"),
        })?;
        let mut tok = rec.split_whitespace();
        let id: usize = field(tok.next(), ln, "vertex id")?;
        let x: f64 = field(tok.next(), ln, "x")?;
        let y: f64 = field(tok.next(), ln, "y")?;
        if id >= n {
            return Err(OracleError::Parse {
                line: ln,
                msg: format!("vertex id {id} out of range"),
            });
        }
        if points[id].replace(Point::new(x, y)).is_some() {
            return Err(OracleError::Parse {
                line: ln,
                msg: format!("vertex id {id} repeated"),
            });
        }
    }
    let points: Vec<Point> = points.into_iter().map(|p| p.unwrap()).collect();

    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let (ln, rec) = records.next().ok_or(OracleError::Parse {
            line: 0,
            msg: format!("expected {m} edge lines"),
        })?;
        let mut tok = rec.split_whitespace();
        let u: usize = field(tok.next(), ln, "u")?;
        let v: usize = field(tok.next(), ln, "v")?;
        edges.push((u, v));
    }
    if let Some((ln, _)) = records.next() {
        return Err(OracleError::Parse {
            line: ln,
            msg: "unexpected trailing record".into(),
        });
    }
    GeoGraph::new(points, edges, params)
}

/// Writes the format read by [`parse_graph`]. Floats round-trip exactly.
pub fn write_graph(g: &GeoGraph) -> String {
    let mut out = String::new();
    let p = g.params;
    let _ = writeln!(out, "{} {} {:?} {} {:?}", g.n(), g.m(), p.t, p.f, p.l);
    for (i, pt) in g.points().iter().enumerate() {
        let _ = writeln!(out, "{i} {:?} {:?}", pt.x, pt.y);
    }
    for &(u, v) in g.edges() {
        let _ = writeln!(out, "{u} {v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let text = "# demo\n3 2 1.5 1 inf\n0 0 0\n1 0.1 1e-7\n2 3 4 # corner\n\n0 1\n2 1\n";
        let g = parse_graph(text).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert!(g.params.l.is_infinite());
        let again = parse_graph(&write_graph(&g)).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_graph("2 1 2 0 inf\n0 0 0\n1 x 0\n0 1\n").unwrap_err();
        assert!(matches!(err, OracleError::Parse { line: 3, .. }));
    }

    #[test]
    fn rejects_bad_structure() {
        assert!(parse_graph("").is_err());
        assert!(parse_graph("2 1 2 0 inf\n0 0 0\n0 1 1\n0 1\n").is_err());
        assert!(parse_graph("2 1 2 0 inf\n0 0 0\n1 1 1\n0 0\n").is_err());
        assert!(parse_graph("2 0 0.5 0 inf\n0 0 0\n1 1 1\n").is_err());
        assert!(parse_graph("1 0 2 0 inf\n0 0 0\n0 0\n").is_err());
    }
}
