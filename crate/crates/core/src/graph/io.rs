//! Plain-text file formats.
//!
//! Graph:
//! ```text
//! graph <n_nodes> <feature_dim> <directed|undirected>
//! f <x_1> ... <x_F>        # exactly n_nodes lines, node order
//! e <u> <v>                # zero or more edges
//! ```
//! Observation / seeds: `observation <n>` or `seeds <n>`, then one `0`/`1`
//! per line. Forest: `forest <n>`, then `<parent> <step>` per node with `-1`
//! for "none". Scores: `scores <n>`, then one float per line.
//! Blank lines and lines starting with `#` are ignored everywhere.

use std::fmt::Write as _;
use std::path::Path;

use super::{DiffusionObservation, Graph, PropagationForest, SeedVector};
use crate::error::{Error, Result};
use crate::numeric::DenseMatrix;

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::parse(line, format!("invalid {what} `{tok}`")))
}

fn parse_float(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = parse_num(tok, line, "number")?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite number `{tok}`")));
    }
    Ok(v)
}

pub fn parse_graph(text: &str) -> Result<Graph> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| Error::parse(1, "missing graph header"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 4 || toks[0] != "graph" {
        return Err(Error::parse(hline, "header must be `graph <n_nodes> <feature_dim> <directed|undirected>`"));
    }
    let n: usize = parse_num(toks[1], hline, "node count")?;
    let fdim: usize = parse_num(toks[2], hline, "feature dimension")?;
    let directed = match toks[3] {
        "directed" => true,
        "undirected" => false,
        other => return Err(Error::parse(hline, format!("unknown edge mode `{other}`"))),
    };
    // Refuse sizes whose feature matrix would not fit in memory.
    if n.checked_mul(fdim).is_none_or(|c| c > 1 << 28) {
        return Err(Error::parse(hline, "graph too large"));
    }

    let mut features = Vec::with_capacity((n * fdim).min(1 << 16));
    let mut rows = 0usize;
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (ln, line) in lines {
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("f") => {
                if rows == n {
                    return Err(Error::parse(ln, format!("more than {n} feature rows")));
                }
                let before = features.len();
                for t in toks {
                    features.push(parse_float(t, ln)?);
                }
                if features.len() - before != fdim {
                    return Err(Error::parse(
                        ln,
                        format!("feature row has {} values, expected {fdim}", features.len() - before),
                    ));
                }
                rows += 1;
            }
            Some("e") => {
                let u: usize = parse_num(toks.next().unwrap_or(""), ln, "node id")?;
                let v: usize = parse_num(toks.next().unwrap_or(""), ln, "node id")?;
                if toks.next().is_some() {
                    return Err(Error::parse(ln, "edge line takes exactly two ids"));
                }
                if u >= n || v >= n {
                    return Err(Error::parse(ln, format!("node id out of range 0..{n}")));
                }
                if u == v {
                    return Err(Error::parse(ln, format!("self-loop on node {u}")));
                }
                let pairs: &[(usize, usize)] = if directed { &[(u, v)] } else { &[(u, v), (v, u)] };
                for &p in pairs {
                    if !seen.insert(p) {
                        return Err(Error::parse(ln, format!("duplicate edge ({}, {})", p.0, p.1)));
                    }
                    edges.push(p);
                }
            }
            Some(other) => return Err(Error::parse(ln, format!("unknown record `{other}`"))),
            None => unreachable!("blank lines are filtered"),
        }
    }
    if rows != n {
        return Err(Error::parse(text.lines().count().max(1), format!("expected {n} feature rows, found {rows}")));
    }
    let features = DenseMatrix::new(n, fdim, features)?;
    Graph::new(n, edges, features)
}

/// Canonical form: directed, edges sorted.
pub fn write_graph(g: &Graph) -> String {
    let mut out = format!("graph {} {} directed\n", g.n_nodes(), g.feature_dim());
    for v in 0..g.n_nodes() {
        out.push('f');
        for x in g.feature(v) {
            write!(out, " {x}").unwrap();
        }
        out.push('\n');
    }
    for &(u, v) in g.edges() {
        writeln!(out, "e {u} {v}").unwrap();
    }
    out
}

fn parse_header(text: &str, keyword: &str) -> Result<(usize, Vec<(usize, String)>)> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| Error::parse(1, format!("missing `{keyword}` header")))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 2 || toks[0] != keyword {
        return Err(Error::parse(hline, format!("header must be `{keyword} <n>`")));
    }
    let n: usize = parse_num(toks[1], hline, "node count")?;
    let body: Vec<(usize, String)> = lines.map(|(l, s)| (l, s.to_string())).collect();
    if body.len() != n {
        let at = body.get(n).map_or(hline, |(l, _)| *l);
        return Err(Error::parse(at, format!("expected {n} entries, found {}", body.len())));
    }
    Ok((n, body))
}

fn parse_bits(text: &str, keyword: &str) -> Result<Vec<bool>> {
    let (_, body) = parse_header(text, keyword)?;
    body.iter()
        .map(|(l, s)| match s.as_str() {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(Error::parse(*l, format!("expected 0 or 1, got `{other}`"))),
        })
        .collect()
}

pub fn parse_observation(text: &str) -> Result<DiffusionObservation> {
    parse_bits(text, "observation").map(DiffusionObservation::new)
}

pub fn parse_seeds(text: &str) -> Result<SeedVector> {
    parse_bits(text, "seeds").map(SeedVector::new)
}

pub fn parse_scores(text: &str) -> Result<Vec<f64>> {
    let (_, body) = parse_header(text, "scores")?;
    body.iter().map(|(l, s)| parse_float(s, *l)).collect()
}

pub fn parse_forest(text: &str) -> Result<PropagationForest> {
    let (n, body) = parse_header(text, "forest")?;
    let mut forest = PropagationForest::empty(n);
    for (v, (l, s)) in body.iter().enumerate() {
        let toks: Vec<&str> = s.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(Error::parse(*l, "forest line must be `<parent> <step>`"));
        }
        let parent: i64 = parse_num(toks[0], *l, "parent")?;
        let step: i64 = parse_num(toks[1], *l, "step")?;
        forest.parent[v] = match parent {
            -1 => None,
            p if p >= 0 && (p as usize) < n => Some(p as usize),
            p => return Err(Error::parse(*l, format!("parent {p} out of range"))),
        };
        forest.step[v] = match step {
            -1 => None,
            s if (0..=u32::MAX as i64).contains(&s) => Some(s as u32),
            s => return Err(Error::parse(*l, format!("invalid step {s}"))),
        };
    }
    Ok(forest)
}

fn write_bits(keyword: &str, bits: &[bool]) -> String {
    let mut out = format!("{keyword} {}\n", bits.len());
    for &b in bits {
        out.push_str(if b { "1\n" } else { "0\n" });
    }
    out
}

pub fn write_observation(y: &DiffusionObservation) -> String {
    write_bits("observation", y.as_slice())
}

pub fn write_seeds(s: &SeedVector) -> String {
    write_bits("seeds", s.as_slice())
}

pub fn write_scores(scores: &[f64]) -> String {
    let mut out = format!("scores {}\n", scores.len());
    for x in scores {
        writeln!(out, "{x}").unwrap();
    }
    out
}

pub fn write_forest(f: &PropagationForest) -> String {
    let mut out = format!("forest {}\n", f.len());
    for (p, s) in f.parent.iter().zip(&f.step) {
        let p = p.map_or(-1, |p| p as i64);
        let s = s.map_or(-1, |s| s as i64);
        writeln!(out, "{p} {s}").unwrap();
    }
    out
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<Graph> {
    parse_graph(&read(path.as_ref())?)
}

pub fn load_observation(path: impl AsRef<Path>) -> Result<DiffusionObservation> {
    parse_observation(&read(path.as_ref())?)
}

pub fn load_seeds(path: impl AsRef<Path>) -> Result<SeedVector> {
    parse_seeds(&read(path.as_ref())?)
}

pub fn load_forest(path: impl AsRef<Path>) -> Result<PropagationForest> {
    parse_forest(&read(path.as_ref())?)
}

pub fn load_scores(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    parse_scores(&read(path.as_ref())?)
}
