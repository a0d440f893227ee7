//! Line-oriented text format for test graphs and rooted monomials.
//!
//! Three record kinds, one per line, in any mix after the vertex block:
//!
//! ```text
//! v 0            # declare vertex 0 (ids must be consecutive from 0)
//! v 1
//! e 0 1 a 1      # directed edge 0 -> 1 labeled "a", plain
//! e 1 0 b *      # directed edge 1 -> 0 labeled "b", conjugate-transposed
//! root 0 0       # optional: input and output vertices
//! ```
//!
//! Blank lines and `#` comments are ignored. Labels are interned in order of
//! first appearance, so a written graph re-reads with identical label ids.

use super::{GraphMonomial, Star, TestGraph};
use crate::error::{CoreError, Result};
use std::fmt::Write as _;

/// Parse a test graph plus its optional root line.
pub fn parse_graph(input: &str) -> Result<(TestGraph, Option<(usize, usize)>)> {
    let mut n_declared = 0usize;
    let mut edges: Vec<(usize, usize, String, Star)> = Vec::new();
    let mut roots: Option<(usize, usize)> = None;
    for (lineno, raw) in input.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tok = line.split_whitespace();
        let kind = tok.next().expect("nonempty line has a token");
        let fail = |msg: &str| CoreError::Format(format!("line {}: {msg}", lineno + 1));
        match kind {
            "v" => {
                let id: usize = tok
                    .next()
                    .ok_or_else(|| fail("missing vertex id"))?
                    .parse()
                    .map_err(|_| fail("bad vertex id"))?;
                if id != n_declared {
                    return Err(fail(&format!("vertex ids must be consecutive; expected {n_declared}")));
                }
                n_declared += 1;
            }
            "e" => {
                let src: usize = tok
                    .next()
                    .ok_or_else(|| fail("missing edge source"))?
                    .parse()
                    .map_err(|_| fail("bad edge source"))?;
                let tar: usize = tok
                    .next()
                    .ok_or_else(|| fail("missing edge target"))?
                    .parse()
                    .map_err(|_| fail("bad edge target"))?;
                let label = tok.next().ok_or_else(|| fail("missing edge label"))?.to_string();
                let star = match tok.next().ok_or_else(|| fail("missing star mark"))? {
                    "1" => Star::One,
                    "*" => Star::Conj,
                    other => return Err(fail(&format!("star mark must be 1 or *, got {other}"))),
                };
                edges.push((src, tar, label, star));
            }
            "root" => {
                if roots.is_some() {
                    return Err(fail("duplicate root line"));
                }
                let v_in: usize = tok
                    .next()
                    .ok_or_else(|| fail("missing input root"))?
                    .parse()
                    .map_err(|_| fail("bad input root"))?;
                let v_out: usize = tok
                    .next()
                    .ok_or_else(|| fail("missing output root"))?
                    .parse()
                    .map_err(|_| fail("bad output root"))?;
                roots = Some((v_in, v_out));
            }
            other => return Err(fail(&format!("unknown record kind {other}"))),
        }
        if tok.next().is_some() {
            return Err(CoreError::Format(format!("line {}: trailing tokens", lineno + 1)));
        }
    }
    let mut g = TestGraph::new(n_declared);
    for (src, tar, label, star) in edges {
        g.add_edge_named(src, tar, &label, star)
            .map_err(|e| CoreError::Format(format!("{e}")))?;
    }
    if let Some((v_in, v_out)) = roots {
        if v_in >= n_declared || v_out >= n_declared {
            return Err(CoreError::Format("root out of range".into()));
        }
    }
    Ok((g, roots))
}

/// Parse a rooted monomial; the `root` line is mandatory here.
pub fn parse_monomial(input: &str) -> Result<GraphMonomial> {
    let (graph, roots) = parse_graph(input)?;
    let (v_in, v_out) = roots.ok_or_else(|| CoreError::Format("missing root line".into()))?;
    GraphMonomial::new(graph, v_in, v_out).map_err(|e| CoreError::Format(format!("{e}")))
}

/// Write a test graph, optionally with a root line.
pub fn write_graph(g: &TestGraph, roots: Option<(usize, usize)>) -> String {
    let mut out = String::new();
    for v in 0..g.n_vertices() {
        writeln!(out, "v {v}").expect("string write");
    }
    for e in g.edges() {
        let star = match e.star {
            Star::One => "1",
            Star::Conj => "*",
        };
        writeln!(out, "e {} {} {} {}", e.src, e.tar, g.label_name(e.label), star)
            .expect("string write");
    }
    if let Some((v_in, v_out)) = roots {
        writeln!(out, "root {v_in} {v_out}").expect("string write");
    }
    out
}

/// Write a rooted monomial.
pub fn write_monomial(m: &GraphMonomial) -> String {
    write_graph(&m.graph, Some((m.v_in, m.v_out)))
}
