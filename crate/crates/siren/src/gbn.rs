//! Line-oriented network format.
//!
//! ```text
//! gbn <name>
//! node <id> latent|observed
//! edge <src> <dst>
//! cpd <id> intercept <float> var <float> [coef <parent> <float>]*
//! ```
//!
//! Sections appear in that order; `#` starts a comment. A `node` line may
//! omit its kind, in which case leaves are observed and every other node is
//! latent. Floats are decimal or hex; the serializer writes hex.

use std::collections::BTreeMap;
use std::fmt::Write;

use siren_core::graph::{BayesNet, GraphError, LinearGaussianCpd, Node, NodeKind};

use crate::hexfloat::{format_hex, parse_float};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GbnError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokens(line: &str) -> Vec<Token<'_>> {
    let content = line.split('#').next().unwrap_or("");
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in content.char_indices() {
        match (ch.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(Token { text: &content[s..i], column: content[..s].chars().count() + 1 });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Token { text: &content[s..], column: content[..s].chars().count() + 1 });
    }
    out
}

#[derive(PartialEq, PartialOrd)]
enum Section {
    Header,
    Nodes,
    Edges,
    Cpds,
}

pub fn parse_gbn(text: &str) -> Result<BayesNet, GbnError> {
    let mut name: Option<String> = None;
    let mut nodes: Vec<(String, Option<NodeKind>)> = Vec::new();
    let mut edges: Vec<(String, String)> = Vec::new();
    let mut cpds: BTreeMap<String, LinearGaussianCpd> = BTreeMap::new();
    let mut section = Section::Header;
    let mut last_line = 0;

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        last_line = line_no;
        let toks = tokens(line);
        let Some(head) = toks.first() else { continue };
        let err = |column: usize, message: String| GbnError::Syntax { line: line_no, column, message };
        let end_col = line.split('#').next().unwrap_or("").trim_end().chars().count() + 1;
        let arg = |k: usize, what: &str| toks.get(k).ok_or_else(|| err(end_col, format!("expected {what}")));
        let float = |k: usize, what: &str| -> Result<f64, GbnError> {
            let t = arg(k, what)?;
            parse_float(t.text).map_err(|_| err(t.column, format!("invalid number `{}`", t.text)))
        };
        let enter = |section: &mut Section, next: Section| {
            if *section > next {
                Err(err(head.column, format!("`{}` line out of order", head.text)))
            } else {
                *section = next;
                Ok(())
            }
        };
        let expect = match head.text {
            "gbn" => {
                if section != Section::Header || name.is_some() {
                    return Err(err(head.column, "duplicate `gbn` header".into()));
                }
                name = Some(arg(1, "network name")?.text.to_string());
                2
            }
            _ if name.is_none() => return Err(err(head.column, "file must start with `gbn <name>`".into())),
            "node" => {
                enter(&mut section, Section::Nodes)?;
                let id = arg(1, "node id")?.text.to_string();
                match toks.get(2) {
                    None => {
                        nodes.push((id, None));
                        2
                    }
                    Some(t) => {
                        let kind = match t.text {
                            "latent" => NodeKind::Latent,
                            "observed" => NodeKind::Observed,
                            other => return Err(err(t.column, format!("unknown node kind `{other}`"))),
                        };
                        nodes.push((id, Some(kind)));
                        3
                    }
                }
            }
            "edge" => {
                enter(&mut section, Section::Edges)?;
                edges.push((arg(1, "source id")?.text.to_string(), arg(2, "target id")?.text.to_string()));
                3
            }
            "cpd" => {
                enter(&mut section, Section::Cpds)?;
                let id = arg(1, "node id")?;
                for (k, key) in [(2, "intercept"), (4, "var")] {
                    let t = arg(k, &format!("`{key}`"))?;
                    if t.text != key {
                        return Err(err(t.column, format!("expected `{key}`, found `{}`", t.text)));
                    }
                }
                let mut cpd = LinearGaussianCpd::new(float(3, "intercept value")?, float(5, "variance value")?);
                let mut k = 6;
                while k < toks.len() {
                    if toks[k].text != "coef" {
                        return Err(err(toks[k].column, format!("expected `coef`, found `{}`", toks[k].text)));
                    }
                    let parent = arg(k + 1, "parent id")?.text;
                    cpd = cpd.coef(parent, float(k + 2, "coefficient value")?);
                    k += 3;
                }
                if cpds.insert(id.text.to_string(), cpd).is_some() {
                    return Err(err(id.column, format!("duplicate cpd for `{}`", id.text)));
                }
                k
            }
            other => return Err(err(head.column, format!("unknown directive `{other}`"))),
        };
        if let Some(extra) = toks.get(expect) {
            return Err(err(extra.column, format!("unexpected token `{}`", extra.text)));
        }
    }

    let name = name.ok_or(GbnError::Syntax { line: last_line.max(1), column: 1, message: "missing `gbn <name>` header".into() })?;
    let has_child: std::collections::BTreeSet<&str> = edges.iter().map(|(s, _)| s.as_str()).collect();
    let nodes: Vec<Node> = nodes
        .iter()
        .map(|(id, kind)| Node {
            id: id.clone(),
            kind: kind.unwrap_or(if has_child.contains(id.as_str()) { NodeKind::Latent } else { NodeKind::Observed }),
        })
        .collect();
    let cpds = if cpds.is_empty() { None } else { Some(cpds) };
    Ok(BayesNet::new(&name, nodes, &edges, cpds)?)
}

/// Canonical text: declaration order for nodes, edges and CPDs, explicit
/// kinds, hex floats.
pub fn serialize_gbn(g: &BayesNet) -> String {
    let mut out = format!("gbn {}\n", g.name());
    for node in g.nodes() {
        writeln!(out, "node {} {}", node.id, node.kind.as_str()).unwrap();
    }
    for &(s, d) in g.edges() {
        writeln!(out, "edge {} {}", g.id(s), g.id(d)).unwrap();
    }
    if let Some(cpds) = g.cpds() {
        for (node, cpd) in g.nodes().iter().zip(cpds) {
            write!(out, "cpd {} intercept {} var {}", node.id, format_hex(cpd.intercept), format_hex(cpd.variance)).unwrap();
            for (p, c) in &cpd.coefficients {
                write!(out, " coef {p} {}", format_hex(*c)).unwrap();
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "gbn t\nnode a latent\nnode b observed\nedge a b\ncpd a intercept 0 var 1\ncpd b intercept 0 var 1 coef a 2.0";

    #[test]
    fn minimal_file() {
        let g = parse_gbn(MINIMAL).unwrap();
        assert_eq!((g.latent_count(), g.observed_count(), g.edge_count()), (1, 1, 1));
        assert_eq!(g.cpd(1).unwrap().coefficient("a"), Some(2.0));
    }

    #[test]
    fn round_trip_is_stable() {
        let text = serialize_gbn(&parse_gbn(MINIMAL).unwrap());
        assert_eq!(serialize_gbn(&parse_gbn(&text).unwrap()), text);
        assert!(text.contains("coef a 0x1p+1"));
    }

    #[test]
    fn cycle_is_reported() {
        let err = parse_gbn("gbn t\nnode a latent\nnode b latent\nedge a b\nedge b a\n").unwrap_err();
        assert!(matches!(err, GbnError::Graph(GraphError::Cycle(_))));
    }

    #[test]
    fn syntax_positions() {
        let at = |text: &str| match parse_gbn(text).unwrap_err() {
            GbnError::Syntax { line, column, .. } => (line, column),
            other => panic!("{other}"),
        };
        assert_eq!(at("node a latent\n"), (1, 1));
        assert_eq!(at("gbn t\nnode a hidden\n"), (2, 8));
        assert_eq!(at("gbn t\nnode a latent\ncpd a intercept zero var 1\n"), (3, 17));
        assert_eq!(at("gbn t\nnode a latent\nedge a\n"), (3, 7));
        assert_eq!(at("gbn t\nnode a\nedge a b\nnode b\n"), (4, 1));
        assert_eq!(at("gbn t\n  node a latent extra\n"), (2, 17));
        assert_eq!(at("gbn t\nnode a latent\nlink a b\n"), (3, 1));
    }

    #[test]
    fn comments_and_default_kinds() {
        let g = parse_gbn("# header\ngbn t # name\nnode a\nnode b\n\nedge a b # only edge\n").unwrap();
        assert_eq!(g.kind(0), NodeKind::Latent);
        assert_eq!(g.kind(1), NodeKind::Observed);
        assert!(g.cpds().is_none());
    }

    #[test]
    fn duplicate_node_and_cpd_mismatch() {
        assert!(matches!(parse_gbn("gbn t\nnode a\nnode a\n"), Err(GbnError::Graph(GraphError::DuplicateNode(_)))));
        let missing_coef = "gbn t\nnode a latent\nnode b observed\nedge a b\ncpd a intercept 0 var 1\ncpd b intercept 0 var 1\n";
        assert!(matches!(parse_gbn(missing_coef), Err(GbnError::Graph(GraphError::CpdMismatch { .. }))));
    }
}
