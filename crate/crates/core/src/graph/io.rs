//! Text formats.
//!
//! Edge list:
//!
//! ```text
//! # comment
//! N [d_n d_e d_g] [directed]
//! g_1 .. g_dg            (one line, only when d_g > 0)
//! v f_1 .. f_dn          (N lines, only when d_n > 0)
//! u v w [f_1 .. f_de]    (any number of edge lines)
//! ```
//!
//! Dense: `N` followed by `N` rows of `N` weights; `inf` or `-` marks a
//! missing edge and the diagonal is ignored. An asymmetric matrix yields a
//! directed graph.
//!
//! In both formats `;` separates lines like a newline, and indices are
//! 0-based.

use std::fmt::Write as _;
use std::path::Path;

use super::Graph;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphFormat {
    EdgeList,
    Dense,
}

impl GraphFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "edge-list" | "edges" => Some(GraphFormat::EdgeList),
            "dense" | "dense-matrix" => Some(GraphFormat::Dense),
            _ => None,
        }
    }
}

pub fn load_graph(path: &Path, format: GraphFormat) -> Result<Graph> {
    let text = std::fs::read_to_string(path)?;
    match format {
        GraphFormat::EdgeList => parse_edge_list(&text),
        GraphFormat::Dense => parse_dense(&text),
    }
}

/// Non-empty, comment-stripped lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .flat_map(|(i, l)| l.split(';').map(move |part| (i + 1, part)))
        .map(|(i, l)| (i, l.split('#').next().unwrap_or("")))
        .map(|(i, l)| (i, l.split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, toks)| !toks.is_empty())
}

fn num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("expected {what}, found `{tok}`"),
    })
}

fn floats(toks: &[&str], line: usize) -> Result<Vec<f64>> {
    toks.iter()
        .map(|t| num::<f64>(t, line, "a number"))
        .collect()
}

pub fn parse_edge_list(text: &str) -> Result<Graph> {
    let mut it = lines(text);
    let (hl, header) = it.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing header line".into(),
    })?;
    let directed = header.last() == Some(&"directed");
    let dims = &header[..header.len() - directed as usize];
    if dims.len() != 1 && dims.len() != 4 {
        return Err(Error::Parse {
            line: hl,
            msg: "header must be `N` or `N d_n d_e d_g`, optionally followed by `directed`".into(),
        });
    }
    let n: usize = num(dims[0], hl, "node count")?;
    if n == 0 {
        return Err(Error::Parse {
            line: hl,
            msg: "node count must be positive".into(),
        });
    }
    let (dn, de, dg) = if dims.len() == 4 {
        (
            num::<usize>(dims[1], hl, "d_n")?,
            num::<usize>(dims[2], hl, "d_e")?,
            num::<usize>(dims[3], hl, "d_g")?,
        )
    } else {
        (0, 0, 0)
    };
    let mut g = Graph::empty(n);
    g.directed = directed;
    g.node_dim = dn;
    g.node_feats = vec![0.0; n * dn];
    g.edge_dim = de;
    g.edge_feats = vec![0.0; n * n * de];

    let mut rest: Vec<(usize, Vec<&str>)> = it.collect();
    let mut cursor = 0;
    if dg > 0 {
        let (l, toks) = rest.get(cursor).ok_or(Error::Parse {
            line: hl,
            msg: "missing graph feature line".into(),
        })?;
        if toks.len() != dg {
            return Err(Error::Dimension(format!(
                "line {l}: {} graph features, expected {dg}",
                toks.len()
            )));
        }
        g.graph_feats = floats(toks, *l)?;
        cursor += 1;
    }
    if dn > 0 {
        let mut seen = vec![false; n];
        for _ in 0..n {
            let (l, toks) = rest.get(cursor).ok_or(Error::Parse {
                line: hl,
                msg: format!("expected {n} node feature lines"),
            })?;
            if toks.len() != 1 + dn {
                return Err(Error::Dimension(format!(
                    "line {l}: node line has {} features, expected {dn}",
                    toks.len() - 1
                )));
            }
            let v: usize = num(toks[0], *l, "node index")?;
            if v >= n {
                return Err(Error::IndexOutOfRange { index: v, n });
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::Parse {
                    line: *l,
                    msg: format!("node {v} listed twice"),
                });
            }
            let f = floats(&toks[1..], *l)?;
            g.node_feats[v * dn..(v + 1) * dn].copy_from_slice(&f);
            cursor += 1;
        }
    }
    for (l, toks) in rest.drain(cursor..) {
        if toks.len() != 3 + de {
            return Err(Error::Dimension(format!(
                "line {l}: edge line has {} fields, expected {}",
                toks.len(),
                3 + de
            )));
        }
        let u: usize = num(toks[0], l, "node index")?;
        let v: usize = num(toks[1], l, "node index")?;
        let w: f64 = num(toks[2], l, "edge weight")?;
        if u == v && u < n {
            return Err(Error::Parse {
                line: l,
                msg: format!("self-loop on node {u}"),
            });
        }
        g.add_edge(u, v, w)?;
        let f = floats(&toks[3..], l)?;
        let at = (u * n + v) * de;
        g.edge_feats[at..at + de].copy_from_slice(&f);
        if !directed {
            let at = (v * n + u) * de;
            g.edge_feats[at..at + de].copy_from_slice(&f);
        }
    }
    g.validate()?;
    Ok(g)
}

pub fn parse_dense(text: &str) -> Result<Graph> {
    let mut it = lines(text);
    let (hl, header) = it.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing header line".into(),
    })?;
    if header.len() != 1 {
        return Err(Error::Parse {
            line: hl,
            msg: "dense header is just `N`".into(),
        });
    }
    let n: usize = num(header[0], hl, "node count")?;
    if n == 0 {
        return Err(Error::Parse {
            line: hl,
            msg: "node count must be positive".into(),
        });
    }
    let mut w = vec![None; n * n];
    for u in 0..n {
        let (l, toks) = it.next().ok_or(Error::Parse {
            line: hl,
            msg: format!("expected {n} matrix rows, found {u}"),
        })?;
        if toks.len() != n {
            return Err(Error::Dimension(format!(
                "line {l}: row has {} entries, expected {n}",
                toks.len()
            )));
        }
        for (v, tok) in toks.iter().enumerate() {
            if u == v || *tok == "-" || tok.eq_ignore_ascii_case("inf") {
                continue;
            }
            w[u * n + v] = Some(num::<f64>(tok, l, "a weight")?);
        }
    }
    if let Some((l, _)) = it.next() {
        return Err(Error::Parse {
            line: l,
            msg: "trailing content after the matrix".into(),
        });
    }
    let mut g = Graph::empty(n);
    g.directed = (0..n).any(|u| (0..u).any(|v| w[u * n + v] != w[v * n + u]));
    for u in 0..n {
        for v in 0..n {
            if let Some(x) = w[u * n + v] {
                g.adjacency[u * n + v] = true;
                g.weights[u * n + v] = x;
            }
        }
    }
    g.validate()?;
    Ok(g)
}

/// Serializes `g` in the edge-list format; `parse_edge_list` reads it back
/// exactly.
pub fn write_edge_list(g: &Graph) -> String {
    let mut s = String::new();
    let directed = if g.directed { " directed" } else { "" };
    if g.node_dim + g.edge_dim + g.graph_feats.len() > 0 {
        let _ = writeln!(
            s,
            "{} {} {} {}{directed}",
            g.n,
            g.node_dim,
            g.edge_dim,
            g.graph_feats.len()
        );
    } else {
        let _ = writeln!(s, "{}{directed}", g.n);
    }
    let join = |xs: &[f64]| {
        xs.iter()
            .map(|x| format!("{x:?}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    if !g.graph_feats.is_empty() {
        let _ = writeln!(s, "{}", join(&g.graph_feats));
    }
    if g.node_dim > 0 {
        for v in 0..g.n {
            let _ = writeln!(s, "{v} {}", join(g.node_row(v)));
        }
    }
    for (u, v, w) in g.edges() {
        let f = join(g.edge_row(u, v));
        let _ = writeln!(s, "{u} {v} {w:?}{}{f}", if f.is_empty() { "" } else { " " });
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_weighted_triangle_path() {
        let g = parse_edge_list("3; 0 1 2.0; 1 2 3.0").unwrap();
        assert_eq!(g.n, 3);
        assert_eq!(g.edges(), vec![(0, 1, 2.0), (1, 2, 3.0)]);
        assert!(g.has_edge(2, 1) && !g.has_edge(0, 2));
    }

    #[test]
    fn empty_edge_section() {
        let g = parse_edge_list("4\n# no edges\n").unwrap();
        assert_eq!(g.n, 4);
        assert!(g.adjacency.iter().all(|&a| !a));
    }

    #[test]
    fn out_of_range_edge() {
        assert!(matches!(
            parse_edge_list("3\n0 5 1.0\n"),
            Err(Error::IndexOutOfRange { index: 5, n: 3 })
        ));
    }

    #[test]
    fn features_and_directed_flag() {
        let text = "3 2 1 1 directed\n0.5\n0 1 2\n1 3 4\n2 5 6\n0 1 1.5 7\n";
        let g = parse_edge_list(text).unwrap();
        assert!(g.directed);
        assert_eq!(g.graph_feats, vec![0.5]);
        assert_eq!(g.node_row(2), &[5.0, 6.0]);
        assert_eq!(g.edge_row(0, 1), &[7.0]);
        assert!(g.has_edge(0, 1) && !g.has_edge(1, 0));
        assert_eq!(parse_edge_list(&write_edge_list(&g)).unwrap(), g);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match parse_edge_list("3\n0 1 1\n0 x 1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_edge_list("3 1 0 0\n0 1\n"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_edge_list("3\n0 1 1 9\n"),
            Err(Error::Dimension(_))
        ));
        assert!(parse_edge_list("3\n1 1 1\n").is_err());
    }

    #[test]
    fn dense_matrix() {
        let g = parse_dense("3\n0 1 inf\n1 0 2\n- 2 0\n").unwrap();
        assert!(!g.directed);
        assert_eq!(g.edges(), vec![(0, 1, 1.0), (1, 2, 2.0)]);
        let d = parse_dense("2\n0 1\n3 0\n").unwrap();
        assert!(d.directed);
        assert_eq!(d.weight(1, 0), 3.0);
        assert!(matches!(parse_dense("2\n0 1\n"), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_dense("2\n0 1 2\n1 0\n"),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn load_from_file() {
        let dir = std::env::temp_dir().join(format!("floydnet-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("g.txt");
        std::fs::write(&path, "3\n0 1 2.0\n").unwrap();
        let g = load_graph(&path, GraphFormat::EdgeList).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!(load_graph(&dir.join("missing.txt"), GraphFormat::EdgeList).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
