//! Exact labels for the synthetic tasks.

use super::Graph;
use crate::error::{Error, Result};

/// All-pairs distances; unreachable pairs hold `f64::INFINITY`.
#[derive(Clone, Debug, PartialEq)]
pub struct Distances {
    pub n: usize,
    pub dist: Vec<f64>,
}

impl Distances {
    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.dist[u * self.n + v]
    }

    #[inline]
    pub fn reachable(&self, u: usize, v: usize) -> bool {
        self.get(u, v).is_finite()
    }

    /// Largest finite distance, zero for an edgeless graph.
    pub fn diameter(&self) -> f64 {
        self.dist
            .iter()
            .copied()
            .filter(|d| d.is_finite())
            .fold(0.0, f64::max)
    }
}

pub fn floyd_warshall_oracle(g: &Graph) -> Result<Distances> {
    let n = g.n;
    let mut dist = vec![f64::INFINITY; n * n];
    for u in 0..n {
        dist[u * n + u] = 0.0;
        for v in g.neighbors(u) {
            let w = g.weight(u, v);
            if w < 0.0 {
                return Err(Error::NegativeWeight { u, v, weight: w });
            }
            dist[u * n + v] = dist[u * n + v].min(w);
        }
    }
    for j in 0..n {
        for i in 0..n {
            let dij = dist[i * n + j];
            if dij.is_infinite() {
                continue;
            }
            for k in 0..n {
                let via = dij + dist[j * n + k];
                if via < dist[i * n + k] {
                    dist[i * n + k] = via;
                }
            }
        }
    }
    Ok(Distances { n, dist })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountLevel {
    Graph,
    Node,
    Edge,
}

impl CountLevel {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "graph" => Some(CountLevel::Graph),
            "node" => Some(CountLevel::Node),
            "edge" => Some(CountLevel::Edge),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CountLevel::Graph => "graph",
            CountLevel::Node => "node",
            CountLevel::Edge => "edge",
        }
    }
}

/// Largest graph the exhaustive cycle enumeration accepts.
pub const MAX_CYCLE_NODES: usize = 16;

/// Number of simple cycles of length `len` (as subgraphs). Graph level
/// returns one count, node level one count per node, edge level an `n x n`
/// symmetric matrix whose `(u, v)` entry counts cycles through the edge
/// `{u, v}` (zero for non-edges).
pub fn cycle_count_oracle(g: &Graph, len: usize, level: CountLevel) -> Result<Vec<u64>> {
    if !(3..=6).contains(&len) {
        return Err(Error::InvalidArgument(format!(
            "cycle length {len} outside 3..=6"
        )));
    }
    if g.directed {
        return Err(Error::Unsupported("cycle counts of directed graphs".into()));
    }
    if g.n > MAX_CYCLE_NODES {
        return Err(Error::Unsupported(format!(
            "exhaustive cycle enumeration on {} nodes (limit {MAX_CYCLE_NODES})",
            g.n
        )));
    }
    let n = g.n;
    let mut out = match level {
        CountLevel::Graph => vec![0; 1],
        CountLevel::Node => vec![0; n],
        CountLevel::Edge => vec![0; n * n],
    };
    let mut path = Vec::with_capacity(len);
    let mut on_path = vec![false; n];
    for s in 0..n {
        path.push(s);
        on_path[s] = true;
        extend(g, len, &mut path, &mut on_path, &mut |cycle| match level {
            CountLevel::Graph => out[0] += 1,
            CountLevel::Node => cycle.iter().for_each(|&v| out[v] += 1),
            CountLevel::Edge => {
                for i in 0..len {
                    let (a, b) = (cycle[i], cycle[(i + 1) % len]);
                    out[a * n + b] += 1;
                    out[b * n + a] += 1;
                }
            }
        });
        path.pop();
        on_path[s] = false;
    }
    Ok(out)
}

/// Depth-first extension of paths starting at their minimum vertex; each
/// cycle is reported once, in the orientation whose second vertex is smaller
/// than its last.
fn extend(
    g: &Graph,
    len: usize,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    emit: &mut dyn FnMut(&[usize]),
) {
    let s = path[0];
    let last = *path.last().expect("path starts non-empty");
    if path.len() == len {
        if g.has_edge(last, s) && path[1] < last {
            emit(path);
        }
        return;
    }
    for v in g.neighbors(last) {
        if v > s && !on_path[v] {
            path.push(v);
            on_path[v] = true;
            extend(g, len, path, on_path, emit);
            path.pop();
            on_path[v] = false;
        }
    }
}
