//! Graph instances, permutations, file formats, generators and exact label
//! oracles.

pub mod families;
pub mod generate;
pub mod io;
pub mod oracle;

pub use generate::gen_random_graph;
pub use io::{load_graph, parse_dense, parse_edge_list, GraphFormat};
pub use oracle::{cycle_count_oracle, floyd_warshall_oracle, CountLevel, Distances};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// A problem instance. Feature buffers are row-major; a dimension of zero
/// means the feature kind is absent.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    pub n: usize,
    pub node_dim: usize,
    /// `n x node_dim`.
    pub node_feats: Vec<f64>,
    pub edge_dim: usize,
    /// `n x n x edge_dim`.
    pub edge_feats: Vec<f64>,
    pub graph_feats: Vec<f64>,
    /// `n x n`, row `u` column `v` set when the edge `u -> v` exists.
    pub adjacency: Vec<bool>,
    /// `n x n`, zero where there is no edge.
    pub weights: Vec<f64>,
    pub directed: bool,
}

impl Graph {
    /// Undirected, featureless and edgeless.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            node_dim: 0,
            node_feats: Vec::new(),
            edge_dim: 0,
            edge_feats: Vec::new(),
            graph_feats: Vec::new(),
            adjacency: vec![false; n * n],
            weights: vec![0.0; n * n],
            directed: false,
        }
    }

    /// Undirected unit-weight graph from an edge list.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n);
        for &(u, v) in edges {
            g.add_edge(u, v, 1.0)?;
        }
        Ok(g)
    }

    /// Adds `u -> v` (and `v -> u` when undirected), replacing any weight.
    pub fn add_edge(&mut self, u: usize, v: usize, w: f64) -> Result<()> {
        for x in [u, v] {
            if x >= self.n {
                return Err(Error::IndexOutOfRange {
                    index: x,
                    n: self.n,
                });
            }
        }
        if u == v {
            return Err(Error::InvalidArgument(format!("self-loop on node {u}")));
        }
        self.adjacency[u * self.n + v] = true;
        self.weights[u * self.n + v] = w;
        if !self.directed {
            self.adjacency[v * self.n + u] = true;
            self.weights[v * self.n + u] = w;
        }
        Ok(())
    }

    #[inline]
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u * self.n + v]
    }

    #[inline]
    pub fn weight(&self, u: usize, v: usize) -> f64 {
        self.weights[u * self.n + v]
    }

    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&v| self.has_edge(u, v))
    }

    pub fn degree(&self, u: usize) -> usize {
        self.neighbors(u).count()
    }

    /// Edges as `(u, v, w)`; undirected edges are listed once with `u < v`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in 0..self.n {
                if self.has_edge(u, v) && (self.directed || u < v) {
                    out.push((u, v, self.weight(u, v)));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    pub fn node_row(&self, u: usize) -> &[f64] {
        &self.node_feats[u * self.node_dim..(u + 1) * self.node_dim]
    }

    pub fn edge_row(&self, u: usize, v: usize) -> &[f64] {
        let at = (u * self.n + v) * self.edge_dim;
        &self.edge_feats[at..at + self.edge_dim]
    }

    /// Checks buffer sizes, symmetry of undirected graphs and the absence of
    /// self-loops.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Err(Error::InvalidArgument(
                "graph needs at least one node".into(),
            ));
        }
        let sizes = [
            ("node features", self.node_feats.len(), n * self.node_dim),
            (
                "edge features",
                self.edge_feats.len(),
                n * n * self.edge_dim,
            ),
            ("adjacency", self.adjacency.len(), n * n),
            ("weights", self.weights.len(), n * n),
        ];
        for (what, got, want) in sizes {
            if got != want {
                return Err(Error::Dimension(format!(
                    "{what}: {got} values, expected {want}"
                )));
            }
        }
        for u in 0..n {
            if self.has_edge(u, u) {
                return Err(Error::InvalidArgument(format!("self-loop on node {u}")));
            }
            if self.directed {
                continue;
            }
            for v in 0..u {
                if self.has_edge(u, v) != self.has_edge(v, u)
                    || self.weight(u, v) != self.weight(v, u)
                    || self.edge_row(u, v) != self.edge_row(v, u)
                {
                    return Err(Error::InvalidArgument(format!(
                        "undirected graph is asymmetric at ({u}, {v})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A bijection on `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodePermutation {
    perm: Vec<usize>,
}

impl NodePermutation {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidArgument(format!(
                    "{perm:?} is not a permutation"
                )));
            }
        }
        Ok(Self { perm })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            perm: (0..n).collect(),
        }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        Self { perm }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.perm[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.perm.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            inv[p] = i;
        }
        Self { perm: inv }
    }
}

/// Relabels nodes: node `i` of `g` becomes node `pi(i)` of the result, with
/// adjacency, weights and edge features moved on both axes.
pub fn apply_permutation(g: &Graph, pi: &NodePermutation) -> Result<Graph> {
    if pi.len() != g.n {
        return Err(Error::Dimension(format!(
            "permutation of {} nodes applied to a graph with {}",
            pi.len(),
            g.n
        )));
    }
    let n = g.n;
    let mut out = g.clone();
    for u in 0..n {
        let pu = pi.apply(u);
        out.node_feats[pu * g.node_dim..(pu + 1) * g.node_dim].copy_from_slice(g.node_row(u));
        for v in 0..n {
            let pv = pi.apply(v);
            out.adjacency[pu * n + pv] = g.has_edge(u, v);
            out.weights[pu * n + pv] = g.weight(u, v);
            let at = (pu * n + pv) * g.edge_dim;
            out.edge_feats[at..at + g.edge_dim].copy_from_slice(g.edge_row(u, v));
        }
    }
    Ok(out)
}
