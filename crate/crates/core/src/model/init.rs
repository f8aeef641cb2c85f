//! Tuple encoding and the initial relation tensor.
//!
//! The input row of a tuple `(t_0, .., t_{k-1})` is
//! `[G, X_{t_0}, .., X_{t_{k-1}}, E(t_a, t_b) for a < b]`, the pairs in
//! lexicographic order. `E(u, v)` is
//!
//! ```text
//! u == v          [0, 0 .. 0, 0, 1]
//! edge u -> v     [w, f_1 .. f_de, 1, 0]
//! otherwise       [0, 0 .. 0, 0, 0]
//! ```
//!
//! the last two channels being presence and diagonal flags.

use super::config::ModelConfig;
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nn::{Backward, Tape, Tensor, Var};

/// Appends the supernode as node `n`, joined to every node by an edge of
/// weight zero. Real nodes and edges get an extra zero channel; the
/// supernode's node row and edge rows are taken from `params`. Returns the
/// graph unchanged when the model has no supernode.
pub fn attach_supernode(g: &Graph, params: &ModelParams) -> Result<Graph> {
    let (Some(node), Some(edge)) = (&params.sn_node, &params.sn_edge) else {
        return Ok(g.clone());
    };
    let (n, dn, de) = (g.n, g.node_dim, g.edge_dim);
    if node.len() != dn + 1 || edge.len() != de + 1 {
        return Err(Error::Dimension(format!(
            "supernode vectors of width {}/{} do not fit node_dim {dn}, edge_dim {de}",
            node.len(),
            edge.len()
        )));
    }
    let m = n + 1;
    let mut a = Graph::empty(m);
    a.directed = g.directed;
    a.graph_feats = g.graph_feats.clone();
    a.node_dim = dn + 1;
    a.node_feats = vec![0.0; m * (dn + 1)];
    for u in 0..n {
        a.node_feats[u * (dn + 1)..u * (dn + 1) + dn].copy_from_slice(g.node_row(u));
    }
    a.node_feats[n * (dn + 1)..].copy_from_slice(node.data());
    a.edge_dim = de + 1;
    a.edge_feats = vec![0.0; m * m * (de + 1)];
    for u in 0..n {
        for v in 0..n {
            a.adjacency[u * m + v] = g.adjacency[u * n + v];
            a.weights[u * m + v] = g.weights[u * n + v];
            let at = (u * m + v) * (de + 1);
            a.edge_feats[at..at + de].copy_from_slice(g.edge_row(u, v));
        }
        for (x, y) in [(u, n), (n, u)] {
            a.adjacency[x * m + y] = true;
            let at = (x * m + y) * (de + 1);
            a.edge_feats[at..at + de + 1].copy_from_slice(edge.data());
        }
    }
    Ok(a)
}

/// Flat offsets in the encoded input that hold supernode parameters.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SupernodeSlots {
    pub node: Vec<usize>,
    pub edge: Vec<usize>,
}

fn check_dims(g: &Graph, cfg: &ModelConfig) -> Result<()> {
    g.validate()?;
    let dims = (g.node_dim, g.edge_dim, g.graph_feats.len());
    let want = (cfg.node_dim, cfg.edge_dim, cfg.graph_dim);
    if dims != want {
        return Err(Error::Dimension(format!(
            "graph carries (node, edge, graph) feature dims {dims:?}, model expects {want:?}"
        )));
    }
    Ok(())
}

/// Encodes every `order`-tuple of an already augmented graph (the output of
/// [`attach_supernode`]) as an `[m; order] x init_width` tensor, `m = a.n`.
pub fn encode_tuples(a: &Graph, cfg: &ModelConfig) -> Result<(Tensor, SupernodeSlots)> {
    let k = cfg.order;
    let (m, dn, de) = (a.n, a.node_dim, a.edge_dim);
    let width = cfg.init_width();
    let ew = de + 3;
    if a.graph_feats.len() != cfg.graph_dim || dn != cfg.node_width() || ew != cfg.edge_width() {
        return Err(Error::Dimension(format!(
            "augmented graph widths ({}, {dn}, {de}) do not match the model",
            a.graph_feats.len()
        )));
    }
    let sn = cfg.supernode.then(|| m - 1);
    let rows = m.pow(k as u32);
    let mut data = vec![0.0; rows * width];
    let mut slots = SupernodeSlots::default();
    let mut t = vec![0usize; k];
    for row in 0..rows {
        let mut rem = row;
        for a_ in (0..k).rev() {
            t[a_] = rem % m;
            rem /= m;
        }
        let base = row * width;
        let out = &mut data[base..base + width];
        let mut at = a.graph_feats.len();
        out[..at].copy_from_slice(&a.graph_feats);
        for &u in &t {
            if Some(u) == sn {
                slots.node.push(base + at);
            }
            out[at..at + dn].copy_from_slice(a.node_row(u));
            at += dn;
        }
        for x in 0..k {
            for y in x + 1..k {
                let (u, v) = (t[x], t[y]);
                let seg = &mut out[at..at + ew];
                if u == v {
                    seg[ew - 1] = 1.0;
                } else if a.has_edge(u, v) {
                    seg[0] = a.weight(u, v);
                    seg[1..1 + de].copy_from_slice(a.edge_row(u, v));
                    seg[ew - 2] = 1.0;
                    if Some(u) == sn || Some(v) == sn {
                        slots.edge.push(base + at + 1);
                    }
                }
                at += ew;
            }
        }
    }
    let mut shape = vec![m; k];
    shape.push(width);
    Ok((Tensor::new(shape, data)?, slots))
}

/// Overwrites fixed offsets of a constant base tensor with parameter
/// vectors; gradients of each vector are summed over its slots.
struct SlotFillBack {
    slots: Vec<Vec<usize>>,
}

impl Backward for SlotFillBack {
    fn name(&self) -> &'static str {
        "slot_fill"
    }

    fn backward(
        &self,
        inputs: &[&Tensor],
        _out: &Tensor,
        g: &Tensor,
    ) -> Result<Vec<Option<Tensor>>> {
        let mut grads = vec![None];
        for (vec, offs) in inputs[1..].iter().zip(&self.slots) {
            let w = vec.len();
            let mut acc = vec![0.0; w];
            for &o in offs {
                for (a, x) in acc.iter_mut().zip(&g.data()[o..o + w]) {
                    *a += x;
                }
            }
            grads.push(Some(Tensor::new(vec.shape().to_vec(), acc)?));
        }
        Ok(grads)
    }
}

impl Tape {
    /// Records `base` with `vars[i]` written at each offset of `slots[i]`;
    /// slots must not overlap.
    pub fn slot_fill(&mut self, base: Var, vars: &[Var], slots: &[Vec<usize>]) -> Result<Var> {
        let mut out = self.value(base).clone();
        let mut taken = vec![false; out.len()];
        for (&v, offs) in vars.iter().zip(slots) {
            let w = self.value(v).len();
            for &o in offs {
                for t in taken.iter_mut().skip(o).take(w) {
                    if *t {
                        return Err(Error::InvalidArgument(format!(
                            "slot {o} overlaps another slot"
                        )));
                    }
                    *t = true;
                }
            }
        }
        for (&v, offs) in vars.iter().zip(slots) {
            let src = self.value(v).data();
            for &o in offs {
                let dst = out.data_mut().get_mut(o..o + src.len()).ok_or_else(|| {
                    Error::InvalidArgument(format!("slot {o} outside the base tensor"))
                })?;
                dst.copy_from_slice(src);
            }
        }
        let mut inputs = vec![base];
        inputs.extend_from_slice(vars);
        self.push(
            inputs,
            out,
            Box::new(SlotFillBack {
                slots: slots.to_vec(),
            }),
        )
    }
}

/// Records the encoded input with the supernode parameters as tape inputs.
pub(crate) fn encode_on_tape(
    tape: &mut Tape,
    g: &Graph,
    cfg: &ModelConfig,
    params: &ModelParams,
    pv: &ModelParams<Var>,
) -> Result<Var> {
    check_dims(g, cfg)?;
    let a = attach_supernode(g, params)?;
    let (x, slots) = encode_tuples(&a, cfg)?;
    let base = tape.leaf(x);
    match (pv.sn_node, pv.sn_edge) {
        (Some(node), Some(edge)) => tape.slot_fill(base, &[node, edge], &[slots.node, slots.edge]),
        _ => Ok(base),
    }
}

/// Initial relation tensor of the configured order, `[m; order] x rel_dim`.
pub fn init_korder(g: &Graph, cfg: &ModelConfig, params: &ModelParams) -> Result<Tensor> {
    let mut tape = Tape::new();
    let pv = params.bind(&mut tape);
    let x = encode_on_tape(&mut tape, g, cfg, params, &pv)?;
    let r = tape.ffn(x, &pv.init)?;
    Ok(tape.value(r).clone())
}

/// Initial pair relation tensor; requires an order-2 configuration.
pub fn init_relationship(g: &Graph, cfg: &ModelConfig, params: &ModelParams) -> Result<Tensor> {
    if cfg.order != 2 {
        return Err(Error::InvalidArgument(format!(
            "pair initialization of an order-{} model",
            cfg.order
        )));
    }
    init_korder(g, cfg, params)
}
