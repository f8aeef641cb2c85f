//! Order-`k` pivotal attention over `N^k` tuples.
//!
//! For a tuple `e` and pivot `p`, the neighbour tuple for position `a` is `e`
//! with its `a`-th node replaced by `p`. Key and value projections are taken
//! per position and merged with the combine operator, then attention runs
//! over the pivot axis. Order 1 is ordinary self-attention over nodes; order
//! 2 reproduces the pair kernel exactly.

use super::streamed::SoftmaxStats;
use super::CombineOp;
use crate::error::{Error, Result};

pub struct KOrderInputs<'a> {
    pub order: usize,
    pub n: usize,
    pub heads: usize,
    pub dim: usize,
    pub q: &'a [f64],
    pub keys: Vec<&'a [f64]>,
    pub values: Vec<&'a [f64]>,
    pub combine: CombineOp,
}

pub struct KOrderGrads {
    pub q: Vec<f64>,
    pub keys: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
}

/// Row strides of each tuple position: position `a` has stride `n^(k-1-a)`.
pub(crate) fn strides(order: usize, n: usize) -> Vec<usize> {
    (0..order).map(|a| n.pow((order - 1 - a) as u32)).collect()
}

struct Layout {
    strides: Vec<usize>,
    n: usize,
}

impl Layout {
    /// Row index of tuple `t` with position `a` replaced by `p`.
    #[inline]
    fn neighbour(&self, t: usize, a: usize, p: usize) -> usize {
        let s = self.strides[a];
        let digit = (t / s) % self.n;
        t - digit * s + p * s
    }
}

fn validate(inp: &KOrderInputs) -> Result<usize> {
    super::params::check_order(inp.order)?;
    super::params::check_heads(inp.dim, inp.heads)?;
    let tuples = inp.n.pow(inp.order as u32);
    let len = tuples * inp.dim;
    if inp.keys.len() != inp.order || inp.values.len() != inp.order {
        return Err(Error::InvalidArgument(format!(
            "order {} needs {} key and value projections",
            inp.order, inp.order
        )));
    }
    if inp.q.len() != len || inp.keys.iter().chain(&inp.values).any(|s| s.len() != len) {
        return Err(Error::Dimension(format!(
            "order-{} attention over {} nodes expects {} values per projection",
            inp.order, inp.n, len
        )));
    }
    Ok(tuples)
}

#[inline]
fn fold(c: CombineOp, src: &[&[f64]], rows: &[usize], d: usize, e: usize) -> f64 {
    let mut acc = src[0][rows[0] * d + e];
    for a in 1..src.len() {
        acc = c.apply(acc, src[a][rows[a] * d + e]);
    }
    acc
}

pub fn forward(inp: &KOrderInputs) -> Result<(Vec<f64>, SoftmaxStats)> {
    let tuples = validate(inp)?;
    let (n, d, h, k) = (inp.n, inp.dim, inp.heads, inp.order);
    let dh = d / h;
    let scale = (dh as f64).sqrt();
    let lay = Layout {
        strides: strides(k, n),
        n,
    };
    let mut out = vec![0.0; tuples * d];
    let mut max = vec![0.0; tuples * h];
    let mut norm = vec![0.0; tuples * h];
    let mut rows = vec![vec![0usize; k]; n];
    let mut buf = vec![0.0; n];
    for t in 0..tuples {
        for (p, r) in rows.iter_mut().enumerate() {
            for (a, slot) in r.iter_mut().enumerate() {
                *slot = lay.neighbour(t, a, p);
            }
        }
        let q = &inp.q[t * d..(t + 1) * d];
        for hh in 0..h {
            for p in 0..n {
                let mut s = 0.0;
                for e in hh * dh..(hh + 1) * dh {
                    s += q[e] * fold(inp.combine, &inp.keys, &rows[p], d, e);
                }
                buf[p] = s / scale;
            }
            let m = buf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for b in buf.iter_mut() {
                *b = (*b - m).exp();
                sum += *b;
            }
            max[t * h + hh] = m;
            norm[t * h + hh] = sum;
            let o = &mut out[t * d..(t + 1) * d];
            for p in 0..n {
                let w = buf[p] / sum;
                for e in hh * dh..(hh + 1) * dh {
                    o[e] += w * fold(inp.combine, &inp.values, &rows[p], d, e);
                }
            }
        }
    }
    Ok((out, SoftmaxStats { max, norm }))
}

/// Partial derivative of the folded combine with respect to position `a`.
#[inline]
fn fold_partial(c: CombineOp, src: &[&[f64]], rows: &[usize], d: usize, e: usize, a: usize) -> f64 {
    match c {
        CombineOp::Additive => 1.0,
        CombineOp::Multiplicative => {
            let mut prod = 1.0;
            for (b, s) in src.iter().enumerate() {
                if b != a {
                    prod *= s[rows[b] * d + e];
                }
            }
            prod
        }
    }
}

pub fn backward(
    inp: &KOrderInputs,
    out: &[f64],
    stats: &SoftmaxStats,
    d_out: &[f64],
) -> Result<KOrderGrads> {
    let tuples = validate(inp)?;
    let (n, d, h, k) = (inp.n, inp.dim, inp.heads, inp.order);
    if stats.max.len() != tuples * h || out.len() != tuples * d || d_out.len() != tuples * d {
        return Err(Error::MissingForward(
            "order-k attention statistics do not match".into(),
        ));
    }
    let dh = d / h;
    let scale = (dh as f64).sqrt();
    let inv_scale = 1.0 / scale;
    let lay = Layout {
        strides: strides(k, n),
        n,
    };
    let mut g = KOrderGrads {
        q: vec![0.0; tuples * d],
        keys: vec![vec![0.0; tuples * d]; k],
        values: vec![vec![0.0; tuples * d]; k],
    };
    let mut rows = vec![0usize; k];
    for t in 0..tuples {
        let q = &inp.q[t * d..(t + 1) * d];
        let go = &d_out[t * d..(t + 1) * d];
        let o = &out[t * d..(t + 1) * d];
        for hh in 0..h {
            let hs = hh * dh..(hh + 1) * dh;
            let (m, l) = (stats.max[t * h + hh], stats.norm[t * h + hh]);
            let delta: f64 = hs.clone().map(|e| go[e] * o[e]).sum();
            for p in 0..n {
                for (a, slot) in rows.iter_mut().enumerate() {
                    *slot = lay.neighbour(t, a, p);
                }
                let mut s = 0.0;
                let mut dv_dot = 0.0;
                for e in hs.clone() {
                    s += q[e] * fold(inp.combine, &inp.keys, &rows, d, e);
                    dv_dot += go[e] * fold(inp.combine, &inp.values, &rows, d, e);
                }
                let w = ((s / scale) - m).exp() / l;
                let ds = w * (dv_dot - delta) * inv_scale;
                for e in hs.clone() {
                    g.q[t * d + e] += ds * fold(inp.combine, &inp.keys, &rows, d, e);
                    let dk = ds * q[e];
                    let dv = w * go[e];
                    for a in 0..k {
                        g.keys[a][rows[a] * d + e] +=
                            dk * fold_partial(inp.combine, &inp.keys, &rows, d, e, a);
                        g.values[a][rows[a] * d + e] +=
                            dv * fold_partial(inp.combine, &inp.values, &rows, d, e, a);
                    }
                }
            }
        }
    }
    Ok(g)
}
