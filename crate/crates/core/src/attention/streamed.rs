//! Streaming pivotal attention core with `O(N^2)` auxiliary memory.
//!
//! For each target pair `(i, k)` and head, a first sweep over the pivots `j`
//! keeps a running maximum and normalizer of the scores (online softmax); a
//! second sweep recomputes each score and accumulates the weighted combined
//! values. Combined keys and values are formed on the fly and never stored.
//! The backward pass recomputes the weights from the per-pair statistics.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::{CombineOp, PivotGrads, PivotInputs};
use crate::error::{Error, Result};

/// Default edge length of an `(i, k)` tile.
pub const DEFAULT_TILE: usize = 32;

/// Per `(i, k, head)` softmax statistics over the pivot axis.
#[derive(Clone, Debug)]
pub struct SoftmaxStats {
    pub max: Vec<f64>,
    pub norm: Vec<f64>,
}

pub(crate) trait Comb: Copy + Send + Sync {
    fn apply(a: f64, b: f64) -> f64;
    fn partials(a: f64, b: f64) -> (f64, f64);
}

#[derive(Clone, Copy)]
pub(crate) struct Add;
#[derive(Clone, Copy)]
pub(crate) struct Mul;

impl Comb for Add {
    #[inline(always)]
    fn apply(a: f64, b: f64) -> f64 {
        a + b
    }
    #[inline(always)]
    fn partials(_: f64, _: f64) -> (f64, f64) {
        (1.0, 1.0)
    }
}

impl Comb for Mul {
    #[inline(always)]
    fn apply(a: f64, b: f64) -> f64 {
        a * b
    }
    #[inline(always)]
    fn partials(a: f64, b: f64) -> (f64, f64) {
        (b, a)
    }
}

#[inline(always)]
fn score<C: Comb>(q: &[f64], kl: &[f64], kr: &[f64]) -> f64 {
    let mut s = 0.0;
    for e in 0..q.len() {
        s += q[e] * C::apply(kl[e], kr[e]);
    }
    s
}

pub fn forward(inp: &PivotInputs, tile: usize) -> (Vec<f64>, SoftmaxStats) {
    match inp.combine {
        CombineOp::Additive => forward_impl::<Add>(inp, tile),
        CombineOp::Multiplicative => forward_impl::<Mul>(inp, tile),
    }
}

fn forward_impl<C: Comb>(inp: &PivotInputs, tile: usize) -> (Vec<f64>, SoftmaxStats) {
    let (n, d, h) = (inp.n, inp.dim, inp.heads);
    let tile = tile.max(1);
    let mut out = vec![0.0; n * n * d];
    let mut max = vec![0.0; n * n * h];
    let mut norm = vec![0.0; n * n * h];

    let rows_block = |(bi, ((o, m), l)): (usize, ((&mut [f64], &mut [f64]), &mut [f64]))| {
        let i0 = bi * tile;
        let i_count = o.len() / (n * d);
        for k0 in (0..n).step_by(tile) {
            for di in 0..i_count {
                for k in k0..(k0 + tile).min(n) {
                    let pair = di * n + k;
                    pair_forward::<C>(
                        inp,
                        i0 + di,
                        k,
                        &mut o[pair * d..(pair + 1) * d],
                        &mut m[pair * h..(pair + 1) * h],
                        &mut l[pair * h..(pair + 1) * h],
                    );
                }
            }
        }
    };

    let o_chunks = out.chunks_mut(tile * n * d);
    let m_chunks = max.chunks_mut(tile * n * h);
    let l_chunks = norm.chunks_mut(tile * n * h);
    #[cfg(feature = "parallel")]
    {
        let o_chunks: Vec<_> = o_chunks.collect();
        let m_chunks: Vec<_> = m_chunks.collect();
        let l_chunks: Vec<_> = l_chunks.collect();
        o_chunks
            .into_par_iter()
            .zip(m_chunks)
            .zip(l_chunks)
            .enumerate()
            .for_each(rows_block);
    }
    #[cfg(not(feature = "parallel"))]
    {
        o_chunks
            .zip(m_chunks)
            .zip(l_chunks)
            .enumerate()
            .for_each(rows_block);
    }
    (out, SoftmaxStats { max, norm })
}

#[inline]
fn pair_forward<C: Comb>(
    inp: &PivotInputs,
    i: usize,
    k: usize,
    o: &mut [f64],
    m_out: &mut [f64],
    l_out: &mut [f64],
) {
    let (n, d, h) = (inp.n, inp.dim, inp.heads);
    let dh = d / h;
    let scale = (dh as f64).sqrt();
    let q = &inp.q[(i * n + k) * d..(i * n + k + 1) * d];
    for hh in 0..h {
        let hs = hh * dh..(hh + 1) * dh;
        let qh = &q[hs.clone()];
        let mut m = f64::NEG_INFINITY;
        let mut l = 0.0;
        for j in 0..n {
            let kl = &inp.k_left[(i * n + j) * d..][hs.clone()];
            let kr = &inp.k_right[(j * n + k) * d..][hs.clone()];
            let s = score::<C>(qh, kl, kr) / scale;
            if s > m {
                l = l * (m - s).exp() + 1.0;
                m = s;
            } else {
                l += (s - m).exp();
            }
        }
        m_out[hh] = m;
        l_out[hh] = l;
        let oh = &mut o[hs.clone()];
        for j in 0..n {
            let kl = &inp.k_left[(i * n + j) * d..][hs.clone()];
            let kr = &inp.k_right[(j * n + k) * d..][hs.clone()];
            let w = ((score::<C>(qh, kl, kr) / scale) - m).exp() / l;
            let vl = &inp.v_left[(i * n + j) * d..][hs.clone()];
            let vr = &inp.v_right[(j * n + k) * d..][hs.clone()];
            for e in 0..dh {
                oh[e] += w * C::apply(vl[e], vr[e]);
            }
        }
    }
}

pub fn backward(
    inp: &PivotInputs,
    out: &[f64],
    stats: &SoftmaxStats,
    d_out: &[f64],
) -> Result<PivotGrads> {
    let (n, d, h) = (inp.n, inp.dim, inp.heads);
    if stats.max.len() != n * n * h || stats.norm.len() != n * n * h || out.len() != n * n * d {
        return Err(Error::MissingForward(
            "streamed pivotal attention statistics do not match the inputs".into(),
        ));
    }
    Ok(match inp.combine {
        CombineOp::Additive => backward_impl::<Add>(inp, out, stats, d_out),
        CombineOp::Multiplicative => backward_impl::<Mul>(inp, out, stats, d_out),
    })
}

fn backward_impl<C: Comb>(
    inp: &PivotInputs,
    out: &[f64],
    stats: &SoftmaxStats,
    d_out: &[f64],
) -> PivotGrads {
    let (n, d, h) = (inp.n, inp.dim, inp.heads);
    let dh = d / h;
    let scale = (dh as f64).sqrt();
    let inv_scale = 1.0 / scale;
    let mut g = PivotGrads::zeros(n * n * d);
    for i in 0..n {
        for k in 0..n {
            let pair = i * n + k;
            let q = &inp.q[pair * d..(pair + 1) * d];
            let go = &d_out[pair * d..(pair + 1) * d];
            let o = &out[pair * d..(pair + 1) * d];
            for hh in 0..h {
                let hs = hh * dh..(hh + 1) * dh;
                let (m, l) = (stats.max[pair * h + hh], stats.norm[pair * h + hh]);
                let delta: f64 = hs.clone().map(|e| go[e] * o[e]).sum();
                for j in 0..n {
                    let left = (i * n + j) * d;
                    let right = (j * n + k) * d;
                    let kl = &inp.k_left[left..][hs.clone()];
                    let kr = &inp.k_right[right..][hs.clone()];
                    let vl = &inp.v_left[left..][hs.clone()];
                    let vr = &inp.v_right[right..][hs.clone()];
                    let w = ((score::<C>(&q[hs.clone()], kl, kr) / scale) - m).exp() / l;
                    let mut dv_dot = 0.0;
                    for e in 0..dh {
                        dv_dot += go[hh * dh + e] * C::apply(vl[e], vr[e]);
                    }
                    let ds = w * (dv_dot - delta) * inv_scale;
                    for e in 0..dh {
                        let c = hh * dh + e;
                        let (pkl, pkr) = C::partials(kl[e], kr[e]);
                        let (pvl, pvr) = C::partials(vl[e], vr[e]);
                        g.q[pair * d + c] += ds * C::apply(kl[e], kr[e]);
                        let dk = ds * q[c];
                        g.k_left[left + c] += dk * pkl;
                        g.k_right[right + c] += dk * pkr;
                        let dv = w * go[c];
                        g.v_left[left + c] += dv * pvl;
                        g.v_right[right + c] += dv * pvr;
                    }
                }
            }
        }
    }
    g
}
