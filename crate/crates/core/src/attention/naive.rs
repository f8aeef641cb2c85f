//! Reference pivotal attention core that materializes every `N^3`
//! intermediate (combined keys, combined values, scores/weights), exactly
//! as a dense tensor program would.

use super::{PivotGrads, PivotInputs};

/// Materialized forward intermediates, all indexed `[i, j, k, ...]`.
pub struct NaiveCache {
    pub keys: Vec<f64>,
    pub values: Vec<f64>,
    /// Softmax weights over the pivot axis `j`, `[i, j, k, head]`.
    pub weights: Vec<f64>,
}

pub fn forward(inp: &PivotInputs) -> (Vec<f64>, NaiveCache) {
    let (n, d, h) = (inp.n, inp.dim, inp.heads);
    let dh = d / h;
    let scale = (dh as f64).sqrt();
    let c = inp.combine;

    let mut keys = vec![0.0; n * n * n * d];
    let mut values = vec![0.0; n * n * n * d];
    for i in 0..n {
        for j in 0..n {
            let left = (i * n + j) * d;
            for k in 0..n {
                let right = (j * n + k) * d;
                let at = ((i * n + j) * n + k) * d;
                for e in 0..d {
                    keys[at + e] = c.apply(inp.k_left[left + e], inp.k_right[right + e]);
                    values[at + e] = c.apply(inp.v_left[left + e], inp.v_right[right + e]);
                }
            }
        }
    }

    let mut weights = vec![0.0; n * n * n * h];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let q = &inp.q[(i * n + k) * d..(i * n + k + 1) * d];
                let at = ((i * n + j) * n + k) * d;
                for hh in 0..h {
                    let mut s = 0.0;
                    for e in hh * dh..(hh + 1) * dh {
                        s += q[e] * keys[at + e];
                    }
                    weights[((i * n + j) * n + k) * h + hh] = s / scale;
                }
            }
        }
    }

    // softmax over j
    let w_at = |i: usize, j: usize, k: usize, hh: usize| ((i * n + j) * n + k) * h + hh;
    for i in 0..n {
        for k in 0..n {
            for hh in 0..h {
                let max = (0..n)
                    .map(|j| weights[w_at(i, j, k, hh)])
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for j in 0..n {
                    let e = (weights[w_at(i, j, k, hh)] - max).exp();
                    weights[w_at(i, j, k, hh)] = e;
                    sum += e;
                }
                for j in 0..n {
                    weights[w_at(i, j, k, hh)] /= sum;
                }
            }
        }
    }

    let mut out = vec![0.0; n * n * d];
    for i in 0..n {
        for k in 0..n {
            let o = &mut out[(i * n + k) * d..(i * n + k + 1) * d];
            for j in 0..n {
                let at = ((i * n + j) * n + k) * d;
                for hh in 0..h {
                    let w = weights[w_at(i, j, k, hh)];
                    for e in hh * dh..(hh + 1) * dh {
                        o[e] += w * values[at + e];
                    }
                }
            }
        }
    }
    (
        out,
        NaiveCache {
            keys,
            values,
            weights,
        },
    )
}

pub fn backward(inp: &PivotInputs, cache: &NaiveCache, d_out: &[f64]) -> PivotGrads {
    let (n, d, h) = (inp.n, inp.dim, inp.heads);
    let dh = d / h;
    let inv_scale = 1.0 / (dh as f64).sqrt();
    let c = inp.combine;
    let w_at = |i: usize, j: usize, k: usize, hh: usize| ((i * n + j) * n + k) * h + hh;

    // d(score) through the softmax, materialized like the forward pass
    let mut d_scores = vec![0.0; n * n * n * h];
    let mut d_values = vec![0.0; n * n * n * d];
    for i in 0..n {
        for k in 0..n {
            let go = &d_out[(i * n + k) * d..(i * n + k + 1) * d];
            for hh in 0..h {
                let mut dw = vec![0.0; n];
                for (j, dwj) in dw.iter_mut().enumerate() {
                    let at = ((i * n + j) * n + k) * d;
                    let w = cache.weights[w_at(i, j, k, hh)];
                    for e in hh * dh..(hh + 1) * dh {
                        *dwj += go[e] * cache.values[at + e];
                        d_values[at + e] = w * go[e];
                    }
                }
                let dot: f64 = (0..n)
                    .map(|j| cache.weights[w_at(i, j, k, hh)] * dw[j])
                    .sum();
                for (j, dwj) in dw.iter().enumerate() {
                    d_scores[w_at(i, j, k, hh)] = cache.weights[w_at(i, j, k, hh)] * (dwj - dot);
                }
            }
        }
    }

    let mut g = PivotGrads::zeros(n * n * d);
    let mut d_keys = vec![0.0; n * n * n * d];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let qa = (i * n + k) * d;
                let at = ((i * n + j) * n + k) * d;
                for hh in 0..h {
                    let ds = d_scores[w_at(i, j, k, hh)] * inv_scale;
                    for e in hh * dh..(hh + 1) * dh {
                        g.q[qa + e] += ds * cache.keys[at + e];
                        d_keys[at + e] = ds * inp.q[qa + e];
                    }
                }
            }
        }
    }

    for i in 0..n {
        for j in 0..n {
            let left = (i * n + j) * d;
            for k in 0..n {
                let right = (j * n + k) * d;
                let at = ((i * n + j) * n + k) * d;
                for e in 0..d {
                    let (kl, kr) = (inp.k_left[left + e], inp.k_right[right + e]);
                    let (vl, vr) = (inp.v_left[left + e], inp.v_right[right + e]);
                    let (dkl, dkr) = c.partials(kl, kr);
                    let (dvl, dvr) = c.partials(vl, vr);
                    g.k_left[left + e] += d_keys[at + e] * dkl;
                    g.k_right[right + e] += d_keys[at + e] * dkr;
                    g.v_left[left + e] += d_values[at + e] * dvl;
                    g.v_right[right + e] += d_values[at + e] * dvr;
                }
            }
        }
    }
    g
}
