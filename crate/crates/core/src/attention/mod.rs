//! Pivotal attention: every target pair `(i, k)` attends over all pivots `j`
//! with keys and values combined from the `(i, j)` and `(j, k)` segments.
//!
//! Two interchangeable cores are provided for pairs: [`naive`] materializes
//! the `N^3` intermediates and serves as the reference, [`streamed`] keeps
//! only `O(N^2)` state. [`korder`] generalizes the mechanism to `k`-tuples.

pub mod combine;
pub mod korder;
pub mod naive;
pub mod params;
pub mod rotation;
pub mod streamed;

pub use combine::{combine, CombineOp};
pub use params::{AttentionParams, KOrderAttentionParams};
pub use streamed::{SoftmaxStats, DEFAULT_TILE};

use crate::error::{Error, Result};
use crate::nn::ops::linear;
use crate::nn::tape::{Backward, Tape, Var};
use crate::nn::tensor::Tensor;

/// Projected inputs of the pair attention core, each `N*N x dim` row-major
/// with row index `a * N + b` for the pair `(a, b)`.
#[derive(Clone, Copy)]
pub struct PivotInputs<'a> {
    pub n: usize,
    pub heads: usize,
    pub dim: usize,
    pub q: &'a [f64],
    pub k_left: &'a [f64],
    pub k_right: &'a [f64],
    pub v_left: &'a [f64],
    pub v_right: &'a [f64],
    pub combine: CombineOp,
}

impl PivotInputs<'_> {
    fn validate(&self) -> Result<()> {
        params::check_heads(self.dim, self.heads)?;
        let len = self.n * self.n * self.dim;
        if self.n == 0 {
            return Err(Error::InvalidArgument(
                "pivotal attention over zero nodes".into(),
            ));
        }
        for s in [self.q, self.k_left, self.k_right, self.v_left, self.v_right] {
            if s.len() != len {
                return Err(Error::Dimension(format!(
                    "projection holds {} values, expected {}",
                    s.len(),
                    len
                )));
            }
        }
        Ok(())
    }
}

/// Gradients of the pair core with respect to its five projected inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct PivotGrads {
    pub q: Vec<f64>,
    pub k_left: Vec<f64>,
    pub k_right: Vec<f64>,
    pub v_left: Vec<f64>,
    pub v_right: Vec<f64>,
}

impl PivotGrads {
    pub(crate) fn zeros(len: usize) -> Self {
        Self {
            q: vec![0.0; len],
            k_left: vec![0.0; len],
            k_right: vec![0.0; len],
            v_left: vec![0.0; len],
            v_right: vec![0.0; len],
        }
    }
}

/// Which pair core to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kernel {
    Naive,
    Streamed { tile: usize },
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::Streamed { tile: DEFAULT_TILE }
    }
}

impl Kernel {
    pub fn as_str(self) -> &'static str {
        match self {
            Kernel::Naive => "naive",
            Kernel::Streamed { .. } => "streamed",
        }
    }
}

fn pair_extent(r: &Tensor) -> Result<usize> {
    match r.shape() {
        [a, b, _] if a == b => Ok(*a),
        s => Err(Error::Shape {
            op: "pivotal attention input",
            expected: vec![0, 0, 0],
            got: s.to_vec(),
        }),
    }
}

fn tuple_extent(r: &Tensor, order: usize) -> Result<usize> {
    let s = r.shape();
    if s.len() != order + 1 || s[..order].iter().any(|&x| x != s[0]) {
        return Err(Error::Shape {
            op: "order-k attention input",
            expected: vec![s[0]; order + 1],
            got: s.to_vec(),
        });
    }
    Ok(s[0])
}

/// Full pair attention (projections, core, output projection) on an
/// `N x N x d` relation tensor, without recording gradients.
pub fn pivotal_attention(
    r: &Tensor,
    p: &AttentionParams,
    c: CombineOp,
    kernel: Kernel,
) -> Result<Tensor> {
    let n = pair_extent(r)?;
    let q = linear(r, &p.q_proj)?;
    let kl = linear(r, &p.k_proj_left)?;
    let kr = linear(r, &p.k_proj_right)?;
    let vl = linear(r, &p.v_proj_left)?;
    let vr = linear(r, &p.v_proj_right)?;
    let inp = PivotInputs {
        n,
        heads: p.heads,
        dim: q.last_dim(),
        q: q.data(),
        k_left: kl.data(),
        k_right: kr.data(),
        v_left: vl.data(),
        v_right: vr.data(),
        combine: c,
    };
    inp.validate()?;
    let o = match kernel {
        Kernel::Naive => naive::forward(&inp).0,
        Kernel::Streamed { tile } => streamed::forward(&inp, tile).0,
    };
    let o = Tensor::new(vec![n, n, inp.dim], o)?;
    o.check_finite("pivotal attention")?;
    linear(&o, &p.out_proj)
}

/// Reference implementation materializing the `N^3` score tensor.
pub fn pivotal_attention_naive(r: &Tensor, p: &AttentionParams, c: CombineOp) -> Result<Tensor> {
    pivotal_attention(r, p, c, Kernel::Naive)
}

/// Streaming implementation with `O(N^2 d)` auxiliary memory.
pub fn pivotal_attention_streamed(r: &Tensor, p: &AttentionParams, c: CombineOp) -> Result<Tensor> {
    pivotal_attention(r, p, c, Kernel::default())
}

/// Order-`k` attention on an `N^k x d` relation tensor (shape `[N; k] + [d]`).
pub fn korder_pivotal_attention(
    r: &Tensor,
    p: &KOrderAttentionParams,
    c: CombineOp,
) -> Result<Tensor> {
    params::check_order(p.order)?;
    let n = tuple_extent(r, p.order)?;
    let q = linear(r, &p.q_proj)?;
    let keys = p
        .key_projs
        .iter()
        .map(|kp| linear(r, kp))
        .collect::<Result<Vec<_>>>()?;
    let values = p
        .value_projs
        .iter()
        .map(|vp| linear(r, vp))
        .collect::<Result<Vec<_>>>()?;
    let inp = korder::KOrderInputs {
        order: p.order,
        n,
        heads: p.heads,
        dim: q.last_dim(),
        q: q.data(),
        keys: keys.iter().map(|t| t.data()).collect(),
        values: values.iter().map(|t| t.data()).collect(),
        combine: c,
    };
    let (o, _) = korder::forward(&inp)?;
    let o = Tensor::new(r.shape().to_vec(), o)?;
    o.check_finite("order-k attention")?;
    linear(&o, &p.out_proj)
}

enum CoreCache {
    Naive(naive::NaiveCache),
    Streamed(SoftmaxStats),
}

struct PivotCoreBack {
    n: usize,
    heads: usize,
    combine: CombineOp,
    cache: CoreCache,
}

impl Backward for PivotCoreBack {
    fn name(&self) -> &'static str {
        match self.cache {
            CoreCache::Naive(_) => "pivotal_attention_naive",
            CoreCache::Streamed(_) => "pivotal_attention_streamed",
        }
    }

    fn backward(
        &self,
        inputs: &[&Tensor],
        out: &Tensor,
        g: &Tensor,
    ) -> Result<Vec<Option<Tensor>>> {
        let inp = PivotInputs {
            n: self.n,
            heads: self.heads,
            dim: inputs[0].last_dim(),
            q: inputs[0].data(),
            k_left: inputs[1].data(),
            k_right: inputs[2].data(),
            v_left: inputs[3].data(),
            v_right: inputs[4].data(),
            combine: self.combine,
        };
        let grads = match &self.cache {
            CoreCache::Naive(cache) => naive::backward(&inp, cache, g.data()),
            CoreCache::Streamed(stats) => streamed::backward(&inp, out.data(), stats, g.data())?,
        };
        let shape = inputs[0].shape().to_vec();
        [
            grads.q,
            grads.k_left,
            grads.k_right,
            grads.v_left,
            grads.v_right,
        ]
        .into_iter()
        .map(|v| Tensor::new(shape.clone(), v).map(Some))
        .collect()
    }
}

struct KOrderCoreBack {
    order: usize,
    n: usize,
    heads: usize,
    combine: CombineOp,
    stats: SoftmaxStats,
}

impl Backward for KOrderCoreBack {
    fn name(&self) -> &'static str {
        "korder_pivotal_attention"
    }

    fn backward(
        &self,
        inputs: &[&Tensor],
        out: &Tensor,
        g: &Tensor,
    ) -> Result<Vec<Option<Tensor>>> {
        let k = self.order;
        let inp = korder::KOrderInputs {
            order: k,
            n: self.n,
            heads: self.heads,
            dim: inputs[0].last_dim(),
            q: inputs[0].data(),
            keys: inputs[1..1 + k].iter().map(|t| t.data()).collect(),
            values: inputs[1 + k..1 + 2 * k].iter().map(|t| t.data()).collect(),
            combine: self.combine,
        };
        let grads = korder::backward(&inp, out.data(), &self.stats, g.data())?;
        let shape = inputs[0].shape().to_vec();
        std::iter::once(grads.q)
            .chain(grads.keys)
            .chain(grads.values)
            .map(|v| Tensor::new(shape.clone(), v).map(Some))
            .collect()
    }
}

impl Tape {
    /// Records the pair attention core on already-projected inputs.
    #[allow(clippy::too_many_arguments)]
    pub fn pivot_core(
        &mut self,
        q: Var,
        k_left: Var,
        k_right: Var,
        v_left: Var,
        v_right: Var,
        heads: usize,
        c: CombineOp,
        kernel: Kernel,
    ) -> Result<Var> {
        let n = pair_extent(self.value(q))?;
        let inp = PivotInputs {
            n,
            heads,
            dim: self.value(q).last_dim(),
            q: self.value(q).data(),
            k_left: self.value(k_left).data(),
            k_right: self.value(k_right).data(),
            v_left: self.value(v_left).data(),
            v_right: self.value(v_right).data(),
            combine: c,
        };
        inp.validate()?;
        let (o, cache) = match kernel {
            Kernel::Naive => {
                let (o, cache) = naive::forward(&inp);
                (o, CoreCache::Naive(cache))
            }
            Kernel::Streamed { tile } => {
                let (o, stats) = streamed::forward(&inp, tile);
                (o, CoreCache::Streamed(stats))
            }
        };
        let o = Tensor::new(self.value(q).shape().to_vec(), o)?;
        self.push(
            vec![q, k_left, k_right, v_left, v_right],
            o,
            Box::new(PivotCoreBack {
                n,
                heads,
                combine: c,
                cache,
            }),
        )
    }

    pub fn pivotal_attention(
        &mut self,
        r: Var,
        p: &AttentionParams<Var>,
        c: CombineOp,
        kernel: Kernel,
    ) -> Result<Var> {
        let q = self.linear(r, &p.q_proj)?;
        let kl = self.linear(r, &p.k_proj_left)?;
        let kr = self.linear(r, &p.k_proj_right)?;
        let vl = self.linear(r, &p.v_proj_left)?;
        let vr = self.linear(r, &p.v_proj_right)?;
        let o = self.pivot_core(q, kl, kr, vl, vr, p.heads, c, kernel)?;
        self.linear(o, &p.out_proj)
    }

    /// Records the order-`k` attention core on already-projected inputs.
    pub fn korder_core(
        &mut self,
        q: Var,
        keys: &[Var],
        values: &[Var],
        heads: usize,
        c: CombineOp,
    ) -> Result<Var> {
        let order = keys.len();
        params::check_order(order)?;
        let n = tuple_extent(self.value(q), order)?;
        let inp = korder::KOrderInputs {
            order,
            n,
            heads,
            dim: self.value(q).last_dim(),
            q: self.value(q).data(),
            keys: keys.iter().map(|&v| self.value(v).data()).collect(),
            values: values.iter().map(|&v| self.value(v).data()).collect(),
            combine: c,
        };
        let (o, stats) = korder::forward(&inp)?;
        let o = Tensor::new(self.value(q).shape().to_vec(), o)?;
        let mut inputs = vec![q];
        inputs.extend_from_slice(keys);
        inputs.extend_from_slice(values);
        self.push(
            inputs,
            o,
            Box::new(KOrderCoreBack {
                order,
                n,
                heads,
                combine: c,
                stats,
            }),
        )
    }

    pub fn korder_attention(
        &mut self,
        r: Var,
        p: &KOrderAttentionParams<Var>,
        c: CombineOp,
    ) -> Result<Var> {
        let q = self.linear(r, &p.q_proj)?;
        let keys = p
            .key_projs
            .iter()
            .map(|kp| self.linear(r, kp))
            .collect::<Result<Vec<_>>>()?;
        let values = p
            .value_projs
            .iter()
            .map(|vp| self.linear(r, vp))
            .collect::<Result<Vec<_>>>()?;
        let o = self.korder_core(q, &keys, &values, p.heads, c)?;
        self.linear(o, &p.out_proj)
    }
}
