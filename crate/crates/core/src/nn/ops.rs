//! Differentiable primitives.
//!
//! Each primitive has a plain forward function on [`Tensor`]s and a tape
//! method that records the same computation together with a hand-derived
//! backward rule.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::nn::params::{FfnParams, LinearParams, NormKind, NormParams};
use crate::nn::tape::{Backward, Tape, Var};
use crate::nn::tensor::{gemm, Tensor};

fn check_last(op: &'static str, x: &Tensor, d: usize) -> Result<()> {
    if x.last_dim() != d {
        return Err(Error::Shape {
            op,
            expected: vec![d],
            got: vec![x.last_dim()],
        });
    }
    Ok(())
}

fn check_same(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape {
            op,
            expected: a.shape().to_vec(),
            got: b.shape().to_vec(),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------- linear

fn linear_raw(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Result<Tensor> {
    if w.shape().len() != 2 {
        return Err(Error::Dimension(format!(
            "linear weight shape {:?}",
            w.shape()
        )));
    }
    let (d_in, d_out) = (w.shape()[0], w.shape()[1]);
    check_last("linear", x, d_in)?;
    if let Some(b) = b {
        if b.shape() != [d_out] {
            return Err(Error::Shape {
                op: "linear bias",
                expected: vec![d_out],
                got: b.shape().to_vec(),
            });
        }
    }
    let rows = x.rows();
    let mut out = vec![0.0; rows * d_out];
    if let Some(b) = b {
        for r in 0..rows {
            out[r * d_out..(r + 1) * d_out].copy_from_slice(b.data());
        }
    }
    gemm(
        rows,
        d_in,
        d_out,
        x.data(),
        false,
        w.data(),
        false,
        1.0,
        &mut out,
    );
    Tensor::new(Tensor::with_last_dim(x.shape(), d_out), out)
}

pub fn linear(x: &Tensor, p: &LinearParams) -> Result<Tensor> {
    linear_raw(x, &p.weight, p.bias.as_ref())
}

struct LinearBack;

impl Backward for LinearBack {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn backward(
        &self,
        inputs: &[&Tensor],
        _out: &Tensor,
        g: &Tensor,
    ) -> Result<Vec<Option<Tensor>>> {
        let (x, w) = (inputs[0], inputs[1]);
        let (d_in, d_out) = (w.shape()[0], w.shape()[1]);
        let rows = x.rows();
        let mut dx = vec![0.0; rows * d_in];
        gemm(
            rows,
            d_out,
            d_in,
            g.data(),
            false,
            w.data(),
            true,
            0.0,
            &mut dx,
        );
        let mut dw = vec![0.0; d_in * d_out];
        gemm(
            d_in,
            rows,
            d_out,
            x.data(),
            true,
            g.data(),
            false,
            0.0,
            &mut dw,
        );
        let mut res = vec![
            Some(Tensor::new(x.shape().to_vec(), dx)?),
            Some(Tensor::new(vec![d_in, d_out], dw)?),
        ];
        if inputs.len() > 2 {
            let mut db = vec![0.0; d_out];
            for r in 0..rows {
                for (acc, v) in db.iter_mut().zip(&g.data()[r * d_out..(r + 1) * d_out]) {
                    *acc += v;
                }
            }
            res.push(Some(Tensor::from_vec(db)));
        }
        Ok(res)
    }
}

// ------------------------------------------------------------ normalization

struct NormStats {
    /// Normalized input (before gain/offset).
    xhat: Vec<f64>,
    inv_scale: Vec<f64>,
}

fn norm_raw(
    kind: NormKind,
    x: &Tensor,
    gain: &Tensor,
    offset: &Tensor,
    eps: f64,
) -> Result<(Tensor, NormStats)> {
    let d = x.last_dim();
    if d == 0 {
        return Err(Error::Dimension("normalization over an empty axis".into()));
    }
    if gain.shape() != [d] || offset.shape() != [d] {
        return Err(Error::Shape {
            op: "norm params",
            expected: vec![d],
            got: gain.shape().to_vec(),
        });
    }
    let rows = x.rows();
    let mut xhat = vec![0.0; rows * d];
    let mut inv_scale = vec![0.0; rows];
    let mut out = vec![0.0; rows * d];
    let (gv, ov) = (gain.data(), offset.data());
    for r in 0..rows {
        let row = &x.data()[r * d..(r + 1) * d];
        let (center, var) = match kind {
            NormKind::Layer => {
                let mean = row.iter().sum::<f64>() / d as f64;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
                (mean, var)
            }
            NormKind::Rms => (0.0, row.iter().map(|v| v * v).sum::<f64>() / d as f64),
        };
        let inv = 1.0 / (var + eps).sqrt();
        inv_scale[r] = inv;
        for c in 0..d {
            let h = (row[c] - center) * inv;
            xhat[r * d + c] = h;
            out[r * d + c] = h * gv[c] + ov[c];
        }
    }
    Ok((
        Tensor::new(x.shape().to_vec(), out)?,
        NormStats { xhat, inv_scale },
    ))
}

/// Per-row zero-mean unit-variance transform, then gain and offset.
pub fn layer_norm(x: &Tensor, p: &NormParams) -> Result<Tensor> {
    Ok(norm_raw(NormKind::Layer, x, &p.gain, &p.offset, p.epsilon)?.0)
}

/// Per-row division by the root mean square, then gain and offset.
pub fn rms_norm(x: &Tensor, p: &NormParams) -> Result<Tensor> {
    Ok(norm_raw(NormKind::Rms, x, &p.gain, &p.offset, p.epsilon)?.0)
}

pub fn norm(kind: NormKind, x: &Tensor, p: &NormParams) -> Result<Tensor> {
    Ok(norm_raw(kind, x, &p.gain, &p.offset, p.epsilon)?.0)
}

struct NormBack {
    kind: NormKind,
    stats: NormStats,
}

impl Backward for NormBack {
    fn name(&self) -> &'static str {
        match self.kind {
            NormKind::Layer => "layer_norm",
            NormKind::Rms => "rms_norm",
        }
    }

    fn backward(
        &self,
        inputs: &[&Tensor],
        _out: &Tensor,
        g: &Tensor,
    ) -> Result<Vec<Option<Tensor>>> {
        let (x, gain) = (inputs[0], inputs[1]);
        let d = x.last_dim();
        let rows = x.rows();
        let gv = gain.data();
        let mut dx = vec![0.0; rows * d];
        let mut dgain = vec![0.0; d];
        let mut doffset = vec![0.0; d];
        let mut dxhat = vec![0.0; d];
        for r in 0..rows {
            let gr = &g.data()[r * d..(r + 1) * d];
            let xh = &self.stats.xhat[r * d..(r + 1) * d];
            let mut mean_dxhat = 0.0;
            let mut mean_dxhat_xhat = 0.0;
            for c in 0..d {
                dgain[c] += gr[c] * xh[c];
                doffset[c] += gr[c];
                dxhat[c] = gr[c] * gv[c];
                mean_dxhat += dxhat[c];
                mean_dxhat_xhat += dxhat[c] * xh[c];
            }
            mean_dxhat /= d as f64;
            mean_dxhat_xhat /= d as f64;
            if self.kind == NormKind::Rms {
                mean_dxhat = 0.0;
            }
            let inv = self.stats.inv_scale[r];
            for c in 0..d {
                dx[r * d + c] = inv * (dxhat[c] - mean_dxhat - xh[c] * mean_dxhat_xhat);
            }
        }
        Ok(vec![
            Some(Tensor::new(x.shape().to_vec(), dx)?),
            Some(Tensor::from_vec(dgain)),
            Some(Tensor::from_vec(doffset)),
        ])
    }
}

// ------------------------------------------------------------------- GELU

/// Exact erf-based GELU.
pub fn gelu_scalar(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

fn gelu_grad_scalar(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    cdf + x * pdf
}

pub fn gelu(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|&v| gelu_scalar(v)).collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

struct GeluBack;

impl Backward for GeluBack {
    fn name(&self) -> &'static str {
        "gelu"
    }

    fn backward(
        &self,
        inputs: &[&Tensor],
        _out: &Tensor,
        g: &Tensor,
    ) -> Result<Vec<Option<Tensor>>> {
        let x = inputs[0];
        let dx = x
            .data()
            .iter()
            .zip(g.data())
            .map(|(&v, &gv)| gv * gelu_grad_scalar(v))
            .collect();
        Ok(vec![Some(Tensor::new(x.shape().to_vec(), dx)?)])
    }
}

// ---------------------------------------------------------------- softmax

fn axis_layout(shape: &[usize], axis: usize) -> Result<(usize, usize, usize)> {
    if axis >= shape.len() {
        return Err(Error::InvalidArgument(format!(
            "softmax axis {axis} for rank {}",
            shape.len()
        )));
    }
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    Ok((outer, shape[axis], inner))
}

/// Max-subtracted softmax along `axis`.
pub fn softmax(x: &Tensor, axis: usize) -> Result<Tensor> {
    let (outer, len, inner) = axis_layout(x.shape(), axis)?;
    let src = x.data();
    let mut out = vec![0.0; src.len()];
    for o in 0..outer {
        for i in 0..inner {
            let at = |j: usize| o * len * inner + j * inner + i;
            let max = (0..len)
                .map(|j| src[at(j)])
                .fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for j in 0..len {
                let e = (src[at(j)] - max).exp();
                out[at(j)] = e;
                sum += e;
            }
            for j in 0..len {
                out[at(j)] /= sum;
            }
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

struct SoftmaxBack {
    axis: usize,
}

impl Backward for SoftmaxBack {
    fn name(&self) -> &'static str {
        "softmax"
    }

    fn backward(&self, _inputs: &[&Tensor], y: &Tensor, g: &Tensor) -> Result<Vec<Option<Tensor>>> {
        let (outer, len, inner) = axis_layout(y.shape(), self.axis)?;
        let (yv, gv) = (y.data(), g.data());
        let mut dx = vec![0.0; yv.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |j: usize| o * len * inner + j * inner + i;
                let dot: f64 = (0..len).map(|j| yv[at(j)] * gv[at(j)]).sum();
                for j in 0..len {
                    dx[at(j)] = yv[at(j)] * (gv[at(j)] - dot);
                }
            }
        }
        Ok(vec![Some(Tensor::new(y.shape().to_vec(), dx)?)])
    }
}

// ------------------------------------------------------ elementwise helpers

struct AddBack;

impl Backward for AddBack {
    fn name(&self) -> &'static str {
        "add"
    }

    fn backward(
        &self,
        _inputs: &[&Tensor],
        _out: &Tensor,
        g: &Tensor,
    ) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(g.clone()), Some(g.clone())])
    }
}

struct MulBack;

impl Backward for MulBack {
    fn name(&self) -> &'static str {
        "mul"
    }

    fn backward(
        &self,
        inputs: &[&Tensor],
        _out: &Tensor,
        g: &Tensor,
    ) -> Result<Vec<Option<Tensor>>> {
        let (a, b) = (inputs[0], inputs[1]);
        let da = g.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
        let db = g.data().iter().zip(a.data()).map(|(x, y)| x * y).collect();
        Ok(vec![
            Some(Tensor::new(a.shape().to_vec(), da)?),
            Some(Tensor::new(b.shape().to_vec(), db)?),
        ])
    }
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_same("add", a, b)?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_same("mul", a, b)?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    Tensor::new(a.shape().to_vec(), data)
}

struct GatherRowsBack {
    rows: Vec<usize>,
}

impl Backward for GatherRowsBack {
    fn name(&self) -> &'static str {
        "gather_rows"
    }

    fn backward(
        &self,
        inputs: &[&Tensor],
        _out: &Tensor,
        g: &Tensor,
    ) -> Result<Vec<Option<Tensor>>> {
        let x = inputs[0];
        let d = x.last_dim();
        let mut dx = vec![0.0; x.len()];
        for (o, &r) in self.rows.iter().enumerate() {
            for c in 0..d {
                dx[r * d + c] += g.data()[o * d + c];
            }
        }
        Ok(vec![Some(Tensor::new(x.shape().to_vec(), dx)?)])
    }
}

/// Selects rows of `x` (viewed as `rows x d`) into a `len x d` matrix.
pub fn gather_rows(x: &Tensor, rows: &[usize]) -> Result<Tensor> {
    let d = x.last_dim();
    let total = x.rows();
    let mut out = Vec::with_capacity(rows.len() * d);
    for &r in rows {
        if r >= total {
            return Err(Error::IndexOutOfRange { index: r, n: total });
        }
        out.extend_from_slice(x.row(r));
    }
    Tensor::new(vec![rows.len(), d], out)
}

/// Linear, GELU, linear.
pub fn ffn(x: &Tensor, p: &FfnParams) -> Result<Tensor> {
    let h = gelu(&linear(x, &p.up)?);
    linear(&h, &p.down)
}

// ------------------------------------------------------------ tape methods

impl Tape {
    pub fn linear(&mut self, x: Var, p: &LinearParams<Var>) -> Result<Var> {
        let out = linear_raw(
            self.value(x),
            self.value(p.weight),
            p.bias.map(|b| self.value(b)),
        )?;
        let mut inputs = vec![x, p.weight];
        inputs.extend(p.bias);
        self.push(inputs, out, Box::new(LinearBack))
    }

    pub fn norm(&mut self, kind: NormKind, x: Var, p: &NormParams<Var>) -> Result<Var> {
        let (out, stats) = norm_raw(
            kind,
            self.value(x),
            self.value(p.gain),
            self.value(p.offset),
            p.epsilon,
        )?;
        self.push(
            vec![x, p.gain, p.offset],
            out,
            Box::new(NormBack { kind, stats }),
        )
    }

    pub fn layer_norm(&mut self, x: Var, p: &NormParams<Var>) -> Result<Var> {
        self.norm(NormKind::Layer, x, p)
    }

    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        let out = gelu(self.value(x));
        self.push(vec![x], out, Box::new(GeluBack))
    }

    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let out = softmax(self.value(x), axis)?;
        self.push(vec![x], out, Box::new(SoftmaxBack { axis }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = add(self.value(a), self.value(b))?;
        self.push(vec![a, b], out, Box::new(AddBack))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = mul(self.value(a), self.value(b))?;
        self.push(vec![a, b], out, Box::new(MulBack))
    }

    pub fn gather_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        let out = gather_rows(self.value(x), rows)?;
        self.push(
            vec![x],
            out,
            Box::new(GatherRowsBack {
                rows: rows.to_vec(),
            }),
        )
    }

    pub fn ffn(&mut self, x: Var, p: &FfnParams<Var>) -> Result<Var> {
        let h = self.linear(x, &p.up)?;
        let h = self.gelu(h)?;
        self.linear(h, &p.down)
    }
}
