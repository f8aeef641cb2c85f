use crate::error::{Error, Result};
use crate::nn::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// First and second moment estimates, one pair per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
}

impl AdamState {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let m: Vec<Tensor> = params
            .into_iter()
            .map(|t| Tensor::zeros(t.shape()))
            .collect();
        Self {
            v: m.clone(),
            m,
            step: 0,
        }
    }
}

/// One AdamW update with bias correction and decoupled weight decay:
/// `p <- p (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps)`.
pub fn adamw_step(
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
    lr: f64,
    cfg: &AdamWConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Dimension(format!(
            "{} parameters, {} gradients, {} optimizer slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[i].shape() {
            return Err(Error::Shape {
                op: "adamw",
                expected: p.shape().to_vec(),
                got: g.shape().to_vec(),
            });
        }
        g.check_finite(&format!("gradient of parameter {i}"))?;
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let decay = 1.0 - lr * cfg.weight_decay;
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let it = p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut().zip(v.data_mut()));
        for ((x, &gi), (mi, vi)) in it {
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
            let mh = *mi / c1;
            let vh = *vi / c2;
            *x = *x * decay - lr * mh / (vh.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

/// Rescales `grads` so their joint L2 norm is at most `max_norm`; returns
/// the norm before clipping.
pub fn clip_grad_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g.dot(g)).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            g.scale(s);
        }
    }
    norm
}

/// Linear warmup followed by reduce-on-plateau.
#[derive(Clone, Debug, PartialEq)]
pub struct LrSchedule {
    pub base: f64,
    pub warmup: u64,
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
    scale: f64,
    best: f64,
    bad_evals: usize,
}

impl LrSchedule {
    pub fn new(base: f64, warmup: u64, factor: f64, patience: usize) -> Self {
        Self {
            base,
            warmup,
            factor,
            patience,
            min_lr: base * 1e-3,
            scale: 1.0,
            best: f64::INFINITY,
            bad_evals: 0,
        }
    }

    /// Learning rate for optimizer step `step` (0-based).
    pub fn lr(&self, step: u64) -> f64 {
        let warm = if self.warmup == 0 {
            1.0
        } else {
            ((step + 1) as f64 / self.warmup as f64).min(1.0)
        };
        (self.base * self.scale).max(self.min_lr) * warm
    }

    /// Records an evaluation metric (lower is better); after `patience`
    /// evaluations without a relative improvement of 1e-4 the rate is
    /// multiplied by `factor`.
    pub fn observe(&mut self, metric: f64) {
        if metric < self.best * (1.0 - 1e-4) {
            self.best = metric;
            self.bad_evals = 0;
        } else {
            self.bad_evals += 1;
            if self.bad_evals > self.patience {
                self.scale *= self.factor;
                self.bad_evals = 0;
            }
        }
    }
}
