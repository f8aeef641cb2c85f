//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::nn::tape::{Tape, Var};
use crate::nn::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    pub eps: f64,
    pub tol: f64,
    /// Relative errors are taken against `max(|analytic|, |numeric|, floor)`
    /// so entries whose true gradient is ~0 are judged on absolute error.
    pub floor: f64,
    /// Check at most this many randomly chosen entries per tensor.
    pub max_entries: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            tol: 1e-6,
            floor: 1e-3,
            max_entries: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub tol: f64,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.max_rel_err)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_err() < self.tol
    }
}

/// Compares `analytic` (the gradient of `value` at `params`) with central
/// differences `(f(x + eps) - f(x - eps)) / (2 eps)` entry by entry.
pub fn grad_check<F>(
    mut value: F,
    names: &[String],
    params: &[Tensor],
    analytic: &[Tensor],
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    F: FnMut(&[Tensor]) -> Result<f64>,
{
    if params.len() != analytic.len() || params.len() != names.len() {
        return Err(Error::InvalidArgument(format!(
            "{} params, {} gradients, {} names",
            params.len(),
            analytic.len(),
            names.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut work: Vec<Tensor> = params.to_vec();
    let mut report = GradCheckReport {
        tol: cfg.tol,
        params: Vec::with_capacity(params.len()),
    };
    for (pi, grad) in analytic.iter().enumerate() {
        if grad.shape() != params[pi].shape() {
            return Err(Error::Shape {
                op: "grad_check",
                expected: params[pi].shape().to_vec(),
                got: grad.shape().to_vec(),
            });
        }
        grad.check_finite(&format!("analytic gradient of {}", names[pi]))?;
        let len = params[pi].len();
        let entries: Vec<usize> = match cfg.max_entries {
            Some(m) if m < len => {
                let mut v = sample(&mut rng, len, m).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..len).collect(),
        };
        let mut check = ParamCheck {
            name: names[pi].clone(),
            checked: entries.len(),
            max_rel_err: 0.0,
            max_abs_err: 0.0,
        };
        for &e in &entries {
            let orig = work[pi].data()[e];
            work[pi].data_mut()[e] = orig + cfg.eps;
            let up = value(&work)?;
            work[pi].data_mut()[e] = orig - cfg.eps;
            let down = value(&work)?;
            work[pi].data_mut()[e] = orig;
            if !up.is_finite() || !down.is_finite() {
                return Err(Error::NonFinite(format!(
                    "objective at perturbed {}[{}]",
                    names[pi], e
                )));
            }
            let numeric = (up - down) / (2.0 * cfg.eps);
            let a = grad.data()[e];
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(cfg.floor);
            check.max_abs_err = check.max_abs_err.max(abs);
            check.max_rel_err = check.max_rel_err.max(rel);
        }
        report.params.push(check);
    }
    Ok(report)
}

/// Checks every tensor in `named` as a parameter of a tape-recorded
/// computation, reduced to the scalar `sum(out * w)` with a fixed random `w`
/// drawn from `cfg.seed`.
pub fn grad_check_tape<F>(
    build: F,
    named: &[(String, Tensor)],
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = named.iter().map(|(_, t)| tape.param(t.clone())).collect();
    let out = build(&mut tape, &vars)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9);
    let w = Tensor::uniform(tape.value(out).shape(), 1.0, &mut rng);
    let grads = tape.backward(out, w.clone())?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .map(|&v| {
            grads
                .get(v)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(tape.value(v).shape()))
        })
        .collect();
    let names: Vec<String> = named.iter().map(|(n, _)| n.clone()).collect();
    let params: Vec<Tensor> = named.iter().map(|(_, t)| t.clone()).collect();
    grad_check(
        |ps| {
            let mut t = Tape::new();
            let vs: Vec<Var> = ps.iter().map(|p| t.param(p.clone())).collect();
            let o = build(&mut t, &vs)?;
            Ok(t.value(o).dot(&w))
        },
        &names,
        &params,
        &analytic,
        cfg,
    )
}
