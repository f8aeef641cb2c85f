//! Randomized verification harnesses shared by the command line and the
//! acceptance suite. Every check is a pure function of its seed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::attention::rotation::{random_rotation, rotation_compose_check};
use crate::attention::{AttentionParams, CombineOp, Kernel};
use crate::error::{Error, Result};
use crate::graph::{gen_random_graph, CountLevel};
use crate::model::{forward_on_tape, readout_on_tape, ModelConfig, ModelParams};
use crate::nn::{
    grad_check_tape, FfnParams, GradCheckConfig, GradCheckReport, LinearParams, NormKind,
    NormParams, Tape, Tensor, Var,
};

/// Names of the differentiable primitives covered by [`primitive_gradcheck`].
pub const PRIMITIVES: [&str; 17] = [
    "linear",
    "layer_norm",
    "rms_norm",
    "gelu",
    "softmax",
    "add",
    "mul",
    "gather_rows",
    "ffn",
    "pivot_naive_additive",
    "pivot_naive_multiplicative",
    "pivot_streamed_additive",
    "pivot_streamed_multiplicative",
    "korder1",
    "korder2",
    "korder3",
    "slot_fill",
];

/// One line of a gradient-check report.
#[derive(Clone, Debug, Serialize)]
pub struct GradCheckRow {
    pub op: String,
    pub seed: u64,
    pub checked: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub tol: f64,
    pub passed: bool,
}

impl GradCheckRow {
    fn from_report(op: &str, seed: u64, r: &GradCheckReport) -> Self {
        Self {
            op: op.to_string(),
            seed,
            checked: r.params.iter().map(|p| p.checked).sum(),
            max_rel_err: r.max_rel_err(),
            max_abs_err: r.params.iter().map(|p| p.max_abs_err).fold(0.0, f64::max),
            tol: r.tol,
            passed: r.passed(),
        }
    }
}

pub const GRADCHECK_CSV_HEADER: &str = "op,seed,checked,max_rel_err,max_abs_err,tol,passed";

impl GradCheckRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{:.6e},{:.6e},{:e},{}",
            self.op,
            self.seed,
            self.checked,
            self.max_rel_err,
            self.max_abs_err,
            self.tol,
            self.passed
        )
    }
}

fn named(prefix: &str, t: Tensor) -> (String, Tensor) {
    (prefix.to_string(), t)
}

fn push_linear(out: &mut Vec<(String, Tensor)>, prefix: &str, p: &LinearParams) {
    p.visit(prefix, &mut |name, t| out.push((name, t.clone())));
}

/// Checks one primitive on shapes drawn from `seed`.
pub fn primitive_gradcheck(op: &str, seed: u64, tol: f64) -> Result<GradCheckRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = GradCheckConfig {
        tol,
        seed,
        ..GradCheckConfig::default()
    };
    let rows = rng.gen_range(1..=4);
    let d = rng.gen_range(1..=5);
    let report = match op {
        "linear" => {
            let d_out = rng.gen_range(1..=5);
            let p = LinearParams::init(d, d_out, true, &mut rng);
            let mut params = vec![named("x", Tensor::uniform(&[rows, d], 1.0, &mut rng))];
            push_linear(&mut params, "lin", &p);
            grad_check_tape(
                |tape, v| {
                    let lp = LinearParams {
                        weight: v[1],
                        bias: Some(v[2]),
                    };
                    tape.linear(v[0], &lp)
                },
                &params,
                &cfg,
            )?
        }
        "layer_norm" | "rms_norm" => {
            let kind = if op == "layer_norm" {
                NormKind::Layer
            } else {
                NormKind::Rms
            };
            let d = d + 1;
            let params = vec![
                named("x", Tensor::uniform(&[rows, d], 1.0, &mut rng)),
                named("gain", Tensor::uniform(&[d], 1.0, &mut rng)),
                named("offset", Tensor::uniform(&[d], 1.0, &mut rng)),
            ];
            let epsilon = NormParams::<Tensor>::new(d).epsilon;
            grad_check_tape(
                |tape, v| {
                    let np = NormParams {
                        gain: v[1],
                        offset: v[2],
                        epsilon,
                    };
                    tape.norm(kind, v[0], &np)
                },
                &params,
                &cfg,
            )?
        }
        "gelu" => grad_check_tape(
            |tape, v| tape.gelu(v[0]),
            &[named("x", Tensor::uniform(&[rows, d], 3.0, &mut rng))],
            &cfg,
        )?,
        "softmax" => {
            let shape = [rows, d, rng.gen_range(1..=3)];
            let axis = rng.gen_range(0..3);
            grad_check_tape(
                |tape, v| tape.softmax(v[0], axis),
                &[named("x", Tensor::uniform(&shape, 2.0, &mut rng))],
                &cfg,
            )?
        }
        "add" | "mul" => {
            let params = vec![
                named("a", Tensor::uniform(&[rows, d], 1.0, &mut rng)),
                named("b", Tensor::uniform(&[rows, d], 1.0, &mut rng)),
            ];
            let is_add = op == "add";
            grad_check_tape(
                |tape, v| {
                    if is_add {
                        tape.add(v[0], v[1])
                    } else {
                        tape.mul(v[0], v[1])
                    }
                },
                &params,
                &cfg,
            )?
        }
        "gather_rows" => {
            let picks: Vec<usize> = (0..rng.gen_range(1..=6))
                .map(|_| rng.gen_range(0..rows))
                .collect();
            grad_check_tape(
                |tape, v| tape.gather_rows(v[0], &picks),
                &[named("x", Tensor::uniform(&[rows, d], 1.0, &mut rng))],
                &cfg,
            )?
        }
        "ffn" => {
            let hidden = rng.gen_range(1..=6);
            let p = FfnParams::init(d, hidden, rng.gen_range(1..=4), &mut rng);
            let mut params = vec![named("x", Tensor::uniform(&[rows, d], 1.0, &mut rng))];
            p.visit("ffn", &mut |name, t| params.push((name, t.clone())));
            grad_check_tape(
                |tape, v| {
                    let mut it = v[1..].iter().copied();
                    let pv = p.map(&mut |_| it.next().expect("one var per tensor"));
                    tape.ffn(v[0], &pv)
                },
                &params,
                &cfg,
            )?
        }
        "pivot_naive_additive"
        | "pivot_naive_multiplicative"
        | "pivot_streamed_additive"
        | "pivot_streamed_multiplicative" => {
            let n = rng.gen_range(1..=4);
            let heads = rng.gen_range(1..=2);
            let dim = heads * rng.gen_range(1..=3);
            let c = if op.ends_with("_additive") {
                CombineOp::Additive
            } else {
                CombineOp::Multiplicative
            };
            let kernel = if op.starts_with("pivot_naive") {
                Kernel::Naive
            } else {
                Kernel::Streamed {
                    tile: rng.gen_range(1..=n),
                }
            };
            let params: Vec<_> = ["q", "k_left", "k_right", "v_left", "v_right"]
                .iter()
                .map(|name| named(name, Tensor::uniform(&[n, n, dim], 1.0, &mut rng)))
                .collect();
            grad_check_tape(
                |tape, v| tape.pivot_core(v[0], v[1], v[2], v[3], v[4], heads, c, kernel),
                &params,
                &cfg,
            )?
        }
        "korder1" | "korder2" | "korder3" => {
            let order = (op.as_bytes()[6] - b'0') as usize;
            let n = rng.gen_range(1..=[5, 4, 3][order - 1]);
            let heads = rng.gen_range(1..=2);
            let dim = heads * rng.gen_range(1..=2);
            let c = if rng.gen() {
                CombineOp::Additive
            } else {
                CombineOp::Multiplicative
            };
            let mut shape = vec![n; order];
            shape.push(dim);
            let params: Vec<_> = (0..1 + 2 * order)
                .map(|i| named(&format!("input{i}"), Tensor::uniform(&shape, 1.0, &mut rng)))
                .collect();
            grad_check_tape(
                |tape, v| tape.korder_core(v[0], &v[1..1 + order], &v[1 + order..], heads, c),
                &params,
                &cfg,
            )?
        }
        "slot_fill" => {
            let w = rng.gen_range(1..=3);
            let base = Tensor::uniform(&[rows * 3 * w], 1.0, &mut rng);
            let len = base.len();
            let mut offs: Vec<usize> = (0..len / w).map(|r| r * w).collect();
            offs.shuffle(&mut rng);
            let split = rng.gen_range(1..offs.len());
            let slots = vec![offs[..split].to_vec(), offs[split..].to_vec()];
            let params = vec![
                named("a", Tensor::uniform(&[w], 1.0, &mut rng)),
                named("b", Tensor::uniform(&[w], 1.0, &mut rng)),
            ];
            grad_check_tape(
                |tape, v| {
                    let b = tape.leaf(base.clone());
                    tape.slot_fill(b, v, &slots)
                },
                &params,
                &cfg,
            )?
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown primitive `{other}`"
            )))
        }
    };
    Ok(GradCheckRow::from_report(op, seed, &report))
}

/// Every entry of [`PRIMITIVES`] at one seed.
pub fn primitive_gradchecks(seed: u64, tol: f64) -> Result<Vec<GradCheckRow>> {
    PRIMITIVES
        .iter()
        .map(|op| primitive_gradcheck(op, seed, tol))
        .collect()
}

/// Entries checked per parameter tensor in the end-to-end check.
pub const MODEL_ENTRIES_PER_TENSOR: usize = 8;

/// End-to-end check of an `L = 2, d_r = 16, h = 2` pair model on a random
/// 4-node graph with edge readout, through the supernode encoding, every
/// layer and the head.
pub fn model_gradcheck(seed: u64, tol: f64) -> Result<GradCheckRow> {
    let mut cfg = ModelConfig::new(2, 16, 2);
    cfg.seed = seed;
    cfg.readout = CountLevel::Edge;
    let params = ModelParams::init(&cfg)?;
    let g = gen_random_graph(4, 0.5, (1, 3), seed)?;
    let mut named = Vec::new();
    params.visit(&mut |name, t| named.push((name, t.clone())));
    let report = grad_check_tape(
        |tape: &mut Tape, vars: &[Var]| {
            let mut it = vars.iter().copied();
            let pv = params.map(&mut |_| it.next().expect("one var per tensor"));
            let r = forward_on_tape(tape, &g, &cfg, &params, &pv)?;
            readout_on_tape(tape, r, g.n, &cfg, &pv)
        },
        &named,
        &GradCheckConfig {
            tol,
            seed,
            max_entries: Some(MODEL_ENTRIES_PER_TENSOR),
            ..GradCheckConfig::default()
        },
    )?;
    Ok(GradCheckRow::from_report("model_l2_d16_h2", seed, &report))
}

/// Streamed against naive kernel on one random full attention layer.
#[derive(Clone, Debug, Serialize)]
pub struct KernelEquivRow {
    pub trial: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub d_r: usize,
    pub heads: usize,
    pub combine: String,
    pub tile: usize,
    pub forward_err: f64,
    pub grad_err: f64,
    pub passed: bool,
}

pub const KERNEL_EQUIV_CSV_HEADER: &str =
    "trial,N,d_r,heads,combine,tile,forward_err,grad_err,passed";

pub const FORWARD_TOL: f64 = 1e-10;
pub const GRAD_TOL: f64 = 1e-9;

impl KernelEquivRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.3e},{:.3e},{}",
            self.trial,
            self.n,
            self.d_r,
            self.heads,
            self.combine,
            self.tile,
            self.forward_err,
            self.grad_err,
            self.passed
        )
    }
}

fn layer_with_grads(
    r: &Tensor,
    p: &AttentionParams,
    c: CombineOp,
    kernel: Kernel,
    upstream: &Tensor,
) -> Result<(Tensor, Vec<Tensor>)> {
    let mut tape = Tape::new();
    let rv = tape.param(r.clone());
    let pv = p.bind(&mut tape);
    let o = tape.pivotal_attention(rv, &pv, c, kernel)?;
    let out = tape.value(o).clone();
    let grads = tape.backward(o, upstream.clone())?;
    Ok((
        out,
        tape.params()
            .iter()
            .map(|&v| grads.param(v).clone())
            .collect(),
    ))
}

/// Draws a configuration with `N <= max_n` from `(seed, trial)` and compares
/// outputs and all input and parameter gradients of the two kernels.
pub fn kernel_equivalence_trial(seed: u64, trial: usize, max_n: usize) -> Result<KernelEquivRow> {
    if max_n == 0 {
        return Err(Error::InvalidArgument("max_n must be positive".into()));
    }
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (trial as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let n = rng.gen_range(1..=max_n);
    let heads = rng.gen_range(1..=4);
    let d_r = heads * rng.gen_range(1..=8);
    let c = if rng.gen() {
        CombineOp::Additive
    } else {
        CombineOp::Multiplicative
    };
    let tile = rng.gen_range(1..=n + 2);
    let p = AttentionParams::init(d_r, heads, &mut rng)?;
    let r = Tensor::uniform(&[n, n, d_r], 1.0, &mut rng);
    let upstream = Tensor::uniform(&[n, n, d_r], 1.0, &mut rng);
    let (on, gn) = layer_with_grads(&r, &p, c, Kernel::Naive, &upstream)?;
    let (os, gs) = layer_with_grads(&r, &p, c, Kernel::Streamed { tile }, &upstream)?;
    let forward_err = on.max_abs_diff(&os);
    let grad_err = gn
        .iter()
        .zip(&gs)
        .map(|(a, b)| a.max_abs_diff(b))
        .fold(0.0, f64::max);
    Ok(KernelEquivRow {
        trial,
        n,
        d_r,
        heads,
        combine: c.as_str().to_string(),
        tile,
        forward_err,
        grad_err,
        passed: forward_err < FORWARD_TOL && grad_err < GRAD_TOL,
    })
}

fn matmul3(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut c = [[0.0; 3]; 3];
    for (i, row) in c.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

/// Largest entry error over `trials` random rotation pairs composed through
/// the fixed value maps, against the plain matrix product.
pub fn rotation_max_error(trials: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let (a, b) = (random_rotation(&mut rng), random_rotation(&mut rng));
        let got = rotation_compose_check(&a, &b)?;
        let want = matmul3(&a, &b);
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((got[i][j] - want[i][j]).abs());
            }
        }
    }
    Ok(worst)
}
