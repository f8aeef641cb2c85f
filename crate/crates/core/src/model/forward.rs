use super::config::ModelConfig;
use super::init::encode_on_tape;
use super::params::{LayerParams, ModelParams};
use crate::error::{Error, Result};
use crate::graph::{CountLevel, Graph};
use crate::nn::{Tape, Tensor, Var};

/// One pre-LN block on the tape: `r + Attn(Norm(r))`, then `+ FFN(Norm(.))`.
pub fn floyd_block_on_tape(
    tape: &mut Tape,
    r: Var,
    layer: &LayerParams<Var>,
    cfg: &ModelConfig,
) -> Result<Var> {
    let h = tape.norm(cfg.norm, r, &layer.norm1)?;
    let a = if cfg.order == 2 {
        tape.pivotal_attention(h, &layer.attn.to_pair()?, cfg.combine, cfg.kernel)?
    } else {
        tape.korder_attention(h, &layer.attn, cfg.combine)?
    };
    let r = tape.add(r, a)?;
    let h = tape.norm(cfg.norm, r, &layer.norm2)?;
    let f = tape.ffn(h, &layer.ffn)?;
    let out = tape.add(r, f)?;
    tape.value(out).check_finite("refinement block output")?;
    Ok(out)
}

pub fn floyd_block(r: &Tensor, layer: &LayerParams, cfg: &ModelConfig) -> Result<Tensor> {
    let mut tape = Tape::new();
    let rv = tape.leaf(r.clone());
    let lv = layer.map(&mut |t| tape.param(t.clone()));
    let out = floyd_block_on_tape(&mut tape, rv, &lv, cfg)?;
    Ok(tape.value(out).clone())
}

/// Records the whole network up to the final normalization and returns the
/// final relation tensor, `[m; order] x rel_dim` with `m = n + 1` when the
/// supernode is enabled.
pub fn forward_on_tape(
    tape: &mut Tape,
    g: &Graph,
    cfg: &ModelConfig,
    params: &ModelParams,
    pv: &ModelParams<Var>,
) -> Result<Var> {
    if params.layers.len() != cfg.layers {
        return Err(Error::InvalidArgument(format!(
            "parameters hold {} layers, config asks for {}",
            params.layers.len(),
            cfg.layers
        )));
    }
    let x = encode_on_tape(tape, g, cfg, params, pv)?;
    let mut r = tape.ffn(x, &pv.init)?;
    for layer in &pv.layers {
        r = floyd_block_on_tape(tape, r, layer, cfg)?;
    }
    tape.norm(cfg.norm, r, &pv.final_norm)
}

pub fn model_forward(g: &Graph, cfg: &ModelConfig, params: &ModelParams) -> Result<Tensor> {
    let mut tape = Tape::new();
    let pv = params.bind(&mut tape);
    let r = forward_on_tape(&mut tape, g, cfg, params, &pv)?;
    Ok(tape.value(r).clone())
}

/// Rows of the relation tensor read out at `level` for an `n`-node graph.
///
/// Graph level reads the all-supernode tuple, node `i` reads `(i, SN, ..)`,
/// and edge `(i, j)` reads `(i, j, SN, ..)`, or `(i, j, j, ..)` without a
/// supernode. Edge rows are ordered `i * n + j`.
pub fn readout_rows(n: usize, cfg: &ModelConfig, level: CountLevel) -> Result<Vec<usize>> {
    let k = cfg.order;
    let m = n + cfg.supernode as usize;
    let index = |t: &[usize]| t.iter().fold(0, |acc, &x| acc * m + x);
    let sn = n;
    match level {
        CountLevel::Graph | CountLevel::Node if !cfg.supernode => Err(Error::InvalidArgument(
            format!("{} readout needs the supernode", level.as_str()),
        )),
        CountLevel::Graph => Ok(vec![index(&vec![sn; k])]),
        CountLevel::Node => Ok((0..n)
            .map(|i| {
                let mut t = vec![sn; k];
                t[0] = i;
                index(&t)
            })
            .collect()),
        CountLevel::Edge if k < 2 => Err(Error::Unsupported(
            "edge readout of an order-1 model".into(),
        )),
        CountLevel::Edge => {
            let mut rows = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    let fill = if cfg.supernode { sn } else { j };
                    let mut t = vec![fill; k];
                    t[0] = i;
                    t[1] = j;
                    rows.push(index(&t));
                }
            }
            Ok(rows)
        }
    }
}

/// Decoded predictions on the tape: `[1, out]`, `[n, out]` or `[n * n, out]`.
pub fn readout_on_tape(
    tape: &mut Tape,
    r: Var,
    n: usize,
    cfg: &ModelConfig,
    pv: &ModelParams<Var>,
) -> Result<Var> {
    let rows = readout_rows(n, cfg, cfg.readout)?;
    let picked = tape.gather_rows(r, &rows)?;
    tape.linear(picked, &pv.head)
}

pub fn readout(r: &Tensor, n: usize, cfg: &ModelConfig, params: &ModelParams) -> Result<Tensor> {
    let rows = readout_rows(n, cfg, cfg.readout)?;
    let picked = crate::nn::ops::gather_rows(r, &rows)?;
    crate::nn::ops::linear(&picked, &params.head)
}

/// Forward pass plus readout.
pub fn predict(g: &Graph, cfg: &ModelConfig, params: &ModelParams) -> Result<Tensor> {
    let mut tape = Tape::new();
    let pv = params.bind(&mut tape);
    let r = forward_on_tape(&mut tape, g, cfg, params, &pv)?;
    let out = readout_on_tape(&mut tape, r, g.n, cfg, &pv)?;
    Ok(tape.value(out).clone())
}
