//! Model-side verdicts: a randomly initialized network acts as a continuous
//! color refinement, and the rounded multiset of its final tuple vectors
//! plays the role of the stable color multiset.

use sha2::{Digest, Sha256};

use super::refine::GraphSignature;
use super::suite::{SuitePair, VerdictRecord};
use crate::attention::CombineOp;
use crate::error::Result;
use crate::graph::{CountLevel, Graph};
use crate::model::{model_forward, ModelConfig, ModelParams};

/// Default rounding granularity, in decimal places.
pub const DEFAULT_DECIMALS: u32 = 6;

/// Hash of the multiset of final tuple vectors, each entry rounded to
/// `decimals` decimal places.
pub fn model_signature(
    g: &Graph,
    cfg: &ModelConfig,
    params: &ModelParams,
    decimals: u32,
) -> Result<GraphSignature> {
    let r = model_forward(g, cfg, params)?;
    let scale = 10f64.powi(decimals as i32);
    let mut rows: Vec<Vec<i64>> = (0..r.rows())
        .map(|i| {
            r.row(i)
                .iter()
                .map(|x| (x * scale).round() as i64)
                .collect()
        })
        .collect();
    rows.sort_unstable();
    let mut h = Sha256::new();
    h.update((rows.len() as u64).to_le_bytes());
    for row in &rows {
        for x in row {
            h.update(x.to_le_bytes());
        }
    }
    Ok(GraphSignature(h.finalize().into()))
}

/// Architecture used for the alignment harness: no supernode, so tuples
/// range over real nodes only, and no input features.
pub fn alignment_config(order: usize, seed: u64) -> ModelConfig {
    let mut cfg = ModelConfig::new(4, 16, 2);
    cfg.order = order;
    cfg.supernode = false;
    cfg.readout = CountLevel::Edge;
    cfg.combine = CombineOp::Additive;
    cfg.seed = seed;
    if order == 1 {
        cfg.supernode = true;
        cfg.readout = CountLevel::Graph;
    }
    cfg
}

/// Model verdicts on every pair for each seed; the scheme is reported as
/// `model-k<order>`.
pub fn model_verdicts(
    suite: &[SuitePair],
    base: &ModelConfig,
    seeds: &[u64],
    decimals: u32,
) -> Result<Vec<VerdictRecord>> {
    let mut out = Vec::new();
    for &seed in seeds {
        let cfg = ModelConfig {
            seed,
            ..base.clone()
        };
        let params = ModelParams::init(&cfg)?;
        for p in suite {
            let sa = model_signature(&p.a, &cfg, &params, decimals)?;
            let sb = model_signature(&p.b, &cfg, &params, decimals)?;
            out.push(VerdictRecord {
                pair_id: p.id.to_string(),
                scheme: format!("model-k{}", cfg.order),
                distinguished: sa != sb,
                rounds: cfg.layers,
                seed: Some(seed),
            });
        }
    }
    Ok(out)
}
