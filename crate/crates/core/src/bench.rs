//! Wall time and peak allocation of the pair attention kernels.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::attention::{pivotal_attention, AttentionParams, CombineOp, Kernel};
use crate::error::Result;
use crate::memtrack::measure_peak_serial;
use crate::nn::tensor::Tensor;

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    #[serde(rename = "impl")]
    pub implementation: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub d_r: usize,
    pub heads: usize,
    pub wall_ms: f64,
    pub peak_bytes: usize,
    pub checksum: f64,
}

pub const CSV_HEADER: &str = "impl,N,d_r,heads,wall_ms,peak_bytes,checksum";

impl BenchRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{:.3},{},{:.12e}",
            self.implementation,
            self.n,
            self.d_r,
            self.heads,
            self.wall_ms,
            self.peak_bytes,
            self.checksum
        )
    }
}

/// Peak bytes allocated by one forward call of the full attention layer
/// (projections, core, output projection) on this thread. Only meaningful
/// when [`crate::memtrack::TrackingAllocator`] is installed.
pub fn attention_peak_bytes(
    r: &Tensor,
    p: &AttentionParams,
    c: CombineOp,
    kernel: Kernel,
) -> Result<usize> {
    let (out, peak) = measure_peak_serial(|| pivotal_attention(r, p, c, kernel).map(|t| t.len()));
    out?;
    Ok(peak)
}

/// One row per `(kernel, n)`; inputs are drawn from `seed` so both kernels
/// see identical data at each size.
pub fn run_kernel_bench(
    ns: &[usize],
    d_r: usize,
    heads: usize,
    kernels: &[Kernel],
    seed: u64,
) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &n in ns {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ n as u64);
        let p = AttentionParams::init(d_r, heads, &mut rng)?;
        let r = Tensor::uniform(&[n, n, d_r], 1.0, &mut rng);
        for &kernel in kernels {
            let start = Instant::now();
            let out = pivotal_attention(&r, &p, CombineOp::Additive, kernel)?;
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            let checksum = out.sum();
            drop(out);
            let peak_bytes = attention_peak_bytes(&r, &p, CombineOp::Additive, kernel)?;
            rows.push(BenchRow {
                implementation: kernel.as_str().to_string(),
                n,
                d_r,
                heads,
                wall_ms,
                peak_bytes,
                checksum,
            });
        }
    }
    Ok(rows)
}
