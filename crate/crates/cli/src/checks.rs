use clap::Args;
use serde_json::json;

use floydnet::attention::{Kernel, DEFAULT_TILE};
use floydnet::bench::{run_kernel_bench, CSV_HEADER};
use floydnet::verify::{
    kernel_equivalence_trial, model_gradcheck, primitive_gradcheck, rotation_max_error,
    GradCheckRow, GRADCHECK_CSV_HEADER, KERNEL_EQUIV_CSV_HEADER, PRIMITIVES,
};
use floydnet::{Error, Result};

use crate::output::{write_csv, write_jsonl, OutDir};
use crate::settings::{List, Settings};
use crate::{Global, Outcome};

#[derive(Args)]
pub struct GradcheckArgs {
    /// Relative tolerance for primitives [default: 1e-6]
    #[arg(long)]
    tol: Option<f64>,
    /// Relative tolerance for the end-to-end model [default: 1e-5]
    #[arg(long)]
    model_tol: Option<f64>,
    /// Number of consecutive seeds starting at --seed [default: 20]
    #[arg(long)]
    seeds: Option<u64>,
    /// Comma-separated primitives to check [default: all, plus the model]
    #[arg(long)]
    ops: Option<List<String>>,
}

pub fn gradcheck(a: GradcheckArgs, g: &Global, out: &OutDir) -> Outcome {
    let mut s = Settings::load(g.config.as_deref())?;
    let seed = s.pick(g.seed, "seed", 0)?;
    let tol = s.pick(a.tol, "tol", 1e-6)?;
    let model_tol = s.pick(a.model_tol, "model_tol", 1e-5)?;
    let seeds = s.pick(a.seeds, "seeds", 20)?;
    let all: Vec<String> = PRIMITIVES
        .iter()
        .map(|p| p.to_string())
        .chain(["model".to_string()])
        .collect();
    let ops = s.pick(a.ops, "ops", List(all))?.0;
    s.finish()?;
    if let Some(bad) = ops
        .iter()
        .find(|o| *o != "model" && !PRIMITIVES.contains(&o.as_str()))
    {
        return Err(Error::InvalidArgument(format!(
            "unknown op `{bad}`; expected one of {}, model",
            PRIMITIVES.join(", ")
        )));
    }
    out.manifest(
        "gradcheck",
        seed,
        g.threads,
        json!({"tol": tol, "model_tol": model_tol, "seeds": seeds, "ops": ops}),
    )?;

    let mut rows: Vec<GradCheckRow> = Vec::new();
    for op in &ops {
        for sd in seed..seed + seeds {
            rows.push(if op == "model" {
                model_gradcheck(sd, model_tol)?
            } else {
                primitive_gradcheck(op, sd, tol)?
            });
        }
    }
    write_csv(
        &mut out.file("gradcheck.csv")?,
        GRADCHECK_CSV_HEADER,
        rows.iter().map(GradCheckRow::csv),
    )?;
    println!("{:<32} {:>14} {:>8}", "op", "max_rel_err", "status");
    for op in &ops {
        let mine: Vec<_> = rows
            .iter()
            .filter(|r| &r.op == op || (op == "model" && r.op.starts_with("model")))
            .collect();
        let worst = mine.iter().map(|r| r.max_rel_err).fold(0.0, f64::max);
        let ok = mine.iter().all(|r| r.passed);
        println!(
            "{:<32} {:>14.3e} {:>8}",
            op,
            worst,
            if ok { "pass" } else { "FAIL" }
        );
    }
    Ok(rows.iter().all(|r| r.passed))
}

#[derive(Args)]
pub struct KernelEquivArgs {
    /// Number of random configurations [default: 100]
    #[arg(long)]
    trials: Option<usize>,
    /// Largest node count drawn [default: 24]
    #[arg(long)]
    max_n: Option<usize>,
}

pub fn kernel_equiv(a: KernelEquivArgs, g: &Global, out: &OutDir) -> Outcome {
    let mut s = Settings::load(g.config.as_deref())?;
    let seed = s.pick(g.seed, "seed", 0)?;
    let trials = s.pick(a.trials, "trials", 100)?;
    let max_n = s.pick(a.max_n, "max_n", 24)?;
    s.finish()?;
    out.manifest(
        "kernel-equiv",
        seed,
        g.threads,
        json!({"trials": trials, "max_n": max_n}),
    )?;
    let rows = (0..trials)
        .map(|t| kernel_equivalence_trial(seed, t, max_n))
        .collect::<Result<Vec<_>>>()?;
    write_csv(
        &mut out.file("kernel_equiv.csv")?,
        KERNEL_EQUIV_CSV_HEADER,
        rows.iter().map(|r| r.csv()),
    )?;
    let fwd = rows.iter().map(|r| r.forward_err).fold(0.0, f64::max);
    let grad = rows.iter().map(|r| r.grad_err).fold(0.0, f64::max);
    let failed = rows.iter().filter(|r| !r.passed).count();
    println!("{trials} configurations, max forward err {fwd:.3e}, max gradient err {grad:.3e}, {failed} failed");
    Ok(failed == 0)
}

#[derive(Args)]
pub struct KernelBenchArgs {
    /// Comma-separated node counts [default: 32,64,128]
    #[arg(long)]
    pub n: Option<List<usize>>,
    /// Relation width d_r [default: 64]
    #[arg(long)]
    dr: Option<usize>,
    /// Attention heads [default: 4]
    #[arg(long)]
    heads: Option<usize>,
    /// Comma-separated kernels among naive, streamed [default: naive,streamed]
    #[arg(long)]
    kernels: Option<List<String>>,
    /// Pivot tile of the streamed kernel [default: 32]
    #[arg(long)]
    tile: Option<usize>,
    /// Skip the naive kernel above this node count, since it holds N^3 d_r
    /// intermediates [default: 64]
    #[arg(long)]
    naive_max_n: Option<usize>,
}

pub fn kernel_bench(a: KernelBenchArgs, g: &Global, out: &OutDir) -> Outcome {
    let mut s = Settings::load(g.config.as_deref())?;
    let seed = s.pick(g.seed, "seed", 0)?;
    let ns = s.pick(a.n, "n", List(vec![32, 64, 128]))?.0;
    let d_r = s.pick(a.dr, "dr", 64)?;
    let heads = s.pick(a.heads, "heads", 4)?;
    let kernels = s
        .pick(
            a.kernels,
            "kernels",
            List(vec!["naive".to_string(), "streamed".to_string()]),
        )?
        .0;
    let tile = s.pick(a.tile, "tile", DEFAULT_TILE)?;
    let naive_max_n = s.pick(a.naive_max_n, "naive_max_n", 64)?;
    s.finish()?;
    let kernels = kernels
        .iter()
        .map(|k| match k.as_str() {
            "naive" => Ok(Kernel::Naive),
            "streamed" => Ok(Kernel::Streamed { tile }),
            other => Err(Error::InvalidArgument(format!("unknown kernel `{other}`"))),
        })
        .collect::<Result<Vec<_>>>()?;
    if !floydnet::memtrack::is_installed() {
        return Err(Error::Unsupported(
            "allocation tracking is not active".into(),
        ));
    }
    out.manifest(
        "kernel-bench",
        seed,
        g.threads,
        json!({"n": ns, "dr": d_r, "heads": heads, "kernels": kernels.iter().map(|k| k.as_str()).collect::<Vec<_>>(),
               "tile": tile, "naive_max_n": naive_max_n}),
    )?;
    let mut rows = Vec::new();
    for &n in &ns {
        let ks: Vec<Kernel> = kernels
            .iter()
            .copied()
            .filter(|k| *k != Kernel::Naive || n <= naive_max_n)
            .collect();
        if ks.len() < kernels.len() {
            eprintln!("skipping naive kernel at N={n} (above --naive-max-n {naive_max_n})");
        }
        rows.extend(run_kernel_bench(&[n], d_r, heads, &ks, seed)?);
    }
    write_csv(
        &mut out.file("kernel_bench.csv")?,
        CSV_HEADER,
        rows.iter().map(|r| r.csv()),
    )?;
    println!("{CSV_HEADER}");
    for r in &rows {
        println!("{}", r.csv());
    }
    Ok(true)
}

#[derive(Args)]
pub struct RotationArgs {
    /// Number of random rotation pairs [default: 1000]
    #[arg(long)]
    trials: Option<usize>,
    /// Largest accepted entry error [default: 1e-12]
    #[arg(long)]
    tol: Option<f64>,
}

pub fn rotation_check(a: RotationArgs, g: &Global, out: &OutDir) -> Outcome {
    let mut s = Settings::load(g.config.as_deref())?;
    let seed = s.pick(g.seed, "seed", 0)?;
    let trials = s.pick(a.trials, "trials", 1000)?;
    let tol = s.pick(a.tol, "tol", 1e-12)?;
    s.finish()?;
    out.manifest(
        "rotation-check",
        seed,
        g.threads,
        json!({"trials": trials, "tol": tol}),
    )?;
    let err = rotation_max_error(trials, seed)?;
    let passed = err < tol;
    write_jsonl(
        &mut out.file("rotation_check.jsonl")?,
        &[json!({"trials": trials, "seed": seed, "max_err": err, "tol": tol, "passed": passed})],
    )?;
    println!(
        "{trials} rotation pairs, max entry error {err:.3e} ({})",
        if passed { "pass" } else { "FAIL" }
    );
    Ok(passed)
}
