use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use floydnet::graph::{load_graph, CountLevel, GraphFormat};
use floydnet::model::{predict, ModelConfig, ModelParams};
use floydnet::train::{evaluate, held_out_sets, parse_run_config, train_task, TrainConfig};
use floydnet::{Error, Result};

use crate::output::{write_csv, write_jsonl, OutDir};
use crate::settings::Settings;
use crate::{Global, Outcome};

pub const RUN_CONFIG: &str = "run.cfg";
pub const CHECKPOINT: &str = "model.ckpt";

#[derive(Args)]
pub struct TrainArgs {
    /// Task: shortest_path or cycle_count (overrides the config file)
    #[arg(long)]
    task: Option<String>,
    /// Epochs (overrides the config file)
    #[arg(long)]
    epochs: Option<usize>,
    /// Stop once validation MAE drops below this; the run fails unless the
    /// test MAE ends below it too
    #[arg(long)]
    target_mae: Option<f64>,
    /// Wall-clock budget in seconds
    #[arg(long)]
    max_seconds: Option<f64>,
}

fn load_run_config(path: Option<&std::path::Path>) -> Result<(ModelConfig, TrainConfig)> {
    match path {
        Some(p) => parse_run_config(&std::fs::read_to_string(p)?),
        None => Ok((ModelConfig::default(), TrainConfig::default())),
    }
}

pub fn train(a: TrainArgs, g: &Global, out: &OutDir) -> Outcome {
    let (mut model, mut cfg) = load_run_config(g.config.as_deref())?;
    if let Some(t) = &a.task {
        cfg.set("task", t)?;
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(t) = a.target_mae {
        cfg.target_mae = Some(t);
    }
    if let Some(t) = a.max_seconds {
        cfg.max_seconds = Some(t);
    }
    if let Some(s) = g.seed {
        model.seed = s;
        cfg.seed = s;
    }
    cfg.validate()?;
    out.manifest(
        "train",
        cfg.seed,
        g.threads,
        json!({"model": model.to_kv(), "train": cfg.to_kv()}),
    )?;

    let mut log = out.file("train_log.jsonl")?;
    let run = train_task(&model, &cfg, Some(&mut log))?;
    log.flush()?;
    let mut ckpt = out.file(CHECKPOINT)?;
    run.params.save(&mut ckpt)?;
    ckpt.flush()?;
    let mut rc = out.file(RUN_CONFIG)?;
    write!(rc, "{}{}", run.model.to_kv(), cfg.to_kv())?;
    rc.flush()?;

    let passed = cfg.target_mae.is_none_or(|t| run.test_mae < t);
    let summary = json!({
        "task": cfg.task.name(),
        "steps": run.steps,
        "final_eval_mae": run.records.last().map(|r| r.eval_mae),
        "test_mae": run.test_mae,
        "reached_target": run.reached_target,
        "target_mae": cfg.target_mae,
        "wall_s": run.wall_s,
        "passed": passed,
    });
    write_jsonl(&mut out.file("train_summary.jsonl")?, &[&summary])?;
    println!(
        "{}: {} steps in {:.1}s, test MAE {:.4}{}",
        cfg.task.name(),
        run.steps,
        run.wall_s,
        run.test_mae,
        cfg.target_mae.map_or(String::new(), |t| format!(
            " (target {t}: {})",
            if passed { "pass" } else { "FAIL" }
        ))
    );
    Ok(passed)
}

#[derive(Args)]
pub struct EvalArgs {
    /// Directory of a finished `train` run [default: the --out directory]
    #[arg(long)]
    run: Option<PathBuf>,
    /// Graph file to predict on; without it the run's test set is scored
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Graph file format: edge-list or dense [default: edge-list]
    #[arg(long)]
    format: Option<String>,
    /// Node count of the scored test graphs [default: the run's eval_n]
    #[arg(long)]
    eval_n: Option<usize>,
    /// Number of scored test graphs [default: the run's eval_graphs]
    #[arg(long)]
    eval_graphs: Option<usize>,
}

fn row_labels(n: usize, level: CountLevel) -> Vec<String> {
    match level {
        CountLevel::Graph => vec!["graph".to_string()],
        CountLevel::Node => (0..n).map(|i| i.to_string()).collect(),
        CountLevel::Edge => (0..n * n).map(|r| format!("{}-{}", r / n, r % n)).collect(),
    }
}

pub fn eval(a: EvalArgs, g: &Global, out: &OutDir) -> Outcome {
    let mut s = Settings::load(g.config.as_deref())?;
    let run_dir = s.pick(a.run, "run", g.out.clone())?;
    let graph = s.pick_opt(a.graph, "graph")?;
    let format = s.pick(a.format, "format", "edge-list".to_string())?;
    let eval_n = s.pick_opt(a.eval_n, "eval_n")?;
    let eval_graphs = s.pick_opt(a.eval_graphs, "eval_graphs")?;
    s.finish()?;

    let (model, mut cfg) = parse_run_config(&std::fs::read_to_string(run_dir.join(RUN_CONFIG))?)?;
    let params = ModelParams::load(
        &model,
        BufReader::new(File::open(run_dir.join(CHECKPOINT))?),
    )?;
    if let Some(n) = eval_n {
        cfg.eval_n = n;
    }
    if let Some(c) = eval_graphs {
        cfg.eval_graphs = c;
    }
    cfg.validate()?;
    out.manifest(
        "eval",
        g.seed.unwrap_or(cfg.seed),
        g.threads,
        json!({"run": run_dir, "graph": graph, "format": format, "eval_n": cfg.eval_n, "eval_graphs": cfg.eval_graphs}),
    )?;

    if let Some(path) = graph {
        let fmt = GraphFormat::parse(&format)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown format `{format}`")))?;
        let gr = load_graph(&path, fmt)?;
        let pred = predict(&gr, &model, &params)?;
        let labels = row_labels(gr.n, model.readout);
        write_csv(
            &mut out.file("predictions.csv")?,
            "tuple,prediction",
            labels
                .iter()
                .zip(pred.data())
                .map(|(l, p)| format!("{l},{p:.9}")),
        )?;
        println!(
            "{} predictions written to {}",
            labels.len(),
            out.path("predictions.csv").display()
        );
        return Ok(true);
    }
    let (_, test) = held_out_sets(&cfg)?;
    let mae = evaluate(&model, &params, &test)?;
    let rec = json!({"task": cfg.task.name(), "eval_n": cfg.eval_n, "eval_graphs": cfg.eval_graphs, "test_mae": mae});
    write_jsonl(&mut out.file("eval.jsonl")?, &[&rec])?;
    println!(
        "{}: test MAE {mae:.4} over {} graphs of {} nodes",
        cfg.task.name(),
        cfg.eval_graphs,
        cfg.eval_n
    );
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_follow_readout_order() {
        assert_eq!(
            row_labels(2, CountLevel::Edge),
            ["0-0", "0-1", "1-0", "1-1"]
        );
        assert_eq!(row_labels(3, CountLevel::Node), ["0", "1", "2"]);
        assert_eq!(row_labels(3, CountLevel::Graph), ["graph"]);
    }
}
