use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use floydnet::graph::{load_graph, GraphFormat};
use floydnet::wl::{
    alignment_config, golden_verdicts, model_verdicts, oracle_verdicts, pair_suite, refine,
    signature, Scheme, VerdictRecord, DEFAULT_DECIMALS, GOLDEN_SCHEMES,
};
use floydnet::{Error, Result};

use crate::output::{json_err, write_jsonl, OutDir};
use crate::settings::Settings;
use crate::{Global, Outcome};

#[derive(Args)]
pub struct ExpressivityArgs {
    /// Tuple order of the model, compared against 1-WL, 2-FWL or 3-FWL [default: 2]
    #[arg(long)]
    k: Option<usize>,
    /// Number of model initializations, consecutive from --seed [default: 5]
    #[arg(long)]
    seeds: Option<u64>,
    /// Decimal places kept when hashing final tuple vectors [default: 6]
    #[arg(long)]
    decimals: Option<u32>,
}

/// Oracle scheme whose verdicts a model of tuple order `k` should match.
fn matching_scheme(k: usize) -> Result<Scheme> {
    match k {
        1 => Ok(Scheme::Wl1),
        2 | 3 => Ok(Scheme::Fwl(k)),
        _ => Err(Error::InvalidArgument(format!(
            "--k must be 1, 2 or 3, got {k}"
        ))),
    }
}

pub fn expressivity(a: ExpressivityArgs, g: &Global, out: &OutDir) -> Outcome {
    let mut s = Settings::load(g.config.as_deref())?;
    let seed = s.pick(g.seed, "seed", 0)?;
    let k = s.pick(a.k, "k", 2)?;
    let seeds = s.pick(a.seeds, "seeds", 5)?;
    let decimals = s.pick(a.decimals, "decimals", DEFAULT_DECIMALS)?;
    s.finish()?;
    let scheme = matching_scheme(k)?;
    let cfg = alignment_config(k, seed);
    out.manifest(
        "expressivity",
        seed,
        g.threads,
        json!({"k": k, "seeds": seeds, "decimals": decimals, "model": cfg.to_kv()}),
    )?;

    let suite = pair_suite();
    let mut oracle = Vec::new();
    for sc in GOLDEN_SCHEMES {
        oracle.extend(oracle_verdicts(&suite, sc)?);
    }
    let golden_ok = oracle == golden_verdicts()?;
    let seed_list: Vec<u64> = (seed..seed + seeds).collect();
    let model = model_verdicts(&suite, &cfg, &seed_list, decimals)?;

    let reference: BTreeMap<&str, bool> = oracle
        .iter()
        .filter(|v| v.scheme == scheme.to_string())
        .map(|v| (v.pair_id.as_str(), v.distinguished))
        .collect();
    let mismatches: Vec<&VerdictRecord> = model
        .iter()
        .filter(|v| reference.get(v.pair_id.as_str()) != Some(&v.distinguished))
        .collect();
    let false_distinctions = model
        .iter()
        .chain(&oracle)
        .filter(|v| v.distinguished && suite.iter().any(|p| p.isomorphic && p.id == v.pair_id))
        .count();

    let mut all = oracle.clone();
    all.extend(model.iter().cloned());
    write_jsonl(&mut out.file("expressivity.jsonl")?, &all)?;

    println!(
        "{:<28} {:>6} {:>6} {:>6} {:>10}",
        "pair",
        "1-WL",
        "2-FWL",
        "3-FWL",
        format!("model-k{k}")
    );
    for p in &suite {
        let get = |sc: Scheme| {
            oracle
                .iter()
                .find(|v| v.pair_id == p.id && v.scheme == sc.to_string())
                .map_or("?", |v| if v.distinguished { "yes" } else { "no" })
        };
        let hits = model
            .iter()
            .filter(|v| v.pair_id == p.id && v.distinguished)
            .count();
        println!(
            "{:<28} {:>6} {:>6} {:>6} {:>10}",
            p.id,
            get(Scheme::Wl1),
            get(Scheme::Fwl(2)),
            get(Scheme::Fwl(3)),
            format!("{hits}/{seeds}")
        );
    }
    println!(
        "golden file {}; model-k{k} vs {scheme}: {} mismatches over {seeds} seeds; {false_distinctions} false distinctions",
        if golden_ok { "matches" } else { "DIFFERS" },
        mismatches.len()
    );
    for m in &mismatches {
        eprintln!(
            "mismatch: {} seed {:?} model says {}",
            m.pair_id, m.seed, m.distinguished
        );
    }
    Ok(golden_ok && mismatches.is_empty() && false_distinctions == 0)
}

#[derive(Args)]
pub struct OracleArgs {
    /// Graph file
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Second graph file; when given, prints whether the scheme distinguishes the two
    #[arg(long)]
    other: Option<PathBuf>,
    /// Graph file format: edge-list or dense [default: edge-list]
    #[arg(long)]
    format: Option<String>,
    /// Refinement scheme such as 1-WL, 2-WL, 3-WL, 2-FWL, 3-FWL [default: 2-FWL]
    #[arg(long)]
    scheme: Option<String>,
}

pub fn oracle(a: OracleArgs, g: &Global, out: &OutDir) -> Outcome {
    let mut s = Settings::load(g.config.as_deref())?;
    let seed = s.pick(g.seed, "seed", 0)?;
    let graph = s.pick_opt(a.graph, "graph")?;
    let other = s.pick_opt(a.other, "other")?;
    let format = s.pick(a.format, "format", "edge-list".to_string())?;
    let scheme_name = s.pick(a.scheme, "scheme", "2-FWL".to_string())?;
    s.finish()?;
    let graph = graph.ok_or_else(|| Error::InvalidArgument("--graph is required".into()))?;
    let fmt = GraphFormat::parse(&format)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown format `{format}`")))?;
    let scheme = Scheme::parse(&scheme_name)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown scheme `{scheme_name}`")))?;
    out.manifest(
        "oracle",
        seed,
        g.threads,
        json!({"graph": graph, "other": other, "format": format, "scheme": scheme_name}),
    )?;

    let mut records = Vec::new();
    let mut sigs = Vec::new();
    for path in std::iter::once(&graph).chain(other.as_ref()) {
        let gr = load_graph(path, fmt)?;
        let p = refine(&gr, scheme)?;
        let sig = signature(&p);
        records.push(json!({
            "graph": path,
            "scheme": scheme.to_string(),
            "n": p.n,
            "num_colors": p.num_colors,
            "rounds": p.rounds,
            "class_counts": p.class_counts,
            "signature": sig.to_string(),
        }));
        sigs.push(sig);
    }
    if sigs.len() == 2 {
        records.push(json!({"scheme": scheme.to_string(), "distinguished": sigs[0] != sigs[1]}));
    }
    write_jsonl(&mut out.file("oracle.jsonl")?, &records)?;
    for r in &records {
        println!("{}", serde_json::to_string(r).map_err(json_err)?);
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_orders_map_to_schemes() {
        assert_eq!(matching_scheme(1).unwrap(), Scheme::Wl1);
        assert_eq!(matching_scheme(3).unwrap(), Scheme::Fwl(3));
        assert!(matching_scheme(4).is_err());
    }
}
