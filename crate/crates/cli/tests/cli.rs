use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SUBCOMMANDS: [(&str, &[&str]); 8] = [
    ("gradcheck", &["--tol", "--model-tol", "--seeds", "--ops"]),
    ("kernel-equiv", &["--trials", "--max-n"]),
    (
        "kernel-bench",
        &[
            "--n",
            "--dr",
            "--heads",
            "--kernels",
            "--tile",
            "--naive-max-n",
        ],
    ),
    ("expressivity", &["--k", "--seeds", "--decimals"]),
    ("rotation-check", &["--trials", "--tol"]),
    (
        "train",
        &["--task", "--epochs", "--target-mae", "--max-seconds"],
    ),
    (
        "eval",
        &["--run", "--graph", "--format", "--eval-n", "--eval-graphs"],
    ),
    ("oracle", &["--graph", "--other", "--format", "--scheme"]),
];

const GLOBAL_FLAGS: [&str; 4] = ["--seed", "--out", "--threads", "--config"];

fn floydnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_floydnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn help_lists_every_subcommand_and_flag() {
    let top = floydnet(&["--help"]);
    assert!(top.status.success());
    let text = String::from_utf8(top.stdout).unwrap();
    for (name, _) in SUBCOMMANDS {
        assert!(text.contains(name), "top-level help lacks {name}");
    }
    for (name, flags) in SUBCOMMANDS {
        let out = floydnet(&[name, "--help"]);
        assert!(out.status.success(), "{name} --help");
        let text = String::from_utf8(out.stdout).unwrap();
        for f in flags.iter().chain(&GLOBAL_FLAGS) {
            assert!(text.contains(f), "{name} --help lacks {f}");
        }
    }
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(floydnet(&[]).status.code(), Some(2));
    assert_eq!(floydnet(&["gradcheck", "--bogus"]).status.code(), Some(2));
    assert_eq!(floydnet(&["frobnicate"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    let missing = floydnet(&["oracle", "--out", &out]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("--graph"));
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "trials = 3\nunknown_key = 1\n").unwrap();
    let bad = floydnet(&[
        "rotation-check",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        &out,
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn gradcheck_reports_every_op_and_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let run = floydnet(&[
            "gradcheck",
            "--seed",
            "1",
            "--tol",
            "1e-6",
            "--seeds",
            "2",
            "--out",
            &out_arg(d.path()),
        ]);
        assert_eq!(run.status.code(), Some(0));
        let text = String::from_utf8(run.stdout).unwrap();
        for op in [
            "linear",
            "softmax",
            "pivot_streamed_multiplicative",
            "korder3",
            "slot_fill",
            "model",
        ] {
            assert!(
                text.lines()
                    .any(|l| l.starts_with(op) && l.ends_with("pass")),
                "{op}"
            );
        }
    }
    let read = |d: &tempfile::TempDir, f: &str| fs::read(d.path().join(f)).unwrap();
    assert_eq!(read(&a, "gradcheck.csv"), read(&b, "gradcheck.csv"));
    assert_eq!(
        read(&a, "gradcheck.manifest.json"),
        read(&b, "gradcheck.manifest.json")
    );
    let csv = String::from_utf8(read(&a, "gradcheck.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 18 * 2);
}

#[test]
fn impossible_tolerance_fails_with_one() {
    let d = tempfile::tempdir().unwrap();
    let run = floydnet(&[
        "gradcheck",
        "--tol",
        "1e-30",
        "--seeds",
        "1",
        "--ops",
        "layer_norm",
        "--out",
        &out_arg(d.path()),
    ]);
    assert_eq!(run.status.code(), Some(1));
}

#[test]
fn expressivity_matches_golden_verdicts() {
    let d = tempfile::tempdir().unwrap();
    let run = floydnet(&[
        "expressivity",
        "--k",
        "2",
        "--seeds",
        "5",
        "--out",
        &out_arg(d.path()),
    ]);
    assert_eq!(
        run.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&run.stdout)
    );
    let text = fs::read_to_string(d.path().join("expressivity.jsonl")).unwrap();
    let rows: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let golden: Vec<&str> = floydnet::wl::GOLDEN
        .lines()
        .filter(|l| !l.trim().is_empty())
        .collect();
    assert_eq!(
        rows.len(),
        golden.len() + 5 * floydnet::wl::pair_suite().len()
    );
    for (row, line) in rows.iter().zip(&golden) {
        assert_eq!(
            row,
            &serde_json::from_str::<serde_json::Value>(line).unwrap()
        );
    }
    let shrikhande: Vec<_> = rows
        .iter()
        .filter(|r| r["pair_id"] == "shrikhande_vs_rook4x4" && r["scheme"] == "model-k2")
        .collect();
    assert_eq!(shrikhande.len(), 5);
    assert!(shrikhande.iter().all(|r| r["distinguished"] == false));
}

#[test]
fn kernel_bench_columns_grow_with_n() {
    let d = tempfile::tempdir().unwrap();
    let run = floydnet(&[
        "kernel-bench",
        "--n",
        "8,16,32",
        "--dr",
        "8",
        "--heads",
        "2",
        "--out",
        &out_arg(d.path()),
    ]);
    assert_eq!(run.status.code(), Some(0));
    let text = fs::read_to_string(d.path().join("kernel_bench.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), floydnet::bench::CSV_HEADER);
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    assert_eq!(rows.len(), 6);
    for kernel in ["naive", "streamed"] {
        let mine: Vec<&Vec<String>> = rows.iter().filter(|r| r[0] == kernel).collect();
        for w in mine.windows(2) {
            let peak = |r: &Vec<String>| r[5].parse::<usize>().unwrap();
            let wall = |r: &Vec<String>| r[4].parse::<f64>().unwrap();
            assert!(peak(w[1]) > peak(w[0]), "{kernel} peak");
            assert!(wall(w[1]) > wall(w[0]), "{kernel} wall");
        }
    }
}

#[test]
fn oracle_separates_a_four_cycle_from_a_paw() {
    let d = tempfile::tempdir().unwrap();
    let c4 = d.path().join("c4.txt");
    let paw = d.path().join("paw.txt");
    fs::write(&c4, "4\n0 1 1\n1 2 1\n2 3 1\n3 0 1\n").unwrap();
    fs::write(&paw, "4\n0 1 1\n1 2 1\n2 0 1\n0 3 1\n").unwrap();
    let run = floydnet(&[
        "oracle",
        "--graph",
        c4.to_str().unwrap(),
        "--other",
        paw.to_str().unwrap(),
        "--scheme",
        "1-WL",
        "--out",
        &out_arg(d.path()),
    ]);
    assert_eq!(run.status.code(), Some(0));
    let text = fs::read_to_string(d.path().join("oracle.jsonl")).unwrap();
    let last: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(last["distinguished"], true);
}

#[test]
fn train_then_eval_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.cfg.in");
    fs::write(
        &cfg,
        "layers = 1\nrel_dim = 8\nheads = 2\ntask = shortest_path\nepochs = 2\nsteps_per_epoch = 2\naccumulation = 2\neval_graphs = 2\neval_n = 6\n",
    )
    .unwrap();
    let run_dir = d.path().join("run");
    let train = floydnet(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "4",
        "--threads",
        "1",
        "--out",
        run_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        train.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&train.stderr)
    );
    let log = fs::read_to_string(run_dir.join("train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 3);
    for line in log.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["epoch", "step", "train_loss", "eval_mae", "lr", "wall_s"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run_dir.join("train_summary.jsonl")).unwrap())
            .unwrap();

    let eval_dir = d.path().join("eval");
    let eval = floydnet(&[
        "eval",
        "--run",
        run_dir.to_str().unwrap(),
        "--out",
        eval_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        eval.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&eval.stderr)
    );
    let rec: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(eval_dir.join("eval.jsonl")).unwrap()).unwrap();
    assert_eq!(rec["test_mae"], summary["test_mae"]);
}

#[test]
fn shipped_run_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["shortest_path.cfg", "triangles.cfg"] {
        let text = fs::read_to_string(root.join(name)).unwrap();
        let (model, cfg) = floydnet::train::parse_run_config(&text).unwrap();
        cfg.validate().unwrap();
        assert_eq!((model.layers, model.rel_dim), (8, 64), "{name}");
        assert_eq!(cfg.target_mae, Some(0.05), "{name}");
    }
}
