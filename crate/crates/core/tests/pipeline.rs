use floydnet::graph::{gen_random_graph, CountLevel};
use floydnet::model::{predict, ModelConfig, ModelParams};
use floydnet::train::{evaluate, held_out_sets, parse_run_config, train_task, Task, TrainConfig};
use floydnet::wl::{golden_verdicts, oracle_verdicts, pair_suite, GOLDEN_SCHEMES};

fn short_run(task: Task) -> (ModelConfig, TrainConfig) {
    let model = ModelConfig::new(2, 16, 2);
    let cfg = TrainConfig {
        task,
        lr: 2e-3,
        epochs: 4,
        steps_per_epoch: 10,
        accumulation: 2,
        warmup: 5,
        eval_graphs: 4,
        eval_n: 8,
        seed: 3,
        ..TrainConfig::default()
    };
    (model, cfg)
}

#[test]
fn training_lowers_validation_error_and_is_reproducible() {
    let (model, cfg) = short_run(Task::ShortestPath);
    let a = train_task(&model, &cfg, None).unwrap();
    let b = train_task(&model, &cfg, None).unwrap();
    let first = a.records.first().unwrap().eval_mae;
    let best = a
        .records
        .iter()
        .map(|r| r.eval_mae)
        .fold(f64::INFINITY, f64::min);
    assert!(
        best < first,
        "validation MAE never improved: {first} -> {best}"
    );
    assert_eq!(a.test_mae.to_bits(), b.test_mae.to_bits());
    assert_eq!(a.params, b.params);
}

#[test]
fn checkpoint_and_run_config_restore_the_model() {
    let (model, cfg) = short_run(Task::CycleCount {
        len: 3,
        level: CountLevel::Edge,
    });
    let run = train_task(&model, &cfg, None).unwrap();
    let mut bytes = Vec::new();
    run.params.save(&mut bytes).unwrap();
    let text = format!("{}{}", run.model.to_kv(), cfg.to_kv());
    let (model2, cfg2) = parse_run_config(&text).unwrap();
    assert_eq!(model2, run.model);
    let params2 = ModelParams::load(&model2, bytes.as_slice()).unwrap();

    let g = gen_random_graph(7, 0.5, (1, 1), 11).unwrap();
    let p1 = predict(&g, &run.model, &run.params).unwrap();
    let p2 = predict(&g, &model2, &params2).unwrap();
    assert_eq!(p1.data(), p2.data());
    let (_, test) = held_out_sets(&cfg2).unwrap();
    assert_eq!(
        evaluate(&model2, &params2, &test).unwrap().to_bits(),
        run.test_mae.to_bits()
    );
}

#[test]
fn oracle_reproduces_the_frozen_verdicts() {
    let suite = pair_suite();
    let mut fresh = Vec::new();
    for scheme in GOLDEN_SCHEMES {
        fresh.extend(oracle_verdicts(&suite, scheme).unwrap());
    }
    assert_eq!(fresh, golden_verdicts().unwrap());
}
