use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::loss::{loss, LossKind};
use super::optim::{adamw_step, clip_grad_norm, AdamState, AdamWConfig, LrSchedule};
use super::task::{sample, GraphDistribution, Sample, Task};
use crate::error::{Error, Result};
use crate::graph::CountLevel;
use crate::model::{forward_on_tape, kv_lines, predict, readout_on_tape, ModelConfig, ModelParams};
use crate::nn::{Tape, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub task: Task,
    pub loss: LossKind,
    pub lr: f64,
    pub adam: AdamWConfig,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    /// Graphs per optimizer step (gradient accumulation over single graphs).
    pub accumulation: usize,
    pub seed: u64,
    pub warmup: u64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub clip: f64,
    pub train_n: (usize, usize),
    pub eval_n: usize,
    pub eval_graphs: usize,
    pub graphs: GraphDistribution,
    /// Stop once the validation MAE falls below this value.
    pub target_mae: Option<f64>,
    /// Stop after this many seconds of wall time.
    pub max_seconds: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            task: Task::ShortestPath,
            loss: LossKind::Mae,
            lr: 1e-3,
            adam: AdamWConfig::default(),
            epochs: 10,
            steps_per_epoch: 50,
            accumulation: 8,
            seed: 0,
            warmup: 100,
            plateau_factor: 0.5,
            plateau_patience: 10,
            clip: 1.0,
            train_n: (6, 10),
            eval_n: 12,
            eval_graphs: 32,
            graphs: GraphDistribution::default(),
            target_mae: None,
            max_seconds: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.lr.is_nan() || self.lr <= 0.0 {
            return bad("lr must be positive");
        }
        if !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) {
            return bad("betas must lie in [0, 1)");
        }
        if self.accumulation == 0 || self.eval_graphs == 0 {
            return bad("accumulation and eval_graphs must be positive");
        }
        if self.train_n.0 < 2 || self.train_n.0 > self.train_n.1 || self.eval_n < 2 {
            return bad("graph sizes need 2 <= train_n_min <= train_n_max and eval_n >= 2");
        }
        let (lo, hi) = self.graphs.edge_prob;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) || self.graphs.max_weight < 1 {
            return bad("edge_prob needs 0 <= min <= max <= 1 and max_weight >= 1");
        }
        Ok(())
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::InvalidArgument(format!("invalid value `{value}` for `{key}`"));
        let f = || value.parse::<f64>().map_err(|_| bad());
        let u = || value.parse::<usize>().map_err(|_| bad());
        let (cycle_len, level) = match self.task {
            Task::CycleCount { len, level } => (len, level),
            Task::ShortestPath => (3, CountLevel::Edge),
        };
        match key {
            "task" => self.task = Task::parse(value, cycle_len, level).ok_or_else(bad)?,
            "cycle_len" => {
                if let Task::CycleCount { len, .. } = &mut self.task {
                    *len = u()?;
                } else {
                    return Err(Error::InvalidArgument(
                        "cycle_len needs `task = cycle_count` first".into(),
                    ));
                }
            }
            "count_level" => {
                if let Task::CycleCount { level, .. } = &mut self.task {
                    *level = CountLevel::parse(value).ok_or_else(bad)?;
                } else {
                    return Err(Error::InvalidArgument(
                        "count_level needs `task = cycle_count` first".into(),
                    ));
                }
            }
            "loss" => self.loss = LossKind::parse(value).ok_or_else(bad)?,
            "lr" => self.lr = f()?,
            "beta1" => self.adam.beta1 = f()?,
            "beta2" => self.adam.beta2 = f()?,
            "weight_decay" => self.adam.weight_decay = f()?,
            "epochs" => self.epochs = u()?,
            "steps_per_epoch" => self.steps_per_epoch = u()?,
            "accumulation" => self.accumulation = u()?,
            "train_seed" => self.seed = value.parse().map_err(|_| bad())?,
            "warmup" => self.warmup = value.parse().map_err(|_| bad())?,
            "plateau_factor" => self.plateau_factor = f()?,
            "plateau_patience" => self.plateau_patience = u()?,
            "clip" => self.clip = f()?,
            "train_n_min" => self.train_n.0 = u()?,
            "train_n_max" => self.train_n.1 = u()?,
            "eval_n" => self.eval_n = u()?,
            "eval_graphs" => self.eval_graphs = u()?,
            "edge_prob_min" => self.graphs.edge_prob.0 = f()?,
            "edge_prob_max" => self.graphs.edge_prob.1 = f()?,
            "max_weight" => self.graphs.max_weight = value.parse().map_err(|_| bad())?,
            "target_mae" => self.target_mae = Some(f()?),
            "max_seconds" => self.max_seconds = Some(f()?),
            _ => return Err(Error::InvalidArgument(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "task = {}", self.task.name());
        if let Task::CycleCount { len, level } = self.task {
            let _ = writeln!(s, "cycle_len = {len}\ncount_level = {}", level.as_str());
        }
        let _ = writeln!(s, "loss = {}", self.loss.as_str());
        let _ = writeln!(s, "lr = {:?}", self.lr);
        let _ = writeln!(
            s,
            "beta1 = {:?}\nbeta2 = {:?}",
            self.adam.beta1, self.adam.beta2
        );
        let _ = writeln!(s, "weight_decay = {:?}", self.adam.weight_decay);
        let _ = writeln!(
            s,
            "epochs = {}\nsteps_per_epoch = {}",
            self.epochs, self.steps_per_epoch
        );
        let _ = writeln!(
            s,
            "accumulation = {}\ntrain_seed = {}",
            self.accumulation, self.seed
        );
        let _ = writeln!(s, "warmup = {}", self.warmup);
        let _ = writeln!(
            s,
            "plateau_factor = {:?}\nplateau_patience = {}",
            self.plateau_factor, self.plateau_patience
        );
        let _ = writeln!(s, "clip = {:?}", self.clip);
        let _ = writeln!(
            s,
            "train_n_min = {}\ntrain_n_max = {}",
            self.train_n.0, self.train_n.1
        );
        let _ = writeln!(
            s,
            "eval_n = {}\neval_graphs = {}",
            self.eval_n, self.eval_graphs
        );
        let (lo, hi) = self.graphs.edge_prob;
        let _ = writeln!(s, "edge_prob_min = {lo:?}\nedge_prob_max = {hi:?}");
        let _ = writeln!(s, "max_weight = {}", self.graphs.max_weight);
        if let Some(t) = self.target_mae {
            let _ = writeln!(s, "target_mae = {t:?}");
        }
        if let Some(t) = self.max_seconds {
            let _ = writeln!(s, "max_seconds = {t:?}");
        }
        s
    }
}

/// Parses one `key = value` file holding both model and training keys.
/// Keys are tried against the model first.
pub fn parse_run_config(text: &str) -> Result<(ModelConfig, TrainConfig)> {
    let mut model = ModelConfig::default();
    let mut train = TrainConfig::default();
    for (line, key, value) in kv_lines(text)? {
        let res = match model.set(key, value) {
            Err(Error::InvalidArgument(m)) if m.starts_with("unknown model key") => {
                train.set(key, value)
            }
            other => other,
        };
        res.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
    }
    model.validate()?;
    train.validate()?;
    Ok((model, train))
}

/// One evaluation, also the run-log line.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalRecord {
    pub epoch: usize,
    pub step: u64,
    /// Mean training loss since the previous evaluation; `None` before the
    /// first step.
    pub train_loss: Option<f64>,
    /// MAE on the validation set.
    pub eval_mae: f64,
    pub lr: f64,
    pub wall_s: f64,
}

#[derive(Clone, Debug)]
pub struct TrainRun {
    pub model: ModelConfig,
    pub records: Vec<EvalRecord>,
    /// MAE of the final parameters on the held-out test set.
    pub test_mae: f64,
    pub wall_s: f64,
    pub steps: u64,
    pub reached_target: bool,
    pub params: ModelParams,
}

/// Fixed evaluation graphs of size `n`, reproducible from `seed`.
pub fn eval_set(
    task: Task,
    n: usize,
    count: usize,
    dist: &GraphDistribution,
    seed: u64,
) -> Result<Vec<Sample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| sample(task, n, dist, &mut rng))
        .collect()
}

/// Mean absolute error pooled over every supervised entry of `set`.
pub fn evaluate(cfg: &ModelConfig, params: &ModelParams, set: &[Sample]) -> Result<f64> {
    let (mut err, mut count) = (0.0, 0usize);
    for s in set {
        let pred = predict(&s.graph, cfg, params)?;
        for ((p, t), &m) in pred.data().iter().zip(s.target.data()).zip(&s.mask) {
            if m {
                err += (p - t).abs();
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::InvalidArgument(
            "evaluation set has no supervised entries".into(),
        ));
    }
    Ok(err / count as f64)
}

/// Loss and parameter gradients (visit order) for one sample.
pub fn sample_gradients(
    cfg: &ModelConfig,
    params: &ModelParams,
    s: &Sample,
    kind: LossKind,
) -> Result<(f64, Vec<Tensor>)> {
    let mut tape = Tape::new();
    let pv = params.bind(&mut tape);
    let r = forward_on_tape(&mut tape, &s.graph, cfg, params, &pv)?;
    let out = readout_on_tape(&mut tape, r, s.graph.n, cfg, &pv)?;
    let (l, seed) = loss(tape.value(out), &s.target, kind, &s.mask)?;
    let mut grads = tape.backward(out, seed)?;
    let g = pv
        .flatten()
        .into_iter()
        .map(|&v| {
            grads
                .take(v)
                .expect("parameter gradient present after backward")
        })
        .collect();
    Ok((l, g))
}

const VALID_SEED_SALT: u64 = 0x5eed_0001;
const TEST_SEED_SALT: u64 = 0x5eed_0002;

/// Validation and test sets of a run with configuration `cfg`.
pub fn held_out_sets(cfg: &TrainConfig) -> Result<(Vec<Sample>, Vec<Sample>)> {
    let valid = eval_set(
        cfg.task,
        cfg.eval_n,
        cfg.eval_graphs,
        &cfg.graphs,
        cfg.seed ^ VALID_SEED_SALT,
    )?;
    let test = eval_set(
        cfg.task,
        cfg.eval_n,
        cfg.eval_graphs,
        &cfg.graphs,
        cfg.seed ^ TEST_SEED_SALT,
    )?;
    Ok((valid, test))
}

/// Online training: every sample is a freshly generated graph. Validation
/// and test sets are disjoint fixed draws at `eval_n` nodes; the plateau
/// schedule and early stopping look only at validation.
pub fn train_task(
    model: &ModelConfig,
    cfg: &TrainConfig,
    mut log: Option<&mut dyn Write>,
) -> Result<TrainRun> {
    cfg.validate()?;
    let mut mcfg = model.clone();
    cfg.task.configure(&mut mcfg);
    mcfg.validate()?;
    let start = Instant::now();
    let mut params = ModelParams::init(&mcfg)?;
    let (valid, test) = held_out_sets(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(params.flatten());
    let mut sched = LrSchedule::new(cfg.lr, cfg.warmup, cfg.plateau_factor, cfg.plateau_patience);
    let mut records = Vec::new();
    let mut step = 0u64;

    let emit = |rec: EvalRecord, log: &mut Option<&mut dyn Write>| -> Result<EvalRecord> {
        if let Some(w) = log.as_deref_mut() {
            let line =
                serde_json::to_string(&rec).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            writeln!(w, "{line}")?;
            w.flush()?;
        }
        Ok(rec)
    };

    let mae0 = evaluate(&mcfg, &params, &valid)?;
    records.push(emit(
        EvalRecord {
            epoch: 0,
            step: 0,
            train_loss: None,
            eval_mae: mae0,
            lr: sched.lr(0),
            wall_s: start.elapsed().as_secs_f64(),
        },
        &mut log,
    )?);
    let mut reached = cfg.target_mae.is_some_and(|t| mae0 < t);
    let out_of_time = |start: &Instant| {
        cfg.max_seconds
            .is_some_and(|m| start.elapsed().as_secs_f64() >= m)
    };

    'epochs: for epoch in 1..=cfg.epochs {
        if reached || out_of_time(&start) {
            break;
        }
        let (mut loss_sum, mut loss_n) = (0.0, 0usize);
        for _ in 0..cfg.steps_per_epoch {
            let mut acc: Option<Vec<Tensor>> = None;
            for _ in 0..cfg.accumulation {
                let n = rng.gen_range(cfg.train_n.0..=cfg.train_n.1);
                let s = sample(cfg.task, n, &cfg.graphs, &mut rng)?;
                let (l, g) = sample_gradients(&mcfg, &params, &s, cfg.loss)?;
                if !l.is_finite() {
                    return Err(Error::Diverged {
                        step: step as usize,
                        msg: format!("training loss {l}"),
                    });
                }
                loss_sum += l;
                loss_n += 1;
                match &mut acc {
                    Some(a) => a.iter_mut().zip(&g).for_each(|(a, g)| a.add_assign(g)),
                    None => acc = Some(g),
                }
            }
            let mut grads = acc.expect("accumulation is positive");
            for g in &mut grads {
                g.scale(1.0 / cfg.accumulation as f64);
            }
            clip_grad_norm(&mut grads, cfg.clip);
            let lr = sched.lr(step);
            adamw_step(&mut params.flatten_mut(), &grads, &mut adam, lr, &cfg.adam).map_err(
                |e| Error::Diverged {
                    step: step as usize,
                    msg: e.to_string(),
                },
            )?;
            step += 1;
            if out_of_time(&start) {
                let rec = evaluation(
                    epoch, step, loss_sum, loss_n, &mcfg, &params, &valid, &sched, &start,
                )?;
                reached = cfg.target_mae.is_some_and(|t| rec.eval_mae < t);
                records.push(emit(rec, &mut log)?);
                break 'epochs;
            }
        }
        let rec = evaluation(
            epoch, step, loss_sum, loss_n, &mcfg, &params, &valid, &sched, &start,
        )?;
        sched.observe(rec.eval_mae);
        reached = cfg.target_mae.is_some_and(|t| rec.eval_mae < t);
        records.push(emit(rec, &mut log)?);
    }
    let test_mae = evaluate(&mcfg, &params, &test)?;
    Ok(TrainRun {
        model: mcfg,
        records,
        test_mae,
        wall_s: start.elapsed().as_secs_f64(),
        steps: step,
        reached_target: reached,
        params,
    })
}

#[allow(clippy::too_many_arguments)]
fn evaluation(
    epoch: usize,
    step: u64,
    loss_sum: f64,
    loss_n: usize,
    cfg: &ModelConfig,
    params: &ModelParams,
    valid: &[Sample],
    sched: &LrSchedule,
    start: &Instant,
) -> Result<EvalRecord> {
    let eval_mae = evaluate(cfg, params, valid)?;
    if !eval_mae.is_finite() {
        return Err(Error::Diverged {
            step: step as usize,
            msg: format!("validation MAE {eval_mae}"),
        });
    }
    Ok(EvalRecord {
        epoch,
        step,
        train_loss: (loss_n > 0).then(|| loss_sum / loss_n as f64),
        eval_mae,
        lr: sched.lr(step),
        wall_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> (ModelConfig, TrainConfig) {
        let model = ModelConfig::new(1, 8, 2);
        let train = TrainConfig {
            epochs: 2,
            steps_per_epoch: 3,
            accumulation: 2,
            eval_graphs: 2,
            eval_n: 6,
            train_n: (4, 5),
            warmup: 2,
            ..TrainConfig::default()
        };
        (model, train)
    }

    #[test]
    fn zero_epochs_only_evaluates() {
        let (m, mut t) = tiny();
        t.epochs = 0;
        let run = train_task(&m, &t, None).unwrap();
        assert_eq!(run.records.len(), 1);
        assert_eq!(run.steps, 0);
        assert_eq!(run.params, ModelParams::init(&run.model).unwrap());
    }

    #[test]
    fn runs_are_bitwise_reproducible() {
        let (m, t) = tiny();
        let a = train_task(&m, &t, None).unwrap();
        let b = train_task(&m, &t, None).unwrap();
        assert_eq!(a.steps, 6);
        for (x, y) in a.params.flatten().into_iter().zip(b.params.flatten()) {
            assert!(x
                .data()
                .iter()
                .zip(y.data())
                .all(|(p, q)| p.to_bits() == q.to_bits()));
        }
        let losses = |r: &TrainRun| {
            r.records
                .iter()
                .map(|e| e.eval_mae.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(losses(&a), losses(&b));
    }

    #[test]
    fn log_lines_are_json() {
        let (m, t) = tiny();
        let mut buf = Vec::new();
        let run = train_task(&m, &t, Some(&mut buf)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), run.records.len());
        let v: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
        for key in ["epoch", "step", "train_loss", "eval_mae", "lr", "wall_s"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(
            serde_json::from_str::<serde_json::Value>(lines[0]).unwrap()["train_loss"].is_null()
        );
    }

    #[test]
    fn masked_entries_get_no_gradient() {
        // a disconnected graph: unreachable pairs carry a zero target that must not leak into the update
        let m = ModelConfig::new(1, 8, 2);
        let mut mcfg = m.clone();
        Task::ShortestPath.configure(&mut mcfg);
        let params = ModelParams::init(&mcfg).unwrap();
        let g = crate::graph::families::disjoint_union(&[
            crate::graph::families::path(3),
            crate::graph::families::path(2),
        ]);
        let (target, mask) = Task::ShortestPath.label(&g).unwrap();
        let s = Sample {
            graph: g.clone(),
            target: target.clone(),
            mask: mask.clone(),
        };
        let (_, grads) = sample_gradients(&mcfg, &params, &s, LossKind::Mse).unwrap();
        let mut poisoned = target.clone();
        for (i, &keep) in mask.iter().enumerate() {
            if !keep {
                poisoned.data_mut()[i] = 1e6;
            }
        }
        let s2 = Sample {
            graph: g,
            target: poisoned,
            mask,
        };
        let (_, grads2) = sample_gradients(&mcfg, &params, &s2, LossKind::Mse).unwrap();
        for (a, b) in grads.iter().zip(&grads2) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn config_round_trip_and_unknown_keys() {
        let (m, mut t) = tiny();
        t.task = Task::CycleCount {
            len: 4,
            level: CountLevel::Node,
        };
        t.target_mae = Some(0.05);
        let text = format!("{}{}", m.to_kv(), t.to_kv());
        let (m2, t2) = parse_run_config(&text).unwrap();
        assert_eq!(m2, m);
        assert_eq!(t2, t);
        assert!(matches!(
            parse_run_config("nonsense = 1"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(parse_run_config("lr = -1").is_err());
        assert!(parse_run_config("cycle_len = 3").is_err());
    }
}
