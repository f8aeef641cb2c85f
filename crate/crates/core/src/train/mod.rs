//! Losses, AdamW, the learning-rate schedule and online training on the
//! synthetic tasks.

pub mod loss;
pub mod optim;
pub mod run;
pub mod task;

pub use loss::{loss, LossKind};
pub use optim::{adamw_step, clip_grad_norm, AdamState, AdamWConfig, LrSchedule};
pub use run::{
    eval_set, evaluate, held_out_sets, parse_run_config, sample_gradients, train_task, EvalRecord,
    TrainConfig, TrainRun,
};
pub use task::{sample, GraphDistribution, Sample, Task};
