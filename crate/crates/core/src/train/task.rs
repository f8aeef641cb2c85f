use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{
    cycle_count_oracle, floyd_warshall_oracle, gen_random_graph, CountLevel, Graph,
};
use crate::model::ModelConfig;
use crate::nn::Tensor;

/// Synthetic supervised tasks with exact labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    /// All-pairs shortest-path distances divided by the graph diameter, on
    /// weighted graphs. Unreachable and diagonal pairs are masked out.
    ShortestPath,
    /// Number of simple cycles of length `len`. At edge level only existing
    /// edges are supervised.
    CycleCount { len: usize, level: CountLevel },
}

impl Task {
    pub fn parse(name: &str, cycle_len: usize, level: CountLevel) -> Option<Self> {
        match name {
            "shortest_path" => Some(Task::ShortestPath),
            "cycle_count" => Some(Task::CycleCount {
                len: cycle_len,
                level,
            }),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::ShortestPath => "shortest_path",
            Task::CycleCount { .. } => "cycle_count",
        }
    }

    pub fn level(self) -> CountLevel {
        match self {
            Task::ShortestPath => CountLevel::Edge,
            Task::CycleCount { level, .. } => level,
        }
    }

    /// Adapts a model configuration to this task's inputs and readout.
    pub fn configure(self, cfg: &mut ModelConfig) {
        cfg.readout = self.level();
        cfg.out_dim = 1;
        cfg.node_dim = 0;
        cfg.edge_dim = 0;
        cfg.graph_dim = 0;
    }

    /// Labels of `g` with the supervision mask, rows in readout order.
    pub fn label(self, g: &Graph) -> Result<(Tensor, Vec<bool>)> {
        let n = g.n;
        match self {
            Task::ShortestPath => {
                let d = floyd_warshall_oracle(g)?;
                let diam = d.diameter();
                let mut target = vec![0.0; n * n];
                let mut mask = vec![false; n * n];
                for i in 0..n {
                    for j in 0..n {
                        if i != j && d.reachable(i, j) {
                            target[i * n + j] = d.get(i, j) / diam;
                            mask[i * n + j] = true;
                        }
                    }
                }
                Ok((Tensor::new(vec![n * n, 1], target)?, mask))
            }
            Task::CycleCount { len, level } => {
                let counts = cycle_count_oracle(g, len, level)?;
                let mask = match level {
                    CountLevel::Edge => g.adjacency.clone(),
                    _ => vec![true; counts.len()],
                };
                let rows = counts.len();
                Tensor::new(
                    vec![rows, 1],
                    counts.into_iter().map(|c| c as f64).collect(),
                )
                .map(|t| (t, mask))
            }
        }
    }
}

/// Distribution of training and evaluation graphs.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphDistribution {
    pub edge_prob: (f64, f64),
    /// Integer edge weights are drawn from `1..=max_weight` for shortest
    /// paths; cycle counting uses unit weights.
    pub max_weight: i64,
}

impl Default for GraphDistribution {
    fn default() -> Self {
        Self {
            edge_prob: (0.3, 0.6),
            max_weight: 5,
        }
    }
}

/// One labelled graph.
#[derive(Clone, Debug)]
pub struct Sample {
    pub graph: Graph,
    pub target: Tensor,
    pub mask: Vec<bool>,
}

/// Draws a graph with `n` nodes that has at least one supervised entry.
pub fn sample<R: Rng + ?Sized>(
    task: Task,
    n: usize,
    dist: &GraphDistribution,
    rng: &mut R,
) -> Result<Sample> {
    let max_w = match task {
        Task::ShortestPath => dist.max_weight,
        Task::CycleCount { .. } => 1,
    };
    for _ in 0..1000 {
        let p = rng.gen_range(dist.edge_prob.0..=dist.edge_prob.1);
        let graph = gen_random_graph(n, p, (1, max_w), rng.gen())?;
        let (target, mask) = task.label(&graph)?;
        if mask.iter().any(|&m| m) {
            return Ok(Sample {
                graph,
                target,
                mask,
            });
        }
    }
    Err(Error::InvalidArgument(format!(
        "no {n}-node graph with a supervised entry found for {}",
        task.name()
    )))
}
