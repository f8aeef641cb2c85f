use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use crate::attention::KOrderAttentionParams;
use crate::error::{Error, Result};
use crate::nn::checkpoint::{read_checkpoint, write_checkpoint};
use crate::nn::{FfnParams, LinearParams, NormParams, Tape, Tensor, Var};

/// One pre-LN refinement block.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<T = Tensor> {
    pub norm1: NormParams<T>,
    pub attn: KOrderAttentionParams<T>,
    pub norm2: NormParams<T>,
    pub ffn: FfnParams<T>,
}

impl<T> LayerParams<T> {
    pub fn map<U>(&self, f: &mut dyn FnMut(&T) -> U) -> LayerParams<U> {
        LayerParams {
            norm1: self.norm1.map(f),
            attn: self.attn.map(f),
            norm2: self.norm2.map(f),
            ffn: self.ffn.map(f),
        }
    }

    pub fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a T)) {
        self.norm1.visit(&format!("{prefix}.norm1"), f);
        self.attn.visit(&format!("{prefix}.attn"), f);
        self.norm2.visit(&format!("{prefix}.norm2"), f);
        self.ffn.visit(&format!("{prefix}.ffn"), f);
    }

    pub fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut T)) {
        self.norm1.visit_mut(&format!("{prefix}.norm1"), f);
        self.attn.visit_mut(&format!("{prefix}.attn"), f);
        self.norm2.visit_mut(&format!("{prefix}.norm2"), f);
        self.ffn.visit_mut(&format!("{prefix}.ffn"), f);
    }
}

/// All learnable tensors of a model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T = Tensor> {
    pub init: FfnParams<T>,
    /// Node feature of the supernode, `[node_width]`.
    pub sn_node: Option<T>,
    /// Feature vector shared by every supernode edge, `[edge_dim + 1]`.
    pub sn_edge: Option<T>,
    pub layers: Vec<LayerParams<T>>,
    pub final_norm: NormParams<T>,
    pub head: LinearParams<T>,
}

impl ModelParams<Tensor> {
    /// Fresh parameters drawn from `cfg.seed`.
    pub fn init(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let d = cfg.rel_dim;
        let init = FfnParams::init(cfg.init_width(), cfg.init_hidden, d, &mut rng);
        let (sn_node, sn_edge) = if cfg.supernode {
            (
                Some(Tensor::uniform(&[cfg.node_width()], 1.0, &mut rng)),
                Some(Tensor::uniform(&[cfg.edge_dim + 1], 1.0, &mut rng)),
            )
        } else {
            (None, None)
        };
        let layers = (0..cfg.layers)
            .map(|_| {
                Ok(LayerParams {
                    norm1: NormParams::new(d),
                    attn: KOrderAttentionParams::init(cfg.order, d, cfg.heads, &mut rng)?,
                    norm2: NormParams::new(d),
                    ffn: FfnParams::init(d, cfg.ffn_hidden, d, &mut rng),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            init,
            sn_node,
            sn_edge,
            layers,
            final_norm: NormParams::new(d),
            head: LinearParams::init(d, cfg.out_dim, true, &mut rng),
        })
    }

    pub fn bind(&self, tape: &mut Tape) -> ModelParams<Var> {
        self.map(&mut |t| tape.param(t.clone()))
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, t| n += t.len());
        n
    }

    pub fn save<W: Write>(&self, w: W) -> Result<()> {
        let mut named = Vec::new();
        self.visit(&mut |name, t| named.push((name, t)));
        write_checkpoint(w, &named)
    }

    /// Reads a checkpoint written by [`ModelParams::save`] for the same
    /// configuration. Every tensor must be present with its expected shape.
    pub fn load<R: BufRead>(cfg: &ModelConfig, r: R) -> Result<Self> {
        let mut params = Self::init(cfg)?;
        let mut stored: HashMap<String, Tensor> = read_checkpoint(r)?.into_iter().collect();
        let mut err = None;
        params.visit_mut(&mut |name, slot| {
            if err.is_some() {
                return;
            }
            match stored.remove(&name) {
                Some(t) if t.shape() == slot.shape() => *slot = t,
                Some(t) => {
                    err = Some(Error::Checkpoint(format!(
                        "{name} has shape {:?}, expected {:?}",
                        t.shape(),
                        slot.shape()
                    )))
                }
                None => err = Some(Error::Checkpoint(format!("{name} missing"))),
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        if let Some(extra) = stored.keys().min() {
            return Err(Error::Checkpoint(format!("unexpected tensor {extra}")));
        }
        Ok(params)
    }
}

impl<T> ModelParams<T> {
    pub fn map<U>(&self, f: &mut dyn FnMut(&T) -> U) -> ModelParams<U> {
        ModelParams {
            init: self.init.map(f),
            sn_node: self.sn_node.as_ref().map(&mut *f),
            sn_edge: self.sn_edge.as_ref().map(&mut *f),
            layers: self.layers.iter().map(|l| l.map(f)).collect(),
            final_norm: self.final_norm.map(f),
            head: self.head.map(f),
        }
    }

    /// Calls `f` on every tensor with its stable checkpoint name.
    pub fn visit<'a>(&'a self, f: &mut dyn FnMut(String, &'a T)) {
        self.init.visit("init", f);
        if let Some(t) = &self.sn_node {
            f("sn.node".into(), t);
        }
        if let Some(t) = &self.sn_edge {
            f("sn.edge".into(), t);
        }
        for (l, layer) in self.layers.iter().enumerate() {
            layer.visit(&format!("layer{l}"), f);
        }
        self.final_norm.visit("final_norm", f);
        self.head.visit("head", f);
    }

    pub fn visit_mut<'a>(&'a mut self, f: &mut dyn FnMut(String, &'a mut T)) {
        self.init.visit_mut("init", f);
        if let Some(t) = &mut self.sn_node {
            f("sn.node".into(), t);
        }
        if let Some(t) = &mut self.sn_edge {
            f("sn.edge".into(), t);
        }
        for (l, layer) in self.layers.iter_mut().enumerate() {
            layer.visit_mut(&format!("layer{l}"), f);
        }
        self.final_norm.visit_mut("final_norm", f);
        self.head.visit_mut("head", f);
    }

    /// Tensors in visit order.
    pub fn flatten(&self) -> Vec<&T> {
        let mut out = Vec::new();
        self.visit(&mut |_, t| out.push(t));
        out
    }

    pub fn flatten_mut(&mut self) -> Vec<&mut T> {
        let mut out = Vec::new();
        self.visit_mut(&mut |_, t| out.push(t));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::CombineOp;
    use crate::graph::CountLevel;

    fn configs() -> Vec<ModelConfig> {
        let mut out = Vec::new();
        for order in 1..=3 {
            for supernode in [true, false] {
                let mut c = ModelConfig::new(2, 8, 2);
                c.order = order;
                c.supernode = supernode;
                c.readout = if supernode || order == 1 {
                    CountLevel::Graph
                } else {
                    CountLevel::Edge
                };
                if !supernode && order == 1 {
                    continue;
                }
                c.node_dim = 2;
                c.edge_dim = 1;
                c.graph_dim = 1;
                c.combine = CombineOp::Multiplicative;
                out.push(c);
            }
        }
        out
    }

    #[test]
    fn param_count_matches_closed_form() {
        for cfg in configs() {
            let p = ModelParams::init(&cfg).unwrap();
            assert_eq!(p.param_count(), cfg.param_count(), "{cfg:?}");
        }
    }

    #[test]
    fn init_is_seed_deterministic() {
        let cfg = ModelConfig::new(2, 8, 2);
        assert_eq!(
            ModelParams::init(&cfg).unwrap(),
            ModelParams::init(&cfg).unwrap()
        );
        let other = ModelConfig {
            seed: 1,
            ..cfg.clone()
        };
        assert_ne!(
            ModelParams::init(&cfg).unwrap(),
            ModelParams::init(&other).unwrap()
        );
    }

    #[test]
    fn checkpoint_round_trip_and_mismatch() {
        let cfg = ModelConfig::new(2, 8, 2);
        let p = ModelParams::init(&ModelConfig {
            seed: 5,
            ..cfg.clone()
        })
        .unwrap();
        let mut bytes = Vec::new();
        p.save(&mut bytes).unwrap();
        let back = ModelParams::load(&cfg, &bytes[..]).unwrap();
        for (a, b) in p.flatten().into_iter().zip(back.flatten()) {
            assert!(a
                .data()
                .iter()
                .zip(b.data())
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        let wider = ModelConfig::new(2, 12, 2);
        assert!(matches!(
            ModelParams::load(&wider, &bytes[..]),
            Err(Error::Checkpoint(_))
        ));
        let deeper = ModelConfig::new(3, 8, 2);
        assert!(ModelParams::load(&deeper, &bytes[..]).is_err());
        let shallower = ModelConfig::new(1, 8, 2);
        assert!(ModelParams::load(&shallower, &bytes[..]).is_err());
    }

    #[test]
    fn names_are_unique() {
        let p = ModelParams::init(&configs()[0]).unwrap();
        let mut names = Vec::new();
        p.visit(&mut |n, _| names.push(n));
        let total = names.len();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), total);
    }
}
