use std::fmt::Write as _;

use crate::attention::{CombineOp, Kernel, DEFAULT_TILE};
use crate::error::{Error, Result};
use crate::graph::CountLevel;
use crate::nn::NormKind;

/// Architecture hyperparameters. Serialized as a flat `key = value` file.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub layers: usize,
    pub rel_dim: usize,
    pub heads: usize,
    pub combine: CombineOp,
    pub order: usize,
    pub readout: CountLevel,
    pub init_hidden: usize,
    pub ffn_hidden: usize,
    pub supernode: bool,
    pub seed: u64,
    pub norm: NormKind,
    pub node_dim: usize,
    pub edge_dim: usize,
    pub graph_dim: usize,
    pub out_dim: usize,
    pub kernel: Kernel,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::new(2, 16, 2)
    }
}

impl ModelConfig {
    /// Order-2 model with the default widths derived from `rel_dim`.
    pub fn new(layers: usize, rel_dim: usize, heads: usize) -> Self {
        Self {
            layers,
            rel_dim,
            heads,
            combine: CombineOp::Additive,
            order: 2,
            readout: CountLevel::Graph,
            init_hidden: 2 * rel_dim,
            ffn_hidden: 2 * rel_dim,
            supernode: true,
            seed: 0,
            norm: NormKind::Layer,
            node_dim: 0,
            edge_dim: 0,
            graph_dim: 0,
            out_dim: 1,
            kernel: Kernel::default(),
        }
    }

    /// Sets `rel_dim` and the two hidden widths that default to `2 * rel_dim`.
    pub fn with_rel_dim(mut self, rel_dim: usize) -> Self {
        self.rel_dim = rel_dim;
        self.init_hidden = 2 * rel_dim;
        self.ffn_hidden = 2 * rel_dim;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rel_dim == 0 || self.heads == 0 || !self.rel_dim.is_multiple_of(self.heads) {
            return Err(Error::InvalidArgument(format!(
                "rel_dim {} must be a positive multiple of heads {}",
                self.rel_dim, self.heads
            )));
        }
        if !(1..=3).contains(&self.order) {
            return Err(Error::Unsupported(format!(
                "order {} (supported: 1, 2, 3)",
                self.order
            )));
        }
        if self.init_hidden == 0 || self.ffn_hidden == 0 || self.out_dim == 0 {
            return Err(Error::InvalidArgument(
                "hidden and output widths must be positive".into(),
            ));
        }
        if !self.supernode && self.readout != CountLevel::Edge {
            return Err(Error::InvalidArgument(format!(
                "{} readout needs the supernode",
                self.readout.as_str()
            )));
        }
        if self.readout == CountLevel::Edge && self.order == 1 {
            return Err(Error::Unsupported(
                "edge readout of an order-1 model".into(),
            ));
        }
        Ok(())
    }

    /// Width of the node segment (features plus the supernode indicator).
    pub fn node_width(&self) -> usize {
        self.node_dim + self.supernode as usize
    }

    /// Width of the pair segment: weight, features, supernode-edge channel,
    /// presence flag and diagonal flag.
    pub fn edge_width(&self) -> usize {
        1 + self.edge_dim + self.supernode as usize + 2
    }

    /// Width of the concatenated input of the initial MLP.
    pub fn init_width(&self) -> usize {
        let k = self.order;
        self.graph_dim + k * self.node_width() + k * (k - 1) / 2 * self.edge_width()
    }

    /// Number of learnable scalars, independent of the graph size.
    pub fn param_count(&self) -> usize {
        let (d, k) = (self.rel_dim, self.order);
        let lin = |i: usize, o: usize| i * o + o;
        let init = lin(self.init_width(), self.init_hidden) + lin(self.init_hidden, d);
        let sn = if self.supernode {
            self.node_width() + self.edge_dim + 1
        } else {
            0
        };
        let attn = (2 + 2 * k) * lin(d, d);
        let layer = 2 * (2 * d) + attn + lin(d, self.ffn_hidden) + lin(self.ffn_hidden, d);
        init + sn + self.layers * layer + 2 * d + lin(d, self.out_dim)
    }

    /// Number of tuples the relation tensor holds for an `n`-node input.
    pub fn tuples(&self, n: usize) -> usize {
        (n + self.supernode as usize).pow(self.order as u32)
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let tile = match self.kernel {
            Kernel::Streamed { tile } => tile,
            Kernel::Naive => DEFAULT_TILE,
        };
        let pairs: [(&str, String); 17] = [
            ("layers", self.layers.to_string()),
            ("rel_dim", self.rel_dim.to_string()),
            ("heads", self.heads.to_string()),
            ("combine", self.combine.as_str().into()),
            ("order", self.order.to_string()),
            ("readout", self.readout.as_str().into()),
            ("init_hidden", self.init_hidden.to_string()),
            ("ffn_hidden", self.ffn_hidden.to_string()),
            ("supernode", self.supernode.to_string()),
            ("seed", self.seed.to_string()),
            ("norm", self.norm.as_str().into()),
            ("node_dim", self.node_dim.to_string()),
            ("edge_dim", self.edge_dim.to_string()),
            ("graph_dim", self.graph_dim.to_string()),
            ("out_dim", self.out_dim.to_string()),
            ("kernel", self.kernel.as_str().into()),
            ("tile", tile.to_string()),
        ];
        for (k, v) in pairs {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::InvalidArgument(format!("invalid value `{value}` for `{key}`"));
        let uint = || value.parse::<usize>().map_err(|_| bad());
        match key {
            "layers" => self.layers = uint()?,
            "rel_dim" => self.rel_dim = uint()?,
            "heads" => self.heads = uint()?,
            "combine" => self.combine = CombineOp::parse(value).ok_or_else(bad)?,
            "order" => self.order = uint()?,
            "readout" => self.readout = CountLevel::parse(value).ok_or_else(bad)?,
            "init_hidden" => self.init_hidden = uint()?,
            "ffn_hidden" => self.ffn_hidden = uint()?,
            "supernode" => self.supernode = value.parse().map_err(|_| bad())?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "norm" => self.norm = NormKind::parse(value).ok_or_else(bad)?,
            "node_dim" => self.node_dim = uint()?,
            "edge_dim" => self.edge_dim = uint()?,
            "graph_dim" => self.graph_dim = uint()?,
            "out_dim" => self.out_dim = uint()?,
            "kernel" => {
                self.kernel = match value {
                    "naive" => Kernel::Naive,
                    "streamed" => match self.kernel {
                        Kernel::Streamed { tile } => Kernel::Streamed { tile },
                        Kernel::Naive => Kernel::default(),
                    },
                    _ => return Err(bad()),
                }
            }
            "tile" => {
                let t = uint()?;
                if t == 0 {
                    return Err(bad());
                }
                if let Kernel::Streamed { tile } = &mut self.kernel {
                    *tile = t;
                }
            }
            _ => return Err(Error::InvalidArgument(format!("unknown model key `{key}`"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults; `#` starts a comment.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (line, key, value) in kv_lines(text)? {
            cfg.set(key, value).map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `(line, key, value)` triples of a `key = value` file.
pub fn kv_lines(text: &str) -> Result<Vec<(usize, &str, &str)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(Error::Parse {
            line: i + 1,
            msg: "expected `key = value`".into(),
        })?;
        out.push((i + 1, k.trim(), v.trim()));
    }
    Ok(out)
}
