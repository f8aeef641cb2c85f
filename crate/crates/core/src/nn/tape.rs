//! Reverse-mode gradient tape.
//!
//! Every primitive pushes one [`Node`] holding its input handles and a
//! backward closure object. Nodes are appended in evaluation order, so the
//! tape is topologically sorted by construction and `backward` simply walks
//! it in reverse.

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Backward rule of one recorded primitive.
pub trait Backward: Send + Sync {
    fn name(&self) -> &'static str;

    /// Gradients with respect to each input, in input order. `None` means the
    /// input receives no gradient from this node.
    fn backward(
        &self,
        inputs: &[&Tensor],
        output: &Tensor,
        grad: &Tensor,
    ) -> Result<Vec<Option<Tensor>>>;
}

struct Node {
    inputs: Vec<Var>,
    output: Var,
    op: Box<dyn Backward>,
}

#[derive(Default)]
pub struct Tape {
    values: Vec<Tensor>,
    nodes: Vec<Node>,
    producer: Vec<Option<usize>>,
    params: Vec<Var>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a constant input.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.values.push(t);
        self.producer.push(None);
        Var(self.values.len() - 1)
    }

    /// Records a trainable parameter; its gradient is always kept.
    pub fn param(&mut self, t: Tensor) -> Var {
        let v = self.leaf(t);
        self.params.push(v);
        v
    }

    pub fn params(&self) -> &[Var] {
        &self.params
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.values[v.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Bytes held by recorded values.
    pub fn stored_bytes(&self) -> usize {
        self.values.iter().map(|t| t.len() * 8).sum()
    }

    /// Records the application of a primitive whose forward value has
    /// already been computed.
    pub fn push(&mut self, inputs: Vec<Var>, output: Tensor, op: Box<dyn Backward>) -> Result<Var> {
        output.check_finite(op.name())?;
        for v in &inputs {
            if v.0 >= self.values.len() {
                return Err(Error::InvalidArgument(format!("unknown var {}", v.0)));
            }
        }
        self.values.push(output);
        let out = Var(self.values.len() - 1);
        self.producer.push(Some(self.nodes.len()));
        self.nodes.push(Node {
            inputs,
            output: out,
            op,
        });
        Ok(out)
    }

    /// Back-propagates `seed` (the gradient of some scalar with respect to
    /// `root`) through every recorded node.
    pub fn backward(&self, root: Var, seed: Tensor) -> Result<Grads> {
        if self.values[root.0].shape() != seed.shape() {
            return Err(Error::Shape {
                op: "backward seed",
                expected: self.values[root.0].shape().to_vec(),
                got: seed.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.values.len()];
        grads[root.0] = Some(seed);
        let last = match self.producer[root.0] {
            Some(n) => n,
            None => return Ok(Grads { grads }),
        };
        let mut is_param = vec![false; self.values.len()];
        for p in &self.params {
            is_param[p.0] = true;
        }
        for node in self.nodes[..=last].iter().rev() {
            let g = match grads[node.output.0].take() {
                Some(g) => g,
                None => continue,
            };
            let inputs: Vec<&Tensor> = node.inputs.iter().map(|v| &self.values[v.0]).collect();
            let input_grads = node.op.backward(&inputs, &self.values[node.output.0], &g)?;
            for (v, ig) in node.inputs.iter().zip(input_grads) {
                let Some(ig) = ig else { continue };
                if ig.shape() != self.values[v.0].shape() {
                    return Err(Error::Shape {
                        op: node.op.name(),
                        expected: self.values[v.0].shape().to_vec(),
                        got: ig.shape().to_vec(),
                    });
                }
                match &mut grads[v.0] {
                    Some(acc) => acc.add_assign(&ig),
                    slot @ None => *slot = Some(ig),
                }
            }
        }
        for (i, g) in grads.iter_mut().enumerate() {
            if g.is_none() && is_param[i] {
                *g = Some(Tensor::zeros(self.values[i].shape()));
            }
        }
        Ok(Grads { grads })
    }
}

/// Gradients produced by [`Tape::backward`].
pub struct Grads {
    grads: Vec<Option<Tensor>>,
}

impl Grads {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of a parameter; parameters unreachable from the root get zeros.
    pub fn param(&self, v: Var) -> &Tensor {
        self.get(v)
            .expect("parameter gradient present after backward")
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}
