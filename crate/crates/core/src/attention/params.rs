use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::params::LinearParams;
use crate::nn::tape::{Tape, Var};
use crate::nn::tensor::Tensor;

/// Projections of pair-order pivotal attention.
///
/// For a target pair `(i, k)` and pivot `j`, the left segment is `R_ij` and
/// the right segment is `R_jk`. Left and right use separate projections so
/// the combined key is sensitive to segment order.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams<T = Tensor> {
    pub q_proj: LinearParams<T>,
    pub k_proj_left: LinearParams<T>,
    pub k_proj_right: LinearParams<T>,
    pub v_proj_left: LinearParams<T>,
    pub v_proj_right: LinearParams<T>,
    pub out_proj: LinearParams<T>,
    pub heads: usize,
}

impl AttentionParams<Tensor> {
    pub fn init<R: Rng + ?Sized>(d: usize, heads: usize, rng: &mut R) -> Result<Self> {
        check_heads(d, heads)?;
        Ok(Self {
            q_proj: LinearParams::init(d, d, true, rng),
            k_proj_left: LinearParams::init(d, d, true, rng),
            k_proj_right: LinearParams::init(d, d, true, rng),
            v_proj_left: LinearParams::init(d, d, true, rng),
            v_proj_right: LinearParams::init(d, d, true, rng),
            out_proj: LinearParams::init(d, d, true, rng),
            heads,
        })
    }

    pub fn dim(&self) -> usize {
        self.q_proj.d_out()
    }

    pub fn bind(&self, tape: &mut Tape) -> AttentionParams<Var> {
        self.map(&mut |t| tape.param(t.clone()))
    }
}

impl<T> AttentionParams<T> {
    pub fn map<U>(&self, f: &mut dyn FnMut(&T) -> U) -> AttentionParams<U> {
        AttentionParams {
            q_proj: self.q_proj.map(f),
            k_proj_left: self.k_proj_left.map(f),
            k_proj_right: self.k_proj_right.map(f),
            v_proj_left: self.v_proj_left.map(f),
            v_proj_right: self.v_proj_right.map(f),
            out_proj: self.out_proj.map(f),
            heads: self.heads,
        }
    }

    pub fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a T)) {
        self.q_proj.visit(&format!("{prefix}.q"), f);
        self.k_proj_left.visit(&format!("{prefix}.k_left"), f);
        self.k_proj_right.visit(&format!("{prefix}.k_right"), f);
        self.v_proj_left.visit(&format!("{prefix}.v_left"), f);
        self.v_proj_right.visit(&format!("{prefix}.v_right"), f);
        self.out_proj.visit(&format!("{prefix}.out"), f);
    }

    pub fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut T)) {
        self.q_proj.visit_mut(&format!("{prefix}.q"), f);
        self.k_proj_left.visit_mut(&format!("{prefix}.k_left"), f);
        self.k_proj_right.visit_mut(&format!("{prefix}.k_right"), f);
        self.v_proj_left.visit_mut(&format!("{prefix}.v_left"), f);
        self.v_proj_right.visit_mut(&format!("{prefix}.v_right"), f);
        self.out_proj.visit_mut(&format!("{prefix}.out"), f);
    }
}

/// Projections of order-`k` pivotal attention.
///
/// `key_projs[a]` and `value_projs[a]` are applied to the neighbour tuple in
/// which position `a` has been replaced by the pivot.
#[derive(Clone, Debug, PartialEq)]
pub struct KOrderAttentionParams<T = Tensor> {
    pub order: usize,
    pub q_proj: LinearParams<T>,
    pub key_projs: Vec<LinearParams<T>>,
    pub value_projs: Vec<LinearParams<T>>,
    pub out_proj: LinearParams<T>,
    pub heads: usize,
}

impl KOrderAttentionParams<Tensor> {
    pub fn init<R: Rng + ?Sized>(
        order: usize,
        d: usize,
        heads: usize,
        rng: &mut R,
    ) -> Result<Self> {
        check_heads(d, heads)?;
        check_order(order)?;
        let q_proj = LinearParams::init(d, d, true, rng);
        let key_projs = (0..order)
            .map(|_| LinearParams::init(d, d, true, rng))
            .collect();
        let value_projs = (0..order)
            .map(|_| LinearParams::init(d, d, true, rng))
            .collect();
        let out_proj = LinearParams::init(d, d, true, rng);
        Ok(Self {
            order,
            q_proj,
            key_projs,
            value_projs,
            out_proj,
            heads,
        })
    }

    pub fn dim(&self) -> usize {
        self.q_proj.d_out()
    }

    pub fn bind(&self, tape: &mut Tape) -> KOrderAttentionParams<Var> {
        self.map(&mut |t| tape.param(t.clone()))
    }
}

impl<T: Clone> KOrderAttentionParams<T> {
    /// Order-2 parameters in pair form. Position 0 of a pair `(i, k)`
    /// substituted by pivot `j` gives `(j, k)`, the right segment; position 1
    /// gives `(i, j)`, the left segment.
    pub fn to_pair(&self) -> Result<AttentionParams<T>> {
        if self.order != 2 {
            return Err(Error::Unsupported(format!(
                "pair view of order-{} attention",
                self.order
            )));
        }
        Ok(AttentionParams {
            q_proj: self.q_proj.clone(),
            k_proj_left: self.key_projs[1].clone(),
            k_proj_right: self.key_projs[0].clone(),
            v_proj_left: self.value_projs[1].clone(),
            v_proj_right: self.value_projs[0].clone(),
            out_proj: self.out_proj.clone(),
            heads: self.heads,
        })
    }

    pub fn from_pair(p: &AttentionParams<T>) -> Self {
        Self {
            order: 2,
            q_proj: p.q_proj.clone(),
            key_projs: vec![p.k_proj_right.clone(), p.k_proj_left.clone()],
            value_projs: vec![p.v_proj_right.clone(), p.v_proj_left.clone()],
            out_proj: p.out_proj.clone(),
            heads: p.heads,
        }
    }
}

impl<T> KOrderAttentionParams<T> {
    pub fn map<U>(&self, f: &mut dyn FnMut(&T) -> U) -> KOrderAttentionParams<U> {
        KOrderAttentionParams {
            order: self.order,
            q_proj: self.q_proj.map(f),
            key_projs: self.key_projs.iter().map(|p| p.map(f)).collect(),
            value_projs: self.value_projs.iter().map(|p| p.map(f)).collect(),
            out_proj: self.out_proj.map(f),
            heads: self.heads,
        }
    }

    pub fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a T)) {
        self.q_proj.visit(&format!("{prefix}.q"), f);
        for (a, p) in self.key_projs.iter().enumerate() {
            p.visit(&format!("{prefix}.k{a}"), f);
        }
        for (a, p) in self.value_projs.iter().enumerate() {
            p.visit(&format!("{prefix}.v{a}"), f);
        }
        self.out_proj.visit(&format!("{prefix}.out"), f);
    }

    pub fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut T)) {
        self.q_proj.visit_mut(&format!("{prefix}.q"), f);
        for (a, p) in self.key_projs.iter_mut().enumerate() {
            p.visit_mut(&format!("{prefix}.k{a}"), f);
        }
        for (a, p) in self.value_projs.iter_mut().enumerate() {
            p.visit_mut(&format!("{prefix}.v{a}"), f);
        }
        self.out_proj.visit_mut(&format!("{prefix}.out"), f);
    }
}

pub(crate) fn check_heads(d: usize, heads: usize) -> Result<()> {
    if heads == 0 || d == 0 || !d.is_multiple_of(heads) {
        return Err(Error::InvalidArgument(format!(
            "relation dim {d} is not divisible into {heads} heads"
        )));
    }
    Ok(())
}

pub(crate) fn check_order(order: usize) -> Result<()> {
    if !(1..=3).contains(&order) {
        return Err(Error::Unsupported(format!(
            "attention order {order} (supported: 1, 2, 3)"
        )));
    }
    Ok(())
}
