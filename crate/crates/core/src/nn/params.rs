use rand::Rng;

use crate::nn::tape::{Tape, Var};
use crate::nn::tensor::Tensor;

/// Affine map `y = x W + b` applied along the last axis.
///
/// The storage type is generic so the same structure can hold concrete
/// tensors or the tape handles they were bound to.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearParams<T = Tensor> {
    /// `d_in x d_out`.
    pub weight: T,
    pub bias: Option<T>,
}

impl LinearParams<Tensor> {
    /// Uniform in `[-1/sqrt(d_in), 1/sqrt(d_in)]` for weight and bias.
    pub fn init<R: Rng + ?Sized>(d_in: usize, d_out: usize, bias: bool, rng: &mut R) -> Self {
        let bound = 1.0 / (d_in.max(1) as f64).sqrt();
        let weight = Tensor::uniform(&[d_in, d_out], bound, rng);
        let bias = bias.then(|| Tensor::uniform(&[d_out], bound, rng));
        Self { weight, bias }
    }

    pub fn zeros(d_in: usize, d_out: usize, bias: bool) -> Self {
        Self {
            weight: Tensor::zeros(&[d_in, d_out]),
            bias: bias.then(|| Tensor::zeros(&[d_out])),
        }
    }

    pub fn d_in(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn d_out(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn bind(&self, tape: &mut Tape) -> LinearParams<Var> {
        self.map(&mut |t| tape.param(t.clone()))
    }
}

impl<T> LinearParams<T> {
    pub fn map<U>(&self, f: &mut dyn FnMut(&T) -> U) -> LinearParams<U> {
        LinearParams {
            weight: f(&self.weight),
            bias: self.bias.as_ref().map(f),
        }
    }

    pub fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a T)) {
        f(format!("{prefix}.weight"), &self.weight);
        if let Some(b) = &self.bias {
            f(format!("{prefix}.bias"), b);
        }
    }

    pub fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut T)) {
        f(format!("{prefix}.weight"), &mut self.weight);
        if let Some(b) = &mut self.bias {
            f(format!("{prefix}.bias"), b);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NormKind {
    #[default]
    Layer,
    Rms,
}

impl NormKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NormKind::Layer => "layer",
            NormKind::Rms => "rms",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "layer" | "layernorm" => Some(NormKind::Layer),
            "rms" | "rmsnorm" => Some(NormKind::Rms),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormParams<T = Tensor> {
    pub gain: T,
    pub offset: T,
    pub epsilon: f64,
}

pub const DEFAULT_NORM_EPS: f64 = 1e-5;

impl NormParams<Tensor> {
    pub fn new(d: usize) -> Self {
        Self {
            gain: Tensor::full(&[d], 1.0),
            offset: Tensor::zeros(&[d]),
            epsilon: DEFAULT_NORM_EPS,
        }
    }

    pub fn bind(&self, tape: &mut Tape) -> NormParams<Var> {
        self.map(&mut |t| tape.param(t.clone()))
    }
}

impl<T> NormParams<T> {
    pub fn map<U>(&self, f: &mut dyn FnMut(&T) -> U) -> NormParams<U> {
        NormParams {
            gain: f(&self.gain),
            offset: f(&self.offset),
            epsilon: self.epsilon,
        }
    }

    pub fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a T)) {
        f(format!("{prefix}.gain"), &self.gain);
        f(format!("{prefix}.offset"), &self.offset);
    }

    pub fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut T)) {
        f(format!("{prefix}.gain"), &mut self.gain);
        f(format!("{prefix}.offset"), &mut self.offset);
    }
}

/// Two-layer feed-forward block: linear, GELU, linear.
#[derive(Clone, Debug, PartialEq)]
pub struct FfnParams<T = Tensor> {
    pub up: LinearParams<T>,
    pub down: LinearParams<T>,
}

impl FfnParams<Tensor> {
    pub fn init<R: Rng + ?Sized>(d: usize, hidden: usize, d_out: usize, rng: &mut R) -> Self {
        Self {
            up: LinearParams::init(d, hidden, true, rng),
            down: LinearParams::init(hidden, d_out, true, rng),
        }
    }

    pub fn bind(&self, tape: &mut Tape) -> FfnParams<Var> {
        self.map(&mut |t| tape.param(t.clone()))
    }
}

impl<T> FfnParams<T> {
    pub fn map<U>(&self, f: &mut dyn FnMut(&T) -> U) -> FfnParams<U> {
        FfnParams {
            up: self.up.map(f),
            down: self.down.map(f),
        }
    }

    pub fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a T)) {
        self.up.visit(&format!("{prefix}.up"), f);
        self.down.visit(&format!("{prefix}.down"), f);
    }

    pub fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(String, &'a mut T)) {
        self.up.visit_mut(&format!("{prefix}.up"), f);
        self.down.visit_mut(&format!("{prefix}.down"), f);
    }
}
