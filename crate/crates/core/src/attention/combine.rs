use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

/// Elementwise operator merging the segment projections of one pivot path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CombineOp {
    #[default]
    Additive,
    Multiplicative,
}

impl CombineOp {
    #[inline(always)]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            CombineOp::Additive => a + b,
            CombineOp::Multiplicative => a * b,
        }
    }

    /// Partial derivatives of `apply(a, b)` with respect to `a` and `b`.
    #[inline(always)]
    pub fn partials(self, a: f64, b: f64) -> (f64, f64) {
        match self {
            CombineOp::Additive => (1.0, 1.0),
            CombineOp::Multiplicative => (b, a),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CombineOp::Additive => "additive",
            CombineOp::Multiplicative => "multiplicative",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "additive" | "add" => Some(CombineOp::Additive),
            "multiplicative" | "mul" => Some(CombineOp::Multiplicative),
            _ => None,
        }
    }
}

/// Elementwise sum or product of two equally shaped tensors.
pub fn combine(a: &Tensor, b: &Tensor, c: CombineOp) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::Shape {
            op: "combine",
            expected: a.shape().to_vec(),
            got: b.shape().to_vec(),
        });
    }
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| c.apply(x, y))
        .collect();
    Tensor::new(a.shape().to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_elements() {
        let a = Tensor::from_vec(vec![1.5, -2.0, 0.25]);
        assert_eq!(
            combine(&a, &Tensor::zeros(&[3]), CombineOp::Additive).unwrap(),
            a
        );
        assert_eq!(
            combine(&a, &Tensor::full(&[3], 1.0), CombineOp::Multiplicative).unwrap(),
            a
        );
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        assert!(combine(
            &Tensor::zeros(&[2]),
            &Tensor::zeros(&[3]),
            CombineOp::Additive
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn commutative_bitwise(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            for c in [CombineOp::Additive, CombineOp::Multiplicative] {
                prop_assert_eq!(c.apply(a, b).to_bits(), c.apply(b, a).to_bits());
            }
        }
    }
}
