use crate::error::{Error, Result};
use crate::nn::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    Mse,
    Mae,
    /// Binary cross-entropy on probabilities in `(0, 1)`.
    Bce,
}

impl LossKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mse" => Some(LossKind::Mse),
            "mae" => Some(LossKind::Mae),
            "bce" => Some(LossKind::Bce),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::Mae => "mae",
            LossKind::Bce => "bce",
        }
    }
}

/// Probabilities are clamped this far inside `(0, 1)` before taking logs.
const BCE_CLAMP: f64 = 1e-12;

/// Mean loss over the entries where `mask` is set, and its gradient with
/// respect to `pred` (zero on masked-out entries).
pub fn loss(
    pred: &Tensor,
    target: &Tensor,
    kind: LossKind,
    mask: &[bool],
) -> Result<(f64, Tensor)> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape {
            op: "loss",
            expected: pred.shape().to_vec(),
            got: target.shape().to_vec(),
        });
    }
    if mask.len() != pred.len() {
        return Err(Error::Dimension(format!(
            "mask has {} entries for {} predictions",
            mask.len(),
            pred.len()
        )));
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::InvalidArgument(
            "loss mask selects no entries".into(),
        ));
    }
    let inv = 1.0 / count as f64;
    let mut total = 0.0;
    let mut grad = vec![0.0; pred.len()];
    for (i, ((&p, &t), &m)) in pred.data().iter().zip(target.data()).zip(mask).enumerate() {
        if !m {
            continue;
        }
        let (l, g) = match kind {
            LossKind::Mse => ((p - t) * (p - t), 2.0 * (p - t)),
            LossKind::Mae => ((p - t).abs(), (p - t).signum() * (p != t) as u8 as f64),
            LossKind::Bce => {
                let q = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                let l = -(t * q.ln() + (1.0 - t) * (1.0 - q).ln());
                (l, (q - t) / (q * (1.0 - q)))
            }
        };
        total += l;
        grad[i] = g * inv;
    }
    Ok((total * inv, Tensor::new(pred.shape().to_vec(), grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_residual() {
        let p = Tensor::from_vec(vec![1.0, -2.0, 3.5]);
        for kind in [LossKind::Mse, LossKind::Mae] {
            let (l, g) = loss(&p, &p, kind, &[true; 3]).unwrap();
            assert_eq!(l, 0.0);
            assert_eq!(g.max_abs(), 0.0);
        }
    }

    #[test]
    fn bce_at_one_half_is_ln2() {
        let p = Tensor::full(&[4], 0.5);
        let t = Tensor::from_vec(vec![0.0, 1.0, 0.0, 1.0]);
        let (l, _) = loss(&p, &t, LossKind::Bce, &[true; 4]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn matches_scalar_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let n = rng.gen_range(1..30);
            let p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.99)).collect();
            let t: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let mut mask: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.7)).collect();
            mask[0] = true;
            let sel: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
            let c = sel.len() as f64;
            let mse = sel.iter().map(|&i| (p[i] - t[i]).powi(2)).sum::<f64>() / c;
            let mae = sel.iter().map(|&i| (p[i] - t[i]).abs()).sum::<f64>() / c;
            let bce = sel
                .iter()
                .map(|&i| -(t[i] * p[i].ln() + (1.0 - t[i]) * (1.0 - p[i]).ln()))
                .sum::<f64>()
                / c;
            let (pt, tt) = (Tensor::from_vec(p.clone()), Tensor::from_vec(t.clone()));
            for (kind, want) in [
                (LossKind::Mse, mse),
                (LossKind::Mae, mae),
                (LossKind::Bce, bce),
            ] {
                let (l, g) = loss(&pt, &tt, kind, &mask).unwrap();
                assert!((l - want).abs() < 1e-12, "{kind:?}");
                // central differences on every selected entry
                for &i in &sel {
                    let h = 1e-6;
                    let mut up = p.clone();
                    up[i] += h;
                    let mut dn = p.clone();
                    dn[i] -= h;
                    let f = |v: Vec<f64>| loss(&Tensor::from_vec(v), &tt, kind, &mask).unwrap().0;
                    let num = (f(up) - f(dn)) / (2.0 * h);
                    assert!(
                        (num - g.data()[i]).abs() < 1e-5 * num.abs().max(1.0),
                        "{kind:?} entry {i}"
                    );
                }
                for i in (0..n).filter(|&i| !mask[i]) {
                    assert_eq!(g.data()[i], 0.0);
                }
            }
        }
    }

    #[test]
    fn errors() {
        let p = Tensor::from_vec(vec![1.0, 2.0]);
        assert!(loss(&p, &Tensor::from_vec(vec![1.0]), LossKind::Mse, &[true]).is_err());
        assert!(loss(&p, &p, LossKind::Mse, &[true]).is_err());
        assert!(loss(&p, &p, LossKind::Mse, &[false, false]).is_err());
    }
}
