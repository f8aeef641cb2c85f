//! Composition of 3x3 rotations through one multiplicative value path.
//!
//! Each rotation is flattened row-major into a 9-vector and zero padded to
//! 27 channels. The left value map copies entry `(r, c)` of `A` into the
//! three channels `9r + 3c + s`, the right map copies entry `(c, s)` of `B`
//! into `9r + 3c + s` for every `r`, so their elementwise product holds every
//! term `A[r,c] * B[c,s]`. The output map sums the three terms of each entry
//! of `A * B`.

use super::combine::{combine, CombineOp};
use crate::error::{Error, Result};
use crate::nn::ops::linear;
use crate::nn::params::LinearParams;
use crate::nn::tensor::Tensor;

pub const WIDTH: usize = 27;

const M_A: [&str; 9] = [
    "1 1 1 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0",
    "0 0 0 1 1 1 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0",
    "0 0 0 0 0 0 1 1 1 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0",
    "0 0 0 0 0 0 0 0 0 1 1 1 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0",
    "0 0 0 0 0 0 0 0 0 0 0 0 1 1 1 0 0 0 0 0 0 0 0 0 0 0 0",
    "0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 1 1 1 0 0 0 0 0 0 0 0 0",
    "0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 1 1 1 0 0 0 0 0 0",
    "0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 1 1 1 0 0 0",
    "0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 1 1 1",
];

const M_B: [&str; 9] = [
    "1 0 0 0 0 0 0 0 0 1 0 0 0 0 0 0 0 0 1 0 0 0 0 0 0 0 0",
    "0 1 0 0 0 0 0 0 0 0 1 0 0 0 0 0 0 0 0 1 0 0 0 0 0 0 0",
    "0 0 1 0 0 0 0 0 0 0 0 1 0 0 0 0 0 0 0 0 1 0 0 0 0 0 0",
    "0 0 0 1 0 0 0 0 0 0 0 0 1 0 0 0 0 0 0 0 0 1 0 0 0 0 0",
    "0 0 0 0 1 0 0 0 0 0 0 0 0 1 0 0 0 0 0 0 0 0 1 0 0 0 0",
    "0 0 0 0 0 1 0 0 0 0 0 0 0 0 1 0 0 0 0 0 0 0 0 1 0 0 0",
    "0 0 0 0 0 0 1 0 0 0 0 0 0 0 0 1 0 0 0 0 0 0 0 0 1 0 0",
    "0 0 0 0 0 0 0 1 0 0 0 0 0 0 0 0 1 0 0 0 0 0 0 0 0 1 0",
    "0 0 0 0 0 0 0 0 1 0 0 0 0 0 0 0 0 1 0 0 0 0 0 0 0 0 1",
];

/// Rows of the output map before transposition.
const M_C: [&str; 9] = [
    "1 0 0 1 0 0 1 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0",
    "0 1 0 0 1 0 0 1 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0",
    "0 0 1 0 0 1 0 0 1 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0",
    "0 0 0 0 0 0 0 0 0 1 0 0 1 0 0 1 0 0 0 0 0 0 0 0 0 0 0",
    "0 0 0 0 0 0 0 0 0 0 1 0 0 1 0 0 1 0 0 0 0 0 0 0 0 0 0",
    "0 0 0 0 0 0 0 0 0 0 0 1 0 0 1 0 0 1 0 0 0 0 0 0 0 0 0",
    "0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 1 0 0 1 0 0 1 0 0",
    "0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 1 0 0 1 0 0 1 0",
    "0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 1 0 0 1 0 0 1",
];

fn parse_rows(rows: &[&str; 9]) -> [[f64; WIDTH]; 9] {
    let mut m = [[0.0; WIDTH]; 9];
    for (r, line) in rows.iter().enumerate() {
        for (c, tok) in line.split_whitespace().enumerate() {
            m[r][c] = if tok == "1" { 1.0 } else { 0.0 };
        }
    }
    m
}

/// The three `27 x 27` maps `(left value, right value, output)`, zero
/// outside the fixed blocks and without bias.
pub fn rotation_maps() -> (LinearParams, LinearParams, LinearParams) {
    let (a, b, c) = (parse_rows(&M_A), parse_rows(&M_B), parse_rows(&M_C));
    let mut wa = vec![0.0; WIDTH * WIDTH];
    let mut wb = vec![0.0; WIDTH * WIDTH];
    let mut wc = vec![0.0; WIDTH * WIDTH];
    for r in 0..9 {
        for col in 0..WIDTH {
            wa[r * WIDTH + col] = a[r][col];
            wb[r * WIDTH + col] = b[r][col];
            // transposed: input channel `col` feeds output channel `r`
            wc[col * WIDTH + r] = c[r][col];
        }
    }
    let mk = |w: Vec<f64>| LinearParams {
        weight: Tensor::new(vec![WIDTH, WIDTH], w).expect("27x27 map"),
        bias: None,
    };
    (mk(wa), mk(wb), mk(wc))
}

/// Rejects anything that is not orthogonal with determinant one (to 1e-9).
pub fn check_rotation(t: &[[f64; 3]; 3]) -> Result<()> {
    for row in t {
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("rotation entry".into()));
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            let dot: f64 = (0..3).map(|e| t[e][i] * t[e][j]).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            if (dot - want).abs() > 1e-9 {
                return Err(Error::InvalidArgument("matrix is not orthogonal".into()));
            }
        }
    }
    if (det3(t) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(
            "rotation must have determinant 1".into(),
        ));
    }
    Ok(())
}

fn det3(t: &[[f64; 3]; 3]) -> f64 {
    t[0][0] * (t[1][1] * t[2][2] - t[1][2] * t[2][1])
        - t[0][1] * (t[1][0] * t[2][2] - t[1][2] * t[2][0])
        + t[0][2] * (t[1][0] * t[2][1] - t[1][1] * t[2][0])
}

/// Row-major flattening zero padded to 27 channels.
pub fn embed(t: &[[f64; 3]; 3]) -> Tensor {
    let mut v = vec![0.0; WIDTH];
    for r in 0..3 {
        for c in 0..3 {
            v[3 * r + c] = t[r][c];
        }
    }
    Tensor::new(vec![1, WIDTH], v).expect("embedding shape")
}

/// Composes `t_a` and `t_b` through the value path and returns the 3x3 result.
pub fn rotation_compose_check(t_a: &[[f64; 3]; 3], t_b: &[[f64; 3]; 3]) -> Result<[[f64; 3]; 3]> {
    check_rotation(t_a)?;
    check_rotation(t_b)?;
    let (ma, mb, mc) = rotation_maps();
    let va = linear(&embed(t_a), &ma)?;
    let vb = linear(&embed(t_b), &mb)?;
    let vc = combine(&va, &vb, CombineOp::Multiplicative)?;
    let o = linear(&vc, &mc)?;
    let mut out = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            out[r][c] = o.data()[3 * r + c];
        }
    }
    Ok(out)
}

/// Rotation about the z axis.
pub fn rot_z(theta: f64) -> [[f64; 3]; 3] {
    let (s, c) = theta.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

/// Uniformly distributed rotation from a random unit quaternion.
pub fn random_rotation<R: rand::Rng + ?Sized>(rng: &mut R) -> [[f64; 3]; 3] {
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (w, x, y, z) = (
        a * (tau * u2).sin(),
        a * (tau * u2).cos(),
        b * (tau * u3).sin(),
        b * (tau * u3).cos(),
    );
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
        ],
        [
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
        ],
        [
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}
