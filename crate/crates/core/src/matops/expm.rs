use super::{MatOpsError, Matrix};
use crate::scalar::{cast, Scalar};

/// Order-(7,7) diagonal Pade numerator coefficients for exp; the denominator
/// reuses them with alternating signs.
const PADE7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];

/// Matrix exponential by scaling-and-squaring with a fixed-order diagonal
/// Pade approximant.
///
/// The input is scaled so its infinity norm is at most 1/2, where the (7,7)
/// approximant is accurate to well below f64 working precision, then squared
/// back up. Exact for nilpotent (index 2) and diagonal inputs to working
/// precision.
pub fn expm<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>, MatOpsError> {
    if !a.is_square() {
        return Err(MatOpsError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }

    let norm = a.inf_norm();
    let half = cast::<T>(0.5);
    let squarings = if norm > half {
        (norm / half).log2().ceil().to_f64().unwrap_or(0.0).max(0.0) as u32
    } else {
        0
    };
    let scale = cast::<T>(0.5_f64.powi(squarings as i32));
    let a_s = a.scale(scale);

    let a2 = &a_s * &a_s;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let eye = Matrix::identity(n);

    let coef = |k: usize| cast::<T>(PADE7[k]);
    // U = A (b7 A^6 + b5 A^4 + b3 A^2 + b1 I), V = b6 A^6 + b4 A^4 + b2 A^2 + b0 I.
    let poly_odd = &(&(&a6.scale(coef(7)) + &a4.scale(coef(5))) + &a2.scale(coef(3)))
        + &eye.scale(coef(1));
    let u = &a_s * &poly_odd;
    let v = &(&(&a6.scale(coef(6)) + &a4.scale(coef(4))) + &a2.scale(coef(2)))
        + &eye.scale(coef(0));

    let numer = &v + &u;
    let denom = &v - &u;
    let mut x = denom.solve(&numer)?;
    for _ in 0..squarings {
        x = &x * &x;
    }
    Ok(x)
}

/// Computes `exp(a t)` together with `int_0^t exp(a s) ds`.
///
/// Both come out of one exponential of the augmented block matrix
/// `[[a, I], [0, 0]]` scaled by `t`, which stays valid when `a` is singular
/// (the common case here: single-integrator dynamics have a = 0).
pub fn expm_with_integral<T: Scalar>(
    a: &Matrix<T>,
    t: T,
) -> Result<(Matrix<T>, Matrix<T>), MatOpsError> {
    if !a.is_square() {
        return Err(MatOpsError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    let mut aug = Matrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            aug[(i, j)] = a[(i, j)] * t;
        }
        aug[(i, n + i)] = t;
    }
    let e = expm(&aug)?;
    let phi = Matrix::from_fn(n, n, |i, j| e[(i, j)]);
    let integral = Matrix::from_fn(n, n, |i, j| e[(i, n + j)]);
    Ok((phi, integral))
}
