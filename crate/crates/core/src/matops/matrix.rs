use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use super::MatOpsError;
use crate::scalar::Scalar;

/// Dense row-major matrix.
///
/// Public constructors reject non-finite entries, so a `Matrix` built from
/// user input always holds finite numbers. Arithmetic between matrices of
/// incompatible shapes panics; fallible numerics (solves, factorizations)
/// return `Result`.
#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    /// Builds a matrix from row-major data, validating length and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, MatOpsError> {
        if data.len() != rows * cols {
            return Err(MatOpsError::ShapeMismatch {
                op: "new",
                left_rows: rows,
                left_cols: cols,
                right_rows: data.len(),
                right_cols: 1,
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(MatOpsError::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows, validating rectangularity.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, MatOpsError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(MatOpsError::ShapeMismatch {
                op: "from_rows",
                left_rows: r,
                left_cols: c,
                right_rows: r,
                right_cols: 0,
            });
        }
        Self::new(r, c, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.cols, x.len(), "mul_vec: dimension mismatch");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    pub fn frobenius_norm(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, &v| acc + v * v)
            .sqrt()
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> T {
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .fold(T::zero(), |acc, &v| acc + v.abs())
            })
            .fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    /// Largest absolute entry-wise difference against `other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        if !self.is_square() {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self[(i, j)] - self[(j, i)]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// (M + M^T) / 2, used to clean roundoff off symmetric solutions.
    pub fn symmetrized(&self) -> Self {
        let half = T::one() / (T::one() + T::one());
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)]) * half
        })
    }

    /// True when every entry of `self` is within `tol` of `other`.
    pub fn approx_eq(&self, other: &Self, tol: T) -> bool {
        (self.rows, self.cols) == (other.rows, other.cols) && self.max_abs_diff(other) <= tol
    }

    /// True for a matrix whose off-diagonal entries are at most `tol` in
    /// magnitude.
    pub fn is_diagonal(&self, tol: T) -> bool {
        if !self.is_square() {
            return false;
        }
        for i in 0..self.rows {
            for j in 0..self.cols {
                if i != j && self[(i, j)].abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }
}

impl<T: Scalar> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl<T: Scalar> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Scalar> Add for &Matrix<T> {
    type Output = Matrix<T>;

    fn add(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "add: shape");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }
}

impl<T: Scalar> Sub for &Matrix<T> {
    type Output = Matrix<T>;

    fn sub(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "sub: shape");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }
}

impl<T: Scalar> Neg for &Matrix<T> {
    type Output = Matrix<T>;

    fn neg(self) -> Matrix<T> {
        self.scale(-T::one())
    }
}

impl<T: Scalar> Mul for &Matrix<T> {
    type Output = Matrix<T>;

    fn mul(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, rhs.rows, "mul: inner dimensions");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == T::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += aik * rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{:>12.6?} ", self.data[i * self.cols + j])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Kronecker product `x (x) y`.
pub fn kron<T: Scalar>(x: &Matrix<T>, y: &Matrix<T>) -> Matrix<T> {
    let mut out = Matrix::zeros(x.rows() * y.rows(), x.cols() * y.cols());
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            let xij = x[(i, j)];
            if xij == T::zero() {
                continue;
            }
            for p in 0..y.rows() {
                for q in 0..y.cols() {
                    out[(i * y.rows() + p, j * y.cols() + q)] = xij * y[(p, q)];
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m64(rows: &[Vec<f64>]) -> Matrix<f64> {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn new_rejects_wrong_length_and_nonfinite() {
        assert!(matches!(
            Matrix::new(2, 2, vec![1.0_f64, 2.0, 3.0]),
            Err(MatOpsError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            Matrix::new(1, 2, vec![1.0_f64, f64::NAN]),
            Err(MatOpsError::NonFinite)
        ));
        assert!(matches!(
            Matrix::new(1, 2, vec![1.0_f64, f64::INFINITY]),
            Err(MatOpsError::NonFinite)
        ));
    }

    #[test]
    fn product_and_transpose() {
        let a = m64(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = m64(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let ab = &a * &b;
        assert_eq!(ab, m64(&[vec![2.0, 1.0], vec![4.0, 3.0]]));
        assert_eq!(a.transpose()[(0, 1)], 3.0);
    }

    #[test]
    fn kron_identity_blocks() {
        // I_2 (x) B stacks B on the block diagonal.
        let b = m64(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let k = kron(&Matrix::identity(2), &b);
        assert_eq!(k.rows(), 4);
        assert_eq!(k[(0, 0)], 1.0);
        assert_eq!(k[(1, 1)], 4.0);
        assert_eq!(k[(2, 2)], 1.0);
        assert_eq!(k[(3, 2)], 3.0);
        assert_eq!(k[(0, 2)], 0.0);
        assert_eq!(k[(2, 0)], 0.0);

        // [[2]] (x) I_2 = 2 I_2.
        let two = m64(&[vec![2.0]]);
        let k2 = kron(&two, &Matrix::identity(2));
        assert!(k2.approx_eq(&Matrix::identity(2).scale(2.0), 0.0));
    }

    #[test]
    fn kron_mixed_product_small() {
        // (X (x) Y)(W (x) Z) = (XW) (x) (YZ) on a fixed 2x2 example.
        let x = m64(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        let y = m64(&[vec![3.0, 0.0], vec![1.0, 1.0]]);
        let w = m64(&[vec![0.5, 1.0], vec![2.0, 0.0]]);
        let z = m64(&[vec![1.0, 4.0], vec![0.0, 2.0]]);
        let lhs = &kron(&x, &y) * &kron(&w, &z);
        let rhs = kron(&(&x * &w), &(&y * &z));
        assert!(lhs.approx_eq(&rhs, 1e-12));
    }

    #[test]
    fn norms_and_predicates() {
        let a = m64(&[vec![3.0, -4.0], vec![0.0, 0.0]]);
        assert_eq!(a.frobenius_norm(), 5.0);
        assert_eq!(a.inf_norm(), 7.0);
        assert_eq!(a.max_abs(), 4.0);
        assert!(!a.is_symmetric(1e-12));
        assert!(a.symmetrized().is_symmetric(0.0));
        assert!(Matrix::<f64>::from_diag(&[1.0, 2.0]).is_diagonal(0.0));
        assert!(!m64(&[vec![1.0, 0.1], vec![0.0, 1.0]]).is_diagonal(1e-3));
    }

    #[test]
    fn mul_vec_matches_manual_sum() {
        let a = m64(&[vec![1.0, 2.0, 3.0], vec![0.0, 1.0, -1.0]]);
        assert_eq!(a.mul_vec(&[1.0, 1.0, 1.0]), vec![6.0, 0.0]);
    }

    #[test]
    fn works_at_f32() {
        let a = Matrix::<f32>::identity(3).scale(2.0);
        assert_eq!(a.mul_vec(&[1.0, 2.0, 3.0]), vec![2.0, 4.0, 6.0]);
    }
}
