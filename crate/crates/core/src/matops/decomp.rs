use super::{MatOpsError, Matrix};
use crate::scalar::{cast, Scalar};

/// LU factorization with partial pivoting.
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    pub fn new(a: &Matrix<T>) -> Result<Self, MatOpsError> {
        if !a.is_square() {
            return Err(MatOpsError::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        // Singularity threshold scaled by the input magnitude.
        let tiny = T::epsilon() * cast::<T>(n as f64) * a.max_abs().max(T::one());
        for k in 0..n {
            let mut pivot_row = k;
            let mut pivot_val = lu[(k, k)].abs();
            for i in (k + 1)..n {
                let v = lu[(i, k)].abs();
                if v > pivot_val {
                    pivot_val = v;
                    pivot_row = i;
                }
            }
            if pivot_val <= tiny {
                return Err(MatOpsError::Singular);
            }
            if pivot_row != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(pivot_row, j)];
                    lu[(pivot_row, j)] = tmp;
                }
                perm.swap(k, pivot_row);
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                for j in (k + 1)..n {
                    let delta = factor * lu[(k, j)];
                    lu[(i, j)] -= delta;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve_vec(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.rows();
        assert_eq!(b.len(), n, "solve_vec: dimension mismatch");
        let mut y: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            for j in 0..i {
                let delta = self.lu[(i, j)] * y[j];
                y[i] = y[i] - delta;
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let delta = self.lu[(i, j)] * y[j];
                y[i] = y[i] - delta;
            }
            y[i] = y[i] / self.lu[(i, i)];
        }
        y
    }

    pub fn solve_mat(&self, b: &Matrix<T>) -> Matrix<T> {
        let n = self.lu.rows();
        assert_eq!(b.rows(), n, "solve_mat: dimension mismatch");
        let mut out = Matrix::zeros(n, b.cols());
        for j in 0..b.cols() {
            let col: Vec<T> = (0..n).map(|i| b[(i, j)]).collect();
            let x = self.solve_vec(&col);
            for i in 0..n {
                out[(i, j)] = x[i];
            }
        }
        out
    }
}

impl<T: Scalar> Matrix<T> {
    /// Solves `self * X = rhs`.
    pub fn solve(&self, rhs: &Matrix<T>) -> Result<Matrix<T>, MatOpsError> {
        Ok(Lu::new(self)?.solve_mat(rhs))
    }

    /// Solves `self * x = rhs` for a single right-hand side.
    pub fn solve_vec(&self, rhs: &[T]) -> Result<Vec<T>, MatOpsError> {
        Ok(Lu::new(self)?.solve_vec(rhs))
    }

    pub fn inverse(&self) -> Result<Matrix<T>, MatOpsError> {
        self.solve(&Matrix::identity(self.rows()))
    }
}

/// Cholesky factor L (lower triangular, `L L^T = a`) of a symmetric
/// positive definite matrix. This doubles as the positive-definiteness test.
pub fn cholesky<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>, MatOpsError> {
    if !a.is_square() {
        return Err(MatOpsError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let sym_tol = cast::<T>(1e-8) * a.max_abs().max(T::one());
    if !a.is_symmetric(sym_tol) {
        return Err(MatOpsError::NotSymmetric);
    }
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum = sum - l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= T::zero() {
                    return Err(MatOpsError::NotPositiveDefinite);
                }
                l[(i, i)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}
