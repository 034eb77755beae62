use super::decomp::{cholesky, Lu};
use super::matrix::{kron, Matrix};
use super::MatOpsError;
use crate::scalar::{cast, Scalar};

const CARE_TOL: f64 = 1e-10;
const CARE_MAX_ITERS: usize = 100;
const LYAP_RESIDUAL_TOL: f64 = 1e-10;

fn vec_cols<T: Scalar>(m: &Matrix<T>) -> Vec<T> {
    let mut v = Vec::with_capacity(m.rows() * m.cols());
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            v.push(m[(i, j)]);
        }
    }
    v
}

fn unvec_cols<T: Scalar>(v: &[T], rows: usize, cols: usize) -> Matrix<T> {
    Matrix::from_fn(rows, cols, |i, j| v[j * rows + i])
}

/// Solves the continuous Lyapunov equation `a^T x + x a + q = 0` by
/// vectorization: the Kronecker-form linear system
/// `(I (x) a^T + a^T (x) I) vec(x) = -vec(q)`.
///
/// Sized for the per-robot dimensions here (state dimension <= 4, so the
/// linear system is at most 16x16). A singular system means some eigenvalue
/// pair of `a` sums to zero, which is reported as the matrix not being
/// Hurwitz; the returned solution always satisfies the equation with residual
/// at most `1e-10 * (1 + ||x||_F)`.
pub fn solve_lyapunov<T: Scalar>(a: &Matrix<T>, q: &Matrix<T>) -> Result<Matrix<T>, MatOpsError> {
    if !a.is_square() {
        return Err(MatOpsError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if (q.rows(), q.cols()) != (a.rows(), a.cols()) {
        return Err(MatOpsError::ShapeMismatch {
            op: "solve_lyapunov",
            left_rows: a.rows(),
            left_cols: a.cols(),
            right_rows: q.rows(),
            right_cols: q.cols(),
        });
    }
    let n = a.rows();
    let at = a.transpose();
    let eye = Matrix::identity(n);
    let system = &kron(&eye, &at) + &kron(&at, &eye);
    let rhs: Vec<T> = vec_cols(q).iter().map(|&v| -v).collect();
    let sol = match Lu::new(&system) {
        Ok(lu) => lu.solve_vec(&rhs),
        Err(MatOpsError::Singular) => return Err(MatOpsError::NonHurwitz),
        Err(e) => return Err(e),
    };
    let x = unvec_cols(&sol, n, n);

    let residual = &(&(&at * &x) + &(&x * a)) + q;
    let limit = cast::<T>(LYAP_RESIDUAL_TOL) * (T::one() + x.frobenius_norm());
    if residual.frobenius_norm() > limit {
        return Err(MatOpsError::NonHurwitz);
    }
    Ok(x)
}

/// Lyapunov stability test: `a` is Hurwitz exactly when
/// `a^T x + x a + I = 0` has a symmetric positive definite solution.
pub fn is_hurwitz<T: Scalar>(a: &Matrix<T>) -> bool {
    if !a.is_square() {
        return false;
    }
    match solve_lyapunov(a, &Matrix::identity(a.rows())) {
        Ok(x) => cholesky(&x.symmetrized()).is_ok(),
        Err(_) => false,
    }
}

/// Stabilizing solution of the continuous algebraic Riccati equation.
#[derive(Debug, Clone)]
pub struct CareSolution<T> {
    /// Symmetric positive definite solution P.
    pub p: Matrix<T>,
    /// Frobenius norm of `a^T P + P a + q - P b r^-1 b^T P` at exit.
    pub residual_norm: T,
    /// Newton iterations used.
    pub iterations: usize,
}

fn initial_stabilizing_gain<T: Scalar>(
    a: &Matrix<T>,
    b: &Matrix<T>,
) -> Result<Matrix<T>, MatOpsError> {
    if is_hurwitz(a) {
        return Ok(Matrix::zeros(b.cols(), a.rows()));
    }
    // Scaled-b^T candidates close the loop for a = 0 and most diagonal
    // plants cheaply.
    let bt = b.transpose();
    for c in [1.0, 2.0, 5.0, 10.0, 50.0, 100.0, 1000.0] {
        let k0 = bt.scale(cast::<T>(c));
        if is_hurwitz(&(a - &(b * &k0))) {
            return Ok(k0);
        }
    }
    // Bass's method for the general controllable pair: with beta above the
    // spectral abscissa (inf-norm bound), (a + beta I) Z + Z (a + beta I)^T
    // = 2 b b^T has a positive definite solution and K = b^T Z^-1
    // stabilizes.
    let beta = a.inf_norm() + T::one();
    let shifted = a + &Matrix::identity(a.rows()).scale(beta);
    let rhs = (b * &bt).scale(cast::<T>(2.0));
    if let Ok(z) = solve_lyapunov(&-&shifted.transpose(), &rhs) {
        if let Ok(z_inv) = z.symmetrized().inverse() {
            let k0 = &bt * &z_inv;
            if is_hurwitz(&(a - &(b * &k0))) {
                return Ok(k0);
            }
        }
    }
    Err(MatOpsError::NoConvergence {
        what: "initial stabilizing gain search",
        iterations: 0,
        residual: f64::NAN,
    })
}

/// Solves `a^T P + P a + q - P b r^-1 b^T P = 0` for the stabilizing P by
/// Kleinman-Newton iteration: starting from a stabilizing gain, each step
/// solves one Lyapunov equation for the closed loop and refreshes the gain.
///
/// `q` must be symmetric and `r` symmetric positive definite. Converges
/// quadratically; iterates until the residual drops below an absolute 1e-10,
/// accepting a stagnated iterate only while it still meets the relative bound
/// `1e-10 * (1 + ||P||_F)`. Errors after 100 iterations, or if no candidate
/// initial gain stabilizes the pair.
pub fn solve_care<T: Scalar>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    q: &Matrix<T>,
    r: &Matrix<T>,
) -> Result<CareSolution<T>, MatOpsError> {
    if !a.is_square() {
        return Err(MatOpsError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let m = a.rows();
    if b.rows() != m {
        return Err(MatOpsError::ShapeMismatch {
            op: "solve_care: b",
            left_rows: m,
            left_cols: m,
            right_rows: b.rows(),
            right_cols: b.cols(),
        });
    }
    let r_dim = b.cols();
    if (q.rows(), q.cols()) != (m, m) {
        return Err(MatOpsError::ShapeMismatch {
            op: "solve_care: q",
            left_rows: m,
            left_cols: m,
            right_rows: q.rows(),
            right_cols: q.cols(),
        });
    }
    if (r.rows(), r.cols()) != (r_dim, r_dim) {
        return Err(MatOpsError::ShapeMismatch {
            op: "solve_care: r",
            left_rows: r_dim,
            left_cols: r_dim,
            right_rows: r.rows(),
            right_cols: r.cols(),
        });
    }
    let sym_tol = cast::<T>(1e-9) * (T::one() + q.max_abs());
    if !q.is_symmetric(sym_tol) {
        return Err(MatOpsError::NotSymmetric);
    }
    cholesky(r)?;

    let bt = b.transpose();
    let r_lu = Lu::new(r)?;
    let mut k = initial_stabilizing_gain(a, b)?;
    let tol = cast::<T>(CARE_TOL);

    let mut last_residual = T::infinity();
    for iteration in 1..=CARE_MAX_ITERS {
        let acl = a - &(b * &k);
        let cost = (q + &(&(&k.transpose() * r) * &k)).symmetrized();
        let p = solve_lyapunov(&acl, &cost)?.symmetrized();
        k = r_lu.solve_mat(&(&bt * &p));

        // Residual of the Riccati equation with the refreshed gain.
        let at_p = &a.transpose() * &p;
        let residual_mat = &(&(&at_p + &at_p.transpose()) + q) - &(&(&p * b) * &k);
        let residual = residual_mat.frobenius_norm();
        // Drive to the absolute tolerance; once the iteration stops
        // improving, settle for the floating point floor provided it stays
        // within the relative contract.
        let stagnated = residual >= last_residual;
        last_residual = residual;
        if residual <= tol || (stagnated && residual <= tol * (T::one() + p.frobenius_norm())) {
            let p = p.symmetrized();
            cholesky(&p)?;
            if !is_hurwitz(&(a - &(b * &k))) {
                return Err(MatOpsError::NonHurwitz);
            }
            return Ok(CareSolution {
                p,
                residual_norm: residual,
                iterations: iteration,
            });
        }
    }
    Err(MatOpsError::NoConvergence {
        what: "Kleinman-Newton Riccati iteration",
        iterations: CARE_MAX_ITERS,
        residual: last_residual.to_f64().unwrap_or(f64::NAN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m64(rows: &[Vec<f64>]) -> Matrix<f64> {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn lyapunov_scalar_closed_form() {
        // -2x + 2 = 0 so x = 1.
        let x = solve_lyapunov(&m64(&[vec![-1.0]]), &m64(&[vec![2.0]])).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lyapunov_identity_closed_form() {
        let a = Matrix::identity(2).scale(-1.0);
        let x = solve_lyapunov(&a, &Matrix::identity(2)).unwrap();
        assert!(x.approx_eq(&Matrix::identity(2).scale(0.5), 1e-14));
    }

    #[test]
    fn lyapunov_random_stable_residual() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for _ in 0..20 {
            let raw = Matrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
            let a = &raw - &Matrix::identity(3).scale(raw.inf_norm() + 1.0);
            let q = {
                let g = Matrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
                &(&g * &g.transpose()) + &Matrix::identity(3).scale(0.1)
            };
            let x = solve_lyapunov(&a, &q).unwrap();
            let resid = &(&(&a.transpose() * &x) + &(&x * &a)) + &q;
            assert!(resid.frobenius_norm() <= 1e-10 * (1.0 + x.frobenius_norm()));
            // Stable a with PD q forces a PD solution.
            assert!(cholesky(&x.symmetrized()).is_ok());
        }
    }

    #[test]
    fn lyapunov_rejects_singular_pair() {
        // a = 0 makes the Kronecker system singular.
        let a = Matrix::<f64>::zeros(2, 2);
        assert!(matches!(
            solve_lyapunov(&a, &Matrix::identity(2)),
            Err(MatOpsError::NonHurwitz)
        ));
    }

    #[test]
    fn hurwitz_classification() {
        assert!(is_hurwitz(&Matrix::<f64>::identity(3).scale(-1.0)));
        assert!(!is_hurwitz(&m64(&[vec![1.0]])));
        // Marginally stable rotation: not Hurwitz.
        assert!(!is_hurwitz(&m64(&[vec![0.0, 1.0], vec![-1.0, 0.0]])));
        // Stable with complex eigenvalues -1 +- i.
        assert!(is_hurwitz(&m64(&[vec![-1.0, 1.0], vec![-1.0, -1.0]])));
    }

    #[test]
    fn care_closed_form_for_integrator() {
        // a = 0, b = I: P = sqrt(q r) I.
        for (q, r) in [(1.0, 1.0), (3.0, 1.0), (6.0, 1.0), (20.0, 5.0)] {
            let sol = solve_care(
                &Matrix::<f64>::zeros(2, 2),
                &Matrix::identity(2),
                &Matrix::identity(2).scale(q),
                &Matrix::identity(2).scale(r),
            )
            .unwrap();
            let expected = Matrix::identity(2).scale((q * r).sqrt());
            assert!(
                sol.p.approx_eq(&expected, 1e-9),
                "q={q}, r={r}: {:?}",
                sol.p
            );
            assert!(sol.residual_norm <= 1e-10 * (1.0 + sol.p.frobenius_norm()));
            assert!(sol.iterations <= 100);
        }
    }

    #[test]
    fn care_double_integrator_known_solution() {
        // a = [[0,1],[0,0]], b = [0,1]^T, q = I, r = 1:
        // P = [[sqrt(3), 1], [1, sqrt(3)]].
        let a = m64(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        let b = m64(&[vec![0.0], vec![1.0]]);
        let sol = solve_care(&a, &b, &Matrix::identity(2), &Matrix::identity(1)).unwrap();
        let s3 = 3.0_f64.sqrt();
        let expected = m64(&[vec![s3, 1.0], vec![1.0, s3]]);
        assert!(sol.p.approx_eq(&expected, 1e-9), "{:?}", sol.p);
    }

    #[test]
    fn care_solution_invariants() {
        let sol = solve_care(
            &Matrix::<f64>::zeros(2, 2),
            &Matrix::identity(2),
            &Matrix::identity(2).scale(3.0),
            &Matrix::identity(2),
        )
        .unwrap();
        assert!(sol.p.is_symmetric(1e-12 * sol.p.max_abs()));
        assert!(cholesky(&sol.p).is_ok());
        // Closed loop a - b r^-1 b^T p must be Hurwitz.
        let k = sol.p.clone(); // r = I, b = I
        assert!(is_hurwitz(&(&Matrix::<f64>::zeros(2, 2) - &k)));
    }

    #[test]
    fn care_rejects_bad_weights() {
        let a = Matrix::<f64>::zeros(1, 1);
        let b = Matrix::identity(1);
        let q_asym = m64(&[vec![1.0]]);
        let r_indefinite = m64(&[vec![-1.0]]);
        assert!(matches!(
            solve_care(&a, &b, &q_asym, &r_indefinite),
            Err(MatOpsError::NotPositiveDefinite)
        ));
        let q2 = m64(&[vec![1.0, 0.5], vec![0.0, 1.0]]);
        assert!(matches!(
            solve_care(
                &Matrix::<f64>::zeros(2, 2),
                &Matrix::identity(2),
                &q2,
                &Matrix::identity(2)
            ),
            Err(MatOpsError::NotSymmetric)
        ));
    }

    #[test]
    fn care_nontrivial_stable_plant() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(23);
        let raw = Matrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let a = &raw - &Matrix::identity(3).scale(raw.inf_norm() + 0.5);
        let b = Matrix::from_fn(3, 2, |_, _| rng.random_range(-1.0..1.0));
        let q = Matrix::identity(3).scale(2.0);
        let r = Matrix::identity(2).scale(0.5);
        let sol = solve_care(&a, &b, &q, &r).unwrap();
        // Verify the Riccati residual independently.
        let bt = b.transpose();
        let k = r.inverse().unwrap();
        let k = &(&k * &bt) * &sol.p;
        let resid = &(&(&(&a.transpose() * &sol.p) + &(&sol.p * &a)) + &q) - &(&(&sol.p * &b) * &k);
        assert!(resid.frobenius_norm() <= 1e-9 * (1.0 + sol.p.frobenius_norm()));
    }
}
