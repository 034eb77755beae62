//! Controller synthesis and the quantities evaluated along a run.
//!
//! The control law is distributed: robot i applies
//! `u_i = -K * sum_j a_ij (x_i - x_j)` clamped componentwise to its input
//! bounds, with the single gain `K = R^-1 B^T P` from the Riccati solution
//! shared by every robot. The disagreement vector `eps = (L (x) I_m) x`
//! collects exactly the neighborhood sums the law multiplies.

use thiserror::Error;

use crate::matops::{self, CareSolution, Matrix};
use crate::scalar::{cast, Scalar};
use crate::topology::Topology;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error(transparent)]
    MatOps(#[from] matops::MatOpsError),
    #[error("{what}: expected length {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("bounds inverted for robot {robot}, axis {axis}: lower exceeds upper")]
    BoundsInverted { robot: usize, axis: usize },
    #[error("bound values must be finite")]
    NonFiniteBound,
    #[error("{what} must be diagonal for the saturated certificate")]
    NonDiagonal { what: &'static str },
    #[error("{what} diagonal entry {index} must be positive")]
    NonPositiveDiagonal { what: &'static str, index: usize },
}

/// Linear robot dynamics `x_i' = a x_i + b u_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel<T> {
    a: Matrix<T>,
    b: Matrix<T>,
}

impl<T: Scalar> RobotModel<T> {
    pub fn new(a: Matrix<T>, b: Matrix<T>) -> Result<Self, ControlError> {
        if !a.is_square() {
            return Err(matops::MatOpsError::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            }
            .into());
        }
        if b.rows() != a.rows() {
            return Err(ControlError::DimensionMismatch {
                what: "input matrix rows",
                expected: a.rows(),
                got: b.rows(),
            });
        }
        Ok(Self { a, b })
    }

    /// Single integrator `x' = u` with m axes: a = 0, b = I.
    pub fn single_integrator(m: usize) -> Self {
        Self {
            a: Matrix::zeros(m, m),
            b: Matrix::identity(m),
        }
    }

    pub fn a(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn b(&self) -> &Matrix<T> {
        &self.b
    }

    /// State dimension per robot.
    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    /// Input dimension per robot.
    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }
}

/// Per-robot, per-axis input box constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds<T> {
    lower: Vec<Vec<T>>,
    upper: Vec<Vec<T>>,
}

impl<T: Scalar> Bounds<T> {
    pub fn per_robot(lower: Vec<Vec<T>>, upper: Vec<Vec<T>>) -> Result<Self, ControlError> {
        if lower.len() != upper.len() {
            return Err(ControlError::DimensionMismatch {
                what: "bounds robot count",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        let axes = lower.first().map_or(0, Vec::len);
        for (robot, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if lo.len() != axes || hi.len() != axes {
                return Err(ControlError::DimensionMismatch {
                    what: "bounds axis count",
                    expected: axes,
                    got: lo.len().max(hi.len()),
                });
            }
            for (axis, (&l, &h)) in lo.iter().zip(hi).enumerate() {
                if !l.is_finite() || !h.is_finite() {
                    return Err(ControlError::NonFiniteBound);
                }
                if l > h {
                    return Err(ControlError::BoundsInverted { robot, axis });
                }
            }
        }
        Ok(Self { lower, upper })
    }

    /// Same `[lo, hi]` box for every robot and axis.
    pub fn uniform(n: usize, axes: usize, lo: T, hi: T) -> Result<Self, ControlError> {
        Self::per_robot(vec![vec![lo; axes]; n], vec![vec![hi; axes]; n])
    }

    pub fn n_robots(&self) -> usize {
        self.lower.len()
    }

    pub fn axes(&self) -> usize {
        self.lower.first().map_or(0, Vec::len)
    }

    pub fn lower(&self, robot: usize) -> &[T] {
        &self.lower[robot]
    }

    pub fn upper(&self, robot: usize) -> &[T] {
        &self.upper[robot]
    }
}

/// Synthesized rendezvous controller: Riccati solution plus gain and the
/// input bounds it will be clamped to.
#[derive(Debug, Clone)]
pub struct ControlLaw<T> {
    pub model: RobotModel<T>,
    pub q: Matrix<T>,
    pub r: Matrix<T>,
    pub p: Matrix<T>,
    pub k: Matrix<T>,
    pub bounds: Bounds<T>,
    pub care: CareSolution<T>,
}

/// Solves the Riccati equation for the model and packages the optimal gain
/// `K = R^-1 B^T P` with the bounds.
pub fn synthesize<T: Scalar>(
    model: &RobotModel<T>,
    q: &Matrix<T>,
    r: &Matrix<T>,
    bounds: &Bounds<T>,
) -> Result<ControlLaw<T>, ControlError> {
    if bounds.axes() != model.input_dim() {
        return Err(ControlError::DimensionMismatch {
            what: "bounds axes",
            expected: model.input_dim(),
            got: bounds.axes(),
        });
    }
    let care = matops::solve_care(model.a(), model.b(), q, r)?;
    let k = r.solve(&(&model.b().transpose() * &care.p))?;
    Ok(ControlLaw {
        model: model.clone(),
        q: q.clone(),
        r: r.clone(),
        p: care.p.clone(),
        k,
        bounds: bounds.clone(),
        care,
    })
}

/// The raw (pre-saturation) per-robot law
/// `u_i = -K * sum_j w_j (x_i - x_j)` over the in-neighbor samples
/// `(w_j, x_j)`.
pub fn unconstrained_control<T: Scalar>(
    law: &ControlLaw<T>,
    x_i: &[T],
    neighbors: &[(T, &[T])],
) -> Vec<T> {
    let m = law.model.state_dim();
    assert_eq!(x_i.len(), m, "unconstrained_control: state length");
    let mut sum = vec![T::zero(); m];
    for (w, x_j) in neighbors {
        assert_eq!(x_j.len(), m, "unconstrained_control: neighbor length");
        for a in 0..m {
            sum[a] += *w * (x_i[a] - x_j[a]);
        }
    }
    law.k.mul_vec(&sum).iter().map(|&v| -v).collect()
}

/// Componentwise clamp of `u` into `[lo, hi]`.
pub fn saturate<T: Scalar>(u: &[T], lo: &[T], hi: &[T]) -> Vec<T> {
    assert_eq!(u.len(), lo.len(), "saturate: lower bound length");
    assert_eq!(u.len(), hi.len(), "saturate: upper bound length");
    u.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&v, (&l, &h))| {
            debug_assert!(l <= h);
            v.max(l).min(h)
        })
        .collect()
}

/// Stacked disagreement `eps = (L (x) I_m) x`, computed per robot as the
/// weighted neighborhood sum `eps_i = sum_j a_ij (x_i - x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisagreementState<T> {
    epsilon: Vec<T>,
    m: usize,
}

impl<T: Scalar> DisagreementState<T> {
    pub fn epsilon(&self) -> &[T] {
        &self.epsilon
    }

    pub fn robot(&self, i: usize) -> &[T] {
        &self.epsilon[i * self.m..(i + 1) * self.m]
    }

    pub fn norm(&self) -> T {
        self.epsilon
            .iter()
            .fold(T::zero(), |acc, &v| acc + v * v)
            .sqrt()
    }
}

pub fn disagreement<T: Scalar>(
    topology: &Topology<T>,
    x: &[T],
    m: usize,
) -> Result<DisagreementState<T>, ControlError> {
    let n = topology.n();
    if x.len() != n * m {
        return Err(ControlError::DimensionMismatch {
            what: "stacked state",
            expected: n * m,
            got: x.len(),
        });
    }
    let l = topology.laplacian();
    let mut epsilon = vec![T::zero(); n * m];
    for i in 0..n {
        for j in 0..n {
            let lij = l[(i, j)];
            if lij == T::zero() {
                continue;
            }
            for a in 0..m {
                epsilon[i * m + a] += lij * x[j * m + a];
            }
        }
    }
    Ok(DisagreementState { epsilon, m })
}

/// Quadratic certificate `V = 1/2 eps^T (I_N (x) P) eps`.
pub fn quadratic_lyapunov<T: Scalar>(p: &Matrix<T>, eps: &[T]) -> Result<T, ControlError> {
    let m = p.rows();
    if !p.is_square() || m == 0 || eps.len() % m != 0 {
        return Err(ControlError::DimensionMismatch {
            what: "disagreement blocks",
            expected: m,
            got: eps.len(),
        });
    }
    let half = cast::<T>(0.5);
    let mut total = T::zero();
    for block in eps.chunks(m) {
        let pe = p.mul_vec(block);
        let quad = block
            .iter()
            .zip(&pe)
            .fold(T::zero(), |acc, (&e, &pe)| acc + e * pe);
        total += half * quad;
    }
    Ok(total)
}

/// Antiderivative of `s -> clamp(k s, lo, hi)` evaluated at `s`; the
/// definite integral over `[0, e]` is `F(e) - F(0)`.
fn sat_antiderivative<T: Scalar>(s: T, k: T, lo: T, hi: T) -> T {
    let half = cast::<T>(0.5);
    let s_lo = lo / k;
    let s_hi = hi / k;
    if s < s_lo {
        half * k * s_lo * s_lo + lo * (s - s_lo)
    } else if s > s_hi {
        half * k * s_hi * s_hi + hi * (s - s_hi)
    } else {
        half * k * s * s
    }
}

/// Integral certificate for the saturated loop:
/// `V = sum_i sum_axis p_a * int_0^{eps_ia} clamp(k_a s, lo_ia, hi_ia) ds`
/// in closed piecewise form.
///
/// Defined for diagonal positive `p` and `k` only (the certificate integrates
/// one scalar channel at a time); non-diagonal inputs are rejected. When the
/// bounds straddle zero the result is positive definite in `eps`, and when no
/// bound is active it reduces to the quadratic form `1/2 p k eps^2` per
/// channel.
pub fn saturated_lyapunov<T: Scalar>(
    p: &Matrix<T>,
    k: &Matrix<T>,
    bounds: &Bounds<T>,
    eps: &[T],
) -> Result<T, ControlError> {
    let m = p.rows();
    let diag_tol = cast::<T>(1e-12);
    if !p.is_diagonal(diag_tol * p.max_abs().max(T::one())) {
        return Err(ControlError::NonDiagonal { what: "p" });
    }
    if k.rows() != m || !k.is_diagonal(diag_tol * k.max_abs().max(T::one())) {
        return Err(ControlError::NonDiagonal { what: "k" });
    }
    if bounds.axes() != m {
        return Err(ControlError::DimensionMismatch {
            what: "bounds axes",
            expected: m,
            got: bounds.axes(),
        });
    }
    if eps.len() != bounds.n_robots() * m {
        return Err(ControlError::DimensionMismatch {
            what: "disagreement length",
            expected: bounds.n_robots() * m,
            got: eps.len(),
        });
    }
    for a in 0..m {
        if p[(a, a)] <= T::zero() {
            return Err(ControlError::NonPositiveDiagonal { what: "p", index: a });
        }
        if k[(a, a)] <= T::zero() {
            return Err(ControlError::NonPositiveDiagonal { what: "k", index: a });
        }
    }
    let mut total = T::zero();
    for (i, block) in eps.chunks(m).enumerate() {
        let lo = bounds.lower(i);
        let hi = bounds.upper(i);
        for a in 0..m {
            let ka = k[(a, a)];
            let f_e = sat_antiderivative(block[a], ka, lo[a], hi[a]);
            let f_0 = sat_antiderivative(T::zero(), ka, lo[a], hi[a]);
            total += p[(a, a)] * (f_e - f_0);
        }
    }
    Ok(total)
}

/// Instantaneous running cost split into its state and effort parts.
#[derive(Debug, Clone, PartialEq)]
pub struct CostRate<T> {
    pub total: T,
    pub state_part: T,
    pub effort_part: T,
    pub per_robot: Vec<T>,
}

/// `1/2 (eps^T (I (x) Q) eps + u^T (I (x) R) u)` with the per-robot split.
pub fn cost_rate<T: Scalar>(
    eps: &[T],
    u: &[T],
    q: &Matrix<T>,
    r: &Matrix<T>,
) -> Result<CostRate<T>, ControlError> {
    let m = q.rows();
    let r_dim = r.rows();
    if m == 0 || eps.len() % m != 0 {
        return Err(ControlError::DimensionMismatch {
            what: "disagreement blocks",
            expected: m,
            got: eps.len(),
        });
    }
    let n = eps.len() / m;
    if r_dim == 0 || u.len() != n * r_dim {
        return Err(ControlError::DimensionMismatch {
            what: "control blocks",
            expected: n * r_dim,
            got: u.len(),
        });
    }
    let half = cast::<T>(0.5);
    let quad = |mat: &Matrix<T>, v: &[T]| {
        let mv = mat.mul_vec(v);
        v.iter()
            .zip(&mv)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    };
    let mut state_part = T::zero();
    let mut effort_part = T::zero();
    let mut per_robot = Vec::with_capacity(n);
    for i in 0..n {
        let s = half * quad(q, &eps[i * m..(i + 1) * m]);
        let e = half * quad(r, &u[i * r_dim..(i + 1) * r_dim]);
        state_part += s;
        effort_part += e;
        per_robot.push(s + e);
    }
    Ok(CostRate {
        total: state_part + effort_part,
        state_part,
        effort_part,
        per_robot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matops::kron;

    fn scalar_law(q: f64, r: f64, n: usize, lo: f64, hi: f64) -> ControlLaw<f64> {
        synthesize(
            &RobotModel::single_integrator(1),
            &Matrix::from_diag(&[q]),
            &Matrix::from_diag(&[r]),
            &Bounds::uniform(n, 1, lo, hi).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn synthesized_gains_match_closed_forms() {
        // a = 0, b = I: K = sqrt(q/r) I.
        let cases = [(3.0, 1.0, 3.0_f64.sqrt()), (20.0, 1.0, 20.0_f64.sqrt()), (1.0, 5.0, 0.2_f64.sqrt())];
        for (q, r, want) in cases {
            let law = synthesize(
                &RobotModel::single_integrator(2),
                &Matrix::identity(2).scale(q),
                &Matrix::identity(2).scale(r),
                &Bounds::uniform(4, 2, -0.5, 0.5).unwrap(),
            )
            .unwrap();
            assert!(law.k.approx_eq(&Matrix::identity(2).scale(want), 1e-9));
            // K and R^-1 B^T P must agree by construction.
            let k_check = &(&law.r.inverse().unwrap() * &law.model.b().transpose()) * &law.p;
            assert!(law.k.max_abs_diff(&k_check) <= 1e-10);
        }
    }

    #[test]
    fn gain_invariant_under_shared_weight_scaling() {
        let base = scalar_law(3.0, 1.0, 2, -1.0, 1.0);
        let scaled = scalar_law(21.0, 7.0, 2, -1.0, 1.0);
        assert!(base.k.max_abs_diff(&scaled.k) < 1e-9);
    }

    #[test]
    fn unconstrained_control_single_neighbor() {
        let law = synthesize(
            &RobotModel::<f64>::single_integrator(2),
            &Matrix::identity(2).scale(3.0),
            &Matrix::identity(2),
            &Bounds::uniform(2, 2, -0.5, 0.5).unwrap(),
        )
        .unwrap();
        let origin = [0.0, 0.0];
        let u = unconstrained_control(&law, &[0.3, 0.0], &[(1.0, &origin)]);
        assert!((u[0] - (-0.5196152422706632)).abs() < 1e-12);
        assert!(u[1].abs() < 1e-15);
    }

    #[test]
    fn unconstrained_control_edge_cases() {
        let law = scalar_law(3.0, 1.0, 2, -0.5, 0.5);
        assert_eq!(unconstrained_control(&law, &[0.7], &[]), vec![0.0]);
        // Symmetric neighbors cancel.
        let left = [-1.0];
        let right = [1.0];
        let u = unconstrained_control(&law, &[0.0], &[(1.0, &left[..]), (1.0, &right[..])]);
        assert_eq!(u, vec![0.0]);
    }

    #[test]
    fn saturate_clamps_componentwise() {
        let lo = [-0.5, -0.11];
        let hi = [0.5, 0.11];
        assert_eq!(saturate(&[0.2, -0.3], &lo, &hi), vec![0.2, -0.11]);
        assert_eq!(saturate(&[-0.9, 0.4], &lo, &hi), vec![-0.5, 0.11]);
        // Idempotent.
        let once = saturate(&[-0.9, 0.4], &lo, &hi);
        assert_eq!(saturate(&once, &lo, &hi), once);
    }

    #[test]
    fn disagreement_matches_kronecker_oracle() {
        let topo = Topology::<f64>::default_four_robot();
        let x = [-0.2, -0.1, 0.0, 0.3];
        let d = disagreement(&topo, &x, 1).unwrap();
        let oracle = kron(topo.laplacian(), &Matrix::identity(1)).mul_vec(&x);
        for (got, want) in d.epsilon().iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-15);
        }
        // Root robot 2 listens to nobody: its block is zero.
        assert_eq!(d.robot(2), &[0.0]);
    }

    #[test]
    fn disagreement_two_robot_example() {
        let topo = Topology::<f64>::complete(2);
        let d = disagreement(&topo, &[1.0, 0.0], 1).unwrap();
        assert_eq!(d.epsilon(), &[1.0, -1.0]);
        // Coincident robots disagree nowhere.
        let zero = disagreement(&topo, &[0.4, 0.4], 1).unwrap();
        assert_eq!(zero.epsilon(), &[0.0, 0.0]);
    }

    #[test]
    fn quadratic_lyapunov_examples() {
        let p = Matrix::from_diag(&[3.0_f64.sqrt()]);
        let v = quadratic_lyapunov(&p, &[1.0, -1.0]).unwrap();
        assert!((v - 3.0_f64.sqrt()).abs() < 1e-15);
        assert_eq!(quadratic_lyapunov(&p, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_lyapunov_matches_stacked_oracle() {
        let p = Matrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let eps = [0.4, -1.0, 0.2, 0.9];
        let got = quadratic_lyapunov(&p, &eps).unwrap();
        let stacked = kron(&Matrix::identity(2), &p);
        let pe = stacked.mul_vec(&eps);
        let want = 0.5 * eps.iter().zip(&pe).map(|(a, b)| a * b).sum::<f64>();
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn saturated_lyapunov_worked_example() {
        // p = k = 1, bounds +-0.5, eps = 1:
        // int_0^1 clamp(s) ds = 1/8 + 1/4 = 0.375.
        let p = Matrix::<f64>::from_diag(&[1.0]);
        let bounds = Bounds::uniform(1, 1, -0.5, 0.5).unwrap();
        let v = saturated_lyapunov(&p, &p, &bounds, &[1.0]).unwrap();
        assert!((v - 0.375).abs() < 1e-15);
        // Symmetric for negative disagreement with straddling bounds.
        let v_neg = saturated_lyapunov(&p, &p, &bounds, &[-1.0]).unwrap();
        assert!((v_neg - 0.375).abs() < 1e-15);
        assert_eq!(
            saturated_lyapunov(&p, &p, &bounds, &[0.0]).unwrap(),
            0.0
        );
    }

    #[test]
    fn saturated_lyapunov_reduces_to_quadratic_when_inactive() {
        let p = Matrix::<f64>::from_diag(&[2.0]);
        let k = Matrix::from_diag(&[0.5]);
        let bounds = Bounds::uniform(1, 1, -10.0, 10.0).unwrap();
        let e = 0.7;
        let v = saturated_lyapunov(&p, &k, &bounds, &[e]).unwrap();
        assert!((v - 0.5 * 2.0 * 0.5 * e * e).abs() < 1e-15);
    }

    #[test]
    fn saturated_lyapunov_zero_bounds_vanish() {
        let p = Matrix::from_diag(&[1.0]);
        let bounds = Bounds::uniform(2, 1, 0.0, 0.0).unwrap();
        assert_eq!(
            saturated_lyapunov(&p, &p, &bounds, &[3.0, -2.0]).unwrap(),
            0.0
        );
    }

    #[test]
    fn saturated_lyapunov_rejects_non_diagonal() {
        let p = Matrix::from_rows(&[vec![1.0, 0.1], vec![0.1, 1.0]]).unwrap();
        let k = Matrix::identity(2);
        let bounds = Bounds::uniform(1, 2, -1.0, 1.0).unwrap();
        assert!(matches!(
            saturated_lyapunov(&p, &k, &bounds, &[0.1, 0.1]),
            Err(ControlError::NonDiagonal { what: "p" })
        ));
        let neg = Matrix::from_diag(&[-1.0, 1.0]);
        assert!(matches!(
            saturated_lyapunov(&neg, &k, &bounds, &[0.1, 0.1]),
            Err(ControlError::NonPositiveDiagonal { what: "p", index: 0 })
        ));
    }

    #[test]
    fn cost_rate_examples() {
        let q = Matrix::<f64>::from_diag(&[3.0]);
        let r = Matrix::from_diag(&[1.0]);
        let all_zero = cost_rate(&[0.0], &[0.0], &q, &r).unwrap();
        assert_eq!(all_zero.total, 0.0);

        let state_only = cost_rate(&[1.0], &[0.0], &q, &r).unwrap();
        assert!((state_only.total - 1.5).abs() < 1e-15);
        assert_eq!(state_only.effort_part, 0.0);

        let effort_only = cost_rate(&[0.0], &[0.5], &q, &r).unwrap();
        assert!((effort_only.total - 0.125).abs() < 1e-15);
        assert_eq!(effort_only.state_part, 0.0);

        let both = cost_rate(&[1.0, 0.0], &[0.0, 0.5], &q, &r).unwrap();
        assert!((both.per_robot[0] - 1.5).abs() < 1e-15);
        assert!((both.per_robot[1] - 0.125).abs() < 1e-15);
        assert!((both.total - both.state_part - both.effort_part).abs() < 1e-15);
    }

    #[test]
    fn bounds_validation() {
        assert!(matches!(
            Bounds::uniform(2, 1, 0.5, -0.5),
            Err(ControlError::BoundsInverted { robot: 0, axis: 0 })
        ));
        assert!(matches!(
            Bounds::per_robot(vec![vec![0.0]], vec![vec![f64::NAN]]),
            Err(ControlError::NonFiniteBound)
        ));
        assert!(Bounds::uniform(2, 1, 0.0, 0.0).is_ok());
    }

    #[test]
    fn translation_shifts_leave_the_law_unchanged() {
        let law = scalar_law(3.0, 1.0, 2, -0.5, 0.5);
        let shift = 17.3;
        let neighbor = [0.1];
        let shifted_neighbor = [0.1 + shift];
        let u = unconstrained_control(&law, &[0.4], &[(1.0, &neighbor[..])]);
        let u_shift =
            unconstrained_control(&law, &[0.4 + shift], &[(1.0, &shifted_neighbor[..])]);
        assert!((u[0] - u_shift[0]).abs() < 1e-12);
    }
}
