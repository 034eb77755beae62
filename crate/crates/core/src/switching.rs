//! Saturation switching analysis.
//!
//! A robot whose raw control starts outside its input box applies the bound
//! value until the raw control re-enters the box. For one scalar channel with
//! gain `k > 0`, initial disagreement `x0` and active bound `u`, the applied
//! trajectory is `x0 + u t` while the unsaturated loop would follow
//! `exp(-k t) x0`; the switching instant is the first positive root of
//!
//! `f(t) = u t + x0 - exp(-k t) x0`
//!
//! which this module brackets on a geometric grid and bisects. The matching
//! construction generalizes the same comparison to the stacked disagreement
//! dynamics of the whole network.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::Bounds;
use crate::matops::{self, expm, expm_with_integral, kron, Matrix};
use crate::scalar::{cast, Scalar};

/// Which side of the input box is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSide {
    Lower,
    Upper,
}

/// Operating regime of one control channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    SatMin,
    #[serde(rename = "linear_interior")]
    Linear,
    SatMax,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SwitchingError {
    #[error("channel is not saturated at {side:?}: raw control {raw} vs bound {bound}")]
    SaturationInactive {
        side: BoundSide,
        raw: f64,
        bound: f64,
    },
    #[error("gain must be positive, got {k}")]
    NonPositiveGain { k: f64 },
    #[error("no switching time found in (0, {t_max}]")]
    NoRoot { t_max: f64 },
    #[error("{what}: expected length {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    MatOps(#[from] matops::MatOpsError),
}

/// Smallest admissible switching time considered by the root search; the
/// comparison function has a trivial root at t = 0 that must be skipped.
const ROOT_MIN: f64 = 1e-6;
/// Horizon beyond which the search reports no root.
const ROOT_MAX: f64 = 100.0;
/// Absolute residual at which the bisection accepts a root.
const ROOT_TOL: f64 = 1e-10;
/// Default classification margin for regime detection.
pub const REGIME_TOL: f64 = 1e-9;

/// Predicted exit from saturation for one robot channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwitchPrediction<T> {
    pub robot: usize,
    pub axis: usize,
    pub side: BoundSide,
    pub t_s: T,
    pub residual: T,
}

/// Observed regime transition in a simulated trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeEvent<T> {
    pub time: T,
    pub robot: usize,
    pub axis: usize,
    pub from: Regime,
    pub to: Regime,
}

/// Root of the switching comparison together with the residual left by the
/// bisection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchRoot<T> {
    pub t: T,
    pub residual: T,
}

fn check_active<T: Scalar>(
    k: T,
    x0: T,
    u_bound: T,
    side: BoundSide,
) -> Result<(), SwitchingError> {
    if k <= T::zero() {
        return Err(SwitchingError::NonPositiveGain {
            k: k.to_f64().unwrap_or(f64::NAN),
        });
    }
    let raw = -k * x0;
    let active = match side {
        BoundSide::Lower => raw < u_bound,
        BoundSide::Upper => raw > u_bound,
    };
    if !active {
        return Err(SwitchingError::SaturationInactive {
            side,
            raw: raw.to_f64().unwrap_or(f64::NAN),
            bound: u_bound.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// Comparison between the saturated trajectory and the unsaturated loop.
/// Negating both `x0` and `u_bound` negates every intermediate exactly, so
/// the search below is bitwise symmetric under that sign flip.
fn switch_fn<T: Scalar>(t: T, k: T, x0: T, u_bound: T) -> T {
    u_bound * t + x0 - (-k * t).exp() * x0
}

/// First positive root of the switching comparison for one scalar channel.
///
/// Requires the channel to actually start saturated at `side` (the raw
/// control `-k x0` lies strictly outside the bound). Searches `(0, 100]`;
/// a channel that never switches back reports [`SwitchingError::NoRoot`],
/// which happens for instance when the active bound is zero.
pub fn solve_switch_time<T: Scalar>(
    k: T,
    x0: T,
    u_bound: T,
    side: BoundSide,
) -> Result<SwitchRoot<T>, SwitchingError> {
    check_active(k, x0, u_bound, side)?;
    let tol = cast::<T>(ROOT_TOL);
    let f = |t: T| switch_fn(t, k, x0, u_bound);

    // Geometric sweep to bracket the first sign change. The comparison is
    // unimodal after t = 0 (its slope u + k x0 exp(-k t) is monotone), so the
    // first sign change on the grid brackets the first root.
    let grow = cast::<T>(1.5);
    let t_max = cast::<T>(ROOT_MAX);
    let mut a = cast::<T>(ROOT_MIN);
    let mut fa = f(a);
    if fa.abs() <= tol {
        return Ok(SwitchRoot {
            t: a,
            residual: fa.abs(),
        });
    }
    let mut bracket = None;
    while a < t_max {
        let b = (a * grow).min(t_max);
        let fb = f(b);
        if fa * fb <= T::zero() {
            bracket = Some((a, fa, b, fb));
            break;
        }
        a = b;
        fa = fb;
    }
    let (mut a, mut fa, mut b, _fb) = bracket.ok_or(SwitchingError::NoRoot { t_max: ROOT_MAX })?;

    let half = cast::<T>(0.5);
    for _ in 0..200 {
        let mid = half * (a + b);
        let fm = f(mid);
        if fm.abs() <= tol {
            return Ok(SwitchRoot {
                t: mid,
                residual: fm.abs(),
            });
        }
        if fa * fm <= T::zero() {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    Err(SwitchingError::NoRoot { t_max: ROOT_MAX })
}

/// Instant at which the raw control of a saturated channel re-enters the
/// input box, in closed form.
///
/// While saturated the channel integrates the constant bound, so the raw
/// control is `-k (x0 + u t)`; it meets the bound again at
/// `t = (-u/k - x0) / u`, positive whenever the channel starts saturated.
pub fn bound_reentry_time<T: Scalar>(
    k: T,
    x0: T,
    u_bound: T,
    side: BoundSide,
) -> Result<T, SwitchingError> {
    check_active(k, x0, u_bound, side)?;
    Ok((-u_bound / k - x0) / u_bound)
}

/// Stacked comparison between fully saturated propagation and the
/// unsaturated closed loop.
///
/// The saturated branch integrates `eps' = a_stacked eps + input_map u` with
/// the constant extreme input, the linear branch integrates
/// `eps' = closed_loop eps`, and the residual at `t` is the infinity norm of
/// the gap between them.
#[derive(Debug, Clone)]
pub struct MatchingProblem<T> {
    a_stacked: Matrix<T>,
    input_map: Matrix<T>,
    closed_loop: Matrix<T>,
    eps0_saturated: Vec<T>,
    eps0: Vec<T>,
    u_extreme: Vec<T>,
}

impl<T: Scalar> MatchingProblem<T> {
    pub fn new(
        a_stacked: Matrix<T>,
        input_map: Matrix<T>,
        closed_loop: Matrix<T>,
        eps0_saturated: Vec<T>,
        eps0: Vec<T>,
        u_extreme: Vec<T>,
    ) -> Result<Self, SwitchingError> {
        let d = a_stacked.rows();
        if !a_stacked.is_square() || closed_loop.rows() != d || !closed_loop.is_square() {
            return Err(SwitchingError::DimensionMismatch {
                what: "closed loop matrix",
                expected: d,
                got: closed_loop.rows(),
            });
        }
        if input_map.rows() != d {
            return Err(SwitchingError::DimensionMismatch {
                what: "input map rows",
                expected: d,
                got: input_map.rows(),
            });
        }
        if eps0_saturated.len() != d || eps0.len() != d {
            return Err(SwitchingError::DimensionMismatch {
                what: "initial disagreement",
                expected: d,
                got: eps0_saturated.len().min(eps0.len()),
            });
        }
        if u_extreme.len() != input_map.cols() {
            return Err(SwitchingError::DimensionMismatch {
                what: "extreme input",
                expected: input_map.cols(),
                got: u_extreme.len(),
            });
        }
        Ok(Self {
            a_stacked,
            input_map,
            closed_loop,
            eps0_saturated,
            eps0,
            u_extreme,
        })
    }

    /// Builds the stacked matrices from network structure: `I (x) A`,
    /// `L (x) B` and `I (x) A - L (x) B K`.
    pub fn from_network(
        laplacian: &Matrix<T>,
        a: &Matrix<T>,
        b: &Matrix<T>,
        gain: &Matrix<T>,
        eps0_saturated: Vec<T>,
        eps0: Vec<T>,
        u_extreme: Vec<T>,
    ) -> Result<Self, SwitchingError> {
        let n = laplacian.rows();
        let eye = Matrix::identity(n);
        let a_stacked = kron(&eye, a);
        let input_map = kron(laplacian, b);
        let closed_loop = &a_stacked - &kron(laplacian, &(b * gain));
        Self::new(
            a_stacked,
            input_map,
            closed_loop,
            eps0_saturated,
            eps0,
            u_extreme,
        )
    }

    /// Infinity norm of the gap between the two branches at time `t`.
    pub fn matching_residual(&self, t: T) -> Result<T, SwitchingError> {
        let (phi, integral) = expm_with_integral(&self.a_stacked, t)?;
        let forced = integral.mul_vec(&self.input_map.mul_vec(&self.u_extreme));
        let saturated: Vec<T> = phi
            .mul_vec(&self.eps0_saturated)
            .iter()
            .zip(&forced)
            .map(|(&h, &f)| h + f)
            .collect();
        let linear = expm(&self.closed_loop.scale(t))?.mul_vec(&self.eps0);
        Ok(saturated
            .iter()
            .zip(&linear)
            .fold(T::zero(), |acc, (&s, &l)| acc.max((s - l).abs())))
    }
}

fn classify<T: Scalar>(u: T, lo: T, hi: T, tol: T) -> Regime {
    if u <= lo + tol {
        Regime::SatMin
    } else if u >= hi - tol {
        Regime::SatMax
    } else {
        Regime::Linear
    }
}

/// Scans a raw-control history (one stacked row per sample) and reports
/// every regime transition per robot channel. The first sample sets the
/// initial regime and emits no event.
pub fn detect_regimes<T: Scalar>(
    times: &[T],
    u_raw: &[Vec<T>],
    bounds: &Bounds<T>,
    tol: T,
) -> Result<Vec<RegimeEvent<T>>, SwitchingError> {
    if times.len() != u_raw.len() {
        return Err(SwitchingError::DimensionMismatch {
            what: "sample count",
            expected: times.len(),
            got: u_raw.len(),
        });
    }
    let n = bounds.n_robots();
    let r_dim = bounds.axes();
    let width = n * r_dim;
    for row in u_raw {
        if row.len() != width {
            return Err(SwitchingError::DimensionMismatch {
                what: "stacked control row",
                expected: width,
                got: row.len(),
            });
        }
    }
    let Some(first) = u_raw.first() else {
        return Ok(Vec::new());
    };
    let class_row = |row: &[T]| -> Vec<Regime> {
        (0..width)
            .map(|idx| {
                let robot = idx / r_dim;
                let axis = idx % r_dim;
                classify(
                    row[idx],
                    bounds.lower(robot)[axis],
                    bounds.upper(robot)[axis],
                    tol,
                )
            })
            .collect()
    };
    let mut prev = class_row(first);
    let mut events = Vec::new();
    for (step, row) in u_raw.iter().enumerate().skip(1) {
        let cur = class_row(row);
        for idx in 0..width {
            if cur[idx] != prev[idx] {
                events.push(RegimeEvent {
                    time: times[step],
                    robot: idx / r_dim,
                    axis: idx % r_dim,
                    from: prev[idx],
                    to: cur[idx],
                });
            }
        }
        prev = cur;
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Root of -0.5 t + 1 - exp(-t), found independently by high-precision
    // Newton iteration.
    const T_S_HALF_BOUND: f64 = 1.5936242600400401;

    #[test]
    fn switch_time_matches_frozen_root() {
        let root = solve_switch_time(1.0, 1.0, -0.5, BoundSide::Lower).unwrap();
        assert!((root.t - T_S_HALF_BOUND).abs() < 1e-8);
        assert!(root.residual <= 1e-10);
    }

    #[test]
    fn switch_time_sign_flip_is_bitwise() {
        let lower = solve_switch_time::<f64>(2.0, 0.7, -0.25, BoundSide::Lower).unwrap();
        let upper = solve_switch_time::<f64>(2.0, -0.7, 0.25, BoundSide::Upper).unwrap();
        assert_eq!(lower.t.to_bits(), upper.t.to_bits());
        assert_eq!(lower.residual.to_bits(), upper.residual.to_bits());
    }

    #[test]
    fn switch_time_requires_active_saturation() {
        // Raw control -k x0 = -0.1 sits inside [-0.5, 0.5].
        assert!(matches!(
            solve_switch_time(1.0, 0.1, -0.5, BoundSide::Lower),
            Err(SwitchingError::SaturationInactive { .. })
        ));
        assert!(matches!(
            solve_switch_time(-1.0, 1.0, -0.5, BoundSide::Lower),
            Err(SwitchingError::NonPositiveGain { .. })
        ));
    }

    #[test]
    fn zero_bound_never_switches_back() {
        // With bound 0 the channel holds still and the comparison stays
        // positive: x0 (1 - exp(-k t)) > 0 for every t > 0.
        assert!(matches!(
            solve_switch_time(1.0, 1.0, 0.0, BoundSide::Lower),
            Err(SwitchingError::NoRoot { .. })
        ));
    }

    #[test]
    fn reentry_time_closed_form() {
        // k = 1, x0 = 1, bound -0.5: raw control -(1 - 0.5 t) reaches -0.5
        // at t = 1.
        let t = bound_reentry_time::<f64>(1.0, 1.0, -0.5, BoundSide::Lower).unwrap();
        assert!((t - 1.0).abs() < 1e-15);
        let t_up = bound_reentry_time::<f64>(1.0, -1.0, 0.5, BoundSide::Upper).unwrap();
        assert!((t_up - 1.0).abs() < 1e-15);
        assert!(matches!(
            bound_reentry_time(1.0, 0.1, -0.5, BoundSide::Lower),
            Err(SwitchingError::SaturationInactive { .. })
        ));
    }

    #[test]
    fn reentry_precedes_switch_root() {
        // The raw control re-enters the box strictly before the saturated
        // trajectory overtakes the linear one.
        let t_exit = bound_reentry_time(1.0, 1.0, -0.5, BoundSide::Lower).unwrap();
        let root = solve_switch_time(1.0, 1.0, -0.5, BoundSide::Lower).unwrap();
        assert!(t_exit < root.t);
    }

    #[test]
    fn matching_residual_scalar_channel() {
        // One scalar channel: a = 0, input map 1, closed loop -k. The
        // residual at t is |u t + x0 - exp(-k t) x0|.
        let problem = MatchingProblem::<f64>::new(
            Matrix::from_diag(&[0.0]),
            Matrix::from_diag(&[1.0]),
            Matrix::from_diag(&[-1.0]),
            vec![1.0],
            vec![1.0],
            vec![-0.5],
        )
        .unwrap();
        assert!(problem.matching_residual(0.0).unwrap().abs() < 1e-14);
        let at_one = problem.matching_residual(1.0).unwrap();
        assert!((at_one - (0.5 - (-1.0_f64).exp())).abs() < 1e-12);
        // At the switching root the two branches agree.
        let root = solve_switch_time(1.0, 1.0, -0.5, BoundSide::Lower).unwrap();
        assert!(problem.matching_residual(root.t).unwrap() <= 1e-9);
    }

    #[test]
    fn matching_problem_from_network_shapes() {
        use crate::topology::Topology;
        let topo = Topology::<f64>::default_four_robot();
        let a = Matrix::zeros(1, 1);
        let b = Matrix::identity(1);
        let k = Matrix::from_diag(&[3.0_f64.sqrt()]);
        let eps0 = vec![0.1, -0.1, 0.0, 0.3];
        let problem = MatchingProblem::from_network(
            topo.laplacian(),
            &a,
            &b,
            &k,
            eps0.clone(),
            eps0,
            vec![-0.5, 0.5, -0.5, 0.5],
        )
        .unwrap();
        // Both branches start at the same state.
        assert!(problem.matching_residual(0.0).unwrap() < 1e-14);
    }

    #[test]
    fn regime_detection_reports_transitions() {
        let bounds = Bounds::uniform(1, 1, -0.5, 0.5).unwrap();
        let times = vec![0.0, 0.1, 0.2, 0.3];
        let u_raw = vec![vec![-0.9], vec![-0.50000000001], vec![-0.2], vec![0.7]];
        let events = detect_regimes(&times, &u_raw, &bounds, 1e-9).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].time, 0.2);
        assert_eq!(events[0].from, Regime::SatMin);
        assert_eq!(events[0].to, Regime::Linear);
        assert_eq!(events[1].time, 0.3);
        assert_eq!(events[1].to, Regime::SatMax);
    }

    #[test]
    fn regime_detection_zero_bounds_stays_constant() {
        let bounds = Bounds::uniform(1, 1, 0.0, 0.0).unwrap();
        let times = vec![0.0, 0.1, 0.2];
        let u_raw = vec![vec![0.0]; 3];
        let events = detect_regimes(&times, &u_raw, &bounds, 1e-9).unwrap();
        assert!(events.is_empty());
    }

    #[test]
    fn regime_detection_empty_history() {
        let bounds = Bounds::uniform(2, 1, -1.0, 1.0).unwrap();
        let events = detect_regimes::<f64>(&[], &[], &bounds, 1e-9).unwrap();
        assert!(events.is_empty());
    }
}
