//! Fixed-step simulation of the saturated consensus loop.
//!
//! `simulate` integrates every robot with classical 4-stage Runge-Kutta at
//! step `dt` while the control is recomputed only every `control_period`
//! (zero-order hold) from whatever neighbor samples the communication
//! channels deliver. For the shipped drift-free model the integrator is
//! exact between control ticks, since the dynamics are piecewise constant.
//!
//! The run always continues to `t_end`; reaching the consensus tolerance is
//! recorded (first hit) but does not stop the run, so cost tails and
//! certificate traces cover the full horizon. Runs are bitwise deterministic
//! for a fixed scenario including its seed.

mod channel;
mod log;
mod scenario;

pub use log::TrajectoryLog;
pub use scenario::{
    LawVariant, LinkSetting, NetworkModel, Scenario, ValidationIssue, MAX_DELAY_PERIODS,
};

use thiserror::Error;

use crate::control::{self, ControlError, ControlLaw, RobotModel};
use crate::matops::Matrix;
use crate::scalar::{cast, Scalar};
use crate::switching::{self, BoundSide, SwitchPrediction, SwitchingError};
use crate::topology::Topology;

use channel::Network;

/// State magnitude treated as numeric divergence.
pub const BLOWUP_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("scenario validation failed with {} issue(s)", .0.len())]
    InvalidScenario(Vec<ValidationIssue>),
    #[error("control synthesis or evaluation failed: {0}")]
    Control(#[from] ControlError),
    #[error("switching analysis failed: {0}")]
    Switching(#[from] SwitchingError),
    #[error("state blew up at t = {t}: |x| exceeded {BLOWUP_LIMIT:e}")]
    Blowup { t: f64 },
}

/// True iff every pairwise Euclidean distance is within `tol`.
pub fn consensus_reached<T: Scalar>(x: &[T], m: usize, tol: T) -> bool {
    assert!(m > 0 && x.len() % m == 0, "consensus_reached: block size");
    let n = x.len() / m;
    let tol_sq = tol * tol;
    for i in 0..n {
        for j in (i + 1)..n {
            let dist_sq = (0..m).fold(T::zero(), |acc, a| {
                let d = x[i * m + a] - x[j * m + a];
                acc + d * d
            });
            if dist_sq > tol_sq {
                return false;
            }
        }
    }
    true
}

/// Cumulative cost quadrature over a recorded trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTrace<T> {
    /// Running total, one entry per sample, starting at 0.
    pub j_cumulative: Vec<T>,
    /// `[sample][robot]` running per-robot shares.
    pub j_per_robot: Vec<Vec<T>>,
    pub state_integral: T,
    pub effort_integral: T,
}

/// Trapezoidal quadrature of the running cost along recorded samples.
///
/// Also usable on externally loaded trajectories (CSV round trips): only the
/// topology, the weights and the recorded samples enter.
pub fn accumulate_cost<T: Scalar>(
    topology: &Topology<T>,
    q: &Matrix<T>,
    r: &Matrix<T>,
    times: &[T],
    positions: &[Vec<T>],
    u_applied: &[Vec<T>],
) -> Result<CostTrace<T>, SimError> {
    assert_eq!(times.len(), positions.len(), "accumulate_cost: sample count");
    assert_eq!(times.len(), u_applied.len(), "accumulate_cost: sample count");
    let m = q.rows();
    let n = topology.n();
    let half = cast::<T>(0.5);

    let mut rates = Vec::with_capacity(times.len());
    for (x, u) in positions.iter().zip(u_applied) {
        let eps = control::disagreement(topology, x, m)?;
        rates.push(control::cost_rate(eps.epsilon(), u, q, r)?);
    }

    let mut j_cumulative = Vec::with_capacity(times.len());
    let mut j_per_robot = Vec::with_capacity(times.len());
    let mut total = T::zero();
    let mut per_robot = vec![T::zero(); n];
    let mut state_integral = T::zero();
    let mut effort_integral = T::zero();
    for s in 0..times.len() {
        if s > 0 {
            let h = times[s] - times[s - 1];
            let prev = &rates[s - 1];
            let cur = &rates[s];
            total += h * half * (prev.total + cur.total);
            state_integral += h * half * (prev.state_part + cur.state_part);
            effort_integral += h * half * (prev.effort_part + cur.effort_part);
            for i in 0..n {
                per_robot[i] += h * half * (prev.per_robot[i] + cur.per_robot[i]);
            }
        }
        j_cumulative.push(total);
        j_per_robot.push(per_robot.clone());
    }
    Ok(CostTrace {
        j_cumulative,
        j_per_robot,
        state_integral,
        effort_integral,
    })
}

fn rk4_step<T: Scalar>(model: &RobotModel<T>, x: &mut [T], u: &[T], dt: T) {
    let m = model.state_dim();
    let r_dim = model.input_dim();
    let n = x.len() / m;
    // Forcing term B u_i is constant over the step (zero-order hold).
    let mut forcing = Vec::with_capacity(n * m);
    for i in 0..n {
        forcing.extend(model.b().mul_vec(&u[i * r_dim..(i + 1) * r_dim]));
    }
    let deriv = |state: &[T]| -> Vec<T> {
        let mut dx = Vec::with_capacity(n * m);
        for i in 0..n {
            let ax = model.a().mul_vec(&state[i * m..(i + 1) * m]);
            dx.extend(
                ax.iter()
                    .zip(&forcing[i * m..(i + 1) * m])
                    .map(|(&a, &f)| a + f),
            );
        }
        dx
    };
    let half = cast::<T>(0.5);
    let sixth = T::one() / cast::<T>(6.0);
    let two = cast::<T>(2.0);
    let k1 = deriv(x);
    let x2: Vec<T> = x
        .iter()
        .zip(&k1)
        .map(|(&xv, &kv)| xv + half * dt * kv)
        .collect();
    let k2 = deriv(&x2);
    let x3: Vec<T> = x
        .iter()
        .zip(&k2)
        .map(|(&xv, &kv)| xv + half * dt * kv)
        .collect();
    let k3 = deriv(&x3);
    let x4: Vec<T> = x
        .iter()
        .zip(&k3)
        .map(|(&xv, &kv)| xv + dt * kv)
        .collect();
    let k4 = deriv(&x4);
    for i in 0..x.len() {
        x[i] += dt * sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
    }
}

fn compute_controls<T: Scalar>(
    scenario: &Scenario<T>,
    law: &ControlLaw<T>,
    x: &[T],
    estimates: &[Vec<(T, Vec<T>)>],
) -> (Vec<T>, Vec<T>) {
    let n = scenario.n();
    let m = scenario.m();
    let r_dim = scenario.r_dim();
    let mut raw = Vec::with_capacity(n * r_dim);
    match scenario.law_variant {
        LawVariant::PerRobot => {
            for i in 0..n {
                let x_i = &x[i * m..(i + 1) * m];
                let neighbors: Vec<(T, &[T])> = estimates[i]
                    .iter()
                    .map(|(w, v)| (*w, v.as_slice()))
                    .collect();
                raw.extend(control::unconstrained_control(law, x_i, &neighbors));
            }
        }
        LawVariant::LaplacianWeighted => {
            // Each robot's local disagreement estimate, then the stacked
            // law -(L (x) K) applied to the stack.
            let mut eps_hat = vec![T::zero(); n * m];
            for i in 0..n {
                for (w, x_j) in &estimates[i] {
                    for a in 0..m {
                        eps_hat[i * m + a] += *w * (x[i * m + a] - x_j[a]);
                    }
                }
            }
            let l = scenario.topology.laplacian();
            for i in 0..n {
                let mut acc = vec![T::zero(); m];
                for j in 0..n {
                    let lij = l[(i, j)];
                    if lij == T::zero() {
                        continue;
                    }
                    for a in 0..m {
                        acc[a] += lij * eps_hat[j * m + a];
                    }
                }
                raw.extend(law.k.mul_vec(&acc).iter().map(|&v| -v));
            }
        }
    }
    let mut applied = Vec::with_capacity(n * r_dim);
    for i in 0..n {
        applied.extend(control::saturate(
            &raw[i * r_dim..(i + 1) * r_dim],
            scenario.bounds.lower(i),
            scenario.bounds.upper(i),
        ));
    }
    (raw, applied)
}

fn saturation_flags<T: Scalar>(scenario: &Scenario<T>, raw: &[T]) -> Vec<bool> {
    let r_dim = scenario.r_dim();
    raw.iter()
        .enumerate()
        .map(|(idx, &v)| {
            let robot = idx / r_dim;
            let axis = idx % r_dim;
            v < scenario.bounds.lower(robot)[axis] || v > scenario.bounds.upper(robot)[axis]
        })
        .collect()
}

/// Scalar switch-time predictions for every channel that starts saturated.
///
/// The scalar comparison treats each channel's initial neighborhood
/// disagreement as the state integrated against the bound, which is exact
/// when the listened-to robots hold still and an approximation otherwise.
/// Requires a diagonal gain; skipped (with a warning) for coupled gains.
pub fn predict_switches<T: Scalar>(
    scenario: &Scenario<T>,
    law: &ControlLaw<T>,
) -> Result<(Vec<SwitchPrediction<T>>, Vec<String>), SimError> {
    let m = scenario.m();
    let mut warnings = Vec::new();
    if scenario.r_dim() != m {
        warnings.push(
            "switch predictions skipped: input and state dimensions differ".to_string(),
        );
        return Ok((Vec::new(), warnings));
    }
    let diag_tol = cast::<T>(1e-12) * law.k.max_abs().max(T::one());
    if !law.k.is_diagonal(diag_tol) {
        warnings.push("switch predictions skipped: gain matrix is not diagonal".to_string());
        return Ok((Vec::new(), warnings));
    }
    let eps0 = control::disagreement(&scenario.topology, &scenario.x0_stacked(), m)?;
    let mut predictions = Vec::new();
    for robot in 0..scenario.n() {
        for axis in 0..m {
            let k_a = law.k[(axis, axis)];
            let e = eps0.robot(robot)[axis];
            let raw = -k_a * e;
            let lo = scenario.bounds.lower(robot)[axis];
            let hi = scenario.bounds.upper(robot)[axis];
            let (side, bound) = if raw < lo {
                (BoundSide::Lower, lo)
            } else if raw > hi {
                (BoundSide::Upper, hi)
            } else {
                continue;
            };
            match switching::solve_switch_time(k_a, e, bound, side) {
                Ok(root) => predictions.push(SwitchPrediction {
                    robot,
                    axis,
                    side,
                    t_s: root.t,
                    residual: root.residual,
                }),
                Err(err) => warnings.push(format!(
                    "switch prediction for robot {robot} axis {axis} unavailable: {err}"
                )),
            }
        }
    }
    Ok((predictions, warnings))
}

/// Whether the integral certificate is defined for this law (diagonal
/// positive P and K acting on matching state/input dimensions).
fn saturated_certificate_defined<T: Scalar>(law: &ControlLaw<T>) -> bool {
    let m = law.model.state_dim();
    if law.model.input_dim() != m {
        return false;
    }
    let p_tol = cast::<T>(1e-12) * law.p.max_abs().max(T::one());
    let k_tol = cast::<T>(1e-12) * law.k.max_abs().max(T::one());
    if !law.p.is_diagonal(p_tol) || !law.k.is_diagonal(k_tol) {
        return false;
    }
    (0..m).all(|a| law.p[(a, a)] > T::zero() && law.k[(a, a)] > T::zero())
}

/// Runs one scenario to its horizon and returns the full log.
pub fn simulate<T: Scalar>(scenario: &Scenario<T>) -> Result<TrajectoryLog<T>, SimError> {
    let issues = scenario.validate();
    if !issues.is_empty() {
        return Err(SimError::InvalidScenario(issues));
    }
    let n = scenario.n();
    let m = scenario.m();
    let r_dim = scenario.r_dim();
    let law = control::synthesize(&scenario.model, &scenario.q, &scenario.r, &scenario.bounds)?;

    let mut warnings = Vec::new();
    if !scenario.topology.has_directed_spanning_tree() {
        warnings.push(
            "topology has no directed spanning tree; consensus is not guaranteed".to_string(),
        );
    }
    let (switch_predictions, prediction_warnings) = predict_switches(scenario, &law)?;
    warnings.extend(prediction_warnings);

    let ticks_per_period = scenario.ticks_per_period();
    let steps = scenario.step_count();
    let blowup = cast::<T>(BLOWUP_LIMIT);

    let mut network = Network::new(scenario);
    let mut x = scenario.x0_stacked();
    let mut u_raw_now = vec![T::zero(); n * r_dim];
    let mut u_applied_now = vec![T::zero(); n * r_dim];

    let mut times = Vec::with_capacity(steps + 1);
    let mut positions = Vec::with_capacity(steps + 1);
    let mut u_raw = Vec::with_capacity(steps + 1);
    let mut u_applied = Vec::with_capacity(steps + 1);
    let mut saturated = Vec::with_capacity(steps + 1);
    let mut consensus_time = None;

    for step in 0..=steps {
        let t = cast::<T>(step as f64) * scenario.dt;
        if step % ticks_per_period == 0 {
            let estimates = network.tick(&x);
            let (raw, applied) = compute_controls(scenario, &law, &x, estimates);
            u_raw_now = raw;
            u_applied_now = applied;
        }
        times.push(t);
        positions.push(x.clone());
        u_raw.push(u_raw_now.clone());
        u_applied.push(u_applied_now.clone());
        saturated.push(saturation_flags(scenario, &u_raw_now));
        if consensus_time.is_none() && consensus_reached(&x, m, scenario.consensus_tol) {
            consensus_time = Some(t);
        }
        if step == steps {
            break;
        }
        rk4_step(&scenario.model, &mut x, &u_applied_now, scenario.dt);
        if x.iter().any(|v| !v.is_finite() || v.abs() > blowup) {
            return Err(SimError::Blowup {
                t: (step + 1) as f64 * scenario.dt.to_f64().unwrap_or(f64::NAN),
            });
        }
    }

    let cost = accumulate_cost(
        &scenario.topology,
        &scenario.q,
        &scenario.r,
        &times,
        &positions,
        &u_applied,
    )?;

    let sat_defined = saturated_certificate_defined(&law);
    let mut v_quadratic = Vec::with_capacity(times.len());
    let mut v_saturated = Vec::with_capacity(times.len());
    for sample in &positions {
        let eps = control::disagreement(&scenario.topology, sample, m)?;
        v_quadratic.push(control::quadratic_lyapunov(&law.p, eps.epsilon())?);
        if sat_defined {
            v_saturated.push(control::saturated_lyapunov(
                &law.p,
                &law.k,
                &scenario.bounds,
                eps.epsilon(),
            )?);
        } else {
            v_saturated.push(T::nan());
        }
    }
    if !sat_defined {
        warnings.push(
            "saturated certificate undefined for non-diagonal P or K; trace is NaN".to_string(),
        );
    }

    let regime_events = switching::detect_regimes(
        &times,
        &u_raw,
        &scenario.bounds,
        cast::<T>(switching::REGIME_TOL),
    )?;

    let final_agreement = consensus_time.map(|_| {
        let last = positions.last().expect("at least the initial sample");
        (0..m)
            .map(|a| {
                let sum = (0..n).fold(T::zero(), |acc, i| acc + last[i * m + a]);
                sum / cast::<T>(n as f64)
            })
            .collect::<Vec<T>>()
    });

    let v_quad_initial = v_quadratic.first().copied().unwrap_or_else(T::zero);
    Ok(TrajectoryLog {
        times,
        positions,
        u_raw,
        u_applied,
        saturated,
        v_quadratic,
        v_saturated,
        j_cumulative: cost.j_cumulative,
        j_per_robot: cost.j_per_robot,
        state_integral: cost.state_integral,
        effort_integral: cost.effort_integral,
        consensus_time,
        final_agreement,
        regime_events,
        switch_predictions,
        v_quad_initial,
        warnings,
        n,
        m,
        r_dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::Bounds;

    fn base_scenario() -> Scenario<f64> {
        Scenario {
            model: RobotModel::single_integrator(1),
            topology: Topology::default_four_robot(),
            x0: vec![vec![-0.2], vec![-0.1], vec![0.0], vec![0.3]],
            q: Matrix::from_diag(&[3.0]),
            r: Matrix::from_diag(&[1.0]),
            bounds: Bounds::uniform(4, 1, -0.5, 0.5).unwrap(),
            control_period: 0.1,
            dt: 0.01,
            t_end: 20.0,
            consensus_tol: 1e-3,
            network: NetworkModel::perfect(),
            seed: 42,
            law_variant: LawVariant::PerRobot,
        }
    }

    #[test]
    fn consensus_reached_examples() {
        assert!(consensus_reached(&[0.4, 0.4, 0.4], 1, 1e-9));
        assert!(!consensus_reached(&[0.0, 0.1], 1, 0.05));
        assert!(consensus_reached(&[0.0, 0.04, 0.02], 1, 0.05));
        // 2-D distance is Euclidean, not per-axis.
        assert!(!consensus_reached(&[0.0, 0.0, 0.04, 0.04], 2, 0.05));
    }

    #[test]
    fn coincident_robots_stay_put_with_zero_cost() {
        let mut s = base_scenario();
        s.x0 = vec![vec![0.5]; 4];
        s.t_end = 1.0;
        let log = simulate(&s).unwrap();
        assert_eq!(log.consensus_time, Some(0.0));
        assert_eq!(log.j_total(), 0.0);
        for sample in &log.positions {
            assert_eq!(sample, &vec![0.5; 4]);
        }
        for row in &log.u_applied {
            assert_eq!(row, &vec![0.0; 4]);
        }
        assert!(log.regime_events.is_empty());
        assert!(log.switch_predictions.is_empty());
    }

    #[test]
    fn reference_run_reaches_consensus() {
        let log = simulate(&base_scenario()).unwrap();
        let t = log.consensus_time.expect("consensus expected");
        assert!(t < 10.0, "consensus at {t}");
        assert!(log.final_agreement.is_some());
        // Applied controls always within bounds.
        for row in &log.u_applied {
            for &u in row {
                assert!((-0.5..=0.5).contains(&u));
            }
        }
        // Cumulative cost nondecreasing.
        for w in log.j_cumulative.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn invalid_scenario_is_rejected_with_all_issues() {
        let mut s = base_scenario();
        s.dt = 0.0;
        s.consensus_tol = -1.0;
        match simulate(&s) {
            Err(SimError::InvalidScenario(issues)) => assert!(issues.len() >= 2),
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn zero_horizon_logs_single_sample() {
        let mut s = base_scenario();
        s.t_end = 0.0;
        let log = simulate(&s).unwrap();
        assert_eq!(log.n_samples(), 1);
        assert_eq!(log.times, vec![0.0]);
        // The initial control is still computed and recorded.
        assert!(log.u_raw[0].iter().any(|&u| u != 0.0));
    }

    #[test]
    fn zero_order_hold_keeps_control_between_ticks() {
        let mut s = base_scenario();
        s.t_end = 0.5;
        let log = simulate(&s).unwrap();
        // 10 integrator steps per tick: samples 1..9 reuse the tick-0 control.
        for step in 1..10 {
            assert_eq!(log.u_applied[step], log.u_applied[0]);
        }
        assert_ne!(log.u_applied[10], log.u_applied[9]);
    }

    #[test]
    fn unstable_drift_with_tiny_bounds_blows_up() {
        let s = Scenario {
            model: RobotModel::new(Matrix::from_diag(&[2.0]), Matrix::identity(1)).unwrap(),
            topology: Topology::new(Matrix::zeros(1, 1)).unwrap(),
            x0: vec![vec![1.0]],
            q: Matrix::from_diag(&[1.0]),
            r: Matrix::from_diag(&[1.0]),
            bounds: Bounds::uniform(1, 1, -1e-3, 1e-3).unwrap(),
            control_period: 0.1,
            dt: 0.01,
            t_end: 10.0,
            consensus_tol: 1e-3,
            network: NetworkModel::perfect(),
            seed: 0,
            law_variant: LawVariant::PerRobot,
        };
        match simulate(&s) {
            Err(SimError::Blowup { t }) => assert!(t > 6.0 && t < 8.0, "blow-up at {t}"),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn accumulate_cost_zero_trajectory() {
        let topo = Topology::<f64>::default_four_robot();
        let q = Matrix::from_diag(&[3.0]);
        let r = Matrix::from_diag(&[1.0]);
        let times = vec![0.0, 0.5, 1.0];
        let x = vec![vec![0.0; 4]; 3];
        let u = vec![vec![0.0; 4]; 3];
        let trace = accumulate_cost(&topo, &q, &r, &times, &x, &u).unwrap();
        assert_eq!(trace.j_cumulative, vec![0.0; 3]);
        assert_eq!(trace.state_integral, 0.0);
        assert_eq!(trace.effort_integral, 0.0);
    }

    #[test]
    fn accumulate_cost_constant_rate() {
        // Two robots listening to each other, frozen at distance 1 with
        // zero control: eps = (1, -1), rate = 0.5 * q * 2 = q per unit time.
        let topo = Topology::<f64>::complete(2);
        let q = Matrix::from_diag(&[3.0]);
        let r = Matrix::from_diag(&[1.0]);
        let times = vec![0.0, 1.0, 2.0];
        let x = vec![vec![1.0, 0.0]; 3];
        let u = vec![vec![0.0, 0.0]; 3];
        let trace = accumulate_cost(&topo, &q, &r, &times, &x, &u).unwrap();
        assert!((trace.j_cumulative[2] - 6.0).abs() < 1e-12);
        assert!((trace.j_per_robot[2][0] - 3.0).abs() < 1e-12);
        assert_eq!(trace.effort_integral, 0.0);
    }

    #[test]
    fn law_variants_agree_on_perfect_single_link() {
        // One listener with one static neighbor: L has a single nonzero row,
        // so -(L (x) K) eps-hat and -K eps-hat coincide up to the row weight.
        // With weight 1 and a single link, the laws differ by the Laplacian
        // diagonal d_i = 1, i.e. not at all.
        let adjacency = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let mut s = base_scenario();
        s.topology = Topology::new(adjacency).unwrap();
        s.x0 = vec![vec![1.0], vec![0.0]];
        s.bounds = Bounds::uniform(2, 1, -5.0, 5.0).unwrap();
        s.t_end = 2.0;
        let per_robot = simulate(&s).unwrap();
        s.law_variant = LawVariant::LaplacianWeighted;
        let weighted = simulate(&s).unwrap();
        for (a, b) in per_robot.positions.iter().zip(&weighted.positions) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spanning_tree_warning_is_emitted() {
        let adjacency = Matrix::zeros(2, 2);
        let mut s = base_scenario();
        s.topology = Topology::new(adjacency).unwrap();
        s.x0 = vec![vec![0.0], vec![1.0]];
        s.bounds = Bounds::uniform(2, 1, -0.5, 0.5).unwrap();
        s.t_end = 0.5;
        let log = simulate(&s).unwrap();
        assert!(log
            .warnings
            .iter()
            .any(|w| w.contains("spanning tree")));
        // Nobody listens: everyone holds still.
        assert_eq!(log.final_positions(), &[0.0, 1.0]);
    }

    #[test]
    fn switch_predictions_cover_initially_saturated_channels() {
        let mut s = base_scenario();
        s.q = Matrix::from_diag(&[20.0]);
        let log = simulate(&s).unwrap();
        // Robot 3 starts with raw control -sqrt(20) * 0.3 < -0.5.
        assert!(log
            .switch_predictions
            .iter()
            .any(|p| p.robot == 3 && p.side == BoundSide::Lower));
        for p in &log.switch_predictions {
            assert!(p.t_s > 0.0 && p.residual <= 1e-10);
        }
    }
}
