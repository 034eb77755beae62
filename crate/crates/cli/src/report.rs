//! Run summary assembly: everything derivable from a scenario plus a
//! trajectory, ready for JSON serialization.
//!
//! A report is a pure function of the scenario and the samples; the wall
//! clock enters only through `generated_at_unix_seconds`, which determinism
//! comparisons exclude.

use serde::Serialize;
use serde_json::Value;

use rendezvous_core::control;
use rendezvous_core::sim::{self};
use rendezvous_core::switching::{self, RegimeEvent, SwitchPrediction};
use rendezvous_core::{Scenario64, TrajectoryLog64};

use crate::csv_io::CsvTrajectory;
use crate::error::CliError;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub artifact_version: String,
    /// Wall-clock stamp, the only nondeterministic field.
    pub generated_at_unix_seconds: u64,
    /// Effective configuration, fully expanded, with CLI overrides noted.
    pub scenario: Value,
    pub consensus_time: Option<f64>,
    /// `[robot][axis]` positions at the end of the horizon.
    pub final_positions: Vec<Vec<f64>>,
    /// Per-axis mean of the final positions, present once consensus was
    /// reached.
    pub final_agreement: Option<Vec<f64>>,
    pub j_total: f64,
    pub j_per_robot: Vec<f64>,
    pub v_quad_initial: f64,
    /// `j_total / V(0)` diagnostic; absent when the run starts at consensus.
    pub j_over_v0: Option<f64>,
    pub state_integral: f64,
    pub effort_integral: f64,
    /// Fraction of the cost spent on control effort.
    pub effort_share: f64,
    pub smallest_positive_laplacian_eigenvalue: Option<f64>,
    pub switch_predictions: Vec<SwitchPrediction<f64>>,
    pub regime_events: Vec<RegimeEvent<f64>>,
    pub warnings: Vec<String>,
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn chunk(flat: &[f64], m: usize) -> Vec<Vec<f64>> {
    flat.chunks(m).map(<[f64]>::to_vec).collect()
}

/// Report straight from a live simulation log.
pub fn from_log(scenario: &Scenario64, echo: Value, log: &TrajectoryLog64) -> RunReport {
    let j_total = log.j_total();
    let v0 = log.v_quad_initial;
    RunReport {
        artifact_version: ARTIFACT_VERSION.to_string(),
        generated_at_unix_seconds: unix_now(),
        scenario: echo,
        consensus_time: log.consensus_time,
        final_positions: chunk(log.final_positions(), log.m),
        final_agreement: log.final_agreement.clone(),
        j_total,
        j_per_robot: log.j_per_robot.last().cloned().unwrap_or_default(),
        v_quad_initial: v0,
        j_over_v0: (v0 > 0.0).then(|| j_total / v0),
        state_integral: log.state_integral,
        effort_integral: log.effort_integral,
        effort_share: log.effort_share(),
        smallest_positive_laplacian_eigenvalue: scenario
            .topology
            .smallest_positive_eigenvalue()
            .ok(),
        switch_predictions: log.switch_predictions.clone(),
        regime_events: log.regime_events.clone(),
        warnings: log.warnings.clone(),
    }
}

/// Report re-derived from exported samples: cost quadrature, consensus
/// detection, certificates and regime analysis are all recomputed, so a CSV
/// round trip reproduces the original report's quantities.
pub fn from_samples(
    scenario: &Scenario64,
    echo: Value,
    traj: &CsvTrajectory,
) -> Result<RunReport, CliError> {
    let n = scenario.n();
    let m = scenario.m();
    let law = control::synthesize(&scenario.model, &scenario.q, &scenario.r, &scenario.bounds)?;

    let cost = sim::accumulate_cost(
        &scenario.topology,
        &scenario.q,
        &scenario.r,
        &traj.times,
        &traj.positions,
        &traj.u_applied,
    )?;

    let consensus_time = traj
        .times
        .iter()
        .zip(&traj.positions)
        .find(|(_, x)| sim::consensus_reached(x, m, scenario.consensus_tol))
        .map(|(&t, _)| t);

    let last = traj.positions.last().expect("read_csv yields samples");
    let final_agreement = consensus_time.map(|_| {
        (0..m)
            .map(|a| (0..n).map(|i| last[i * m + a]).sum::<f64>() / n as f64)
            .collect()
    });

    let eps0 = control::disagreement(&scenario.topology, &traj.positions[0], m)?;
    let v0 = control::quadratic_lyapunov(&law.p, eps0.epsilon())?;

    let mut warnings = Vec::new();
    if !scenario.topology.has_directed_spanning_tree() {
        warnings.push(
            "topology has no directed spanning tree; consensus is not guaranteed".to_string(),
        );
    }
    let (switch_predictions, prediction_warnings) = sim::predict_switches(scenario, &law)?;
    warnings.extend(prediction_warnings);

    let regime_events = switching::detect_regimes(
        &traj.times,
        &traj.u_raw,
        &scenario.bounds,
        switching::REGIME_TOL,
    )?;

    let j_total = cost.j_cumulative.last().copied().unwrap_or(0.0);
    let total = cost.state_integral + cost.effort_integral;
    Ok(RunReport {
        artifact_version: ARTIFACT_VERSION.to_string(),
        generated_at_unix_seconds: unix_now(),
        scenario: echo,
        consensus_time,
        final_positions: chunk(last, m),
        final_agreement,
        j_total,
        j_per_robot: cost.j_per_robot.last().cloned().unwrap_or_default(),
        v_quad_initial: v0,
        j_over_v0: (v0 > 0.0).then(|| j_total / v0),
        state_integral: cost.state_integral,
        effort_integral: cost.effort_integral,
        effort_share: if total == 0.0 {
            0.0
        } else {
            cost.effort_integral / total
        },
        smallest_positive_laplacian_eigenvalue: scenario
            .topology
            .smallest_positive_eigenvalue()
            .ok(),
        switch_predictions,
        regime_events,
        warnings,
    })
}

/// Pretty JSON plus a trailing newline; reports and indexes all go through
/// here so files end consistently.
pub fn to_json_string(value: &impl Serialize) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| CliError::numeric(format!("JSON serialization failed: {e}")))
}
