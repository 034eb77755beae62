//! Simulation scenario description and validation.

use serde::{Deserialize, Serialize};

use crate::control::{Bounds, RobotModel};
use crate::matops::Matrix;
use crate::scalar::{cast, Scalar};
use crate::topology::Topology;

/// Which form of the consensus law the simulation applies.
///
/// `PerRobot` is the executable distributed law `u_i = -K eps_i`. The
/// `LaplacianWeighted` variant applies `-(L (x) K)` to the stacked
/// disagreement instead, weighting neighbor disagreements once more by the
/// Laplacian; it is kept selectable for side-by-side comparison runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawVariant {
    #[default]
    PerRobot,
    LaplacianWeighted,
}

/// A per-link channel parameter: one shared value or a full n x n table
/// indexed `[receiver][sender]`.
#[derive(Debug, Clone, PartialEq)]
pub enum LinkSetting<V> {
    Uniform(V),
    PerLink(Vec<Vec<V>>),
}

impl<V: Copy> LinkSetting<V> {
    /// Value for the link on which robot `to` listens to robot `from`.
    /// Callers must have validated the table shape first.
    pub fn get(&self, to: usize, from: usize) -> V {
        match self {
            LinkSetting::Uniform(v) => *v,
            LinkSetting::PerLink(table) => table[to][from],
        }
    }
}

/// Communication imperfections applied to every directed link.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel<T> {
    /// Whole control ticks a sample spends in transit.
    pub delay_periods: LinkSetting<u32>,
    /// Bernoulli probability that a delivery is lost, in [0, 1).
    pub drop_probability: LinkSetting<T>,
    /// Standard deviation of additive Gaussian noise on each transmitted
    /// sample, in the position unit.
    pub sensor_noise_std: T,
}

/// Transit buffers refuse delays beyond this many control ticks.
pub const MAX_DELAY_PERIODS: u32 = 10_000;

impl<T: Scalar> NetworkModel<T> {
    /// No delay, no loss, no noise.
    pub fn perfect() -> Self {
        Self {
            delay_periods: LinkSetting::Uniform(0),
            drop_probability: LinkSetting::Uniform(T::zero()),
            sensor_noise_std: T::zero(),
        }
    }
}

impl<T: Scalar> Default for NetworkModel<T> {
    fn default() -> Self {
        Self::perfect()
    }
}

/// One validation failure, locating the offending field by a JSON-pointer
/// style path into the scenario document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationIssue {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn issue(issues: &mut Vec<ValidationIssue>, path: impl Into<String>, message: impl Into<String>) {
    issues.push(ValidationIssue {
        path: path.into(),
        message: message.into(),
    });
}

/// Complete description of one simulation run.
#[derive(Debug, Clone)]
pub struct Scenario<T> {
    pub model: RobotModel<T>,
    pub topology: Topology<T>,
    /// Initial position of each robot, `[robot][axis]`.
    pub x0: Vec<Vec<T>>,
    pub q: Matrix<T>,
    pub r: Matrix<T>,
    pub bounds: Bounds<T>,
    /// Zero-order-hold control update period, seconds.
    pub control_period: T,
    /// Integrator step, seconds; the period must be a whole multiple.
    pub dt: T,
    pub t_end: T,
    /// Max pairwise distance at which the group counts as met.
    pub consensus_tol: T,
    pub network: NetworkModel<T>,
    pub seed: u64,
    pub law_variant: LawVariant,
}

impl<T: Scalar> Scenario<T> {
    pub fn n(&self) -> usize {
        self.topology.n()
    }

    /// State dimension per robot.
    pub fn m(&self) -> usize {
        self.model.state_dim()
    }

    /// Input dimension per robot.
    pub fn r_dim(&self) -> usize {
        self.model.input_dim()
    }

    /// Initial positions flattened robot-major.
    pub fn x0_stacked(&self) -> Vec<T> {
        self.x0.iter().flatten().copied().collect()
    }

    /// Number of integrator steps per control tick. Meaningful only after
    /// validation has accepted the period/dt pair.
    pub(crate) fn ticks_per_period(&self) -> usize {
        let ratio = self.control_period / self.dt;
        ratio.round().to_f64().unwrap_or(1.0).max(1.0) as usize
    }

    /// Number of integrator steps covered by the horizon (floor; the run
    /// ends on the last whole step inside `t_end`).
    pub(crate) fn step_count(&self) -> usize {
        let ratio = (self.t_end / self.dt).to_f64().unwrap_or(0.0);
        (ratio + 1e-9).floor().max(0.0) as usize
    }

    /// Checks every rule and returns the full list of violations, never just
    /// the first.
    pub fn validate(&self) -> Vec<ValidationIssue> {
        let mut issues = Vec::new();
        let n = self.n();
        let m = self.m();
        let r_dim = self.r_dim();

        if self.x0.len() != n {
            issue(
                &mut issues,
                "/x0",
                format!("expected {n} initial positions, got {}", self.x0.len()),
            );
        }
        for (i, row) in self.x0.iter().enumerate() {
            if row.len() != m {
                issue(
                    &mut issues,
                    format!("/x0/{i}"),
                    format!("expected {m} axes, got {}", row.len()),
                );
            }
            for (a, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    issue(&mut issues, format!("/x0/{i}/{a}"), "must be finite");
                }
            }
        }

        if self.q.rows() != m || self.q.cols() != m {
            issue(
                &mut issues,
                "/q",
                format!(
                    "expected {m}x{m} to match the state dimension, got {}x{}",
                    self.q.rows(),
                    self.q.cols()
                ),
            );
        }
        if self.r.rows() != r_dim || self.r.cols() != r_dim {
            issue(
                &mut issues,
                "/r",
                format!(
                    "expected {r_dim}x{r_dim} to match the input dimension, got {}x{}",
                    self.r.rows(),
                    self.r.cols()
                ),
            );
        }

        if self.bounds.n_robots() != n {
            issue(
                &mut issues,
                "/bounds",
                format!(
                    "expected bounds for {n} robots, got {}",
                    self.bounds.n_robots()
                ),
            );
        }
        if self.bounds.axes() != r_dim {
            issue(
                &mut issues,
                "/bounds",
                format!(
                    "expected {r_dim} bounded axes to match the input dimension, got {}",
                    self.bounds.axes()
                ),
            );
        }

        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            issue(&mut issues, "/dt", "must be a positive finite number");
        }
        if !(self.control_period > T::zero()) || !self.control_period.is_finite() {
            issue(
                &mut issues,
                "/control_period",
                "must be a positive finite number",
            );
        } else if self.dt > T::zero() && self.dt.is_finite() {
            if self.dt > self.control_period {
                issue(
                    &mut issues,
                    "/control_period",
                    "must be at least dt (controls cannot update faster than the integrator)",
                );
            } else {
                let ratio = self.control_period / self.dt;
                let rounded = ratio.round();
                if (ratio - rounded).abs() > cast::<T>(1e-6) * rounded.max(T::one()) {
                    issue(
                        &mut issues,
                        "/control_period",
                        "must be a whole multiple of dt",
                    );
                }
            }
        }
        if !(self.t_end >= T::zero()) || !self.t_end.is_finite() {
            issue(&mut issues, "/t_end", "must be a nonnegative finite number");
        }
        if !(self.consensus_tol > T::zero()) || !self.consensus_tol.is_finite() {
            issue(
                &mut issues,
                "/consensus_tol",
                "must be a positive finite number",
            );
        }

        match &self.network.delay_periods {
            LinkSetting::Uniform(d) => {
                if *d > MAX_DELAY_PERIODS {
                    issue(
                        &mut issues,
                        "/network/delay_periods",
                        format!("delay exceeds the {MAX_DELAY_PERIODS}-tick buffer limit"),
                    );
                }
            }
            LinkSetting::PerLink(table) => {
                if table.len() != n {
                    issue(
                        &mut issues,
                        "/network/delay_periods",
                        format!("expected {n} rows, got {}", table.len()),
                    );
                }
                for (i, row) in table.iter().enumerate() {
                    if row.len() != n {
                        issue(
                            &mut issues,
                            format!("/network/delay_periods/{i}"),
                            format!("expected {n} entries, got {}", row.len()),
                        );
                    }
                    for (j, d) in row.iter().enumerate() {
                        if *d > MAX_DELAY_PERIODS {
                            issue(
                                &mut issues,
                                format!("/network/delay_periods/{i}/{j}"),
                                format!("delay exceeds the {MAX_DELAY_PERIODS}-tick buffer limit"),
                            );
                        }
                    }
                }
            }
        }

        let check_prob = |issues: &mut Vec<ValidationIssue>, path: String, p: T| {
            if !p.is_finite() || p < T::zero() || p >= T::one() {
                issue(issues, path, "drop probability must lie in [0, 1)");
            }
        };
        match &self.network.drop_probability {
            LinkSetting::Uniform(p) => {
                check_prob(&mut issues, "/network/drop_probability".into(), *p)
            }
            LinkSetting::PerLink(table) => {
                if table.len() != n {
                    issue(
                        &mut issues,
                        "/network/drop_probability",
                        format!("expected {n} rows, got {}", table.len()),
                    );
                }
                for (i, row) in table.iter().enumerate() {
                    if row.len() != n {
                        issue(
                            &mut issues,
                            format!("/network/drop_probability/{i}"),
                            format!("expected {n} entries, got {}", row.len()),
                        );
                    }
                    for (j, p) in row.iter().enumerate() {
                        check_prob(
                            &mut issues,
                            format!("/network/drop_probability/{i}/{j}"),
                            *p,
                        );
                    }
                }
            }
        }
        let std = self.network.sensor_noise_std;
        if !std.is_finite() || std < T::zero() {
            issue(
                &mut issues,
                "/network/sensor_noise_std",
                "must be a nonnegative finite number",
            );
        }

        issues
    }
}
