//! Immutable record of one simulation run.

use crate::scalar::Scalar;
use crate::switching::{RegimeEvent, SwitchPrediction};

/// Everything `simulate` records, sampled once per integrator step.
///
/// Stacked rows are robot-major: entry `robot * width + axis` where the
/// width is the state dimension `m` for positions and the input dimension
/// `r_dim` for controls. `v_saturated` is NaN throughout when the
/// synthesized P or K is not diagonal (the integral certificate is only
/// defined channelwise).
#[derive(Debug, Clone)]
pub struct TrajectoryLog<T> {
    pub times: Vec<T>,
    /// `[sample][robot * m + axis]` positions.
    pub positions: Vec<Vec<T>>,
    /// `[sample][robot * r_dim + axis]` pre-saturation controls.
    pub u_raw: Vec<Vec<T>>,
    /// `[sample][robot * r_dim + axis]` applied (clamped) controls.
    pub u_applied: Vec<Vec<T>>,
    /// True where the raw control lies strictly outside its bound box.
    pub saturated: Vec<Vec<bool>>,
    /// Quadratic certificate trace.
    pub v_quadratic: Vec<T>,
    /// Integral-of-clamp certificate trace (NaN when undefined).
    pub v_saturated: Vec<T>,
    /// Cumulative cost quadrature.
    pub j_cumulative: Vec<T>,
    /// `[sample][robot]` cumulative per-robot cost shares.
    pub j_per_robot: Vec<Vec<T>>,
    /// Time integral of the state half of the cost rate over the full run.
    pub state_integral: T,
    /// Time integral of the effort half.
    pub effort_integral: T,
    /// First sample time at which the max pairwise distance dipped below
    /// the consensus tolerance; the run continues to t_end regardless.
    pub consensus_time: Option<T>,
    /// Per-axis mean of the final positions, present once consensus was
    /// reached.
    pub final_agreement: Option<Vec<T>>,
    pub regime_events: Vec<RegimeEvent<T>>,
    pub switch_predictions: Vec<SwitchPrediction<T>>,
    pub v_quad_initial: T,
    /// Non-fatal conditions observed during the run (missing spanning tree,
    /// skipped predictions, ...).
    pub warnings: Vec<String>,
    pub n: usize,
    pub m: usize,
    pub r_dim: usize,
}

impl<T: Scalar> TrajectoryLog<T> {
    pub fn n_samples(&self) -> usize {
        self.times.len()
    }

    /// Position block of one robot at one sample.
    pub fn position(&self, sample: usize, robot: usize) -> &[T] {
        &self.positions[sample][robot * self.m..(robot + 1) * self.m]
    }

    /// Final stacked positions (the log always holds at least the initial
    /// sample).
    pub fn final_positions(&self) -> &[T] {
        self.positions
            .last()
            .expect("log holds at least the initial sample")
    }

    pub fn j_total(&self) -> T {
        self.j_cumulative
            .last()
            .copied()
            .unwrap_or_else(T::zero)
    }

    /// Fraction of the accumulated cost spent on control effort.
    pub fn effort_share(&self) -> T {
        let total = self.state_integral + self.effort_integral;
        if total == T::zero() {
            T::zero()
        } else {
            self.effort_integral / total
        }
    }
}
