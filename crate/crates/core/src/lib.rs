//! Saturated optimal rendezvous for first-order multi-robot systems.
//!
//! The crate synthesizes a consensus controller from LQR weights (Riccati
//! gain, per-robot saturation), predicts when saturated controls hand over to
//! the linear regime, and simulates the closed loop under configurable
//! communication topologies, input bounds, and lossy or delayed links.
//!
//! Modules, bottom up:
//!
//! - [`matops`]: dense matrices, Kronecker products, matrix exponentials,
//!   Lyapunov/Riccati solvers, eigenvalues.
//! - [`topology`]: weighted digraphs, Laplacians, spanning-tree reachability,
//!   connectivity eigenvalue.
//! - [`control`]: gain synthesis, the per-robot control law, saturation,
//!   disagreement coordinates, Lyapunov certificates, running cost.
//! - [`switching`]: saturation switching-time prediction and regime
//!   detection.
//! - [`sim`]: scenario description, network link model, fixed-step RK4
//!   simulation, cost accumulation.
//!
//! Everything is generic over the scalar type through [`scalar::Scalar`]
//! (f32 or f64); the `*64` aliases below pin the f64 instantiations that the
//! command-line tool uses.

pub mod control;
pub mod matops;
pub mod scalar;
pub mod sim;
pub mod switching;
pub mod topology;

pub type Matrix64 = matops::Matrix<f64>;
pub type CareSolution64 = matops::CareSolution<f64>;
pub type Topology64 = topology::Topology<f64>;
pub type RobotModel64 = control::RobotModel<f64>;
pub type Bounds64 = control::Bounds<f64>;
pub type ControlLaw64 = control::ControlLaw<f64>;
pub type SwitchPrediction64 = switching::SwitchPrediction<f64>;
pub type RegimeEvent64 = switching::RegimeEvent<f64>;
pub type NetworkModel64 = sim::NetworkModel<f64>;
pub type Scenario64 = sim::Scenario<f64>;
pub type TrajectoryLog64 = sim::TrajectoryLog<f64>;
