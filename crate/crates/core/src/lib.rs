//! Nash equilibria of the N-player fuel follower game and its mean-field limit.
//!
//! Players steer Brownian particles with singular (fuel) controls and pay a
//! convex running cost of their distance from the population mean. The crate
//! solves the equilibrium thresholds, evaluates value functions, simulates
//! the obliquely reflected equilibrium dynamics and runs the mean-field and
//! ε-equilibrium experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

pub mod cost;
pub mod error;
pub mod geometry;
pub mod mfg;
pub mod montecarlo;
pub mod nplayer;
pub mod params;
mod quad;
pub mod rng;
mod roots;
mod stats;
pub mod thresholds;

pub use cost::{p_n, p_n_derivs, validate_a1, A1Clause, CostKind, CostSpec, Resolvent, ValidationReport};
pub use error::{Error, Result};
pub use geometry::{
    build_polyhedron, check_sab, check_sc, classify, det_nmat, rank_nmat, Polyhedron, RegionLabel, Side,
    StateVector,
};
pub use mfg::{
    convergence_tables, epsilon_ne_experiment, fixed_point_check, mfg_control_step, mfg_value,
    stationary_density_check, EpsNeReport, InitialLaw, MfgSolution, TableRow,
};
pub use montecarlo::{
    mc_payoff, simulate_mfg_path, simulate_reflected, McEstimate, SimConfig, TrajectoryBatch,
};
pub use nplayer::{
    algorithm1, hjb_residual, two_player_asym, two_player_ne, value_i, JumpSequence, NeCase, NeValueRequest,
};
pub use params::{Discount, GameParams};
pub use thresholds::{coeff_b, f_n, solve_c, solve_c2_asym, solve_c_n, Thresholds};
