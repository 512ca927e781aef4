//! Mean-field Markov games where every agent hedges against a worst-case
//! transition law chosen from a Wasserstein ball around a reference kernel.

// `!(x >= 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dpp;
pub mod error;
pub mod inner;
mod keyed;
mod lp;
pub mod mfe;
mod mixed;
pub mod model;
pub mod nagent;
pub mod transport;

pub use dpp::{
    backward_induction, backward_induction_with, check_fixed_point, check_mfe, joint_laws, residuals,
    robust_policy_eval, value_of_flow, FixedPointReport, ResidualReport, SolveResult,
};
pub use error::{Error, Result};
pub use inner::{
    ball_membership, worst_case_expectation, worst_case_expectation_with, AmbiguityInstance, Backend, InnerSolution,
};
pub use mfe::{initial_flow, lambda_sweep, solve_mfe, Equilibrium, SolveOptions, SweepRow, SweepTable};
pub use model::*;
pub use nagent::{
    best_response_gap, chaos_diagnostic, fixed_policy_value_exact, pairwise_sum, simulate_plugin, ChaosRow, ChaosTable,
    ExactValue, NAgentReport, ProfilePolicy, DEFAULT_CANDIDATE_LIMIT,
};
pub use transport::{w1_1d, w1_lp, CostMatrix, Coupling};
