//! Finite spaces, laws, policies, kernels and the game description.

pub mod ambiguity;
pub mod config;
pub mod crowd;
pub mod diagnostics;
pub mod game;
pub mod reward;
pub mod space;
pub mod tables;

pub use ambiguity::{AmbiguityFamily, AmbiguitySet, ReferenceKernel};
pub use config::{game_from_json, LOAD_SLACK};
pub use crowd::{
    crowd_reference_kernel, make_crowd_game, make_crowd_game_singleton, reference_crowd_game, CROWD_ACTIONS, CROWD_C,
    CROWD_LAMBDAS, CROWD_MU0, CROWD_STATES,
};
pub use diagnostics::{validate_assumptions, CheckStatus, DiagnosticCheck, DiagnosticsReport};
pub use game::GameSpec;
pub use reward::{Congestion, RewardModel};
pub use space::{Distribution, FiniteSpace};
pub use tables::{push_forward, KernelTable, MarkovPolicy, MeasureFlow};
