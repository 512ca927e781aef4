//! Crowd motion on a five-cell corridor: agents step left, stay or step right,
//! get jostled by a uniform ±1 shock, and dislike crowded cells.

use super::ambiguity::{AmbiguityFamily, AmbiguitySet, ReferenceKernel};
use super::game::GameSpec;
use super::reward::RewardModel;
use super::space::{Distribution, FiniteSpace};
use crate::error::{Error, Result};

pub const CROWD_STATES: [f64; 5] = [0.0, 1.0, 2.0, 3.0, 4.0];
pub const CROWD_ACTIONS: [f64; 3] = [-1.0, 0.0, 1.0];
/// Crowd-aversion offset used in the reference experiment.
pub const CROWD_C: f64 = 1e-7;
/// Initial law of the reference experiment.
pub const CROWD_MU0: [f64; 5] = [0.2, 0.1, 0.05, 0.25, 0.4];
/// Uncertainty radii of the reference experiment.
pub const CROWD_LAMBDAS: [f64; 5] = [0.0, 0.25, 1.0 / 3.0, 0.5, 1.0];

/// Reference kernel: `s + a + ε` for each of the three equally likely shocks
/// `ε ∈ {-1, 0, 1}`; every shock that would leave the corridor leaves the
/// agent at `s` instead.
pub fn crowd_reference_kernel() -> ReferenceKernel {
    let n = CROWD_STATES.len() as i64;
    let rows = (0..n)
        .map(|s| {
            CROWD_ACTIONS
                .iter()
                .map(|&a| {
                    let mut w = vec![0.0; n as usize];
                    for eps in [-1i64, 0, 1] {
                        let target = s + a as i64 + eps;
                        let landing = if (0..n).contains(&target) { target } else { s };
                        w[landing as usize] += 1.0 / 3.0;
                    }
                    Distribution::from_raw(w)
                })
                .collect()
        })
        .collect();
    ReferenceKernel::new(rows).expect("crowd kernel rows are probability vectors")
}

/// The crowd game with a W1 ball of radius `lambda` around the reference kernel.
pub fn make_crowd_game(lambda: f64, c: f64, initial: &Distribution, horizon: usize) -> Result<GameSpec> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::param(format!("lambda must be >= 0, got {lambda}")));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::param(format!("c must be > 0, got {c}")));
    }
    if initial.len() != CROWD_STATES.len() {
        return Err(Error::shape(format!(
            "initial law must live on the 5-point grid, got {} weights",
            initial.len()
        )));
    }
    let set = AmbiguitySet::WassersteinBall {
        kernel: crowd_reference_kernel(),
        radius: lambda,
    };
    GameSpec::new(
        FiniteSpace::line(&CROWD_STATES)?,
        FiniteSpace::line(&CROWD_ACTIONS)?,
        horizon,
        initial.clone(),
        RewardModel::Crowd { c },
        AmbiguityFamily::repeated(set, horizon),
    )
}

/// Crowd game whose ambiguity set is the reference kernel alone.
pub fn make_crowd_game_singleton(c: f64, initial: &Distribution, horizon: usize) -> Result<GameSpec> {
    let ball = make_crowd_game(0.0, c, initial, horizon)?;
    GameSpec::new(
        ball.states().clone(),
        ball.actions().clone(),
        horizon,
        initial.clone(),
        RewardModel::Crowd { c },
        AmbiguityFamily::repeated(
            AmbiguitySet::Singleton {
                kernel: crowd_reference_kernel(),
            },
            horizon,
        ),
    )
}

/// Reference experiment game at radius `lambda`.
pub fn reference_crowd_game(lambda: f64) -> GameSpec {
    let mu0 = Distribution::new(CROWD_MU0.to_vec()).expect("reference initial law");
    make_crowd_game(lambda, CROWD_C, &mu0, 2).expect("reference crowd game")
}
