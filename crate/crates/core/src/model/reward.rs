use serde::{Deserialize, Serialize};

use super::space::{Distribution, FiniteSpace};
use crate::error::{Error, Result};

/// Crowd-aversion term `-beta * ln(μ(s') + c)` added to a tabular reward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Congestion {
    pub beta: f64,
    pub c: f64,
}

/// One-step reward `r(s, a, s', μ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RewardModel {
    /// `table[s][a][s'] - beta * ln(μ(s') + c)`; `bound` is a claimed `sup |r|`
    /// that diagnostics verify.
    Table {
        table: Vec<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        congestion: Option<Congestion>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bound: Option<f64>,
    },
    /// `(1 - |x(s') - 2| / 2) - |y(a)| / 4 - ln(μ(s') + c)` on state and action
    /// coordinates.
    Crowd { c: f64 },
}

impl RewardModel {
    pub fn constant(value: f64, n_states: usize, n_actions: usize) -> Self {
        RewardModel::Table {
            table: vec![vec![vec![value; n_states]; n_actions]; n_states],
            congestion: None,
            bound: None,
        }
    }

    pub(crate) fn validate(&self, states: &FiniteSpace, actions: &FiniteSpace) -> Result<()> {
        match self {
            RewardModel::Table {
                table, congestion, ..
            } => {
                let (ns, na) = (states.len(), actions.len());
                if table.len() != ns
                    || table.iter().any(|r| r.len() != na || r.iter().any(|x| x.len() != ns))
                {
                    return Err(Error::shape(format!(
                        "reward table must have shape {ns}x{na}x{ns}"
                    )));
                }
                if table.iter().flatten().flatten().any(|x| !x.is_finite()) {
                    return Err(Error::param("reward table has a non-finite entry"));
                }
                if let Some(cg) = congestion {
                    if !(cg.c > 0.0) || !cg.beta.is_finite() {
                        return Err(Error::param("congestion needs c > 0 and finite beta"));
                    }
                }
                Ok(())
            }
            RewardModel::Crowd { c } => {
                if !(*c > 0.0) || !c.is_finite() {
                    return Err(Error::param(format!("crowd reward needs c > 0, got {c}")));
                }
                Ok(())
            }
        }
    }

    #[inline]
    pub fn eval(
        &self,
        states: &FiniteSpace,
        actions: &FiniteSpace,
        s: usize,
        a: usize,
        next: usize,
        mu: &Distribution,
    ) -> f64 {
        match self {
            RewardModel::Table {
                table, congestion, ..
            } => {
                let base = table[s][a][next];
                match congestion {
                    Some(cg) => base - cg.beta * (mu.get(next) + cg.c).ln(),
                    None => base,
                }
            }
            RewardModel::Crowd { c } => {
                let x = states.coord(next)[0];
                let y = actions.coord(a)[0];
                (1.0 - 0.5 * (x - 2.0).abs()) - 0.25 * y.abs() - (mu.get(next) + c).ln()
            }
        }
    }
}
