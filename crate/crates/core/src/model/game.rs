use serde::Serialize;

use super::ambiguity::AmbiguityFamily;
use super::reward::RewardModel;
use super::space::{Distribution, FiniteSpace};
use crate::error::{Error, Result};
use crate::inner::AmbiguityInstance;
use crate::transport::CostMatrix;

/// A finite mean-field Markov game under model uncertainty.
#[derive(Clone, Debug, Serialize)]
pub struct GameSpec {
    states: FiniteSpace,
    actions: FiniteSpace,
    horizon: usize,
    initial: Distribution,
    reward: RewardModel,
    ambiguity: AmbiguityFamily,
    #[serde(skip)]
    cost: CostMatrix,
}

impl GameSpec {
    pub fn new(
        states: FiniteSpace,
        actions: FiniteSpace,
        horizon: usize,
        initial: Distribution,
        reward: RewardModel,
        ambiguity: AmbiguityFamily,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::param("horizon must be at least 1"));
        }
        if initial.len() != states.len() {
            return Err(Error::shape(format!(
                "initial law has {} weights for {} states",
                initial.len(),
                states.len()
            )));
        }
        if let Some(msg) = initial.simplex_defect() {
            return Err(Error::InvalidDistribution(format!("initial law: {msg}")));
        }
        if ambiguity.len() != horizon {
            return Err(Error::shape(format!(
                "{} ambiguity sets for horizon {horizon}",
                ambiguity.len()
            )));
        }
        reward.validate(&states, &actions)?;
        for set in ambiguity.sets() {
            set.validate(states.len(), actions.len())?;
        }
        let cost = CostMatrix::from_space(&states);
        Ok(Self {
            states,
            actions,
            horizon,
            initial,
            reward,
            ambiguity,
            cost,
        })
    }

    pub fn states(&self) -> &FiniteSpace {
        &self.states
    }

    pub fn actions(&self) -> &FiniteSpace {
        &self.actions
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial(&self) -> &Distribution {
        &self.initial
    }

    pub fn reward_model(&self) -> &RewardModel {
        &self.reward
    }

    pub fn ambiguity(&self) -> &AmbiguityFamily {
        &self.ambiguity
    }

    pub fn cost(&self) -> &CostMatrix {
        &self.cost
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize, next: usize, mu: &Distribution) -> f64 {
        self.reward.eval(&self.states, &self.actions, s, a, next, mu)
    }

    /// `s' ↦ r(s, a, s', μ)`.
    pub fn reward_row(&self, s: usize, a: usize, mu: &Distribution) -> Vec<f64> {
        (0..self.n_states())
            .map(|next| self.reward(s, a, next, mu))
            .collect()
    }

    pub fn ambiguity_at(&self, t: usize, s: usize, a: usize, mu: &Distribution) -> AmbiguityInstance<'_> {
        self.ambiguity.at(t).instance(s, a, mu, &self.cost)
    }

    /// Same game with a different initial law.
    pub fn with_initial(&self, initial: Distribution) -> Result<Self> {
        Self::new(
            self.states.clone(),
            self.actions.clone(),
            self.horizon,
            initial,
            self.reward.clone(),
            self.ambiguity.clone(),
        )
    }

    /// Same game with every step's set replaced by the ball of `radius` around
    /// its reference kernel. Finite sets have no single centre and are refused.
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        use super::ambiguity::AmbiguitySet;
        let sets = self
            .ambiguity
            .sets()
            .iter()
            .map(|set| match set {
                AmbiguitySet::Singleton { kernel } | AmbiguitySet::WassersteinBall { kernel, .. } => {
                    Ok(AmbiguitySet::WassersteinBall {
                        kernel: kernel.clone(),
                        radius,
                    })
                }
                AmbiguitySet::FiniteSet { .. } => Err(Error::param("cannot set a radius on a finite ambiguity set")),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            self.states.clone(),
            self.actions.clone(),
            self.horizon,
            self.initial.clone(),
            self.reward.clone(),
            AmbiguityFamily::new(sets),
        )
    }

    pub(crate) fn check_flow_shape(&self, flow_len: usize, flow_width: usize) -> Result<()> {
        if flow_len != self.horizon || flow_width != self.n_states() {
            return Err(Error::shape(format!(
                "flow has {flow_len} steps of width {flow_width}, game needs {} of width {}",
                self.horizon,
                self.n_states()
            )));
        }
        Ok(())
    }
}
