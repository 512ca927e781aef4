//! The finite-population game: exact robust values for a handful of agents,
//! best-response gaps, and Monte-Carlo estimates under a plug-in adversary.

mod exact;
mod sim;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{GameSpec, MarkovPolicy};

pub use exact::{best_response_gap, fixed_policy_value_exact, ExactValue, DEFAULT_CANDIDATE_LIMIT, N_MAX, RESTARTS};
pub use sim::{chaos_diagnostic, pairwise_sum, simulate_plugin, ChaosRow, ChaosTable};

/// One Markov policy per agent; each agent conditions on its own state only.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfilePolicy {
    policies: Vec<MarkovPolicy>,
}

impl ProfilePolicy {
    pub fn new(policies: Vec<MarkovPolicy>) -> Result<Self> {
        if policies.is_empty() {
            return Err(Error::param("a profile needs at least one agent"));
        }
        let (h, ns, na) = (policies[0].horizon(), policies[0].n_states(), policies[0].n_actions());
        if policies
            .iter()
            .any(|p| p.horizon() != h || p.n_states() != ns || p.n_actions() != na)
        {
            return Err(Error::shape("all agents' policies must have the same shape"));
        }
        Ok(Self { policies })
    }

    /// Every agent plays `policy`.
    pub fn symmetric(policy: &MarkovPolicy, n: usize) -> Result<Self> {
        Self::new(vec![policy.clone(); n])
    }

    /// Agent `i` plays `deviation`, everyone else plays `policy`.
    pub fn deviated(policy: &MarkovPolicy, n: usize, i: usize, deviation: &MarkovPolicy) -> Result<Self> {
        if i >= n {
            return Err(Error::param(format!("agent {i} out of range for {n} agents")));
        }
        let mut policies = vec![policy.clone(); n];
        policies[i] = deviation.clone();
        Self::new(policies)
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn agent(&self, j: usize) -> &MarkovPolicy {
        &self.policies[j]
    }

    pub(crate) fn check(&self, spec: &GameSpec, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::shape(format!("profile has {} agents, expected {n}", self.len())));
        }
        let p = &self.policies[0];
        if p.horizon() != spec.horizon() || p.n_states() != spec.n_states() || p.n_actions() != spec.n_actions() {
            return Err(Error::shape("profile policies do not match the game"));
        }
        Ok(())
    }
}

/// What was computed for one population size.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NAgentReport {
    pub n: usize,
    /// Robust value of agent `i` under the profile, from the product-space recursion.
    pub j_exact: Option<f64>,
    /// Monte-Carlo estimate under the plug-in adversary.
    pub j_mc: Option<f64>,
    pub stderr: Option<f64>,
    /// Best deviation value minus the profile value.
    pub nash_gap: Option<f64>,
    /// Whether `j_exact` and `nash_gap` are exact. Monte-Carlo numbers are
    /// never certified.
    pub certified: bool,
    /// Tags: `exact`, `coordinate_descent`, `enumerated`, `lower_bound`, `surrogate`.
    pub methods: Vec<String>,
    pub paths: Option<usize>,
    /// Deterministic deviation `[t][s] → action` attaining the gap.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_deviation: Option<Vec<Vec<usize>>>,
}

impl NAgentReport {
    pub(crate) fn empty(n: usize) -> Self {
        Self {
            n,
            j_exact: None,
            j_mc: None,
            stderr: None,
            nash_gap: None,
            certified: false,
            methods: Vec::new(),
            paths: None,
            best_deviation: None,
        }
    }

    pub const CSV_HEADER: [&'static str; 6] = ["N", "J_mc", "stderr", "J_exact", "nash_gap", "certified"];

    /// Row under [`Self::CSV_HEADER`]; missing values are empty.
    pub fn csv_record(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(crate::mfe::fmt_f64).unwrap_or_default();
        vec![
            self.n.to_string(),
            opt(self.j_mc),
            opt(self.stderr),
            opt(self.j_exact),
            opt(self.nash_gap),
            self.certified.to_string(),
        ]
    }

    /// Fills the fields of `other` that are missing here.
    pub fn merge(mut self, other: NAgentReport) -> Self {
        let exact = |r: &NAgentReport| r.j_exact.is_some() || r.nash_gap.is_some();
        self.certified = match (exact(&self), exact(&other)) {
            (true, true) => self.certified && other.certified,
            (true, false) => self.certified,
            (false, true) => other.certified,
            (false, false) => false,
        };
        self.j_exact = self.j_exact.or(other.j_exact);
        self.j_mc = self.j_mc.or(other.j_mc);
        self.stderr = self.stderr.or(other.stderr);
        self.nash_gap = self.nash_gap.or(other.nash_gap);
        self.paths = self.paths.or(other.paths);
        self.best_deviation = self.best_deviation.or(other.best_deviation);
        for m in other.methods {
            if !self.methods.contains(&m) {
                self.methods.push(m);
            }
        }
        self
    }
}
