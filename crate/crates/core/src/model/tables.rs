use serde::{Deserialize, Serialize};

use super::space::Distribution;
use crate::error::{Error, Result};

/// Time-indexed Markov policy: `rows[t][s]` is a law over actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovPolicy {
    rows: Vec<Vec<Distribution>>,
}

impl MarkovPolicy {
    pub fn new(rows: Vec<Vec<Distribution>>) -> Result<Self> {
        let n_states = rows.first().map(Vec::len).unwrap_or(0);
        let n_actions = rows
            .first()
            .and_then(|r| r.first())
            .map(Distribution::len)
            .unwrap_or(0);
        if rows.is_empty() || n_states == 0 {
            return Err(Error::shape("policy needs at least one step and one state"));
        }
        for (t, step) in rows.iter().enumerate() {
            if step.len() != n_states {
                return Err(Error::shape(format!("policy step {t} has {} states", step.len())));
            }
            for (s, row) in step.iter().enumerate() {
                if row.len() != n_actions {
                    return Err(Error::shape(format!("policy row ({t},{s}) has wrong length")));
                }
                if let Some(msg) = row.simplex_defect() {
                    return Err(Error::InvalidDistribution(format!("policy row ({t},{s}): {msg}")));
                }
            }
        }
        Ok(Self { rows })
    }

    /// Point-mass policy from `choice[t][s] = action index`.
    pub fn deterministic(choice: &[Vec<usize>], n_actions: usize) -> Self {
        Self {
            rows: choice
                .iter()
                .map(|step| {
                    step.iter()
                        .map(|&a| Distribution::point_mass(n_actions, a))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn uniform(horizon: usize, n_states: usize, n_actions: usize) -> Self {
        Self {
            rows: vec![vec![Distribution::uniform(n_actions); n_states]; horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.rows.len()
    }

    pub fn n_states(&self) -> usize {
        self.rows[0].len()
    }

    pub fn n_actions(&self) -> usize {
        self.rows[0][0].len()
    }

    pub fn row(&self, t: usize, s: usize) -> &Distribution {
        &self.rows[t][s]
    }

    pub fn prob(&self, t: usize, s: usize, a: usize) -> f64 {
        self.rows[t][s].get(a)
    }

    pub fn rows(&self) -> &[Vec<Distribution>] {
        &self.rows
    }

    pub(crate) fn set_row(&mut self, t: usize, s: usize, row: Distribution) {
        self.rows[t][s] = row;
    }
}

/// Time-indexed transition kernel: `rows[t][s][a]` is a law over next states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelTable {
    rows: Vec<Vec<Vec<Distribution>>>,
}

impl KernelTable {
    pub fn new(rows: Vec<Vec<Vec<Distribution>>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() || rows[0][0].is_empty() {
            return Err(Error::shape("kernel table must be non-empty"));
        }
        let (ns, na) = (rows[0].len(), rows[0][0].len());
        for (t, step) in rows.iter().enumerate() {
            if step.len() != ns || step.iter().any(|r| r.len() != na) {
                return Err(Error::shape(format!("kernel step {t} has inconsistent shape")));
            }
            for (s, per_action) in step.iter().enumerate() {
                for (a, row) in per_action.iter().enumerate() {
                    if row.len() != ns {
                        return Err(Error::shape(format!("kernel row ({t},{s},{a}) has wrong length")));
                    }
                    if let Some(msg) = row.simplex_defect() {
                        return Err(Error::InvalidDistribution(format!(
                            "kernel row ({t},{s},{a}): {msg}"
                        )));
                    }
                }
            }
        }
        Ok(Self { rows })
    }

    pub(crate) fn from_rows_unchecked(rows: Vec<Vec<Vec<Distribution>>>) -> Self {
        Self { rows }
    }

    pub fn horizon(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, t: usize, s: usize, a: usize) -> &Distribution {
        &self.rows[t][s][a]
    }

    pub fn rows(&self) -> &[Vec<Vec<Distribution>>] {
        &self.rows
    }
}

/// Population state distributions `μ_0, ..., μ_{T-1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeasureFlow {
    steps: Vec<Distribution>,
}

impl MeasureFlow {
    pub fn new(steps: Vec<Distribution>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::shape("measure flow must have at least one step"));
        }
        let n = steps[0].len();
        for (t, mu) in steps.iter().enumerate() {
            if mu.len() != n {
                return Err(Error::shape(format!("flow step {t} has length {}", mu.len())));
            }
            if let Some(msg) = mu.simplex_defect() {
                return Err(Error::InvalidDistribution(format!("flow step {t}: {msg}")));
            }
        }
        Ok(Self { steps })
    }

    pub(crate) fn from_steps_unchecked(steps: Vec<Distribution>) -> Self {
        Self { steps }
    }

    /// `μ_t = mu` for every `t`.
    pub fn constant(mu: &Distribution, horizon: usize) -> Self {
        Self {
            steps: vec![mu.clone(); horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn at(&self, t: usize) -> &Distribution {
        &self.steps[t]
    }

    pub fn steps(&self) -> &[Distribution] {
        &self.steps
    }

    pub fn with_step(&self, t: usize, mu: Distribution) -> Self {
        let mut steps = self.steps.clone();
        steps[t] = mu;
        Self { steps }
    }

    pub fn linf_distance(&self, other: &MeasureFlow) -> f64 {
        self.steps
            .iter()
            .zip(&other.steps)
            .map(|(a, b)| a.linf_distance(b))
            .fold(0.0, f64::max)
    }

    pub fn mix(&self, other: &MeasureFlow, alpha: f64) -> MeasureFlow {
        MeasureFlow {
            steps: self
                .steps
                .iter()
                .zip(&other.steps)
                .map(|(a, b)| a.mix(b, alpha))
                .collect(),
        }
    }
}

/// One step of the state distribution: `Σ_s Σ_a kernel(s'|s,a) π(a|s) μ(s)`.
pub fn push_forward(
    mu: &Distribution,
    policy: &MarkovPolicy,
    kernel: &KernelTable,
    t: usize,
) -> Distribution {
    let n = mu.len();
    let mut next = vec![0.0; n];
    for s in 0..n {
        let ms = mu.get(s);
        if ms == 0.0 {
            continue;
        }
        let pi = policy.row(t, s);
        for a in 0..pi.len() {
            let w = ms * pi.get(a);
            if w == 0.0 {
                continue;
            }
            for (x, p) in next.iter_mut().zip(kernel.row(t, s, a).weights()) {
                *x += w * p;
            }
        }
    }
    Distribution::from_raw(next)
}
