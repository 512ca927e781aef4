use serde::{Deserialize, Serialize};

use super::space::Distribution;
use crate::error::{Error, Result};
use crate::inner::AmbiguityInstance;
use crate::transport::CostMatrix;

/// Reference transition law `p(·|s, a)`; rows do not depend on the population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReferenceKernel {
    rows: Vec<Vec<Distribution>>,
}

impl ReferenceKernel {
    pub fn new(rows: Vec<Vec<Distribution>>) -> Result<Self> {
        let k = Self { rows };
        if let Some(msg) = k.first_defect() {
            return Err(Error::InvalidDistribution(msg));
        }
        Ok(k)
    }

    /// No validation; diagnostics report the defects instead.
    pub fn from_rows_unchecked(rows: Vec<Vec<Distribution>>) -> Self {
        Self { rows }
    }

    /// The row for `(s, a)` at population `_mu`.
    #[inline]
    pub fn row(&self, s: usize, a: usize, _mu: &Distribution) -> &Distribution {
        &self.rows[s][a]
    }

    pub fn rows(&self) -> &[Vec<Distribution>] {
        &self.rows
    }

    pub(crate) fn check_shape(&self, ns: usize, na: usize) -> Result<()> {
        if self.rows.len() != ns
            || self
                .rows
                .iter()
                .any(|r| r.len() != na || r.iter().any(|d| d.len() != ns))
        {
            return Err(Error::shape(format!(
                "reference kernel must have shape {ns}x{na}x{ns}"
            )));
        }
        Ok(())
    }

    pub(crate) fn first_defect(&self) -> Option<String> {
        for (s, per_action) in self.rows.iter().enumerate() {
            for (a, row) in per_action.iter().enumerate() {
                if let Some(msg) = row.simplex_defect() {
                    return Some(format!("reference row ({s},{a}): {msg}"));
                }
            }
        }
        None
    }
}

/// Admissible next-state laws at one time step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AmbiguitySet {
    Singleton { kernel: ReferenceKernel },
    FiniteSet { kernels: Vec<ReferenceKernel> },
    /// All laws within W1 distance `radius` of the reference row.
    WassersteinBall { kernel: ReferenceKernel, radius: f64 },
}

impl AmbiguitySet {
    pub fn instance<'a>(
        &'a self,
        s: usize,
        a: usize,
        mu: &Distribution,
        cost: &'a CostMatrix,
    ) -> AmbiguityInstance<'a> {
        match self {
            AmbiguitySet::Singleton { kernel } => AmbiguityInstance::Singleton(kernel.row(s, a, mu)),
            AmbiguitySet::FiniteSet { kernels } => {
                AmbiguityInstance::FiniteSet(kernels.iter().map(|k| k.row(s, a, mu)).collect())
            }
            AmbiguitySet::WassersteinBall { kernel, radius } => AmbiguityInstance::Ball {
                center: kernel.row(s, a, mu),
                radius: *radius,
                cost,
            },
        }
    }

    /// Kernels whose rows anchor the set.
    pub fn kernels(&self) -> Vec<&ReferenceKernel> {
        match self {
            AmbiguitySet::Singleton { kernel } | AmbiguitySet::WassersteinBall { kernel, .. } => {
                vec![kernel]
            }
            AmbiguitySet::FiniteSet { kernels } => kernels.iter().collect(),
        }
    }

    pub(crate) fn validate(&self, ns: usize, na: usize) -> Result<()> {
        if let AmbiguitySet::FiniteSet { kernels } = self {
            if kernels.is_empty() {
                return Err(Error::param("finite ambiguity set must be non-empty"));
            }
        }
        if let AmbiguitySet::WassersteinBall { radius, .. } = self {
            if !(*radius >= 0.0) || !radius.is_finite() {
                return Err(Error::param(format!("ball radius must be >= 0, got {radius}")));
            }
        }
        for k in self.kernels() {
            k.check_shape(ns, na)?;
        }
        Ok(())
    }
}

/// One ambiguity set per time step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AmbiguityFamily {
    per_time: Vec<AmbiguitySet>,
}

impl AmbiguityFamily {
    pub fn new(per_time: Vec<AmbiguitySet>) -> Self {
        Self { per_time }
    }

    pub fn repeated(set: AmbiguitySet, horizon: usize) -> Self {
        Self {
            per_time: vec![set; horizon],
        }
    }

    pub fn at(&self, t: usize) -> &AmbiguitySet {
        &self.per_time[t]
    }

    pub fn len(&self) -> usize {
        self.per_time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_time.is_empty()
    }

    pub fn sets(&self) -> &[AmbiguitySet] {
        &self.per_time
    }
}
