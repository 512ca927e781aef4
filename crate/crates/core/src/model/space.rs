use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite set of labelled points embedded in a Euclidean space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteSpace {
    labels: Vec<String>,
    coords: Vec<Vec<f64>>,
}

impl FiniteSpace {
    pub fn new(labels: Vec<String>, coords: Vec<Vec<f64>>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::param("finite space must be non-empty"));
        }
        if labels.len() != coords.len() {
            return Err(Error::shape(format!(
                "{} labels but {} coordinates",
                labels.len(),
                coords.len()
            )));
        }
        let dim = coords[0].len();
        if dim == 0 {
            return Err(Error::param("coordinates must have dimension >= 1"));
        }
        for (i, c) in coords.iter().enumerate() {
            if c.len() != dim {
                return Err(Error::shape(format!(
                    "point {i} has dimension {}, expected {dim}",
                    c.len()
                )));
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::param(format!("point {i} has a non-finite coordinate")));
            }
        }
        for i in 0..labels.len() {
            if labels[i + 1..].contains(&labels[i]) {
                return Err(Error::param(format!("duplicate label `{}`", labels[i])));
            }
        }
        Ok(Self { labels, coords })
    }

    /// Points on the real line, labelled by their coordinate.
    pub fn line(points: &[f64]) -> Result<Self> {
        let labels = points.iter().map(|x| format_coord(*x)).collect();
        Self::new(labels, points.iter().map(|x| vec![*x]).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn coords(&self) -> &[Vec<f64>] {
        &self.coords
    }

    pub fn coord(&self, i: usize) -> &[f64] {
        &self.coords[i]
    }

    pub fn dim(&self) -> usize {
        self.coords[0].len()
    }

    /// First coordinate of every point, when the space is one-dimensional.
    pub fn line_coords(&self) -> Option<Vec<f64>> {
        (self.dim() == 1).then(|| self.coords.iter().map(|c| c[0]).collect())
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.coords[i]
            .iter()
            .zip(&self.coords[j])
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

fn format_coord(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

/// Probability weights on the points of a finite space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Distribution {
    weights: Vec<f64>,
}

impl Distribution {
    /// Simplex membership tolerance on the total mass.
    pub const TOLERANCE: f64 = 1e-12;

    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let d = Self { weights };
        match d.simplex_defect() {
            None => Ok(d),
            Some(msg) => Err(Error::InvalidDistribution(msg)),
        }
    }

    /// Wraps weights without validation. Used by diagnostics that must be
    /// able to represent broken inputs.
    pub fn from_raw(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    /// Rescales non-negative weights to unit mass. Only config loading uses
    /// this; computed rows are never renormalized.
    pub fn normalized(weights: Vec<f64>, slack: f64) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDistribution(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > slack {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}, outside 1 ± {slack}"
            )));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn point_mass(n: usize, i: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[i] = 1.0;
        Self { weights }
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// Empirical measure of a list of occupied indices.
    pub fn empirical(n: usize, occupied: &[usize]) -> Self {
        let mut weights = vec![0.0; n];
        let unit = 1.0 / occupied.len() as f64;
        for &i in occupied {
            weights[i] += unit;
        }
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn dot(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, x)| w * x).sum()
    }

    pub fn is_valid(&self) -> bool {
        self.simplex_defect().is_none()
    }

    /// Why the weights are not a probability vector, if they are not.
    pub fn simplex_defect(&self) -> Option<String> {
        if self.weights.is_empty() {
            return Some("empty weight vector".into());
        }
        if let Some((i, w)) = self
            .weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Some(format!("weight {i} is {w}"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > Self::TOLERANCE {
            return Some(format!("weights sum to {total}"));
        }
        None
    }

    pub fn linf_distance(&self, other: &Distribution) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `(1 - alpha) * self + alpha * other`.
    pub fn mix(&self, other: &Distribution, alpha: f64) -> Distribution {
        Distribution {
            weights: self
                .weights
                .iter()
                .zip(&other.weights)
                .map(|(a, b)| (1.0 - alpha) * a + alpha * b)
                .collect(),
        }
    }

    /// Smallest index attaining the largest weight.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, w) in self.weights.iter().enumerate() {
            if *w > self.weights[best] {
                best = i;
            }
        }
        best
    }
}
