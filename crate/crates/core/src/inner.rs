//! The adversary's one-step problem: minimize `Σ_k f(k) P(k)` over an
//! ambiguity set of next-state laws.
//!
//! For a Wasserstein ball `{P : W1(P, p) ≤ λ}` the problem is the linear
//! program over couplings `γ ≥ 0` with row sums `p`, transport budget
//! `Σ c_jk γ_jk ≤ λ`, and objective `Σ f(k) γ_jk`. Splitting by source `j`,
//! the best objective reachable from `j` with a given per-unit budget is the
//! lower convex envelope of the points `(c_jk, f(k))`. Every edge of an
//! envelope is a divisible item with gain/cost ratio equal to its slope, and
//! the envelopes are convex, so filling the budget in order of decreasing
//! ratio is optimal (a fractional knapsack). [`Backend::Lp`] solves the same
//! program with the simplex method and serves as the reference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::StandardLp;
use crate::model::Distribution;
use crate::transport::{w1_lp, CostMatrix, Coupling};

/// Slack allowed when testing ball membership.
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-9;

/// One concrete ambiguity set `𝔓_t(s, a, μ)`.
#[derive(Clone, Debug)]
pub enum AmbiguityInstance<'a> {
    Singleton(&'a Distribution),
    FiniteSet(Vec<&'a Distribution>),
    Ball {
        center: &'a Distribution,
        radius: f64,
        cost: &'a CostMatrix,
    },
}

impl AmbiguityInstance<'_> {
    /// Whether `p` belongs to the set (balls up to [`MEMBERSHIP_TOLERANCE`]).
    pub fn contains(&self, p: &Distribution) -> Result<bool> {
        match self {
            AmbiguityInstance::Singleton(q) => Ok(p.linf_distance(q) <= MEMBERSHIP_TOLERANCE),
            AmbiguityInstance::FiniteSet(qs) => {
                Ok(qs.iter().any(|q| p.linf_distance(q) <= MEMBERSHIP_TOLERANCE))
            }
            AmbiguityInstance::Ball {
                center,
                radius,
                cost,
            } => ball_membership(p, center, *radius, cost),
        }
    }

    /// Amount by which `p` lies outside the set: W1 excess over the radius for
    /// balls, sup-norm distance to the nearest member otherwise.
    pub fn excess(&self, p: &Distribution) -> Result<f64> {
        Ok(match self {
            AmbiguityInstance::Singleton(q) => p.linf_distance(q),
            AmbiguityInstance::FiniteSet(qs) => qs
                .iter()
                .map(|q| p.linf_distance(q))
                .fold(f64::INFINITY, f64::min),
            AmbiguityInstance::Ball {
                center,
                radius,
                cost,
            } => (w1_lp(p, center, cost)?.0 - radius).max(0.0),
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Greedy,
    Lp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerSolution {
    /// `Σ f · minimizer`.
    pub value: f64,
    pub minimizer: Distribution,
    /// Transport cost actually spent moving away from the ball centre.
    pub budget_used: f64,
}

/// Exact worst-case expectation of `f` over `set`, greedy backend.
pub fn worst_case_expectation(f: &[f64], set: &AmbiguityInstance<'_>) -> Result<InnerSolution> {
    worst_case_expectation_with(f, set, Backend::Greedy)
}

pub fn worst_case_expectation_with(
    f: &[f64],
    set: &AmbiguityInstance<'_>,
    backend: Backend,
) -> Result<InnerSolution> {
    if let Some(i) = f.iter().position(|x| !x.is_finite()) {
        return Err(Error::param(format!("objective entry {i} is not finite")));
    }
    let solution = |minimizer: Distribution, budget_used: f64| InnerSolution {
        value: minimizer.dot(f),
        minimizer,
        budget_used,
    };
    match set {
        AmbiguityInstance::Singleton(p) => {
            check_len(f, p)?;
            Ok(solution((*p).clone(), 0.0))
        }
        AmbiguityInstance::FiniteSet(members) => {
            let mut best: Option<(f64, &Distribution)> = None;
            for p in members {
                check_len(f, p)?;
                let v = p.dot(f);
                if best.is_none_or(|(bv, _)| v < bv) {
                    best = Some((v, p));
                }
            }
            let (_, p) = best.ok_or_else(|| Error::param("empty ambiguity set"))?;
            Ok(solution(p.clone(), 0.0))
        }
        AmbiguityInstance::Ball {
            center,
            radius,
            cost,
        } => {
            if !(*radius >= 0.0) || !radius.is_finite() {
                return Err(Error::param(format!("radius must be >= 0, got {radius}")));
            }
            check_len(f, center)?;
            if cost.len() != center.len() {
                return Err(Error::shape("cost matrix does not match the ball centre"));
            }
            let coupling = match backend {
                Backend::Greedy => greedy_ball(f, center, *radius, cost),
                Backend::Lp => lp_ball(f, center, *radius, cost)?,
            };
            let minimizer = Distribution::from_raw(coupling.col_sums());
            Ok(solution(minimizer, coupling.cost(cost)))
        }
    }
}

fn check_len(f: &[f64], p: &Distribution) -> Result<()> {
    if f.len() != p.len() {
        return Err(Error::shape(format!(
            "objective has {} entries, law has {}",
            f.len(),
            p.len()
        )));
    }
    Ok(())
}

/// `W1(p, center) ≤ radius + 1e-9`.
pub fn ball_membership(p: &Distribution, center: &Distribution, radius: f64, cost: &CostMatrix) -> Result<bool> {
    Ok(w1_lp(p, center, cost)?.0 <= radius + MEMBERSHIP_TOLERANCE)
}

/// One envelope edge: move the mass of `source` sitting at `from` to `to`.
struct Move {
    ratio: f64,
    source: usize,
    from: usize,
    to: usize,
    /// Extra transport cost per unit of mass.
    step_cost: f64,
}

fn greedy_ball(f: &[f64], center: &Distribution, radius: f64, cost: &CostMatrix) -> Coupling {
    let n = f.len();
    let mut mass = vec![0.0; n * n];
    let mut moves = Vec::new();

    for j in 0..n {
        let pj = center.get(j);
        if pj == 0.0 {
            continue;
        }
        // Free moves first: the cheapest-to-reach, lowest-f point at cost 0.
        let mut at = j;
        for k in 0..n {
            if cost.get(j, k) == 0.0 && (f[k] < f[at] || (f[k] == f[at] && k < at)) {
                at = k;
            }
        }
        mass[j * n + at] = pj;

        // Walk the lower convex envelope of {(c_jk, f_k)} from `at`.
        loop {
            let (c0, f0) = (cost.get(j, at), f[at]);
            let mut next: Option<(usize, f64)> = None;
            for k in 0..n {
                let dc = cost.get(j, k) - c0;
                if dc <= 0.0 || f[k] >= f0 {
                    continue;
                }
                let slope = (f[k] - f0) / dc;
                next = match next {
                    None => Some((k, slope)),
                    Some((b, bs)) => {
                        let better = slope < bs
                            || (slope == bs && (f[k] < f[b] || (f[k] == f[b] && k < b)));
                        if better {
                            Some((k, slope))
                        } else {
                            Some((b, bs))
                        }
                    }
                };
            }
            let Some((k, slope)) = next else { break };
            moves.push(Move {
                ratio: -slope,
                source: j,
                from: at,
                to: k,
                step_cost: cost.get(j, k) - c0,
            });
            at = k;
        }
    }

    // Highest ratio first; ties move mass off the highest-f point onto the
    // lowest-f point, then by index.
    moves.sort_by(|a, b| {
        b.ratio
            .total_cmp(&a.ratio)
            .then(f[b.from].total_cmp(&f[a.from]))
            .then(f[a.to].total_cmp(&f[b.to]))
            .then(a.source.cmp(&b.source))
            .then(a.to.cmp(&b.to))
    });

    let mut budget = radius;
    for mv in &moves {
        if budget <= 0.0 {
            break;
        }
        let j = mv.source;
        let available = mass[j * n + mv.from];
        let full_cost = available * mv.step_cost;
        let moved = if full_cost <= budget {
            budget -= full_cost;
            available
        } else {
            let part = budget / mv.step_cost;
            budget = 0.0;
            part
        };
        mass[j * n + mv.from] -= moved;
        mass[j * n + mv.to] += moved;
    }
    Coupling::from_mass(n, n, mass)
}

fn lp_ball(f: &[f64], center: &Distribution, radius: f64, cost: &CostMatrix) -> Result<Coupling> {
    let n = f.len();
    // Variables γ_jk (n²) and one budget slack; n supply rows plus the budget row.
    let slack = n * n;
    let mut lp = StandardLp::new(n + 1, n * n + 1);
    for j in 0..n {
        for k in 0..n {
            let v = j * n + k;
            lp.set(j, v, 1.0);
            lp.set(n, v, cost.get(j, k));
            lp.c[v] = f[k];
        }
        lp.b[j] = center.get(j);
    }
    lp.set(n, slack, 1.0);
    lp.b[n] = radius;
    // Leaving all mass in place is feasible.
    let mut basis: Vec<usize> = (0..n).map(|j| j * n + j).collect();
    basis.push(slack);
    let x = lp.minimize(&basis)?;
    Ok(Coupling::from_mass(n, n, x[..n * n].to_vec()))
}
