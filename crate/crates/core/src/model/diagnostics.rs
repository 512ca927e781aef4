//! Structural checks on a game: stored laws are probability vectors, the
//! reward is bounded, and the ambiguity sets do not move with the population.

use serde::Serialize;

use super::ambiguity::AmbiguitySet;
use super::game::GameSpec;
use super::reward::RewardModel;
use super::space::Distribution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Unchecked,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticCheck {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticsReport {
    pub checks: Vec<DiagnosticCheck>,
    /// Certified `sup |r|`, when one is known.
    pub reward_bound: Option<f64>,
    /// Lipschitz constant of `r` in the population argument.
    pub reward_lipschitz: Option<f64>,
    /// Lipschitz constant of the ambiguity sets in the population argument.
    pub ambiguity_lipschitz: Option<f64>,
}

impl DiagnosticsReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn failures(&self) -> Vec<&DiagnosticCheck> {
        self.checks
            .iter()
            .filter(|c| c.status == CheckStatus::Fail)
            .collect()
    }

    pub fn check(&self, name: &str) -> Option<&DiagnosticCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &str, status: CheckStatus, detail: impl Into<String>) {
        self.checks.push(DiagnosticCheck {
            name: name.into(),
            status,
            detail: detail.into(),
        });
    }
}

/// Largest `|ln(x + c)|` for `x ∈ [0, 1]`.
fn log_term_bound(c: f64) -> f64 {
    (-c.ln()).max((1.0 + c).ln())
}

/// All laws on `n` points with weights in multiples of `1/k`.
pub(crate) fn simplex_grid(n: usize, k: usize) -> Vec<Distribution> {
    fn rec(n: usize, left: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Distribution>) {
        if cur.len() == n - 1 {
            cur.push(left);
            out.push(Distribution::from_raw(
                cur.iter().map(|&c| c as f64 / k as f64).collect(),
            ));
            cur.pop();
            return;
        }
        for take in 0..=left {
            cur.push(take);
            rec(n, left - take, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, k, k, &mut Vec::with_capacity(n), &mut out);
    out
}

/// Finest grid resolution keeping the number of sampled laws manageable.
fn sample_resolution(n: usize) -> usize {
    let count = |k: usize| -> f64 {
        // C(k + n - 1, n - 1)
        (1..n).fold(1.0, |acc, i| acc * (k + i) as f64 / i as f64)
    };
    let mut k = 1;
    while k < 20 && count(k + 1) <= 5000.0 {
        k += 1;
    }
    k
}

pub fn validate_assumptions(spec: &GameSpec) -> DiagnosticsReport {
    let mut report = DiagnosticsReport {
        checks: Vec::new(),
        reward_bound: None,
        reward_lipschitz: None,
        ambiguity_lipschitz: None,
    };
    let (ns, na) = (spec.n_states(), spec.n_actions());

    match spec.initial().simplex_defect() {
        None => report.push("simplex.initial", CheckStatus::Pass, "initial law is a probability vector"),
        Some(msg) => report.push("simplex.initial", CheckStatus::Fail, msg),
    }

    let mut defects = Vec::new();
    for (t, set) in spec.ambiguity().sets().iter().enumerate() {
        for (m, kernel) in set.kernels().iter().enumerate() {
            if let Some(msg) = kernel.first_defect() {
                defects.push(format!("t={t} kernel {m}: {msg}"));
            }
        }
    }
    if defects.is_empty() {
        report.push("simplex.kernels", CheckStatus::Pass, "all reference rows are probability vectors");
    } else {
        report.push("simplex.kernels", CheckStatus::Fail, defects.join("; "));
    }

    let grid = simplex_grid(ns, sample_resolution(ns));
    let mut observed: f64 = 0.0;
    for mu in &grid {
        for s in 0..ns {
            for a in 0..na {
                for next in 0..ns {
                    observed = observed.max(spec.reward(s, a, next, mu).abs());
                }
            }
        }
    }
    let certified = match spec.reward_model() {
        RewardModel::Crowd { c } => {
            report.reward_lipschitz = Some(1.0 / c);
            let max_state = spec.states().coords().iter().map(|x| x[0].abs()).fold(0.0, f64::max);
            let max_action = spec.actions().coords().iter().map(|x| x[0].abs()).fold(0.0, f64::max);
            if max_state <= 4.0 && max_action <= 1.0 {
                Some(17.0 / 4.0 + log_term_bound(*c))
            } else {
                // Same triangle-inequality argument on a wider grid.
                Some(1.0 + 0.5 * (max_state + 2.0) + 0.25 * max_action + log_term_bound(*c))
            }
        }
        RewardModel::Table {
            table,
            congestion,
            bound,
        } => {
            let base = table.iter().flatten().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
            let derived = base + congestion.as_ref().map_or(0.0, |cg| cg.beta.abs() * log_term_bound(cg.c));
            report.reward_lipschitz = Some(congestion.as_ref().map_or(0.0, |cg| cg.beta.abs() / cg.c));
            match bound {
                Some(b) => Some(*b),
                None => {
                    report.push(
                        "reward.bound",
                        CheckStatus::Unchecked,
                        format!("no bound claimed; derived sup |r| <= {derived}, sampled max {observed}"),
                    );
                    report.reward_bound = Some(derived);
                    None
                }
            }
        }
    };
    if let Some(cr) = certified {
        report.reward_bound = Some(cr);
        let status = if observed <= cr + 1e-12 {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        report.push(
            "reward.bound",
            status,
            format!("sampled max |r| = {observed} over {} laws, bound {cr}", grid.len()),
        );
    }

    let mut bad_radius = Vec::new();
    let mut moved = Vec::new();
    for (t, set) in spec.ambiguity().sets().iter().enumerate() {
        if let AmbiguitySet::WassersteinBall { radius, .. } = set {
            if !(*radius >= 0.0) {
                bad_radius.push(format!("t={t}: {radius}"));
            }
        }
        for kernel in set.kernels() {
            for s in 0..ns {
                for a in 0..na {
                    let anchor = kernel.row(s, a, &grid[0]);
                    if grid.iter().any(|mu| kernel.row(s, a, mu) != anchor) {
                        moved.push(format!("t={t} ({s},{a})"));
                    }
                }
            }
        }
    }
    if bad_radius.is_empty() {
        report.push("ambiguity.radius", CheckStatus::Pass, "all radii are non-negative");
    } else {
        report.push("ambiguity.radius", CheckStatus::Fail, bad_radius.join("; "));
    }
    if moved.is_empty() {
        report.ambiguity_lipschitz = Some(0.0);
        report.push(
            "ambiguity.population_independence",
            CheckStatus::Pass,
            "ambiguity sets do not depend on the population; Lipschitz constant 0",
        );
    } else {
        report.push(
            "ambiguity.population_independence",
            CheckStatus::Unchecked,
            format!("population-dependent rows at {}", moved.join(", ")),
        );
    }
    report
}
