//! Robust backward induction for the representative agent at a fixed
//! population flow, plus the residual checks that certify an equilibrium.

use rayon::prelude::*;
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inner::{worst_case_expectation_with, Backend};
use crate::keyed;
use crate::mfe::Equilibrium;
use crate::model::{push_forward, Distribution, FiniteSpace, GameSpec, KernelTable, MarkovPolicy, MeasureFlow};

/// Actions whose `Ĵ` is within this distance of the maximum count as maximizers.
pub const ARGMAX_TOLERANCE: f64 = 1e-9;

/// Below this many `(s, a)` pairs a time slice is solved sequentially.
const PARALLEL_PAIRS: usize = 256;

/// Value tables, worst-case kernels and optimal policy for one flow.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    /// `Ĵ_t(s, a)`.
    pub jhat: Vec<Vec<Vec<f64>>>,
    /// `V̂_t(s)` for `t < T`; `V̂_T ≡ 0` is implicit.
    pub vhat: Vec<Vec<f64>>,
    pub p_star: KernelTable,
    pub pi_star: MarkovPolicy,
    /// `Σ_s V̂_0(s) μ_0(s)`.
    pub v_flow: f64,
    states: FiniteSpace,
    actions: FiniteSpace,
}

impl SolveResult {
    pub fn horizon(&self) -> usize {
        self.vhat.len()
    }

    pub fn states(&self) -> &FiniteSpace {
        &self.states
    }

    pub fn actions(&self) -> &FiniteSpace {
        &self.actions
    }

    /// `V̂_t`, including the terminal zero at `t = T`.
    pub fn value_at(&self, t: usize) -> Vec<f64> {
        if t == self.horizon() {
            vec![0.0; self.states.len()]
        } else {
            self.vhat[t].clone()
        }
    }

    /// Actions within [`ARGMAX_TOLERANCE`] of `V̂_t(s)`.
    pub fn argmax_set(&self, t: usize, s: usize) -> Vec<usize> {
        let v = self.vhat[t][s];
        (0..self.actions.len())
            .filter(|&a| self.jhat[t][s][a] >= v - ARGMAX_TOLERANCE)
            .collect()
    }

    /// Mass `row` puts on actions outside the argmax set at `(t, s)`.
    pub fn off_argmax_mass(&self, t: usize, s: usize, row: &Distribution) -> f64 {
        let v = self.vhat[t][s];
        (0..self.actions.len())
            .filter(|&a| self.jhat[t][s][a] < v - ARGMAX_TOLERANCE)
            .map(|a| row.get(a))
            .sum()
    }
}

impl Serialize for SolveResult {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let times = keyed::time_keys(self.horizon());
        let (st, ac) = (&self.states, &self.actions);
        let mut map = serializer.serialize_map(Some(7))?;
        map.serialize_entry("states", st.labels())?;
        map.serialize_entry("actions", ac.labels())?;
        map.serialize_entry("Vflow", &self.v_flow)?;
        map.serialize_entry("Vhat", &keyed::by_state(&times, st, &self.vhat))?;
        map.serialize_entry("Jhat", &keyed::by_state_action(&times, st, ac, &self.jhat))?;
        map.serialize_entry("piStar", &keyed::policy(&times, st, ac, &self.pi_star))?;
        map.serialize_entry("pStar", &keyed::kernel(&times, st, ac, &self.p_star))?;
        map.end()
    }
}

pub fn backward_induction(spec: &GameSpec, flow: &MeasureFlow) -> Result<SolveResult> {
    backward_induction_with(spec, flow, Backend::Greedy)
}

pub fn backward_induction_with(spec: &GameSpec, flow: &MeasureFlow, backend: Backend) -> Result<SolveResult> {
    spec.check_flow_shape(flow.horizon(), flow.at(0).len())?;
    let (ns, na, horizon) = (spec.n_states(), spec.n_actions(), spec.horizon());
    let mut jhat = vec![Vec::new(); horizon];
    let mut vhat = vec![Vec::new(); horizon];
    let mut kernel = vec![Vec::new(); horizon];
    let mut choice = vec![vec![0usize; ns]; horizon];
    let mut next_value = vec![0.0; ns];

    for t in (0..horizon).rev() {
        let slice = solve_slice(spec, t, flow.at(t), &next_value, backend)?;
        let mut values = vec![0.0; ns];
        for (s, (row, _)) in slice.iter().enumerate() {
            let mut best = 0;
            for a in 1..na {
                if row[a] > row[best] {
                    best = a;
                }
            }
            choice[t][s] = best;
            values[s] = row[best];
        }
        let (j, p): (Vec<_>, Vec<_>) = slice.into_iter().unzip();
        jhat[t] = j;
        kernel[t] = p;
        vhat[t] = values.clone();
        next_value = values;
    }

    let v_flow = flow.at(0).dot(&vhat[0]);
    Ok(SolveResult {
        jhat,
        vhat,
        p_star: KernelTable::from_rows_unchecked(kernel),
        pi_star: MarkovPolicy::deterministic(&choice, na),
        v_flow,
        states: spec.states().clone(),
        actions: spec.actions().clone(),
    })
}

/// `Ĵ_t(s, ·)` and the inner minimizers for every state at one time step.
fn solve_slice(
    spec: &GameSpec,
    t: usize,
    mu: &Distribution,
    next_value: &[f64],
    backend: Backend,
) -> Result<Vec<(Vec<f64>, Vec<Distribution>)>> {
    let solve_state = |s: usize| -> Result<(Vec<f64>, Vec<Distribution>)> {
        let mut values = Vec::with_capacity(spec.n_actions());
        let mut laws = Vec::with_capacity(spec.n_actions());
        for a in 0..spec.n_actions() {
            let sol = worst_case_at(spec, t, s, a, mu, next_value, backend)?;
            values.push(sol.value);
            laws.push(sol.minimizer);
        }
        Ok((values, laws))
    };
    let rows: Vec<_> = if spec.n_states() * spec.n_actions() >= PARALLEL_PAIRS {
        (0..spec.n_states()).into_par_iter().map(solve_state).collect()
    } else {
        (0..spec.n_states()).map(solve_state).collect()
    };
    rows.into_iter().collect()
}

/// Inner problem for `f(s') = r(s, a, s', μ) + next_value(s')`.
pub(crate) fn worst_case_at(
    spec: &GameSpec,
    t: usize,
    s: usize,
    a: usize,
    mu: &Distribution,
    next_value: &[f64],
    backend: Backend,
) -> Result<crate::inner::InnerSolution> {
    let mut f = spec.reward_row(s, a, mu);
    for (x, v) in f.iter_mut().zip(next_value) {
        *x += v;
    }
    worst_case_expectation_with(&f, &spec.ambiguity_at(t, s, a, mu), backend).map_err(|e| Error::Inner {
        t,
        s,
        a,
        source: Box::new(e),
    })
}

/// `V̂(μ_{0:T})`.
pub fn value_of_flow(spec: &GameSpec, flow: &MeasureFlow) -> Result<f64> {
    Ok(backward_induction(spec, flow)?.v_flow)
}

fn check_policy_shape(spec: &GameSpec, policy: &MarkovPolicy) -> Result<()> {
    if policy.horizon() != spec.horizon()
        || policy.n_states() != spec.n_states()
        || policy.n_actions() != spec.n_actions()
    {
        return Err(Error::shape(format!(
            "policy is {}x{}x{}, game needs {}x{}x{}",
            policy.horizon(),
            policy.n_states(),
            policy.n_actions(),
            spec.horizon(),
            spec.n_states(),
            spec.n_actions()
        )));
    }
    Ok(())
}

/// Worst-case value of following `policy` against the flow; the adversary
/// reacts to each realized state-action pair.
pub fn robust_policy_eval(spec: &GameSpec, flow: &MeasureFlow, policy: &MarkovPolicy) -> Result<f64> {
    spec.check_flow_shape(flow.horizon(), flow.at(0).len())?;
    check_policy_shape(spec, policy)?;
    let ns = spec.n_states();
    let mut w = vec![0.0; ns];
    for t in (0..spec.horizon()).rev() {
        let mu = flow.at(t);
        let mut current = vec![0.0; ns];
        for (s, out) in current.iter_mut().enumerate() {
            let pi = policy.row(t, s);
            for a in 0..spec.n_actions() {
                let weight = pi.get(a);
                if weight == 0.0 {
                    continue;
                }
                *out += weight * worst_case_at(spec, t, s, a, mu, &w, Backend::Greedy)?.value;
            }
        }
        w = current;
    }
    Ok(flow.at(0).dot(&w))
}

/// How far a candidate `(μ, π, p)` is from satisfying the equilibrium
/// conditions. All entries are non-negative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `max_{t,s} |V̂_t(s) - Σ_a π_t(a|s) Ĵ_t(s,a)|`.
    pub optimality: f64,
    /// `max_{t,s,a}` of the gap between `Ĵ_t(s,a)` and the candidate kernel's
    /// expectation, plus how far the candidate row lies outside the set.
    pub adversary: f64,
    /// `|μ_0 - μ^o|` and the flow-equation gap, sup-norm over time.
    pub flow: f64,
    /// Largest policy mass on actions outside the argmax set.
    pub support_violation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ResidualReport {
    fn failed(msg: String) -> Self {
        Self {
            optimality: f64::INFINITY,
            adversary: f64::INFINITY,
            flow: f64::INFINITY,
            support_violation: f64::INFINITY,
            error: Some(msg),
        }
    }

    pub fn max(&self) -> f64 {
        self.optimality
            .max(self.adversary)
            .max(self.flow)
            .max(self.support_violation)
    }

    pub fn accepted(&self, tau: f64) -> bool {
        self.error.is_none() && self.max() <= tau
    }
}

/// Residuals of `candidate` against a fresh backward induction at its flow.
pub fn check_mfe(spec: &GameSpec, candidate: &Equilibrium) -> ResidualReport {
    residuals(spec, &candidate.flow, &candidate.policy, &candidate.kernel)
}

pub fn residuals(spec: &GameSpec, flow: &MeasureFlow, policy: &MarkovPolicy, kernel: &KernelTable) -> ResidualReport {
    compute_residuals(spec, flow, policy, kernel).unwrap_or_else(|e| ResidualReport::failed(e.to_string()))
}

fn compute_residuals(
    spec: &GameSpec,
    flow: &MeasureFlow,
    policy: &MarkovPolicy,
    kernel: &KernelTable,
) -> Result<ResidualReport> {
    check_policy_shape(spec, policy)?;
    if kernel.horizon() != spec.horizon() {
        return Err(Error::shape("kernel table horizon does not match the game"));
    }
    let sol = backward_induction(spec, flow)?;
    let (ns, na) = (spec.n_states(), spec.n_actions());
    let mut report = ResidualReport {
        optimality: 0.0,
        adversary: 0.0,
        flow: flow.at(0).linf_distance(spec.initial()),
        support_violation: 0.0,
        error: None,
    };
    for t in 0..spec.horizon() {
        let mu = flow.at(t);
        let next_value = sol.value_at(t + 1);
        for s in 0..ns {
            let pi = policy.row(t, s);
            let mixed: f64 = (0..na).map(|a| pi.get(a) * sol.jhat[t][s][a]).sum();
            report.optimality = report.optimality.max((sol.vhat[t][s] - mixed).abs());
            report.support_violation = report.support_violation.max(sol.off_argmax_mass(t, s, pi));
            for a in 0..na {
                let p = kernel.row(t, s, a);
                if p.len() != ns {
                    return Err(Error::shape(format!("kernel row ({t},{s},{a}) has length {}", p.len())));
                }
                let mut f = spec.reward_row(s, a, mu);
                for (x, v) in f.iter_mut().zip(&next_value) {
                    *x += v;
                }
                let gap = (p.dot(&f) - sol.jhat[t][s][a]).abs();
                let outside = spec.ambiguity_at(t, s, a, mu).excess(p)?;
                let defect = if p.is_valid() { 0.0 } else { simplex_gap(p) };
                report.adversary = report.adversary.max(gap + outside + defect);
            }
        }
        if t + 1 < spec.horizon() {
            let pushed = push_forward(mu, policy, kernel, t);
            report.flow = report.flow.max(pushed.linf_distance(flow.at(t + 1)));
        }
    }
    Ok(report)
}

fn simplex_gap(p: &Distribution) -> f64 {
    let negative: f64 = p.weights().iter().map(|w| (-w).max(0.0)).sum();
    let total: f64 = p.weights().iter().sum();
    negative + (total - 1.0).abs()
}

/// `ν_t(s, a) = μ_t(s) π_t(a|s)`.
pub fn joint_laws(flow: &MeasureFlow, policy: &MarkovPolicy) -> Vec<Vec<Vec<f64>>> {
    flow.steps()
        .iter()
        .enumerate()
        .map(|(t, mu)| {
            (0..mu.len())
                .map(|s| policy.row(t, s).weights().iter().map(|p| mu.get(s) * p).collect())
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixedPointStep {
    pub t: usize,
    /// Largest conditional action mass off the argmax set at charged states.
    pub best_response_violation: f64,
    /// Sup-norm gap between `ν_{t,S}` and the consistent flow.
    pub consistency_gap: f64,
    pub best_response_pass: bool,
    pub consistency_pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixedPointReport {
    pub steps: Vec<FixedPointStep>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Checks that joint state-action laws `nu[t][s][a]` are a fixed point:
/// their conditionals are best responses to their own state marginals, and
/// the marginals start at `μ^o` and follow the worst-case kernels.
pub fn check_fixed_point(spec: &GameSpec, nu: &[Vec<Vec<f64>>], tol: f64) -> FixedPointReport {
    match fixed_point_steps(spec, nu, tol) {
        Ok(steps) => FixedPointReport {
            passed: steps.iter().all(|s| s.best_response_pass && s.consistency_pass),
            steps,
            error: None,
        },
        Err(e) => FixedPointReport {
            steps: Vec::new(),
            passed: false,
            error: Some(e.to_string()),
        },
    }
}

fn fixed_point_steps(spec: &GameSpec, nu: &[Vec<Vec<f64>>], tol: f64) -> Result<Vec<FixedPointStep>> {
    let (ns, na) = (spec.n_states(), spec.n_actions());
    if nu.len() != spec.horizon() || nu.iter().any(|step| step.len() != ns || step.iter().any(|r| r.len() != na)) {
        return Err(Error::shape(format!(
            "joint laws must have shape {}x{ns}x{na}",
            spec.horizon()
        )));
    }
    let mut marginals = Vec::with_capacity(nu.len());
    for (t, step) in nu.iter().enumerate() {
        let m = Distribution::from_raw(step.iter().map(|row| row.iter().sum()).collect());
        let negative = step.iter().flatten().any(|x| !(*x >= 0.0));
        if negative || m.simplex_defect().is_some() {
            return Err(Error::InvalidDistribution(format!(
                "joint law at t={t} is not a probability on S×A"
            )));
        }
        marginals.push(m);
    }
    let flow = MeasureFlow::new(marginals)?;
    let sol = backward_induction(spec, &flow)?;

    let mut rows = Vec::with_capacity(spec.horizon());
    for t in 0..spec.horizon() {
        let mut step = Vec::with_capacity(ns);
        for s in 0..ns {
            let m = flow.at(t).get(s);
            step.push(if m > 0.0 {
                Distribution::from_raw(nu[t][s].iter().map(|x| x / m).collect())
            } else {
                sol.pi_star.row(t, s).clone()
            });
        }
        rows.push(step);
    }
    let disintegration = MarkovPolicy::new(rows)
        .unwrap_or_else(|_| sol.pi_star.clone());

    let mut steps = Vec::with_capacity(spec.horizon());
    for t in 0..spec.horizon() {
        let mu = flow.at(t);
        let violation = (0..ns)
            .filter(|&s| mu.get(s) > 0.0)
            .map(|s| sol.off_argmax_mass(t, s, disintegration.row(t, s)))
            .fold(0.0, f64::max);
        let gap = if t == 0 {
            mu.linf_distance(spec.initial())
        } else {
            push_forward(flow.at(t - 1), &disintegration, &sol.p_star, t - 1).linf_distance(mu)
        };
        steps.push(FixedPointStep {
            t,
            best_response_violation: violation,
            consistency_gap: gap,
            best_response_pass: violation <= tol,
            consistency_pass: gap <= tol,
        });
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{reference_crowd_game, AmbiguityFamily, AmbiguitySet, ReferenceKernel, RewardModel};

    fn table_game(table: Vec<Vec<Vec<f64>>>, kernel: Vec<Vec<Vec<f64>>>, horizon: usize, radius: f64) -> GameSpec {
        let ns = table.len();
        let coords: Vec<f64> = (0..ns).map(|i| i as f64).collect();
        let na = table[0].len();
        let kernel = ReferenceKernel::new(
            kernel
                .into_iter()
                .map(|r| r.into_iter().map(|w| Distribution::new(w).unwrap()).collect())
                .collect(),
        )
        .unwrap();
        GameSpec::new(
            FiniteSpace::line(&coords).unwrap(),
            FiniteSpace::line(&(0..na).map(|a| a as f64).collect::<Vec<_>>()).unwrap(),
            horizon,
            Distribution::uniform(ns),
            RewardModel::Table {
                table,
                congestion: None,
                bound: None,
            },
            AmbiguityFamily::repeated(AmbiguitySet::WassersteinBall { kernel, radius }, horizon),
        )
        .unwrap()
    }

    #[test]
    fn constant_reward_counts_remaining_steps() {
        let g = table_game(
            vec![vec![vec![1.0; 3]; 2]; 3],
            vec![vec![vec![0.2, 0.3, 0.5]; 2]; 3],
            4,
            0.7,
        );
        let flow = MeasureFlow::constant(g.initial(), 4);
        let sol = backward_induction(&g, &flow).unwrap();
        for t in 0..4 {
            for s in 0..3 {
                assert!((sol.vhat[t][s] - (4 - t) as f64).abs() < 1e-12);
            }
        }
        assert!((sol.v_flow - 4.0).abs() < 1e-12);
        let uniform = MarkovPolicy::uniform(4, 3, 2);
        assert!((robust_policy_eval(&g, &flow, &uniform).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_reward_has_zero_value() {
        let g = table_game(vec![vec![vec![0.0; 2]; 2]; 2], vec![vec![vec![0.5, 0.5]; 2]; 2], 2, 0.3);
        assert_eq!(value_of_flow(&g, &MeasureFlow::constant(g.initial(), 2)).unwrap(), 0.0);
    }

    #[test]
    fn ties_pick_the_lowest_action() {
        let g = table_game(vec![vec![vec![1.0; 2]; 3]; 2], vec![vec![vec![0.5, 0.5]; 3]; 2], 1, 0.0);
        let sol = backward_induction(&g, &MeasureFlow::constant(g.initial(), 1)).unwrap();
        assert_eq!(sol.pi_star.row(0, 0).get(0), 1.0);
        assert_eq!(sol.argmax_set(0, 1), vec![0, 1, 2]);
    }

    #[test]
    fn optimal_policy_attains_flow_value() {
        for lambda in [0.0, 0.25, 1.0] {
            let g = reference_crowd_game(lambda);
            let flow = MeasureFlow::constant(g.initial(), 2);
            let sol = backward_induction(&g, &flow).unwrap();
            let v = robust_policy_eval(&g, &flow, &sol.pi_star).unwrap();
            assert!((v - sol.v_flow).abs() < 1e-10);
            let uniform = MarkovPolicy::uniform(2, 5, 3);
            assert!(robust_policy_eval(&g, &flow, &uniform).unwrap() <= sol.v_flow + 1e-10);
        }
    }

    #[test]
    fn values_decrease_with_the_radius() {
        let flow = MeasureFlow::constant(reference_crowd_game(0.0).initial(), 2);
        let sols: Vec<_> = [0.0, 0.25, 1.0 / 3.0, 0.5, 1.0]
            .iter()
            .map(|&l| backward_induction(&reference_crowd_game(l), &flow).unwrap())
            .collect();
        for pair in sols.windows(2) {
            for t in 0..2 {
                for s in 0..5 {
                    assert!(pair[1].vhat[t][s] <= pair[0].vhat[t][s] + 1e-12);
                    for a in 0..3 {
                        assert!(pair[1].jhat[t][s][a] <= pair[0].jhat[t][s][a] + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn kernels_attain_the_inner_value_and_stay_in_the_ball() {
        let g = reference_crowd_game(0.5);
        let flow = MeasureFlow::constant(g.initial(), 2);
        let sol = backward_induction(&g, &flow).unwrap();
        let report = residuals(&g, &flow, &sol.pi_star, &sol.p_star);
        assert!(report.adversary <= 1e-10, "{report:?}");
        assert!(report.optimality <= 1e-12);
        assert_eq!(report.support_violation, 0.0);
    }

    #[test]
    fn value_bound_propagates() {
        let g = reference_crowd_game(1.0);
        let bound = 17.0 / 4.0 - (1e-7f64).ln();
        let sol = backward_induction(&g, &MeasureFlow::constant(g.initial(), 2)).unwrap();
        for t in 0..2 {
            for s in 0..5 {
                assert!(sol.vhat[t][s].abs() <= (2 - t) as f64 * bound);
            }
        }
    }

    #[test]
    fn greedy_and_lp_backends_agree() {
        let g = reference_crowd_game(1.0 / 3.0);
        let flow = MeasureFlow::constant(g.initial(), 2);
        let a = backward_induction_with(&g, &flow, Backend::Greedy).unwrap();
        let b = backward_induction_with(&g, &flow, Backend::Lp).unwrap();
        for t in 0..2 {
            for s in 0..5 {
                for x in 0..3 {
                    assert!((a.jhat[t][s][x] - b.jhat[t][s][x]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn rejects_mismatched_flow() {
        let g = reference_crowd_game(0.0);
        let flow = MeasureFlow::constant(g.initial(), 3);
        assert!(backward_induction(&g, &flow).is_err());
    }

    /// Two states, two actions: action 0 pays 1 and action 1 pays 0, nothing
    /// else matters.
    fn toy() -> GameSpec {
        let mut table = vec![vec![vec![0.0; 2]; 2]; 2];
        for row in table.iter_mut() {
            row[0] = vec![1.0, 1.0];
        }
        table_game(table, vec![vec![vec![0.5, 0.5]; 2]; 2], 2, 0.0)
    }

    #[test]
    fn perturbed_policy_violates_support() {
        let g = toy();
        let flow = MeasureFlow::constant(g.initial(), 2);
        let sol = backward_induction(&g, &flow).unwrap();
        let mixed = Distribution::new(vec![0.9, 0.1]).unwrap();
        let mut rows = sol.pi_star.rows().to_vec();
        rows[0][1] = mixed;
        let policy = MarkovPolicy::new(rows).unwrap();
        let report = residuals(&g, &flow, &policy, &sol.p_star);
        // By hand: Ĵ_0(1,·) = (2, 1), so the mixture loses 0.1.
        assert!((report.support_violation - 0.1).abs() < 1e-12);
        assert!((report.optimality - 0.1).abs() < 1e-12);
        assert!(!report.accepted(1e-8));
    }

    #[test]
    fn replaced_flow_step_shows_a_flow_residual() {
        let g = reference_crowd_game(0.25);
        let flow = MeasureFlow::constant(g.initial(), 2);
        let sol = backward_induction(&g, &flow).unwrap();
        let pushed = push_forward(flow.at(0), &sol.pi_star, &sol.p_star, 0);
        let uniform = Distribution::uniform(5);
        let expect = pushed.linf_distance(&uniform);
        let report = residuals(&g, &flow.with_step(1, uniform), &sol.pi_star, &sol.p_star);
        assert!(report.flow >= expect.min(1e-3));
        assert!(report.flow > 0.0);
    }

    #[test]
    fn fixed_point_detects_violations() {
        let g = toy();
        let flow = MeasureFlow::constant(g.initial(), 2);
        let sol = backward_induction(&g, &flow).unwrap();
        let good = joint_laws(&flow, &sol.pi_star);
        assert!(check_fixed_point(&g, &good, 1e-9).passed);

        let mut bad_action = good.clone();
        bad_action[1][0] = vec![0.0, 0.5];
        let report = check_fixed_point(&g, &bad_action, 1e-9);
        assert!(!report.steps[1].best_response_pass);
        assert!(report.steps[1].consistency_pass);

        let mut bad_start = good.clone();
        bad_start[0] = vec![vec![0.8, 0.0], vec![0.2, 0.0]];
        let report = check_fixed_point(&g, &bad_start, 1e-9);
        assert!(!report.steps[0].consistency_pass);
    }

    #[test]
    fn json_is_keyed_by_labels() {
        let g = reference_crowd_game(0.0);
        let sol = backward_induction(&g, &MeasureFlow::constant(g.initial(), 2)).unwrap();
        let v: serde_json::Value = serde_json::to_value(&sol).unwrap();
        assert!(v["Jhat"]["1"]["4"]["-1"].is_number());
        assert!(v["pStar"]["0"]["2"]["0"]["3"].is_number());
        assert_eq!(v["piStar"]["0"]["0"].as_object().unwrap().len(), 3);
    }
}
