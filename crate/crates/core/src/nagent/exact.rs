//! Backward recursion on the joint state space `S^N` for a fixed profile.
//!
//! At the last step only agent `i`'s own next state enters its payoff, so the
//! adversary's problem is a single inner problem. Earlier, the continuation
//! value couples all agents and the adversary minimizes a multilinear function
//! over a product of ambiguity sets; that is done by coordinate descent (each
//! coordinate step is an exact inner problem) from several starting points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{NAgentReport, ProfilePolicy};
use crate::error::{Error, Result};
use crate::inner::{worst_case_expectation, AmbiguityInstance};
use crate::mfe::Equilibrium;
use crate::model::{Distribution, GameSpec, MarkovPolicy};

/// Largest population handled by the exact recursion.
pub const N_MAX: usize = 3;
/// Starting points for coordinate descent.
pub const RESTARTS: usize = 16;
/// Deviations enumerated before `best_response_gap` refuses.
pub const DEFAULT_CANDIDATE_LIMIT: u128 = 1_000_000;

const MAX_SWEEPS: usize = 200;
const DESCENT_SEED: u64 = 0x5eed_cafe;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactValue {
    pub value: f64,
    /// False when coordinate descent was needed, so `value` is an upper bound
    /// on the true worst case.
    pub certified: bool,
}

/// Joint states `s̄ = (s_0, ..., s_{N-1})`, indexed with agent 0 as the
/// least significant digit.
struct JointSpace {
    n: usize,
    ns: usize,
    size: usize,
    /// `states[idx]` = per-agent states.
    states: Vec<Vec<usize>>,
    empirical: Vec<Distribution>,
}

impl JointSpace {
    fn new(n: usize, ns: usize) -> Self {
        let size = ns.pow(n as u32);
        let states: Vec<Vec<usize>> = (0..size)
            .map(|mut idx| {
                (0..n)
                    .map(|_| {
                        let s = idx % ns;
                        idx /= ns;
                        s
                    })
                    .collect()
            })
            .collect();
        let empirical = states.iter().map(|s| Distribution::empirical(ns, s)).collect();
        Self {
            n,
            ns,
            size,
            states,
            empirical,
        }
    }
}

fn is_trivial(set: &AmbiguityInstance<'_>) -> bool {
    match set {
        AmbiguityInstance::Singleton(_) => true,
        AmbiguityInstance::FiniteSet(v) => v.len() == 1,
        AmbiguityInstance::Ball { radius, .. } => *radius == 0.0,
    }
}

fn center<'a>(set: &AmbiguityInstance<'a>) -> &'a Distribution {
    match set {
        AmbiguityInstance::Singleton(p) => p,
        AmbiguityInstance::FiniteSet(v) => v[0],
        AmbiguityInstance::Ball { center, .. } => center,
    }
}

/// `Σ_{s̄'} Π_k laws[k](s'_k) w(s̄')`.
fn expectation(space: &JointSpace, laws: &[&[f64]], w: &[f64]) -> f64 {
    let mut total = 0.0;
    for (idx, states) in space.states.iter().enumerate() {
        let mut weight = 1.0;
        for (k, &s) in states.iter().enumerate() {
            weight *= laws[k][s];
            if weight == 0.0 {
                break;
            }
        }
        if weight != 0.0 {
            total += weight * w[idx];
        }
    }
    total
}

/// `x ↦ Σ_{s̄': s'_j = x} Π_{k≠j} laws[k](s'_k) w(s̄')`.
fn marginal_objective(space: &JointSpace, laws: &[&[f64]], j: usize, w: &[f64]) -> Vec<f64> {
    let mut f = vec![0.0; space.ns];
    for (idx, states) in space.states.iter().enumerate() {
        let mut weight = 1.0;
        for (k, &s) in states.iter().enumerate() {
            if k != j {
                weight *= laws[k][s];
            }
        }
        if weight != 0.0 {
            f[states[j]] += weight * w[idx];
        }
    }
    f
}

/// Adversary's problem at one joint state-action: minimize
/// `⟨p_i, r_i⟩ + E_{⊗p}[w]` over the product of `sets`.
fn joint_inner(
    space: &JointSpace,
    sets: &[AmbiguityInstance<'_>],
    i: usize,
    own_reward: &[f64],
    w: Option<&[f64]>,
    seed: u64,
) -> Result<(f64, bool)> {
    let Some(w) = w else {
        return Ok((worst_case_expectation(own_reward, &sets[i])?.value, true));
    };
    let objective = |laws: &[Vec<f64>]| -> f64 {
        let refs: Vec<&[f64]> = laws.iter().map(Vec::as_slice).collect();
        let own: f64 = laws[i].iter().zip(own_reward).map(|(p, r)| p * r).sum();
        own + expectation(space, &refs, w)
    };
    let centers: Vec<Vec<f64>> = sets.iter().map(|s| center(s).weights().to_vec()).collect();
    let free: Vec<usize> = (0..sets.len()).filter(|&j| !is_trivial(&sets[j])).collect();
    let own_term = |laws: &[Vec<f64>], j: usize| -> f64 {
        if j == i {
            0.0
        } else {
            laws[i].iter().zip(own_reward).map(|(p, r)| p * r).sum()
        }
    };
    let coordinate = |laws: &[Vec<f64>], j: usize| -> Result<(f64, Vec<f64>)> {
        let refs: Vec<&[f64]> = laws.iter().map(Vec::as_slice).collect();
        let mut f = marginal_objective(space, &refs, j, w);
        if j == i {
            for (x, r) in f.iter_mut().zip(own_reward) {
                *x += r;
            }
        }
        let sol = worst_case_expectation(&f, &sets[j])?;
        Ok((sol.value + own_term(laws, j), sol.minimizer.into_weights()))
    };
    match free.as_slice() {
        [] => return Ok((objective(&centers), true)),
        // The objective is linear in the only free law.
        [j] => return Ok((coordinate(&centers, *j)?.0, true)),
        _ => {}
    }

    let mut rng = ChaCha8Rng::seed_from_u64(DESCENT_SEED ^ seed);
    let mut best = f64::INFINITY;
    for restart in 0..RESTARTS {
        let mut laws = if restart == 0 {
            centers.clone()
        } else {
            let mut start = Vec::with_capacity(sets.len());
            for set in sets {
                let f: Vec<f64> = (0..space.ns).map(|_| rng.random_range(-1.0..1.0)).collect();
                start.push(worst_case_expectation(&f, set)?.minimizer.into_weights());
            }
            start
        };
        let mut current = objective(&laws);
        for _ in 0..MAX_SWEEPS {
            let mut improved = false;
            for &j in &free {
                let (value, law) = coordinate(&laws, j)?;
                if value < current - 1e-14 * (1.0 + current.abs()) {
                    laws[j] = law;
                    current = value;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        best = best.min(current);
    }
    Ok((best, false))
}

/// Per-agent `(action, probability)` lists with positive probability.
fn support(policy: &MarkovPolicy, t: usize, s: usize) -> Vec<(usize, f64)> {
    policy
        .row(t, s)
        .weights()
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(a, p)| (a, *p))
        .collect()
}

/// Robust value of agent `i` when the population of `n` plays `profile`.
pub fn fixed_policy_value_exact(spec: &GameSpec, n: usize, profile: &ProfilePolicy, i: usize) -> Result<ExactValue> {
    if n == 0 || n > N_MAX {
        return Err(Error::param(format!("exact recursion supports 1..={N_MAX} agents, got {n}")));
    }
    if i >= n {
        return Err(Error::param(format!("agent {i} out of range for {n} agents")));
    }
    profile.check(spec, n)?;
    let space = JointSpace::new(n, spec.n_states());
    exact_value(spec, &space, profile, i)
}

fn exact_value(spec: &GameSpec, space: &JointSpace, profile: &ProfilePolicy, i: usize) -> Result<ExactValue> {
    let horizon = spec.horizon();
    let mut certified = true;
    let mut w_next: Option<Vec<f64>> = None;
    for t in (0..horizon).rev() {
        let mut w = vec![0.0; space.size];
        for (idx, states) in space.states.iter().enumerate() {
            let e = &space.empirical[idx];
            let supports: Vec<_> = (0..space.n).map(|j| support(profile.agent(j), t, states[j])).collect();
            // Odometer over joint actions with positive probability.
            let mut pos = vec![0usize; space.n];
            loop {
                let prob: f64 = (0..space.n).map(|j| supports[j][pos[j]].1).product();
                let actions: Vec<usize> = (0..space.n).map(|j| supports[j][pos[j]].0).collect();
                let sets: Vec<_> = (0..space.n)
                    .map(|j| spec.ambiguity_at(t, states[j], actions[j], e))
                    .collect();
                let own_reward = spec.reward_row(states[i], actions[i], e);
                let seed = ((t * space.size + idx) as u64) << 20 ^ actions.iter().fold(0u64, |h, a| h * 31 + *a as u64);
                let (value, exact) = joint_inner(space, &sets, i, &own_reward, w_next.as_deref(), seed)
                    .map_err(|err| Error::Inner {
                        t,
                        s: states[i],
                        a: actions[i],
                        source: Box::new(err),
                    })?;
                certified &= exact;
                w[idx] += prob * value;

                let mut j = 0;
                while j < space.n {
                    pos[j] += 1;
                    if pos[j] < supports[j].len() {
                        break;
                    }
                    pos[j] = 0;
                    j += 1;
                }
                if j == space.n {
                    break;
                }
            }
        }
        w_next = Some(w);
    }
    let w0 = w_next.expect("horizon >= 1");
    let mu0 = spec.initial();
    let value = space
        .states
        .iter()
        .zip(&w0)
        .map(|(states, w)| states.iter().map(|&s| mu0.get(s)).product::<f64>() * w)
        .sum();
    Ok(ExactValue { value, certified })
}

/// Whether every ambiguity set is a single law, so that the robust problems
/// are plain expectations.
fn singleton_game(spec: &GameSpec) -> bool {
    use crate::model::AmbiguitySet;
    spec.ambiguity().sets().iter().all(|set| match set {
        AmbiguitySet::Singleton { .. } => true,
        AmbiguitySet::FiniteSet { kernels } => kernels.len() == 1,
        AmbiguitySet::WassersteinBall { radius, .. } => *radius == 0.0,
    })
}

/// Decodes deviation number `k` into `[t][s] → action`, state-major base `|A|`.
fn decode(mut k: u128, horizon: usize, ns: usize, na: usize) -> Vec<Vec<usize>> {
    let mut choice = vec![vec![0; ns]; horizon];
    for row in choice.iter_mut() {
        for a in row.iter_mut() {
            *a = (k % na as u128) as usize;
            k /= na as u128;
        }
    }
    choice
}

/// Enumerates every deterministic own-state Markov deviation of agent `i`
/// from the symmetric equilibrium profile and reports the largest gain.
pub fn best_response_gap(spec: &GameSpec, n: usize, i: usize, eq: &Equilibrium, limit: u128) -> Result<NAgentReport> {
    if n == 0 || n > N_MAX {
        return Err(Error::param(format!("exact recursion supports 1..={N_MAX} agents, got {n}")));
    }
    if i >= n {
        return Err(Error::param(format!("agent {i} out of range for {n} agents")));
    }
    let (horizon, ns, na) = (spec.horizon(), spec.n_states(), spec.n_actions());
    let count = (na as u128).checked_pow((ns * horizon) as u32).unwrap_or(u128::MAX);
    if count > limit {
        return Err(Error::BudgetExceeded { count, limit });
    }
    let symmetric = ProfilePolicy::symmetric(&eq.policy, n)?;
    symmetric.check(spec, n)?;
    let space = JointSpace::new(n, ns);
    let base = exact_value(spec, &space, &symmetric, i)?;

    let values: Vec<Result<ExactValue>> = (0..count as u64)
        .into_par_iter()
        .map(|k| {
            let choice = decode(k as u128, horizon, ns, na);
            let deviation = MarkovPolicy::deterministic(&choice, na);
            let profile = ProfilePolicy::deviated(&eq.policy, n, i, &deviation)?;
            exact_value(spec, &space, &profile, i)
        })
        .collect();

    let mut best: Option<(u64, f64)> = None;
    let mut certified = base.certified;
    for (k, v) in values.into_iter().enumerate() {
        let v = v?;
        certified &= v.certified;
        if best.is_none_or(|(_, b)| v.value > b) {
            best = Some((k as u64, v.value));
        }
    }
    let (k, best_value) = best.expect("at least one deviation");
    let exhaustive = singleton_game(spec);

    let mut report = NAgentReport::empty(n);
    report.j_exact = Some(base.value);
    report.nash_gap = Some(best_value - base.value);
    report.certified = certified && exhaustive;
    report.best_deviation = Some(decode(k as u128, horizon, ns, na));
    report.methods.push(if certified { "exact" } else { "coordinate_descent" }.into());
    report.methods.push("enumerated".into());
    if !exhaustive {
        report.methods.push("lower_bound".into());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpp::backward_induction;
    use crate::inner::worst_case_expectation;
    use crate::mfe::{initial_flow, solve_mfe, SolveOptions};
    use crate::model::{
        reference_crowd_game, AmbiguityFamily, AmbiguitySet, FiniteSpace, MeasureFlow, ReferenceKernel, RewardModel,
    };

    fn crowd_eq(lambda: f64) -> (GameSpec, Equilibrium) {
        let g = reference_crowd_game(lambda);
        let eq = solve_mfe(&g, &initial_flow(&g), &SolveOptions::default()).unwrap();
        (g, eq)
    }

    #[test]
    fn constant_reward_gives_horizon() {
        let states = FiniteSpace::line(&[0.0, 1.0, 2.0]).unwrap();
        let actions = FiniteSpace::line(&[0.0, 1.0]).unwrap();
        let kernel = ReferenceKernel::new(vec![vec![Distribution::uniform(3); 2]; 3]).unwrap();
        let g = GameSpec::new(
            states,
            actions,
            3,
            Distribution::uniform(3),
            RewardModel::constant(1.0, 3, 2),
            AmbiguityFamily::repeated(AmbiguitySet::WassersteinBall { kernel, radius: 0.4 }, 3),
        )
        .unwrap();
        let pi = MarkovPolicy::uniform(3, 3, 2);
        for n in 1..=3 {
            let profile = ProfilePolicy::symmetric(&pi, n).unwrap();
            let v = fixed_policy_value_exact(&g, n, &profile, 0).unwrap();
            assert!((v.value - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_large_populations() {
        let (g, eq) = crowd_eq(0.0);
        let profile = ProfilePolicy::symmetric(&eq.policy, 4).unwrap();
        assert!(fixed_policy_value_exact(&g, 4, &profile, 0).is_err());
        let profile = ProfilePolicy::symmetric(&eq.policy, 2).unwrap();
        assert!(fixed_policy_value_exact(&g, 2, &profile, 2).is_err());
    }

    /// Single agent whose empirical measure is its own point mass.
    fn single_agent_oracle(g: &GameSpec, pi: &MarkovPolicy) -> f64 {
        let ns = g.n_states();
        let mut w = vec![0.0; ns];
        for t in (0..g.horizon()).rev() {
            let mut cur = vec![0.0; ns];
            for s in 0..ns {
                let delta = Distribution::point_mass(ns, s);
                for a in 0..g.n_actions() {
                    let p = pi.prob(t, s, a);
                    if p == 0.0 {
                        continue;
                    }
                    let f: Vec<f64> = (0..ns).map(|x| g.reward(s, a, x, &delta) + w[x]).collect();
                    cur[s] += p * worst_case_expectation(&f, &g.ambiguity_at(t, s, a, &delta)).unwrap().value;
                }
            }
            w = cur;
        }
        g.initial().dot(&w)
    }

    #[test]
    fn one_agent_matches_degenerate_mean_field() {
        for lambda in [0.0, 0.25, 1.0] {
            let (g, eq) = crowd_eq(lambda);
            for pi in [eq.policy.clone(), MarkovPolicy::uniform(2, 5, 3)] {
                let profile = ProfilePolicy::symmetric(&pi, 1).unwrap();
                let v = fixed_policy_value_exact(&g, 1, &profile, 0).unwrap();
                assert!(v.certified);
                assert!((v.value - single_agent_oracle(&g, &pi)).abs() < 1e-12);
            }
        }
    }

    /// Forward evaluation on the product chain: propagate the joint law and
    /// accumulate agent `i`'s expected reward.
    fn product_chain_oracle(g: &GameSpec, policies: &[MarkovPolicy], i: usize) -> f64 {
        let ns = g.n_states();
        let n = policies.len();
        let size = ns.pow(n as u32);
        let digits = |mut idx: usize| -> Vec<usize> {
            (0..n)
                .map(|_| {
                    let d = idx % ns;
                    idx /= ns;
                    d
                })
                .collect()
        };
        let mut law: Vec<f64> = (0..size)
            .map(|idx| digits(idx).iter().map(|&s| g.initial().get(s)).product())
            .collect();
        let mut total = 0.0;
        let flow = MeasureFlow::constant(g.initial(), g.horizon());
        let kernel = match g.ambiguity().at(0) {
            AmbiguitySet::WassersteinBall { kernel, .. } | AmbiguitySet::Singleton { kernel } => kernel.clone(),
            _ => unreachable!(),
        };
        for t in 0..g.horizon() {
            let mut next = vec![0.0; size];
            for idx in 0..size {
                if law[idx] == 0.0 {
                    continue;
                }
                let s = digits(idx);
                let e = Distribution::empirical(ns, &s);
                for jidx in 0..size {
                    let a = digits(jidx);
                    if a.iter().any(|&x| x >= g.n_actions()) {
                        continue;
                    }
                    let pa: f64 = (0..n).map(|j| policies[j].prob(t, s[j], a[j])).product();
                    if pa == 0.0 {
                        continue;
                    }
                    for nidx in 0..size {
                        let s2 = digits(nidx);
                        let pt: f64 = (0..n).map(|j| kernel.row(s[j], a[j], flow.at(t)).get(s2[j])).product();
                        let m = law[idx] * pa * pt;
                        next[nidx] += m;
                        total += m * g.reward(s[i], a[i], s2[i], &e);
                    }
                }
            }
            law = next;
        }
        total
    }

    #[test]
    fn zero_radius_matches_product_chain() {
        let (g, eq) = crowd_eq(0.0);
        let uniform = MarkovPolicy::uniform(2, 5, 3);
        for n in [2, 3] {
            let profile = ProfilePolicy::symmetric(&eq.policy, n).unwrap();
            let v = fixed_policy_value_exact(&g, n, &profile, 0).unwrap();
            assert!(v.certified);
            let oracle = product_chain_oracle(&g, &vec![eq.policy.clone(); n], 0);
            assert!((v.value - oracle).abs() < 1e-12, "{} vs {oracle}", v.value);
        }
        let mixed = vec![uniform.clone(), eq.policy.clone()];
        let v = fixed_policy_value_exact(&g, 2, &ProfilePolicy::new(mixed.clone()).unwrap(), 1).unwrap();
        assert!((v.value - product_chain_oracle(&g, &mixed, 1)).abs() < 1e-12);
    }

    #[test]
    fn swapping_agents_is_symmetric() {
        let (g, eq) = crowd_eq(0.25);
        let uniform = MarkovPolicy::uniform(2, 5, 3);
        let ab = ProfilePolicy::new(vec![eq.policy.clone(), uniform.clone()]).unwrap();
        let ba = ProfilePolicy::new(vec![uniform, eq.policy.clone()]).unwrap();
        let x = fixed_policy_value_exact(&g, 2, &ab, 0).unwrap();
        let y = fixed_policy_value_exact(&g, 2, &ba, 1).unwrap();
        assert!((x.value - y.value).abs() < 1e-12);
        assert!(!x.certified);
    }

    fn two_state_game(radius: f64) -> GameSpec {
        let states = FiniteSpace::line(&[0.0, 1.0]).unwrap();
        let actions = FiniteSpace::line(&[0.0, 1.0]).unwrap();
        let rows = vec![
            vec![Distribution::new(vec![0.7, 0.3]).unwrap(), Distribution::new(vec![0.2, 0.8]).unwrap()],
            vec![Distribution::new(vec![0.4, 0.6]).unwrap(), Distribution::new(vec![0.9, 0.1]).unwrap()],
        ];
        let kernel = ReferenceKernel::new(rows).unwrap();
        GameSpec::new(
            states,
            actions,
            2,
            Distribution::new(vec![0.35, 0.65]).unwrap(),
            RewardModel::Table {
                table: vec![
                    vec![vec![1.0, -0.5], vec![0.2, 0.9]],
                    vec![vec![-0.3, 0.4], vec![0.8, -1.0]],
                ],
                congestion: Some(crate::model::Congestion { beta: 0.5, c: 0.1 }),
                bound: None,
            },
            AmbiguityFamily::repeated(AmbiguitySet::WassersteinBall { kernel, radius }, 2),
        )
        .unwrap()
    }

    /// Exhaustive search over a 0.05 grid of each agent's ball at t = 0.
    fn grid_oracle(g: &GameSpec, pi: &MarkovPolicy) -> f64 {
        let space = JointSpace::new(2, 2);
        let profile = ProfilePolicy::symmetric(pi, 2).unwrap();
        // Last step exactly.
        let mut w1 = vec![0.0; 4];
        for (idx, s) in space.states.iter().enumerate() {
            let e = &space.empirical[idx];
            for a0 in 0..2 {
                let p = profile.agent(0).prob(1, s[0], a0);
                if p == 0.0 {
                    continue;
                }
                let f = g.reward_row(s[0], a0, e);
                w1[idx] += p * worst_case_expectation(&f, &g.ambiguity_at(1, s[0], a0, e)).unwrap().value;
            }
        }
        let grid = |center: &Distribution, radius: f64| -> Vec<[f64; 2]> {
            (0..=20)
                .map(|k| k as f64 * 0.05)
                .filter(|q| (q - center.get(0)).abs() <= radius + 1e-12)
                .map(|q| [q, 1.0 - q])
                .collect()
        };
        let mut total = 0.0;
        for (idx, s) in space.states.iter().enumerate() {
            let e = &space.empirical[idx];
            let mut w0 = 0.0;
            for a0 in 0..2 {
                for a1 in 0..2 {
                    let p = profile.agent(0).prob(0, s[0], a0) * profile.agent(1).prob(0, s[1], a1);
                    if p == 0.0 {
                        continue;
                    }
                    let r = g.reward_row(s[0], a0, e);
                    let radius = match g.ambiguity().at(0) {
                        AmbiguitySet::WassersteinBall { radius, .. } => *radius,
                        _ => unreachable!(),
                    };
                    let c0 = match g.ambiguity_at(0, s[0], a0, e) {
                        AmbiguityInstance::Ball { center, .. } => center.clone(),
                        _ => unreachable!(),
                    };
                    let c1 = match g.ambiguity_at(0, s[1], a1, e) {
                        AmbiguityInstance::Ball { center, .. } => center.clone(),
                        _ => unreachable!(),
                    };
                    let mut best = f64::INFINITY;
                    for p0 in grid(&c0, radius) {
                        for p1 in grid(&c1, radius) {
                            let mut v = p0[0] * r[0] + p0[1] * r[1];
                            for (nidx, s2) in space.states.iter().enumerate() {
                                v += p0[s2[0]] * p1[s2[1]] * w1[nidx];
                            }
                            best = best.min(v);
                        }
                    }
                    w0 += p * best;
                }
            }
            total += s.iter().map(|&x| g.initial().get(x)).product::<f64>() * w0;
        }
        total
    }

    #[test]
    fn coordinate_descent_beats_grid_search() {
        for radius in [0.05, 0.15, 0.4] {
            let g = two_state_game(radius);
            for pi in [
                MarkovPolicy::uniform(2, 2, 2),
                MarkovPolicy::deterministic(&[vec![0, 1], vec![1, 1]], 2),
            ] {
                let v = fixed_policy_value_exact(&g, 2, &ProfilePolicy::symmetric(&pi, 2).unwrap(), 0).unwrap();
                let grid = grid_oracle(&g, &pi);
                assert!(v.value <= grid + 1e-12, "radius {radius}: {} vs {grid}", v.value);
                // The grid is fine enough that the optimum is on it here.
                assert!(v.value >= grid - 0.05, "radius {radius}: {} vs {grid}", v.value);
            }
        }
    }

    #[test]
    fn descent_never_exceeds_a_single_pass() {
        let g = two_state_game(0.3);
        let space = JointSpace::new(2, 2);
        let e = &space.empirical[1];
        let sets = vec![g.ambiguity_at(0, 0, 0, e), g.ambiguity_at(0, 1, 1, e)];
        let w = [0.3, -1.2, 2.0, 0.1];
        let r = g.reward_row(0, 0, e);
        let (value, exact) = joint_inner(&space, &sets, 0, &r, Some(&w), 7).unwrap();
        assert!(!exact);
        // One pass from the reference rows, agent by agent.
        let mut laws: Vec<Vec<f64>> = sets.iter().map(|s| center(s).weights().to_vec()).collect();
        for j in 0..2 {
            let refs: Vec<&[f64]> = laws.iter().map(Vec::as_slice).collect();
            let mut f = marginal_objective(&space, &refs, j, &w);
            if j == 0 {
                f.iter_mut().zip(&r).for_each(|(x, y)| *x += y);
            }
            laws[j] = worst_case_expectation(&f, &sets[j]).unwrap().minimizer.into_weights();
        }
        let refs: Vec<&[f64]> = laws.iter().map(Vec::as_slice).collect();
        let pass = laws[0].iter().zip(&r).map(|(p, x)| p * x).sum::<f64>() + expectation(&space, &refs, &w);
        assert!(value <= pass + 1e-15);
    }

    #[test]
    fn gap_is_zero_when_nothing_matters() {
        let states = FiniteSpace::line(&[0.0, 1.0]).unwrap();
        let actions = FiniteSpace::line(&[0.0, 1.0]).unwrap();
        let kernel = ReferenceKernel::new(vec![vec![Distribution::new(vec![0.3, 0.7]).unwrap(); 2]; 2]).unwrap();
        let g = GameSpec::new(
            states,
            actions,
            2,
            Distribution::uniform(2),
            RewardModel::Table {
                table: vec![vec![vec![0.5, -0.25]; 2]; 2],
                congestion: None,
                bound: None,
            },
            AmbiguityFamily::repeated(AmbiguitySet::Singleton { kernel }, 2),
        )
        .unwrap();
        let eq = solve_mfe(&g, &initial_flow(&g), &SolveOptions::default()).unwrap();
        let report = best_response_gap(&g, 2, 0, &eq, DEFAULT_CANDIDATE_LIMIT).unwrap();
        assert_eq!(report.nash_gap, Some(0.0));
        assert!(report.certified);
    }

    #[test]
    fn single_state_best_response_is_the_free_action() {
        let states = FiniteSpace::line(&[2.0]).unwrap();
        let actions = FiniteSpace::line(&[-1.0, 0.0, 1.0]).unwrap();
        let kernel = ReferenceKernel::new(vec![vec![Distribution::point_mass(1, 0); 3]]).unwrap();
        let g = GameSpec::new(
            states,
            actions,
            2,
            Distribution::point_mass(1, 0),
            RewardModel::Crowd { c: 1e-7 },
            AmbiguityFamily::repeated(AmbiguitySet::WassersteinBall { kernel, radius: 0.5 }, 2),
        )
        .unwrap();
        let mut eq = solve_mfe(&g, &initial_flow(&g), &SolveOptions::default()).unwrap();
        assert_eq!(eq.policy.row(0, 0).get(1), 1.0);
        let report = best_response_gap(&g, 2, 0, &eq, DEFAULT_CANDIDATE_LIMIT).unwrap();
        assert_eq!(report.nash_gap, Some(0.0));
        assert_eq!(report.best_deviation, Some(vec![vec![1], vec![1]]));

        // Starting from the costly action, the gap is its cost at both steps.
        eq.policy = MarkovPolicy::deterministic(&[vec![2], vec![2]], 3);
        let report = best_response_gap(&g, 2, 0, &eq, DEFAULT_CANDIDATE_LIMIT).unwrap();
        assert!((report.nash_gap.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let (g, eq) = crowd_eq(0.0);
        match best_response_gap(&g, 2, 0, &eq, 1000) {
            Err(Error::BudgetExceeded { count, limit }) => {
                assert_eq!(count, 59049);
                assert_eq!(limit, 1000);
            }
            other => panic!("expected a refusal, got {other:?}"),
        }
    }

    #[test]
    fn equilibrium_policy_attains_its_own_value() {
        // Sanity: deviating to π* itself reproduces the symmetric value.
        let (g, eq) = crowd_eq(0.0);
        let sol = backward_induction(&g, &eq.flow).unwrap();
        let profile = ProfilePolicy::deviated(&eq.policy, 2, 0, &sol.pi_star).unwrap();
        let sym = ProfilePolicy::symmetric(&eq.policy, 2).unwrap();
        let a = fixed_policy_value_exact(&g, 2, &profile, 0).unwrap();
        let b = fixed_policy_value_exact(&g, 2, &sym, 0).unwrap();
        assert_eq!(a, b);
    }
}
