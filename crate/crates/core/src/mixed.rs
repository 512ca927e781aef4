//! Mixed equilibria for games where pure best responses cycle.
//!
//! When best-response iteration keeps alternating between actions at some
//! states, no pure fixed point exists nearby and the equilibrium randomizes
//! exactly over the alternating actions. Those actions become the support;
//! the unknowns are the mixing weights and the flow `μ_1..μ_{T-1}`; the
//! equations are indifference across each support plus the flow equation.
//! Newton's method (finite-difference Jacobian, least-squares steps, backtracking)
//! solves the square system, and an active-set loop drops actions whose weight
//! turns negative or adds actions that overtake the support.

use nalgebra::{DMatrix, DVector};

use crate::dpp::{backward_induction, residuals, SolveResult, ARGMAX_TOLERANCE};
use crate::model::{push_forward, Distribution, GameSpec, MarkovPolicy, MeasureFlow};

const ACCEPT: f64 = 1e-9;
const NEWTON_STEPS: usize = 100;
const NEWTON_TOL: f64 = 1e-13;
const ACTIVE_SET_ROUNDS: usize = 12;
const FD_STEP: f64 = 1e-7;

/// One randomizing state: `actions[0]` takes the remaining mass.
#[derive(Clone, Debug)]
struct Support {
    t: usize,
    s: usize,
    actions: Vec<usize>,
    weights: Vec<f64>,
}

pub(crate) struct Mixed {
    pub flow: MeasureFlow,
    pub policy: MarkovPolicy,
    pub solution: SolveResult,
}

struct System<'a> {
    spec: &'a GameSpec,
    supports: Vec<Support>,
}

impl System<'_> {
    fn n_weights(&self) -> usize {
        self.supports.iter().map(|s| s.actions.len() - 1).sum()
    }

    fn pack(&self, flow: &MeasureFlow) -> Vec<f64> {
        let mut z = Vec::new();
        for sup in &self.supports {
            z.extend_from_slice(&sup.weights[1..]);
        }
        for t in 1..flow.horizon() {
            z.extend_from_slice(flow.at(t).weights());
        }
        z
    }

    fn flow(&self, z: &[f64]) -> MeasureFlow {
        let ns = self.spec.n_states();
        let off = self.n_weights();
        let mut steps = vec![self.spec.initial().clone()];
        for t in 1..self.spec.horizon() {
            let at = off + (t - 1) * ns;
            steps.push(Distribution::from_raw(z[at..at + ns].to_vec()));
        }
        MeasureFlow::from_steps_unchecked(steps)
    }

    fn policy(&self, z: &[f64], sol: &SolveResult) -> MarkovPolicy {
        let na = self.spec.n_actions();
        let mut policy = sol.pi_star.clone();
        let mut at = 0;
        for sup in &self.supports {
            let mut row = vec![0.0; na];
            let others = &z[at..at + sup.actions.len() - 1];
            row[sup.actions[0]] = 1.0 - others.iter().sum::<f64>();
            for (a, w) in sup.actions[1..].iter().zip(others) {
                row[*a] = *w;
            }
            policy.set_row(sup.t, sup.s, Distribution::from_raw(row));
            at += sup.actions.len() - 1;
        }
        policy
    }

    fn eval(&self, z: &[f64]) -> Option<(Vec<f64>, MeasureFlow, MarkovPolicy, SolveResult)> {
        let flow = self.flow(z);
        let sol = backward_induction(self.spec, &flow).ok()?;
        let policy = self.policy(z, &sol);
        let mut out = Vec::with_capacity(z.len());
        for sup in &self.supports {
            let j = &sol.jhat[sup.t][sup.s];
            for a in &sup.actions[1..] {
                out.push(j[*a] - j[sup.actions[0]]);
            }
        }
        for t in 0..self.spec.horizon() - 1 {
            let pushed = push_forward(flow.at(t), &policy, &sol.p_star, t);
            out.extend(pushed.weights().iter().zip(flow.at(t + 1).weights()).map(|(p, m)| p - m));
        }
        if out.iter().any(|x| !x.is_finite()) {
            return None;
        }
        Some((out, flow, policy, sol))
    }

    fn residual(&self, z: &[f64]) -> Option<Vec<f64>> {
        self.eval(z).map(|e| e.0)
    }

    fn jacobian(&self, z: &[f64], f0: &[f64]) -> Option<DMatrix<f64>> {
        let n = z.len();
        let mut jac = DMatrix::zeros(f0.len(), n);
        let mut probe = z.to_vec();
        for k in 0..n {
            let h = FD_STEP * z[k].abs().max(1e-3);
            probe[k] = z[k] + h;
            let up = self.residual(&probe);
            probe[k] = z[k] - h;
            let down = self.residual(&probe);
            probe[k] = z[k];
            let col: Vec<f64> = match (up, down) {
                (Some(u), Some(d)) => u.iter().zip(&d).map(|(a, b)| (a - b) / (2.0 * h)).collect(),
                (Some(u), None) => u.iter().zip(f0).map(|(a, b)| (a - b) / h).collect(),
                (None, Some(d)) => f0.iter().zip(&d).map(|(a, b)| (a - b) / h).collect(),
                (None, None) => return None,
            };
            for (i, v) in col.into_iter().enumerate() {
                jac[(i, k)] = v;
            }
        }
        Some(jac)
    }

    fn newton(&self, mut z: Vec<f64>) -> Option<Vec<f64>> {
        let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut f = self.residual(&z)?;
        for _ in 0..NEWTON_STEPS {
            let current = norm(&f);
            if current <= NEWTON_TOL {
                return Some(z);
            }
            let jac = self.jacobian(&z, &f)?;
            let rhs = DVector::from_iterator(f.len(), f.iter().map(|x| -x));
            let dir = jac.svd(true, true).solve(&rhs, 1e-14).ok()?;
            let mut scale = 1.0;
            let mut accepted = None;
            while scale > 1e-10 {
                let trial: Vec<f64> = z.iter().zip(dir.iter()).map(|(x, d)| x + scale * d).collect();
                if let Some(ft) = self.residual(&trial) {
                    if norm(&ft) < current * (1.0 - 1e-4 * scale) {
                        accepted = Some((trial, ft));
                        break;
                    }
                }
                scale *= 0.5;
            }
            let (nz, nf) = accepted?;
            z = nz;
            f = nf;
        }
        (norm(&f) <= NEWTON_TOL).then_some(z)
    }
}

/// Looks for a mixed equilibrium near a cycling best-response history of
/// `(flow, policy)` pairs.
pub(crate) fn solve_mixed(spec: &GameSpec, history: &[(MeasureFlow, MarkovPolicy)]) -> Option<Mixed> {
    let horizon = spec.horizon();
    if horizon < 2 || history.is_empty() {
        return None;
    }
    let (ns, na) = (spec.n_states(), spec.n_actions());
    let k = history.len() as f64;

    let mut average = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let mut w = vec![0.0; ns];
        for (flow, _) in history {
            for (x, y) in w.iter_mut().zip(flow.at(t).weights()) {
                *x += y / k;
            }
        }
        average.push(Distribution::from_raw(w));
    }
    let mut flow = MeasureFlow::from_steps_unchecked(average);

    // Only steps before the last one move the flow.
    let mut supports = Vec::new();
    for t in 0..horizon - 1 {
        for s in 0..ns {
            if flow.at(t).get(s) <= 0.0 {
                continue;
            }
            let mut freq = vec![0.0; na];
            for (_, policy) in history {
                for (f, p) in freq.iter_mut().zip(policy.row(t, s).weights()) {
                    *f += p / k;
                }
            }
            let actions: Vec<usize> = (0..na).filter(|&a| freq[a] > 0.0).collect();
            if actions.len() >= 2 {
                let weights = actions.iter().map(|&a| freq[a]).collect();
                supports.push(Support { t, s, actions, weights });
            }
        }
    }
    if supports.is_empty() {
        return None;
    }

    let mut system = System { spec, supports };
    for _ in 0..ACTIVE_SET_ROUNDS {
        let z = system.newton(system.pack(&flow))?;
        let (_, new_flow, policy, sol) = system.eval(&z)?;

        // Drop the most negative weight, if any.
        let mut worst: Option<(usize, usize, f64)> = None;
        for (i, sup) in system.supports.iter().enumerate() {
            for (j, &a) in sup.actions.iter().enumerate() {
                let w = policy.row(sup.t, sup.s).get(a);
                if w < -ACCEPT && worst.is_none_or(|(_, _, m)| w < m) {
                    worst = Some((i, j, w));
                }
            }
        }
        if let Some((i, j, _)) = worst {
            let sup = &mut system.supports[i];
            let row = policy.row(sup.t, sup.s).clone();
            sup.actions.remove(j);
            sup.weights = sup.actions.iter().map(|&a| row.get(a).max(0.0)).collect();
            let total: f64 = sup.weights.iter().sum();
            sup.weights.iter_mut().for_each(|w| *w /= total);
            system.supports.retain(|s| s.actions.len() >= 2);
            flow = new_flow;
            continue;
        }

        let policy = clamp(&policy);
        // Newton leaves round-off-sized negatives where the flow is empty.
        if new_flow.steps().iter().flat_map(|d| d.weights()).any(|x| *x < -ACCEPT) {
            return None;
        }
        let flow_checked = MeasureFlow::new(
            new_flow
                .steps()
                .iter()
                .map(|d| Distribution::from_raw(d.weights().iter().map(|x| x.max(0.0)).collect()))
                .collect(),
        )
        .ok()?;
        let report = residuals(spec, &flow_checked, &policy, &sol.p_star);
        if report.accepted(ACCEPT) {
            return Some(Mixed {
                flow: flow_checked,
                policy,
                solution: sol,
            });
        }

        // Admit actions that now beat the support.
        let mut grew = false;
        for sup in system.supports.iter_mut() {
            let v = sol.vhat[sup.t][sup.s];
            for a in 0..na {
                if !sup.actions.contains(&a) && sol.jhat[sup.t][sup.s][a] >= v - ARGMAX_TOLERANCE {
                    let row = policy.row(sup.t, sup.s);
                    sup.actions.push(a);
                    sup.weights = sup.actions.iter().map(|&b| row.get(b)).collect();
                    grew = true;
                }
            }
        }
        for t in 0..horizon - 1 {
            for s in 0..ns {
                if new_flow.at(t).get(s) <= 0.0 || system.supports.iter().any(|x| x.t == t && x.s == s) {
                    continue;
                }
                let v = sol.vhat[t][s];
                let near: Vec<usize> = (0..na).filter(|&a| sol.jhat[t][s][a] >= v - 1e-6).collect();
                if near.len() >= 2 {
                    let best = sol.pi_star.row(t, s).argmax();
                    let mut actions = vec![best];
                    actions.extend(near.into_iter().filter(|&a| a != best));
                    let mut weights = vec![0.0; actions.len()];
                    weights[0] = 1.0;
                    system.supports.push(Support { t, s, actions, weights });
                    grew = true;
                }
            }
        }
        if !grew {
            return None;
        }
        flow = new_flow;
    }
    None
}

/// Rounds weights within [`ACCEPT`] of the simplex back onto it.
fn clamp(policy: &MarkovPolicy) -> MarkovPolicy {
    let mut out = policy.clone();
    for t in 0..policy.horizon() {
        for s in 0..policy.n_states() {
            let row = policy.row(t, s);
            if row.is_valid() {
                continue;
            }
            let w: Vec<f64> = row.weights().iter().map(|x| x.max(0.0)).collect();
            let total: f64 = w.iter().sum();
            out.set_row(t, s, Distribution::from_raw(w.iter().map(|x| x / total).collect()));
        }
    }
    out
}
