//! Equilibrium iteration: best-respond to the current flow, push the flow
//! through the resulting policy and worst-case kernels, repeat.

use rayon::prelude::*;
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use std::collections::VecDeque;

use crate::dpp::{backward_induction, residuals, ResidualReport, SolveResult};
use crate::error::{Error, Result};
use crate::keyed;
use crate::mixed::solve_mixed;
use crate::model::{push_forward, Distribution, GameSpec, KernelTable, MarkovPolicy, MeasureFlow};

/// Smallest damping factor tried before giving up.
pub const MIN_DAMPING: f64 = 1.0 / 16.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Stop once successive flows differ by at most this much (sup-norm).
    pub tol: f64,
    pub max_iter: usize,
    /// Initial weight of the new flow in `μ ← (1 - α) μ + α μ_new`.
    pub damping: f64,
    /// Iterations without a new smallest flow change before `α` is halved.
    pub cycle_window: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
            damping: 1.0,
            cycle_window: 20,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::param(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter must be >= 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::param(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if self.cycle_window == 0 {
            return Err(Error::param("cycle_window must be >= 1"));
        }
        Ok(())
    }
}

/// A candidate equilibrium `(μ*, π*, p*)` with its bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct Equilibrium {
    pub flow: MeasureFlow,
    pub policy: MarkovPolicy,
    pub kernel: KernelTable,
    /// Backward induction at `flow`.
    pub solution: SolveResult,
    /// `μ*_T`: one more step of the flow equation.
    pub terminal: Distribution,
    pub residuals: ResidualReport,
    pub iterations: usize,
    pub converged: bool,
    /// Whether the policy randomizes; set when pure best responses cycled and
    /// the mixed refinement found the fixed point.
    pub mixed: bool,
    /// Damping factor in force when the loop stopped.
    pub damping: f64,
    /// Flow change per iteration.
    pub trace: Vec<f64>,
}

impl Equilibrium {
    /// `V(μ*) = Σ_s V̂_0(s) μ^o(s)`.
    pub fn value(&self) -> f64 {
        self.solution.v_flow
    }

    /// `μ*_0, ..., μ*_{T-1}, μ*_T`.
    pub fn extended_flow(&self) -> Vec<Distribution> {
        let mut steps = self.flow.steps().to_vec();
        steps.push(self.terminal.clone());
        steps
    }
}

impl Serialize for Equilibrium {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let states = self.solution.states();
        let actions = self.solution.actions();
        let horizon = self.flow.horizon();
        let times = keyed::time_keys(horizon);
        let flow_times = keyed::time_keys(horizon + 1);
        let extended = self.extended_flow();
        let mut map = serializer.serialize_map(Some(13))?;
        map.serialize_entry("converged", &self.converged)?;
        map.serialize_entry("iterations", &self.iterations)?;
        map.serialize_entry("mixed", &self.mixed)?;
        map.serialize_entry("damping", &self.damping)?;
        map.serialize_entry("value", &self.value())?;
        map.serialize_entry("residuals", &self.residuals)?;
        map.serialize_entry("states", states.labels())?;
        map.serialize_entry("actions", actions.labels())?;
        map.serialize_entry("flow", &keyed::laws(&flow_times, states, &extended))?;
        map.serialize_entry("policy", &keyed::policy(&times, states, actions, &self.policy))?;
        map.serialize_entry("kernel", &keyed::kernel(&times, states, actions, &self.kernel))?;
        map.serialize_entry("solution", &self.solution)?;
        map.serialize_entry("trace", &self.trace)?;
        map.end()
    }
}

/// `μ_0 = μ^o`, `μ_{t+1} = Φ(μ_t, π_t, p_t)` evaluated on the old flow.
fn flow_update(spec: &GameSpec, flow: &MeasureFlow, policy: &MarkovPolicy, kernel: &KernelTable) -> MeasureFlow {
    let mut steps = Vec::with_capacity(flow.horizon());
    steps.push(spec.initial().clone());
    for t in 0..flow.horizon() - 1 {
        steps.push(push_forward(flow.at(t), policy, kernel, t));
    }
    MeasureFlow::from_steps_unchecked(steps)
}

/// Default starting flow: `μ_t = μ^o` for all `t`.
pub fn initial_flow(spec: &GameSpec) -> MeasureFlow {
    MeasureFlow::constant(spec.initial(), spec.horizon())
}

/// Best-response iteration on the flow. If it stops without converging, a
/// mixed equilibrium is sought among the actions it was cycling between.
pub fn solve_mfe(spec: &GameSpec, init: &MeasureFlow, opts: &SolveOptions) -> Result<Equilibrium> {
    opts.validate()?;
    spec.check_flow_shape(init.horizon(), init.at(0).len())?;
    let mut flow = init.with_step(0, spec.initial().clone());
    let mut alpha = opts.damping;
    let mut trace = Vec::new();
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    let mut converged = false;
    let history_len = 2 * opts.cycle_window;
    let mut history: VecDeque<(MeasureFlow, MarkovPolicy)> = VecDeque::with_capacity(history_len + 1);

    let mut sol = loop {
        let sol = backward_induction(spec, &flow)?;
        let next = flow_update(spec, &flow, &sol.pi_star, &sol.p_star);
        let change = flow.linf_distance(&next);
        trace.push(change);
        if change <= opts.tol {
            converged = true;
            break sol;
        }
        history.push_back((flow.clone(), sol.pi_star.clone()));
        if history.len() > history_len {
            history.pop_front();
        }
        if trace.len() >= opts.max_iter {
            break sol;
        }
        if change < best {
            best = change;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= opts.cycle_window {
                if alpha <= MIN_DAMPING {
                    break sol;
                }
                alpha = (alpha / 2.0).max(MIN_DAMPING);
                best = f64::INFINITY;
                since_best = 0;
            }
        }
        flow = flow.mix(&next, alpha);
    };

    let mut policy = sol.pi_star.clone();
    let mut mixed = false;
    if !converged {
        let recent: Vec<_> = history.into_iter().collect();
        if let Some(m) = solve_mixed(spec, &recent) {
            let next = flow_update(spec, &m.flow, &m.policy, &m.solution.p_star);
            let change = m.flow.linf_distance(&next);
            trace.push(change);
            converged = change <= opts.tol;
            flow = m.flow;
            policy = m.policy;
            sol = m.solution;
            mixed = true;
        }
    }

    let last = flow.horizon() - 1;
    let terminal = push_forward(flow.at(last), &policy, &sol.p_star, last);
    let report = residuals(spec, &flow, &policy, &sol.p_star);
    Ok(Equilibrium {
        policy,
        kernel: sol.p_star.clone(),
        terminal,
        residuals: report,
        iterations: trace.len(),
        converged,
        mixed,
        damping: alpha,
        trace,
        flow,
        solution: sol,
    })
}

/// One row of a radius sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub value: f64,
    /// `μ*_1` (`μ^o` when `T = 1`).
    pub mu1: Vec<f64>,
    /// `μ*_T`.
    pub mu_terminal: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Equilibria in row order; `None` where the row failed.
    #[serde(skip)]
    pub equilibria: Vec<Option<Equilibrium>>,
}

impl SweepTable {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged && r.error.is_none())
    }

    /// Header `lambda,V,mu1_0..,muT_0..,iterations,converged`.
    pub fn header(&self) -> Vec<String> {
        let n = self.rows.iter().map(|r| r.mu1.len()).max().unwrap_or(0);
        let mut cols = vec!["lambda".to_string(), "V".to_string()];
        cols.extend((0..n).map(|i| format!("mu1_{i}")));
        cols.extend((0..n).map(|i| format!("muT_{i}")));
        cols.push("iterations".into());
        cols.push("converged".into());
        cols
    }

    pub fn records(&self) -> Vec<Vec<String>> {
        let n = self.header().len() - 4;
        self.rows
            .iter()
            .map(|r| {
                let mut rec = vec![fmt_f64(r.lambda), fmt_f64(r.value)];
                let blank = |v: &[f64]| -> Vec<String> {
                    if v.is_empty() {
                        vec![String::new(); n / 2]
                    } else {
                        v.iter().map(|x| fmt_f64(*x)).collect()
                    }
                };
                rec.extend(blank(&r.mu1));
                rec.extend(blank(&r.mu_terminal));
                rec.push(r.iterations.to_string());
                rec.push(r.converged.to_string());
                rec
            })
            .collect()
    }
}

/// Shortest decimal that round-trips.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Solves the game built for each radius; rows follow `lambdas`.
pub fn lambda_sweep<F>(builder: F, lambdas: &[f64], init: Option<&MeasureFlow>, opts: &SolveOptions) -> Result<SweepTable>
where
    F: Fn(f64) -> Result<GameSpec> + Sync,
{
    opts.validate()?;
    if let Some(l) = lambdas.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(Error::param(format!("radius must be finite and >= 0, got {l}")));
    }
    let solved: Vec<_> = lambdas
        .par_iter()
        .map(|&lambda| {
            builder(lambda).and_then(|spec| {
                let start = init.cloned().unwrap_or_else(|| initial_flow(&spec));
                solve_mfe(&spec, &start, opts)
            })
        })
        .collect();
    let mut rows = Vec::with_capacity(lambdas.len());
    let mut equilibria = Vec::with_capacity(lambdas.len());
    for (&lambda, outcome) in lambdas.iter().zip(solved) {
        match outcome {
            Ok(eq) => {
                let mu1 = eq.extended_flow()[1].weights().to_vec();
                rows.push(SweepRow {
                    lambda,
                    value: eq.value(),
                    mu1,
                    mu_terminal: eq.terminal.weights().to_vec(),
                    iterations: eq.iterations,
                    converged: eq.converged,
                    error: None,
                });
                equilibria.push(Some(eq));
            }
            Err(e) => {
                rows.push(SweepRow {
                    lambda,
                    value: f64::NAN,
                    mu1: Vec::new(),
                    mu_terminal: Vec::new(),
                    iterations: 0,
                    converged: false,
                    error: Some(e.to_string()),
                });
                equilibria.push(None);
            }
        }
    }
    Ok(SweepTable { rows, equilibria })
}
