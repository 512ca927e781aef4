//! Monte-Carlo simulation of the N-agent game under the plug-in adversary:
//! each agent's next state is drawn from the mean-field worst-case kernel,
//! re-solved at the running empirical measure.

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{NAgentReport, ProfilePolicy};
use crate::dpp::worst_case_at;
use crate::error::{Error, Result};
use crate::inner::Backend;
use crate::mfe::{fmt_f64, Equilibrium};
use crate::model::{Distribution, GameSpec};
use crate::transport::{w1_1d, w1_lp};

/// Paths per work unit; each unit keeps its own kernel cache.
const CHUNK: usize = 512;

/// Sum with error growing like `log n`; the result depends only on the order
/// of `xs`, not on how the work was scheduled.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

fn sampler(weights: &[f64]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(weights.iter().map(|w| w.max(0.0))).map_err(|e| Error::Numerical(format!("sampling: {e}")))
}

struct PathRecord {
    reward: f64,
    /// Agent 0's `(s_t, a_t, s_{t+1})`.
    steps: Vec<(usize, usize, usize)>,
    /// `W1(e^N_t, μ*_t)`.
    w1: Vec<f64>,
}

struct Simulator<'a> {
    spec: &'a GameSpec,
    eq: &'a Equilibrium,
    n: usize,
    initial: WeightedIndex<f64>,
    /// `[agent][t][s]`.
    actions: Vec<Vec<Vec<WeightedIndex<f64>>>>,
    next_values: Vec<Vec<f64>>,
    track: bool,
}

type KernelCache = HashMap<(usize, Vec<u32>, usize, usize), WeightedIndex<f64>>;

impl<'a> Simulator<'a> {
    fn new(spec: &'a GameSpec, n: usize, profile: &ProfilePolicy, eq: &'a Equilibrium, track: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("need at least one agent"));
        }
        profile.check(spec, n)?;
        spec.check_flow_shape(eq.flow.horizon(), eq.flow.at(0).len())?;
        let horizon = spec.horizon();
        let actions = (0..n)
            .map(|j| {
                (0..horizon)
                    .map(|t| {
                        (0..spec.n_states())
                            .map(|s| sampler(profile.agent(j).row(t, s).weights()))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spec,
            eq,
            n,
            initial: sampler(spec.initial().weights())?,
            actions,
            next_values: (0..horizon).map(|t| eq.solution.value_at(t + 1)).collect(),
            track,
        })
    }

    fn w1(&self, e: &Distribution, t: usize) -> Result<f64> {
        let target = self.eq.flow.at(t);
        match self.spec.states().line_coords() {
            Some(coords) => w1_1d(e, target, &coords),
            None => Ok(w1_lp(e, target, self.spec.cost())?.0),
        }
    }

    fn path(&self, seed: u64, index: u64, cache: &mut KernelCache) -> Result<PathRecord> {
        let spec = self.spec;
        let ns = spec.n_states();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);

        let mut states: Vec<usize> = (0..self.n).map(|_| self.initial.sample(&mut rng)).collect();
        let mut record = PathRecord {
            reward: 0.0,
            steps: Vec::new(),
            w1: Vec::new(),
        };
        for t in 0..spec.horizon() {
            let mut counts = vec![0u32; ns];
            states.iter().for_each(|&s| counts[s] += 1);
            let e = Distribution::empirical(ns, &states);
            let actions: Vec<usize> = states
                .iter()
                .enumerate()
                .map(|(j, &s)| self.actions[j][t][s].sample(&mut rng))
                .collect();
            let mut next = Vec::with_capacity(self.n);
            for (&s, &a) in states.iter().zip(&actions) {
                let key = (t, counts.clone(), s, a);
                if !cache.contains_key(&key) {
                    let sol = worst_case_at(spec, t, s, a, &e, &self.next_values[t], Backend::Greedy)?;
                    cache.insert(key.clone(), sampler(sol.minimizer.weights())?);
                }
                next.push(cache[&key].sample(&mut rng));
            }
            record.reward += spec.reward(states[0], actions[0], next[0], &e);
            if self.track {
                record.steps.push((states[0], actions[0], next[0]));
                record.w1.push(self.w1(&e, t)?);
            }
            states = next;
        }
        Ok(record)
    }

    fn run(&self, paths: usize, seed: u64) -> Result<Vec<PathRecord>> {
        if paths == 0 {
            return Err(Error::param("need at least one path"));
        }
        let chunks: Vec<Vec<PathRecord>> = (0..paths.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut cache = KernelCache::new();
                (c * CHUNK..((c + 1) * CHUNK).min(paths))
                    .map(|p| self.path(seed, p as u64, &mut cache))
                    .collect()
            })
            .collect::<Result<_>>()?;
        Ok(chunks.into_iter().flatten().collect())
    }
}

/// Monte-Carlo estimate of agent 0's total reward when `n` agents play
/// `profile` against the plug-in adversary built from `eq`.
pub fn simulate_plugin(
    spec: &GameSpec,
    n: usize,
    profile: &ProfilePolicy,
    eq: &Equilibrium,
    paths: usize,
    seed: u64,
) -> Result<NAgentReport> {
    let records = Simulator::new(spec, n, profile, eq, false)?.run(paths, seed)?;
    let rewards: Vec<f64> = records.iter().map(|r| r.reward).collect();
    let mean = pairwise_sum(&rewards) / paths as f64;
    let stderr = if paths > 1 {
        let sq: Vec<f64> = rewards.iter().map(|r| (r - mean).powi(2)).collect();
        (pairwise_sum(&sq) / (paths - 1) as f64).sqrt() / (paths as f64).sqrt()
    } else {
        0.0
    };
    let mut report = NAgentReport::empty(n);
    report.j_mc = Some(mean);
    report.stderr = Some(stderr);
    report.paths = Some(paths);
    report.methods.push("surrogate".into());
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChaosRow {
    pub n: usize,
    pub t: usize,
    /// Largest gap over indicators of `(s_t, a_t, s_{t+1})` between agent 0's
    /// simulated law and `μ*_t ⊗ π*_t ⊗ p*_t`.
    pub indicator_gap: f64,
    /// Mean of `W1(e^N_t, μ*_t)`.
    pub w1_mean: f64,
    pub discrepancy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ChaosTable {
    pub rows: Vec<ChaosRow>,
}

impl ChaosTable {
    pub const HEADER: [&'static str; 5] = ["N", "t", "indicator_gap", "w1_mean", "discrepancy"];

    pub fn records(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.n.to_string(),
                    r.t.to_string(),
                    fmt_f64(r.indicator_gap),
                    fmt_f64(r.w1_mean),
                    fmt_f64(r.discrepancy),
                ]
            })
            .collect()
    }

    pub fn extend(&mut self, other: ChaosTable) {
        self.rows.extend(other.rows);
    }
}

/// How far agent 0 and the empirical measure are from their mean-field
/// counterparts, per time step.
pub fn chaos_diagnostic(
    spec: &GameSpec,
    n: usize,
    profile: &ProfilePolicy,
    eq: &Equilibrium,
    paths: usize,
    seed: u64,
) -> Result<ChaosTable> {
    let records = Simulator::new(spec, n, profile, eq, true)?.run(paths, seed)?;
    let (ns, na) = (spec.n_states(), spec.n_actions());
    let mut rows = Vec::with_capacity(spec.horizon());
    for t in 0..spec.horizon() {
        let mut counts = vec![0usize; ns * na * ns];
        for r in &records {
            let (x, y, z) = r.steps[t];
            counts[(x * na + y) * ns + z] += 1;
        }
        let mut indicator_gap = 0.0f64;
        for x in 0..ns {
            for y in 0..na {
                for z in 0..ns {
                    let target = eq.flow.at(t).get(x) * eq.policy.prob(t, x, y) * eq.kernel.row(t, x, y).get(z);
                    let empirical = counts[(x * na + y) * ns + z] as f64 / paths as f64;
                    indicator_gap = indicator_gap.max((empirical - target).abs());
                }
            }
        }
        let w1: Vec<f64> = records.iter().map(|r| r.w1[t]).collect();
        let w1_mean = pairwise_sum(&w1) / paths as f64;
        rows.push(ChaosRow {
            n,
            t,
            indicator_gap,
            w1_mean,
            discrepancy: indicator_gap.max(w1_mean),
        });
    }
    Ok(ChaosTable { rows })
}
