//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! with its tolerance; the process fails if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_mfg::{
    backward_induction, ball_membership, best_response_gap, check_fixed_point, check_mfe, fixed_policy_value_exact,
    initial_flow, joint_laws, lambda_sweep, make_crowd_game, reference_crowd_game, simulate_plugin, solve_mfe, w1_1d,
    w1_lp, worst_case_expectation_with, AmbiguityFamily, AmbiguityInstance, AmbiguitySet, Backend, Congestion,
    CostMatrix, Distribution, FiniteSpace, GameSpec, MeasureFlow, ProfilePolicy, ReferenceKernel, RewardModel,
    SolveOptions, CROWD_C, CROWD_LAMBDAS, DEFAULT_CANDIDATE_LIMIT,
};

const BIN: &str = env!("CARGO_BIN_EXE_robust-mfg");

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn random_law(rng: &mut ChaCha8Rng, n: usize) -> Distribution {
    let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = w.iter().sum();
    Distribution::new(w.iter().map(|x| x / total).collect()).unwrap()
}

/// A law whose weights are multiples of `1/units`.
fn lattice_law(rng: &mut ChaCha8Rng, n: usize, units: usize) -> Vec<usize> {
    let mut counts = vec![0usize; n];
    for _ in 0..units {
        counts[rng.random_range(0..n)] += 1;
    }
    counts
}

// 1 ------------------------------------------------------------------------

fn transport_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let mut coords: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
        coords.sort_by(f64::total_cmp);
        let space = FiniteSpace::line(&coords).unwrap();
        let cost = CostMatrix::from_space(&space);
        let (p, q) = (random_law(&mut rng, 5), random_law(&mut rng, 5));
        let lp = w1_lp(&p, &q, &cost).unwrap().0;
        let closed = w1_1d(&p, &q, &coords).unwrap();
        worst = worst.max((lp - closed).abs());
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-9 && within(elapsed, 5),
        format!("max |w1_lp - w1_1d| = {worst:.2e} (tol 1e-9) over 1000 pairs, {elapsed:.2?} (limit 5 s)"),
    )
}

// 2 ------------------------------------------------------------------------

/// Instance families whose optimum lies on the 0.01 simplex grid, so the
/// grid minimum is exact (see the decisions ledger).
enum Metric {
    /// Integer points `0..n` on a line.
    Line,
    /// Every pair at distance 1.
    Discrete,
}

fn grid_points(n: usize, units: usize, prefix: &mut Vec<usize>, out: &mut dyn FnMut(&[usize])) {
    if prefix.len() == n - 1 {
        let used: usize = prefix.iter().sum();
        prefix.push(units - used);
        out(prefix);
        prefix.pop();
        return;
    }
    let used: usize = prefix.iter().sum();
    for k in 0..=units - used {
        prefix.push(k);
        grid_points(n, units, prefix, out);
        prefix.pop();
    }
}

/// Transport distance computed independently of the library.
fn oracle_distance(metric: &Metric, p: &[f64], q: &[f64]) -> f64 {
    match metric {
        Metric::Line => {
            let (mut cp, mut cq, mut d) = (0.0, 0.0, 0.0);
            for i in 0..p.len() - 1 {
                cp += p[i];
                cq += q[i];
                d += (cp - cq).abs();
            }
            d
        }
        Metric::Discrete => 0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>(),
    }
}

fn inner_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut value_gap, mut backend_gap, mut outside) = (0.0f64, 0.0f64, 0usize);
    for k in 0..200 {
        let (n, metric) = match k % 4 {
            0 => (2, Metric::Line),
            1 => (3, Metric::Line),
            2 => (3, Metric::Discrete),
            _ => (4, Metric::Discrete),
        };
        let cost = match metric {
            Metric::Line => CostMatrix::from_space(&FiniteSpace::line(&(0..n).map(|i| i as f64).collect::<Vec<_>>()).unwrap()),
            Metric::Discrete => {
                CostMatrix::from_rows((0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i != j))).collect()).collect())
                    .unwrap()
            }
        };
        // Centre and radius on the 0.02 lattice; transported masses then
        // land on the 0.01 grid.
        let centre_counts = lattice_law(&mut rng, n, 50);
        let centre = Distribution::new(centre_counts.iter().map(|c| *c as f64 / 50.0).collect()).unwrap();
        let radius = 0.02 * rng.random_range(0..=30) as f64;
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let set = AmbiguityInstance::Ball {
            center: &centre,
            radius,
            cost: &cost,
        };
        let greedy = worst_case_expectation_with(&f, &set, Backend::Greedy).unwrap();
        let lp = worst_case_expectation_with(&f, &set, Backend::Lp).unwrap();
        backend_gap = backend_gap.max((greedy.value - lp.value).abs());
        if !ball_membership(&greedy.minimizer, &centre, radius, &cost).unwrap() {
            outside += 1;
        }

        let mut best = f64::INFINITY;
        grid_points(n, 100, &mut Vec::new(), &mut |point| {
            let q: Vec<f64> = point.iter().map(|c| *c as f64 / 100.0).collect();
            if oracle_distance(&metric, &q, centre.weights()) <= radius + 1e-9 {
                best = best.min(q.iter().zip(&f).map(|(a, b)| a * b).sum());
            }
        });
        value_gap = value_gap.max((greedy.value - best).abs());
    }
    let elapsed = start.elapsed();
    verdict(
        value_gap <= 1e-6 && backend_gap <= 1e-9 && outside == 0 && within(elapsed, 60),
        format!(
            "max |value - grid| = {value_gap:.2e} (tol 1e-6), max |greedy - LP| = {backend_gap:.2e} (tol 1e-9), \
             {outside} minimizers outside the ball, {elapsed:.2?} (limit 60 s)"
        ),
    )
}

// 3 ------------------------------------------------------------------------

fn classical_reduction() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let horizon = rng.random_range(1..=5);
        let ns = rng.random_range(1..=6);
        let na = rng.random_range(1..=4);
        let table: Vec<Vec<Vec<f64>>> = (0..ns)
            .map(|_| (0..na).map(|_| (0..ns).map(|_| rng.random_range(-2.0..2.0)).collect()).collect())
            .collect();
        let congestion = rng.random_bool(0.5).then(|| Congestion {
            beta: rng.random_range(0.0..1.0),
            c: rng.random_range(0.01..1.0),
        });
        let rows: Vec<Vec<Distribution>> = (0..ns).map(|_| (0..na).map(|_| random_law(&mut rng, ns)).collect()).collect();
        let kernel = ReferenceKernel::new(rows.clone()).unwrap();
        let coords: Vec<f64> = (0..ns).map(|i| i as f64).collect();
        let game = GameSpec::new(
            FiniteSpace::line(&coords).unwrap(),
            FiniteSpace::line(&(0..na).map(|i| i as f64).collect::<Vec<_>>()).unwrap(),
            horizon,
            random_law(&mut rng, ns),
            RewardModel::Table {
                table: table.clone(),
                congestion: congestion.clone(),
                bound: None,
            },
            AmbiguityFamily::repeated(AmbiguitySet::WassersteinBall { kernel, radius: 0.0 }, horizon),
        )
        .unwrap();
        let flow = MeasureFlow::new((0..horizon).map(|_| random_law(&mut rng, ns)).collect()).unwrap();
        let robust = backward_induction(&game, &flow).unwrap();

        // Plain finite-horizon value iteration.
        let mut v = vec![0.0; ns];
        for t in (0..horizon).rev() {
            let mu = flow.at(t);
            let r = |s: usize, a: usize, x: usize| {
                table[s][a][x] - congestion.as_ref().map_or(0.0, |c| c.beta * (mu.get(x) + c.c).ln())
            };
            let next: Vec<f64> = (0..ns)
                .map(|s| {
                    (0..na)
                        .map(|a| (0..ns).map(|x| rows[s][a].get(x) * (r(s, a, x) + v[x])).sum::<f64>())
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
            v = next;
            for s in 0..ns {
                worst = worst.max((robust.vhat[t][s] - v[s]).abs());
            }
        }
    }
    verdict(worst <= 1e-12, format!("max |V_robust - V_classical| = {worst:.2e} (tol 1e-12) over 50 games"))
}

// 4 ------------------------------------------------------------------------

fn equilibrium_soundness() -> Verdict {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut pass = true;
    for lambda in CROWD_LAMBDAS {
        let game = reference_crowd_game(lambda);
        let eq = solve_mfe(&game, &initial_flow(&game), &SolveOptions::default()).unwrap();
        let residual = check_mfe(&game, &eq);
        let fixed = check_fixed_point(&game, &joint_laws(&eq.flow, &eq.policy), 1e-8);
        let ok = eq.converged && residual.accepted(1e-8) && fixed.passed;
        pass &= ok;
        notes.push(format!("λ={lambda:.4}: residual {:.1e}{}", residual.max(), if ok { "" } else { " FAIL" }));
    }
    let elapsed = start.elapsed();
    pass &= within(elapsed, 10);
    verdict(
        pass,
        format!("{} (tol 1e-8, fixed point passed), {elapsed:.2?} (limit 10 s)", notes.join("; ")),
    )
}

// 5, 6 ---------------------------------------------------------------------

fn value_trend() -> Verdict {
    let table = lambda_sweep(|l| Ok(reference_crowd_game(l)), &CROWD_LAMBDAS, None, &SolveOptions::default()).unwrap();
    let v: Vec<f64> = table.rows.iter().map(|r| r.value).collect();
    let non_increasing = v.windows(2).all(|w| w[1] <= w[0]);
    let strict = v.windows(2).any(|w| w[1] < w[0]);
    verdict(
        table.all_converged() && non_increasing && strict,
        format!("V = {v:?}; non-increasing: {non_increasing}, strict somewhere: {strict}"),
    )
}

fn distribution_shape() -> Verdict {
    let mu1 = |lambda: f64| {
        let game = reference_crowd_game(lambda);
        let eq = solve_mfe(&game, &initial_flow(&game), &SolveOptions::default()).unwrap();
        eq.flow.at(1).clone()
    };
    let (calm, wild) = (mu1(0.0), mu1(1.0));
    let peak = calm.argmax();
    let edges = |m: &Distribution| m.get(0) + m.get(4);
    verdict(
        peak == 2 && edges(&wild) > edges(&calm),
        format!(
            "argmax μ1 at λ=0 is {peak} (want 2); μ1(0)+μ1(4): λ=1 {:.4} vs λ=0 {:.4}",
            edges(&wild),
            edges(&calm)
        ),
    )
}

// 7 ------------------------------------------------------------------------

fn exact_vs_monte_carlo() -> Verdict {
    let start = Instant::now();
    let game = reference_crowd_game(0.0);
    let eq = solve_mfe(&game, &initial_flow(&game), &SolveOptions::default()).unwrap();
    let profile = ProfilePolicy::symmetric(&eq.policy, 2).unwrap();
    let exact = fixed_policy_value_exact(&game, 2, &profile, 0).unwrap();
    let mc = simulate_plugin(&game, 2, &profile, &eq, 100_000, 7).unwrap();
    let (est, se) = (mc.j_mc.unwrap(), mc.stderr.unwrap());
    let elapsed = start.elapsed();
    verdict(
        (est - exact.value).abs() <= 3.0 * se && exact.certified && within(elapsed, 30),
        format!(
            "J_mc = {est:.6} ± {se:.6}, J_exact = {:.6}, |diff| = {:.6} (tol 3·stderr = {:.6}), {elapsed:.2?} (limit 30 s)",
            exact.value,
            (est - exact.value).abs(),
            3.0 * se
        ),
    )
}

// 8 ------------------------------------------------------------------------

fn run_cli(out: &Path, args: &[&str], threads: Option<&str>) -> (i32, String) {
    let mut cmd = Command::new(BIN);
    cmd.args(args).arg("--out").arg(out).env_remove("ROBUST_MFG_THREADS");
    if let Some(t) = threads {
        cmd.env("ROBUST_MFG_THREADS", t);
    }
    let output = cmd.output().expect("run CLI");
    (
        output.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&output.stderr).into_owned(),
    )
}

fn epsilon_nash_trend(dir: &Path) -> Verdict {
    let out = dir.join("trend");
    let (code, err) = run_cli(
        &out,
        &["simulate", "--crowd", "--lambda", "1/4", "--N", "2,5,10,25,50", "--paths", "100000", "--seed", "7", "--no-exact"],
        None,
    );
    if code != 0 {
        return verdict(false, format!("simulate exited with {code}: {err}"));
    }
    let csv = fs::read_to_string(out.join("nagent.csv")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("nagent.json")).unwrap()).unwrap();
    let v = json["mean_field_value"].as_f64().unwrap();
    let mut rows = csv.lines();
    assert_eq!(rows.next(), Some("N,J_mc,stderr,J_exact,nash_gap,certified"));
    let points: Vec<(usize, f64, f64)> = rows
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    let mut pass = points.len() == 5;
    let mut notes = Vec::new();
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let band = 3.0 * (a.2 * a.2 + b.2 * b.2).sqrt();
        let ok = (b.1 - v).abs() <= (a.1 - v).abs() + band;
        pass &= ok;
        if !ok {
            notes.push(format!("N={}→{} rises beyond 3σ", a.0, b.0));
        }
    }
    let errors: Vec<String> = points.iter().map(|p| format!("N={}: {:.4}", p.0, (p.1 - v).abs())).collect();
    verdict(
        pass,
        format!("|J_mc - V| = [{}] with V = {v:.6} (band 3·stderr) {}", errors.join(", "), notes.join("; ")),
    )
}

// 9 ------------------------------------------------------------------------

fn nash_gap_enumeration() -> Verdict {
    let start = Instant::now();
    let mu0 = Distribution::new(robust_mfg::CROWD_MU0.to_vec()).unwrap();
    let game = make_crowd_game(0.0, CROWD_C, &mu0, 2).unwrap();
    let eq = solve_mfe(&game, &initial_flow(&game), &SolveOptions::default()).unwrap();
    let count = 3u128.pow(5 * 2);
    let first = best_response_gap(&game, 2, 0, &eq, DEFAULT_CANDIDATE_LIMIT).unwrap();
    let second = best_response_gap(&game, 2, 0, &eq, DEFAULT_CANDIDATE_LIMIT).unwrap();
    let gap = first.nash_gap.unwrap();
    let identical = gap.to_bits() == second.nash_gap.unwrap().to_bits() && first == second;
    let elapsed = start.elapsed();
    verdict(
        count == 59_049 && gap.is_finite() && gap >= -1e-10 && identical && within(elapsed, 600),
        format!(
            "{count} deviations, gap = {gap:.6e} (≥ -1e-10), bit-identical rerun: {identical}, {elapsed:.2?} (limit 600 s)"
        ),
    )
}

// 10 -----------------------------------------------------------------------

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn cli_determinism(dir: &Path) -> Verdict {
    let policy = dir.join("policy.json");
    let uniform = vec![vec![vec![1.0 / 3.0; 3]; 5]; 2];
    fs::write(&policy, serde_json::to_string(&uniform).unwrap()).unwrap();
    let policy = policy.to_str().unwrap().to_string();
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("solve", vec!["solve", "--crowd", "--lambda", "1/3"]),
        ("evaluate", vec!["evaluate", "--crowd", "--lambda", "0.5", "--policy", &policy]),
        (
            "sweep",
            vec!["sweep", "--crowd", "--c", "1e-7", "--lambdas", "0,0.25,0.3333333333,0.5,1", "--mu0", "0.2,0.1,0.05,0.25,0.4", "--T", "2"],
        ),
        ("nash-gap", vec!["nash-gap", "--crowd", "--lambda", "0.25", "--N", "2", "--T", "1"]),
        ("simulate", vec!["simulate", "--crowd", "--lambda", "1", "--N", "2,3,10", "--paths", "3000", "--seed", "7"]),
        ("diagnose", vec!["diagnose", "--crowd", "--lambda", "0.25", "--N", "1,5", "--paths", "2000", "--seed", "3"]),
        ("validate", vec!["validate", "--crowd", "--lambda", "0.25"]),
    ];
    let mut failures = Vec::new();
    for (name, args) in &runs {
        let a = dir.join(format!("{name}-a"));
        let b = dir.join(format!("{name}-b"));
        let (ca, ea) = run_cli(&a, args, Some("1"));
        let (cb, _) = run_cli(&b, args, Some("4"));
        let (sa, sb) = (snapshot(&a), snapshot(&b));
        if ca != 0 || cb != 0 {
            failures.push(format!("{name} exited {ca}/{cb}: {}", ea.trim()));
        } else if sa.is_empty() || sa != sb {
            failures.push(format!("{name} artifacts differ"));
        }
    }
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} subcommands byte-identical across reruns (1 vs 4 threads)", runs.len())
        } else {
            failures.join("; ")
        },
    )
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict>)> = vec![
        ("transport oracle", Box::new(transport_oracle)),
        ("inner-adversary oracle", Box::new(inner_oracle)),
        ("zero-radius reduction", Box::new(classical_reduction)),
        ("equilibrium soundness", Box::new(equilibrium_soundness)),
        ("value decreases with radius", Box::new(value_trend)),
        ("distribution shape", Box::new(distribution_shape)),
        ("N-agent exact vs Monte Carlo", Box::new(exact_vs_monte_carlo)),
        ("epsilon-Nash trend", Box::new(|| epsilon_nash_trend(dir.path()))),
        ("Nash gap enumeration", Box::new(nash_gap_enumeration)),
        ("CLI determinism", Box::new(|| cli_determinism(dir.path()))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!("criterion {:>2} {}: {name}: {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
