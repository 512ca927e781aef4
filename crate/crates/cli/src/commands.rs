use std::fs;
use std::path::Path;

use robust_mfg::mfe::fmt_f64;
use robust_mfg::{
    best_response_gap, chaos_diagnostic, fixed_policy_value_exact, initial_flow, lambda_sweep, robust_policy_eval,
    simulate_plugin, solve_mfe, validate_assumptions, AmbiguitySet, ChaosTable, Distribution, Equilibrium, GameSpec,
    MarkovPolicy, MeasureFlow, NAgentReport, ProfilePolicy,
};
use serde::Serialize;

use crate::args::{Command, GameArgs, MonteCarloArgs, RowFilter, SolverArgs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_NOT_CONVERGED: u8 = 2;

pub type Outcome = Result<u8, String>;

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<(), String> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| format!("{name}: {e}"))?;
    text.push('\n');
    fs::write(out.join(name), text).map_err(|e| format!("{name}: {e}"))
}

fn write_csv<H: AsRef<[u8]>>(out: &Path, name: &str, header: &[H], records: &[Vec<String>]) -> Result<(), String> {
    let err = |e: csv::Error| format!("{name}: {e}");
    let mut w = csv::Writer::from_path(out.join(name)).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for r in records {
        w.write_record(r).map_err(err)?;
    }
    w.flush().map_err(|e| format!("{name}: {e}"))
}

fn radius_of(game: &GameSpec) -> Option<f64> {
    match game.ambiguity().at(0) {
        AmbiguitySet::WassersteinBall { radius, .. } => Some(*radius),
        AmbiguitySet::Singleton { .. } => Some(0.0),
        AmbiguitySet::FiniteSet { .. } => None,
    }
}

fn solve(game: &GameSpec, solver: &SolverArgs) -> Result<Equilibrium, String> {
    let opts = solver.options()?;
    solve_mfe(game, &initial_flow(game), &opts).map_err(|e| e.to_string())
}

fn status(converged: bool) -> u8 {
    if converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    }
}

/// Rows of `kernels.csv` and `policies.csv` for one equilibrium.
fn figure_rows(lambda: Option<f64>, game: &GameSpec, eq: &Equilibrium, rows: &RowFilter) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let label = lambda.map(fmt_f64).unwrap_or_default();
    let (mut kernels, mut policies) = (Vec::new(), Vec::new());
    for t in 0..game.horizon() {
        if !RowFilter::keeps(&rows.t, t) {
            continue;
        }
        for s in 0..game.n_states() {
            if !RowFilter::keeps(&rows.s, s) {
                continue;
            }
            let mut rec = vec![label.clone(), t.to_string(), s.to_string()];
            rec.extend(eq.policy.row(t, s).weights().iter().map(|x| fmt_f64(*x)));
            policies.push(rec);
            for a in 0..game.n_actions() {
                if !RowFilter::keeps(&rows.a, a) {
                    continue;
                }
                let mut rec = vec![label.clone(), t.to_string(), s.to_string(), a.to_string()];
                rec.extend(eq.kernel.row(t, s, a).weights().iter().map(|x| fmt_f64(*x)));
                kernels.push(rec);
            }
        }
    }
    (kernels, policies)
}

fn write_figure_tables(out: &Path, game: &GameSpec, kernels: &[Vec<String>], policies: &[Vec<String>]) -> Result<(), String> {
    let mut kh: Vec<String> = ["lambda", "t", "s", "a"].map(String::from).to_vec();
    kh.extend((0..game.n_states()).map(|i| format!("p_{i}")));
    write_csv(out, "kernels.csv", &kh, kernels)?;
    let mut ph: Vec<String> = ["lambda", "t", "s"].map(String::from).to_vec();
    ph.extend((0..game.n_actions()).map(|i| format!("pi_{i}")));
    write_csv(out, "policies.csv", &ph, policies)
}

fn cmd_solve(out: &Path, game: &GameArgs, solver: &SolverArgs, rows: &RowFilter) -> Outcome {
    let game = game.build(None)?;
    let eq = solve(&game, solver)?;
    write_json(out, "equilibrium.json", &eq)?;
    let (k, p) = figure_rows(radius_of(&game), &game, &eq, rows);
    write_figure_tables(out, &game, &k, &p)?;
    println!(
        "converged={} iterations={} mixed={} V={} residual={:e}",
        eq.converged,
        eq.iterations,
        eq.mixed,
        fmt_f64(eq.value()),
        eq.residuals.max()
    );
    Ok(status(eq.converged))
}

#[derive(Serialize)]
struct Evaluation {
    value: f64,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_evaluate(out: &Path, game: &GameArgs, policy: &Path, flow: Option<&Path>) -> Outcome {
    let game = game.build(None)?;
    let rows: Vec<Vec<Vec<f64>>> = read_json(policy)?;
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(t, per_state)| {
            per_state
                .into_iter()
                .enumerate()
                .map(|(s, w)| {
                    Distribution::normalized(w, robust_mfg::LOAD_SLACK)
                        .map_err(|e| format!("{}: [{t}][{s}]: {e}", policy.display()))
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let policy = MarkovPolicy::new(rows).map_err(|e| e.to_string())?;
    let flow = match flow {
        Some(path) => {
            let steps: Vec<Vec<f64>> = read_json(path)?;
            let steps = steps
                .into_iter()
                .enumerate()
                .map(|(t, w)| {
                    Distribution::normalized(w, robust_mfg::LOAD_SLACK)
                        .map_err(|e| format!("{}: [{t}]: {e}", path.display()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            MeasureFlow::new(steps).map_err(|e| e.to_string())?
        }
        None => MeasureFlow::constant(game.initial(), game.horizon()),
    };
    let value = robust_policy_eval(&game, &flow, &policy).map_err(|e| e.to_string())?;
    write_json(out, "evaluation.json", &Evaluation { value })?;
    println!("value={}", fmt_f64(value));
    Ok(EXIT_OK)
}

fn cmd_sweep(out: &Path, game: &GameArgs, solver: &SolverArgs, lambdas: &[f64], rows: &RowFilter) -> Outcome {
    if game.lambda.is_some() {
        return Err("sweep takes --lambdas, not --lambda".into());
    }
    // Fail early on a bad game description rather than once per radius.
    let base = game.build(Some(lambdas.first().copied().unwrap_or(0.0)))?;
    let opts = solver.options()?;
    let table = lambda_sweep(|l| game.build(Some(l)).map_err(robust_mfg::Error::InvalidParameter), lambdas, None, &opts)
        .map_err(|e| e.to_string())?;
    write_csv(out, "sweep.csv", &table.header(), &table.records())?;
    let (mut kernels, mut policies) = (Vec::new(), Vec::new());
    for (row, eq) in table.rows.iter().zip(&table.equilibria) {
        if let Some(eq) = eq {
            let (k, p) = figure_rows(Some(row.lambda), &base, eq, rows);
            kernels.extend(k);
            policies.extend(p);
        }
    }
    write_figure_tables(out, &base, &kernels, &policies)?;
    for row in &table.rows {
        match &row.error {
            Some(e) => eprintln!("lambda={}: {e}", fmt_f64(row.lambda)),
            None => println!(
                "lambda={} V={} iterations={} converged={}",
                fmt_f64(row.lambda),
                fmt_f64(row.value),
                row.iterations,
                row.converged
            ),
        }
    }
    if table.rows.iter().any(|r| r.error.is_some()) {
        return Ok(EXIT_INVALID);
    }
    Ok(status(table.all_converged()))
}

#[derive(Serialize)]
struct NAgentFile<'a> {
    /// `V(μ*)`, the mean-field value the finite-population numbers approach.
    mean_field_value: f64,
    converged: bool,
    reports: &'a [NAgentReport],
}

fn write_nagent(out: &Path, eq: &Equilibrium, reports: &[NAgentReport]) -> Result<(), String> {
    let records: Vec<_> = reports.iter().map(NAgentReport::csv_record).collect();
    write_csv(out, "nagent.csv", &NAgentReport::CSV_HEADER, &records)?;
    write_json(
        out,
        "nagent.json",
        &NAgentFile {
            mean_field_value: eq.value(),
            converged: eq.converged,
            reports,
        },
    )
}

fn cmd_nash_gap(out: &Path, game: &GameArgs, solver: &SolverArgs, n: usize, agent: usize, limit: u128) -> Outcome {
    let game = game.build(None)?;
    let eq = solve(&game, solver)?;
    let report = best_response_gap(&game, n, agent, &eq, limit).map_err(|e| e.to_string())?;
    write_nagent(out, &eq, std::slice::from_ref(&report))?;
    println!(
        "N={n} J_exact={} nash_gap={} certified={} methods={}",
        report.j_exact.map(fmt_f64).unwrap_or_default(),
        report.nash_gap.map(fmt_f64).unwrap_or_default(),
        report.certified,
        report.methods.join("+")
    );
    Ok(status(eq.converged))
}

fn cmd_simulate(out: &Path, game: &GameArgs, solver: &SolverArgs, mc: &MonteCarloArgs, no_exact: bool) -> Outcome {
    let game = game.build(None)?;
    let eq = solve(&game, solver)?;
    let mut reports = Vec::with_capacity(mc.n.len());
    for &n in &mc.n {
        let profile = ProfilePolicy::symmetric(&eq.policy, n).map_err(|e| e.to_string())?;
        let mut report = simulate_plugin(&game, n, &profile, &eq, mc.paths, mc.seed).map_err(|e| e.to_string())?;
        if !no_exact && n <= robust_mfg::nagent::N_MAX {
            let exact = fixed_policy_value_exact(&game, n, &profile, 0).map_err(|e| e.to_string())?;
            report.j_exact = Some(exact.value);
            report.certified = exact.certified;
            report
                .methods
                .insert(0, if exact.certified { "exact" } else { "coordinate_descent" }.into());
        }
        println!(
            "N={n} J_mc={} stderr={} J_exact={}",
            report.j_mc.map(fmt_f64).unwrap_or_default(),
            report.stderr.map(fmt_f64).unwrap_or_default(),
            report.j_exact.map(fmt_f64).unwrap_or_default()
        );
        reports.push(report);
    }
    write_nagent(out, &eq, &reports)?;
    println!("V={}", fmt_f64(eq.value()));
    Ok(status(eq.converged))
}

fn cmd_diagnose(out: &Path, game: &GameArgs, solver: &SolverArgs, mc: &MonteCarloArgs) -> Outcome {
    let game = game.build(None)?;
    let eq = solve(&game, solver)?;
    let mut table = ChaosTable::default();
    for &n in &mc.n {
        let profile = ProfilePolicy::symmetric(&eq.policy, n).map_err(|e| e.to_string())?;
        table.extend(chaos_diagnostic(&game, n, &profile, &eq, mc.paths, mc.seed).map_err(|e| e.to_string())?);
    }
    write_csv(out, "chaos.csv", &ChaosTable::HEADER, &table.records())?;
    write_json(out, "chaos.json", &table)?;
    for row in &table.rows {
        println!("N={} t={} discrepancy={}", row.n, row.t, fmt_f64(row.discrepancy));
    }
    Ok(status(eq.converged))
}

fn cmd_validate(out: &Path, game: &GameArgs) -> Outcome {
    let game = game.build(None)?;
    let report = validate_assumptions(&game);
    write_json(out, "diagnostics.json", &report)?;
    for check in &report.checks {
        println!("{:?} {}: {}", check.status, check.name, check.detail);
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_INVALID })
}

pub fn run(out: &Path, command: &Command) -> Outcome {
    fs::create_dir_all(out).map_err(|e| format!("{}: {e}", out.display()))?;
    match command {
        Command::Solve { game, solver, rows } => cmd_solve(out, game, solver, rows),
        Command::Evaluate { game, policy, flow } => cmd_evaluate(out, game, policy, flow.as_deref()),
        Command::Sweep {
            game,
            solver,
            lambdas,
            rows,
        } => cmd_sweep(out, game, solver, lambdas, rows),
        Command::NashGap {
            game,
            solver,
            n,
            agent,
            limit,
        } => cmd_nash_gap(out, game, solver, *n, *agent, *limit),
        Command::Simulate {
            game,
            solver,
            mc,
            no_exact,
        } => cmd_simulate(out, game, solver, mc, *no_exact),
        Command::Diagnose { game, solver, mc } => cmd_diagnose(out, game, solver, mc),
        Command::Validate { game } => cmd_validate(out, game),
    }
}
