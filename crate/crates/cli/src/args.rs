use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use robust_mfg::{make_crowd_game, Distribution, GameSpec, SolveOptions, CROWD_C, CROWD_MU0};

#[derive(Debug, Parser)]
#[command(name = "robust-mfg", version, about = "Robust mean-field Markov games on finite spaces")]
pub struct Cli {
    /// Worker threads; 0 or unset uses every core.
    #[arg(long, global = true, env = "ROBUST_MFG_THREADS")]
    pub threads: Option<usize>,

    /// Directory for output artifacts.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for a mean-field equilibrium.
    Solve {
        #[command(flatten)]
        game: GameArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        rows: RowFilter,
    },
    /// Robust value of a given policy against a given flow.
    Evaluate {
        #[command(flatten)]
        game: GameArgs,
        /// JSON array `[t][s][a]` of action probabilities.
        #[arg(long)]
        policy: PathBuf,
        /// JSON array `[t][s]` of state laws; defaults to the initial law at every step.
        #[arg(long)]
        flow: Option<PathBuf>,
    },
    /// Solve over a list of radii.
    Sweep {
        #[command(flatten)]
        game: GameArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Radii, comma separated; fractions like `1/3` are accepted.
        #[arg(long, value_delimiter = ',', value_parser = parse_real, required = true)]
        lambdas: Vec<f64>,
        #[command(flatten)]
        rows: RowFilter,
    },
    /// Exact N-agent value and best deviation gain at the equilibrium profile.
    NashGap {
        #[command(flatten)]
        game: GameArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long = "N", default_value_t = 2)]
        n: usize,
        /// Deviating agent.
        #[arg(long, default_value_t = 0)]
        agent: usize,
        /// Refuse to enumerate more deviations than this.
        #[arg(long, default_value_t = robust_mfg::DEFAULT_CANDIDATE_LIMIT)]
        limit: u128,
    },
    /// Monte-Carlo N-agent values under the plug-in adversary.
    Simulate {
        #[command(flatten)]
        game: GameArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        mc: MonteCarloArgs,
        /// Skip the exact value for small populations.
        #[arg(long)]
        no_exact: bool,
    },
    /// Distance between simulated and mean-field laws, per step.
    Diagnose {
        #[command(flatten)]
        game: GameArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        mc: MonteCarloArgs,
    },
    /// Check the model's standing assumptions.
    Validate {
        #[command(flatten)]
        game: GameArgs,
    },
}

#[derive(Debug, Args)]
pub struct GameArgs {
    /// Built-in crowd-motion model.
    #[arg(long)]
    pub crowd: bool,
    /// JSON game description (see docs/config.md).
    #[arg(long, conflicts_with = "crowd")]
    pub config: Option<PathBuf>,
    /// Crowd-aversion offset.
    #[arg(long, value_parser = parse_real)]
    pub c: Option<f64>,
    /// Initial law, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_real)]
    pub mu0: Option<Vec<f64>>,
    /// Horizon.
    #[arg(long = "T")]
    pub horizon: Option<usize>,
    /// Ball radius; overrides the config file's.
    #[arg(long, value_parser = parse_real)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, value_parser = parse_real)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, value_parser = parse_real)]
    pub damping: Option<f64>,
    #[arg(long)]
    pub cycle_window: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MonteCarloArgs {
    /// Population sizes, comma separated.
    #[arg(long = "N", value_delimiter = ',', default_value = "2,5,10,25,50")]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Restricts `kernels.csv` / `policies.csv` to the listed indices.
#[derive(Debug, Args)]
pub struct RowFilter {
    #[arg(long = "rows-t", value_delimiter = ',')]
    pub t: Option<Vec<usize>>,
    #[arg(long = "rows-s", value_delimiter = ',')]
    pub s: Option<Vec<usize>>,
    #[arg(long = "rows-a", value_delimiter = ',')]
    pub a: Option<Vec<usize>>,
}

impl RowFilter {
    pub fn keeps(list: &Option<Vec<usize>>, i: usize) -> bool {
        list.as_ref().is_none_or(|l| l.contains(&i))
    }
}

/// A decimal or a fraction `p/q`.
pub fn parse_real(text: &str) -> Result<f64, String> {
    let text = text.trim();
    let value = match text.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|e| format!("`{text}`: {e}"))?;
            let q: f64 = q.trim().parse().map_err(|e| format!("`{text}`: {e}"))?;
            if q == 0.0 {
                return Err(format!("`{text}`: zero denominator"));
            }
            p / q
        }
        None => text.parse().map_err(|e| format!("`{text}`: {e}"))?,
    };
    if !value.is_finite() {
        return Err(format!("`{text}` is not finite"));
    }
    Ok(value)
}

impl GameArgs {
    /// The game at radius `lambda` (or the configured radius when `None`).
    pub fn build(&self, lambda: Option<f64>) -> Result<GameSpec, String> {
        let lambda = lambda.or(self.lambda);
        match (&self.config, self.crowd) {
            (Some(path), false) => {
                if self.c.is_some() || self.mu0.is_some() || self.horizon.is_some() {
                    return Err("--c, --mu0 and --T apply to --crowd only; set them in the config file".into());
                }
                let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                let game = robust_mfg::game_from_json(&text).map_err(|e| format!("{}: {e}", path.display()))?;
                match lambda {
                    Some(l) => game.with_radius(l).map_err(|e| e.to_string()),
                    None => Ok(game),
                }
            }
            (None, true) => {
                let mu0 = match &self.mu0 {
                    Some(w) => Distribution::normalized(w.clone(), robust_mfg::LOAD_SLACK)
                        .map_err(|e| format!("--mu0: {e}"))?,
                    None => Distribution::new(CROWD_MU0.to_vec()).expect("reference law"),
                };
                make_crowd_game(lambda.unwrap_or(0.0), self.c.unwrap_or(CROWD_C), &mu0, self.horizon.unwrap_or(2))
                    .map_err(|e| e.to_string())
            }
            _ => Err("choose a game with exactly one of --crowd or --config".into()),
        }
    }
}

impl SolverArgs {
    pub fn options(&self) -> Result<SolveOptions, String> {
        let mut opts = SolveOptions::default();
        if let Some(x) = self.tol {
            opts.tol = x;
        }
        if let Some(x) = self.max_iter {
            opts.max_iter = x;
        }
        if let Some(x) = self.damping {
            opts.damping = x;
        }
        if let Some(x) = self.cycle_window {
            opts.cycle_window = x;
        }
        opts.validate().map_err(|e| e.to_string())?;
        Ok(opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions_and_decimals() {
        assert_eq!(parse_real("1/3").unwrap(), 1.0 / 3.0);
        assert_eq!(parse_real(" 0.25 ").unwrap(), 0.25);
        assert_eq!(parse_real("1e-7").unwrap(), 1e-7);
        assert!(parse_real("1/0").is_err());
        assert!(parse_real("abc").is_err());
        assert!(parse_real("inf").is_err());
    }

    #[test]
    fn exactly_one_game_source() {
        let cli = Cli::try_parse_from(["robust-mfg", "validate"]).unwrap();
        let Command::Validate { game } = cli.command else { unreachable!() };
        assert!(game.build(None).is_err());
        assert!(Cli::try_parse_from(["robust-mfg", "validate", "--crowd", "--config", "x.json"]).is_err());
    }

    #[test]
    fn env_and_flag_share_threads() {
        let cli = Cli::try_parse_from(["robust-mfg", "--threads", "3", "validate", "--crowd"]).unwrap();
        assert_eq!(cli.threads, Some(3));
    }
}
