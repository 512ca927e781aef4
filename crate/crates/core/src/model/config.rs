//! JSON game descriptions. The schema is documented in `docs/config.md`.
//!
//! Every error names the offending field, e.g. `ambiguity[1].kernel[0][2]`.

use serde::Deserialize;

use super::ambiguity::{AmbiguityFamily, AmbiguitySet, ReferenceKernel};
use super::crowd::{crowd_reference_kernel, CROWD_ACTIONS, CROWD_C, CROWD_MU0, CROWD_STATES};
use super::game::GameSpec;
use super::reward::RewardModel;
use super::space::{Distribution, FiniteSpace};
use crate::error::{Error, Result};

/// Laws read from a file may miss unit mass by this much; they are rescaled.
pub const LOAD_SLACK: f64 = 1e-6;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SpaceConfig {
    Line(Vec<f64>),
    Points(Vec<Vec<f64>>),
    Labelled { labels: Vec<String>, coords: Vec<Vec<f64>> },
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SetKind {
    Singleton,
    FiniteSet,
    WassersteinBall,
}

type RawKernel = Vec<Vec<Vec<f64>>>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AmbiguityConfig {
    #[serde(rename = "type")]
    kind: SetKind,
    #[serde(default, alias = "lambda")]
    radius: Option<f64>,
    #[serde(default)]
    kernel: Option<RawKernel>,
    #[serde(default)]
    kernels: Option<Vec<RawKernel>>,
    /// Use the crowd model's reference kernel.
    #[serde(default)]
    crowd: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameConfig {
    /// Fills every other field with the crowd model's value.
    #[serde(default)]
    crowd: bool,
    states: Option<SpaceConfig>,
    actions: Option<SpaceConfig>,
    horizon: Option<usize>,
    initial: Option<Vec<f64>>,
    reward: Option<RewardModel>,
    /// One set for every step, or a list with one per step.
    ambiguity: Option<serde_json::Value>,
}

fn at(path: impl Into<String>) -> impl FnOnce(Error) -> Error {
    let path = path.into();
    move |e| match e {
        Error::Config { .. } => e,
        other => Error::config(path, strip(&other)),
    }
}

fn strip(e: &Error) -> String {
    match e {
        Error::InvalidDistribution(m) | Error::Shape(m) | Error::InvalidParameter(m) | Error::Numerical(m) => m.clone(),
        other => other.to_string(),
    }
}

fn space(cfg: SpaceConfig, path: &str) -> Result<FiniteSpace> {
    match cfg {
        SpaceConfig::Line(points) => FiniteSpace::line(&points),
        SpaceConfig::Points(coords) => {
            let labels = (0..coords.len()).map(|i| i.to_string()).collect();
            FiniteSpace::new(labels, coords)
        }
        SpaceConfig::Labelled { labels, coords } => FiniteSpace::new(labels, coords),
    }
    .map_err(at(path))
}

fn kernel(raw: RawKernel, ns: usize, na: usize, path: &str) -> Result<ReferenceKernel> {
    if raw.len() != ns {
        return Err(Error::config(path, format!("expected {ns} state rows, got {}", raw.len())));
    }
    let mut rows = Vec::with_capacity(ns);
    for (s, per_action) in raw.into_iter().enumerate() {
        if per_action.len() != na {
            return Err(Error::config(
                format!("{path}[{s}]"),
                format!("expected {na} action rows, got {}", per_action.len()),
            ));
        }
        let mut row = Vec::with_capacity(na);
        for (a, w) in per_action.into_iter().enumerate() {
            let here = format!("{path}[{s}][{a}]");
            if w.len() != ns {
                return Err(Error::config(here, format!("expected {ns} weights, got {}", w.len())));
            }
            row.push(Distribution::normalized(w, LOAD_SLACK).map_err(at(here))?);
        }
        rows.push(row);
    }
    ReferenceKernel::new(rows).map_err(at(path))
}

fn ambiguity_set(cfg: AmbiguityConfig, ns: usize, na: usize, path: &str) -> Result<AmbiguitySet> {
    let single = |cfg_kernel: Option<RawKernel>, crowd: bool| -> Result<ReferenceKernel> {
        match (cfg_kernel, crowd) {
            (Some(_), true) => Err(Error::config(path, "give either `kernel` or `crowd: true`, not both")),
            (None, true) => {
                if ns != CROWD_STATES.len() || na != CROWD_ACTIONS.len() {
                    return Err(Error::config(
                        format!("{path}.crowd"),
                        "the crowd kernel needs 5 states and 3 actions",
                    ));
                }
                Ok(crowd_reference_kernel())
            }
            (Some(k), false) => kernel(k, ns, na, &format!("{path}.kernel")),
            (None, false) => Err(Error::config(format!("{path}.kernel"), "missing reference kernel")),
        }
    };
    match cfg.kind {
        SetKind::Singleton => {
            if cfg.radius.is_some() || cfg.kernels.is_some() {
                return Err(Error::config(path, "a singleton takes only `kernel` or `crowd`"));
            }
            Ok(AmbiguitySet::Singleton {
                kernel: single(cfg.kernel, cfg.crowd)?,
            })
        }
        SetKind::WassersteinBall => {
            let radius = cfg
                .radius
                .ok_or_else(|| Error::config(format!("{path}.radius"), "missing radius"))?;
            if !(radius >= 0.0) || !radius.is_finite() {
                return Err(Error::config(format!("{path}.radius"), format!("must be >= 0, got {radius}")));
            }
            if cfg.kernels.is_some() {
                return Err(Error::config(format!("{path}.kernels"), "a ball has one reference kernel"));
            }
            Ok(AmbiguitySet::WassersteinBall {
                kernel: single(cfg.kernel, cfg.crowd)?,
                radius,
            })
        }
        SetKind::FiniteSet => {
            if cfg.radius.is_some() || cfg.kernel.is_some() || cfg.crowd {
                return Err(Error::config(path, "a finite set takes only `kernels`"));
            }
            let raw = cfg
                .kernels
                .ok_or_else(|| Error::config(format!("{path}.kernels"), "missing kernel list"))?;
            if raw.is_empty() {
                return Err(Error::config(format!("{path}.kernels"), "must be non-empty"));
            }
            let kernels = raw
                .into_iter()
                .enumerate()
                .map(|(i, k)| kernel(k, ns, na, &format!("{path}.kernels[{i}]")))
                .collect::<Result<_>>()?;
            Ok(AmbiguitySet::FiniteSet { kernels })
        }
    }
}

/// Parses a game from JSON text.
pub fn game_from_json(text: &str) -> Result<GameSpec> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: GameConfig = serde_path_to_error::deserialize(de).map_err(|e| path_error("", e))?;
    build(cfg)
}

fn path_error(prefix: &str, e: serde_path_to_error::Error<serde_json::Error>) -> Error {
    let inner = e.path().to_string();
    let path = match (prefix, inner.as_str()) {
        ("", ".") => "(root)".to_string(),
        ("", _) => inner,
        (_, ".") => prefix.to_string(),
        (_, _) if inner.starts_with('[') => format!("{prefix}{inner}"),
        _ => format!("{prefix}.{inner}"),
    };
    Error::config(path, e.into_inner().to_string())
}

fn parse_at<T: serde::de::DeserializeOwned>(value: serde_json::Value, path: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| path_error(path, e))
}

fn build(cfg: GameConfig) -> Result<GameSpec> {
    let crowd = cfg.crowd;
    let missing = |field: &str| Error::config(field, "missing field");

    let states = match cfg.states {
        Some(s) => space(s, "states")?,
        None if crowd => FiniteSpace::line(&CROWD_STATES)?,
        None => return Err(missing("states")),
    };
    let actions = match cfg.actions {
        Some(a) => space(a, "actions")?,
        None if crowd => FiniteSpace::line(&CROWD_ACTIONS)?,
        None => return Err(missing("actions")),
    };
    let horizon = match cfg.horizon {
        Some(0) => return Err(Error::config("horizon", "must be at least 1")),
        Some(h) => h,
        None if crowd => 2,
        None => return Err(missing("horizon")),
    };
    let initial = match cfg.initial {
        Some(w) => {
            if w.len() != states.len() {
                return Err(Error::config(
                    "initial",
                    format!("expected {} weights, got {}", states.len(), w.len()),
                ));
            }
            Distribution::normalized(w, LOAD_SLACK).map_err(at("initial"))?
        }
        None if crowd => Distribution::new(CROWD_MU0.to_vec())?,
        None => return Err(missing("initial")),
    };
    let reward = match cfg.reward {
        Some(r) => r,
        None if crowd => RewardModel::Crowd { c: CROWD_C },
        None => return Err(missing("reward")),
    };
    reward.validate(&states, &actions).map_err(at("reward"))?;

    let (ns, na) = (states.len(), actions.len());
    let sets = match cfg.ambiguity {
        Some(serde_json::Value::Array(list)) => {
            if list.len() != horizon {
                return Err(Error::config(
                    "ambiguity",
                    format!("expected one set per step ({horizon}), got {}", list.len()),
                ));
            }
            list.into_iter()
                .enumerate()
                .map(|(t, c)| {
                    let path = format!("ambiguity[{t}]");
                    ambiguity_set(parse_at(c, &path)?, ns, na, &path)
                })
                .collect::<Result<_>>()?
        }
        Some(one) => {
            let set = ambiguity_set(parse_at(one, "ambiguity")?, ns, na, "ambiguity")?;
            vec![set; horizon]
        }
        None if crowd => vec![
            AmbiguitySet::WassersteinBall {
                kernel: crowd_reference_kernel(),
                radius: 0.0,
            };
            horizon
        ],
        None => return Err(missing("ambiguity")),
    };
    GameSpec::new(states, actions, horizon, initial, reward, AmbiguityFamily::new(sets)).map_err(at("(root)"))
}
