//! Experiment configs.
//!
//! Every run of the binary is described by a small JSON document: a format
//! tag, the master seed, and one operation with all of its parameters. The
//! same document is embedded in each output file, so any result can be
//! reproduced with `problab rerun --from FILE`. Parsing is strict — unknown
//! fields are rejected rather than ignored, so a typo in a hand-written
//! config fails loudly instead of silently running something else.

use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use problab_core::bunkbed::parse_exact_prob;
use problab_core::epidemic::ModelKind;
use problab_core::lattice::{DiagonalClass, LatticeKind};
use problab_core::needles::AngleLaw;
use problab_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Format tag expected at the top of every config document.
pub const CONFIG_FORMAT: &str = "problab-config/1";

/// Master seed when neither `--seed` nor the environment variable is given.
pub const DEFAULT_SEED: u64 = 2026;

/// Environment variable consulted for the master seed.
pub const SEED_ENV_VAR: &str = "PROBLAB_SEED";

/// Lattice choice as it appears on the command line and in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum LatticeArg {
    Square,
    Hex,
}

impl LatticeArg {
    pub fn core(self) -> LatticeKind {
        match self {
            LatticeArg::Square => LatticeKind::Square,
            LatticeArg::Hex => LatticeKind::Hex,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LatticeArg::Square => "square",
            LatticeArg::Hex => "hex",
        }
    }
}

/// Which diagonal family carries mirrors in the Manhattan model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ClassArg {
    A,
    B,
}

impl ClassArg {
    pub fn core(self) -> DiagonalClass {
        match self {
            ClassArg::A => DiagonalClass::A,
            ClassArg::B => DiagonalClass::B,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassArg::A => "a",
            ClassArg::B => "b",
        }
    }
}

/// Random subgraph family for the negative-association checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FamilyArg {
    /// Uniform spanning forest (all forests equally likely).
    Usf,
    /// Uniform connected subgraph.
    Ucs,
    /// Uniform spanning tree.
    Ust,
}

impl FamilyArg {
    pub fn name(self) -> &'static str {
        match self {
            FamilyArg::Usf => "usf",
            FamilyArg::Ucs => "ucs",
            FamilyArg::Ust => "ust",
        }
    }
}

/// Movement rule for the epidemic simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModelArg {
    Diffusion,
    Delayed,
}

impl ModelArg {
    pub fn core(self) -> ModelKind {
        match self {
            ModelArg::Diffusion => ModelKind::Diffusion,
            ModelArg::Delayed => ModelKind::Delayed,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelArg::Diffusion => "diffusion",
            ModelArg::Delayed => "delayed",
        }
    }
}

/// One experiment with all of its parameters.
///
/// Serialized externally tagged, so a config reads as
/// `{"op": {"saw_count": {"lattice": "square", "n": 10}}, ...}` — the
/// operation name is visible in the JSON and unknown names fail to parse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Operation {
    SawCount {
        lattice: LatticeArg,
        n: u32,
    },
    SawKappa {
        lattice: LatticeArg,
        n: u32,
    },
    SawSample {
        lattice: LatticeArg,
        n: u32,
        trials: u64,
        /// Optional CSV path for the walks rescaled by n^{-3/4}.
        rescaled_out: Option<String>,
    },
    MirrorsEhrenfest {
        p: f64,
        l_grid: Vec<i32>,
        trials: u64,
    },
    MirrorsManhattan {
        q: f64,
        l_grid: Vec<i32>,
        trials: u64,
        class: ClassArg,
    },
    NeedlesEscape {
        epsilon: f64,
        law: String,
        escape_radius: f64,
        /// Field extent; defaults to escape_radius + 2 when absent.
        window_radius: Option<f64>,
        /// Number of evenly spaced initial angles on [0, 2π).
        angles: u32,
        max_reflections: u64,
    },
    NeedlesCrossing {
        epsilon_grid: Vec<f64>,
        law: String,
        side: f64,
        trials: u64,
    },
    NeedlesDiffusivity {
        epsilon: f64,
        law: String,
        escape_radius: f64,
        traces: u32,
        t_grid: Vec<f64>,
        max_reflections: u64,
    },
    BunkbedCheck {
        /// Path to a graph6 file, one graph per line.
        graphs: String,
        /// Probabilities as exact strings ("1/10" or "0.1").
        p_grid: Vec<String>,
        /// Where to write the witness if a violation is found.
        witness: String,
    },
    ForestCheck {
        family: FamilyArg,
        graphs: String,
        witness: String,
    },
    OrientedTheta {
        p: f64,
        l_grid: Vec<i32>,
        trials: u64,
        enhance: f64,
    },
    EpidemicRun {
        model: ModelArg,
        dimension: u32,
        alpha: f64,
        box_radius: f64,
        dt: f64,
        max_infected: u64,
        boundary_margin: f64,
        diffusion_coefficient: f64,
    },
    EpidemicScan {
        model: ModelArg,
        dimension: u32,
        alpha_grid: Vec<f64>,
        trials: u64,
        coupled: bool,
        box_radius: f64,
        dt: f64,
        max_infected: u64,
        boundary_margin: f64,
        diffusion_coefficient: f64,
    },
}

impl Operation {
    /// Short machine name, used in output headers and file naming.
    pub fn kind(&self) -> &'static str {
        match self {
            Operation::SawCount { .. } => "saw-count",
            Operation::SawKappa { .. } => "saw-kappa",
            Operation::SawSample { .. } => "saw-sample",
            Operation::MirrorsEhrenfest { .. } => "mirrors-ehrenfest",
            Operation::MirrorsManhattan { .. } => "mirrors-manhattan",
            Operation::NeedlesEscape { .. } => "needles-escape",
            Operation::NeedlesCrossing { .. } => "needles-crossing",
            Operation::NeedlesDiffusivity { .. } => "needles-diffusivity",
            Operation::BunkbedCheck { .. } => "bunkbed-check",
            Operation::ForestCheck { .. } => "forest-check",
            Operation::OrientedTheta { .. } => "oriented-theta",
            Operation::EpidemicRun { .. } => "epidemic-run",
            Operation::EpidemicScan { .. } => "epidemic-scan",
        }
    }

    /// Library module the operation belongs to.
    pub fn module(&self) -> &'static str {
        match self {
            Operation::SawCount { .. } | Operation::SawKappa { .. } | Operation::SawSample { .. } => "saw",
            Operation::MirrorsEhrenfest { .. } | Operation::MirrorsManhattan { .. } => "mirrors",
            Operation::NeedlesEscape { .. }
            | Operation::NeedlesCrossing { .. }
            | Operation::NeedlesDiffusivity { .. } => "needles",
            Operation::BunkbedCheck { .. } => "bunkbed",
            Operation::ForestCheck { .. } => "forests",
            Operation::OrientedTheta { .. } => "oriented",
            Operation::EpidemicRun { .. } | Operation::EpidemicScan { .. } => "epidemic",
        }
    }
}

/// A complete, reproducible run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must equal [`CONFIG_FORMAT`].
    pub format: String,
    /// Master seed; every stream the run uses is derived from it.
    pub seed: u64,
    pub op: Operation,
}

impl ExperimentConfig {
    pub fn new(seed: u64, op: Operation) -> ExperimentConfig {
        ExperimentConfig { format: CONFIG_FORMAT.to_string(), seed, op }
    }

    /// One-line JSON, suitable for embedding in a CSV comment.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let config: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("bad experiment config: {e}")))?;
        if config.format != CONFIG_FORMAT {
            return Err(Error::Parse(format!(
                "unsupported config format {:?} (this build reads {CONFIG_FORMAT:?})",
                config.format
            )));
        }
        Ok(config)
    }
}

/// Parse a comma-separated list of numbers.
pub fn parse_list<T>(text: &str, what: &str) -> Result<Vec<T>>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    let items: Result<Vec<T>> = text
        .split(',')
        .map(|part| {
            let part = part.trim();
            part.parse::<T>().map_err(|e| Error::Parse(format!("bad {what} entry {part:?}: {e}")))
        })
        .collect();
    let items = items?;
    if items.is_empty() {
        return Err(Error::Parse(format!("{what} list is empty")));
    }
    Ok(items)
}

/// Parse "1/2", "0.35", or "1" into an exact probability in [0, 1].
///
/// Decimals convert exactly (0.35 becomes 35/100 before reduction), so the
/// downstream arithmetic stays rational no matter how the grid was written.
pub fn parse_prob(text: &str) -> Result<BigRational> {
    let text = text.trim();
    if let Some((int_part, frac_part)) = text.split_once('.') {
        if int_part.starts_with('-') || int_part.starts_with('+') {
            return Err(Error::Parse(format!("probability {text:?} must be a plain decimal")));
        }
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::Parse(format!("bad decimal probability {text:?}")));
        }
        let int_part = if int_part.is_empty() { "0" } else { int_part };
        let digits = format!("{int_part}{frac_part}");
        let numer: BigInt = digits
            .parse()
            .map_err(|e| Error::Parse(format!("bad decimal probability {text:?}: {e}")))?;
        let denom = BigInt::from(10u32).pow(frac_part.len() as u32);
        let value = BigRational::new(numer, denom);
        return Ok(problab_core::bunkbed::ExactProb::new(value)?.value().clone());
    }
    Ok(parse_exact_prob(text)?.value().clone())
}

/// Parse a comma-separated probability grid of "1/10"-style entries.
pub fn parse_prob_grid(text: &str) -> Result<Vec<BigRational>> {
    let grid: Result<Vec<BigRational>> = text.split(',').map(parse_prob).collect();
    let grid = grid?;
    if grid.is_empty() {
        return Err(Error::Parse("probability grid is empty".into()));
    }
    Ok(grid)
}

/// Parse an angle-law string.
///
/// Accepted forms:
/// - `uniform` — uniform inclination on [0, π)
/// - `degenerate:T` — all needles at the fixed inclination T (radians)
/// - `atoms:1/4,1/2:0.5,0.5` — atoms at rational multiples of π with weights
/// - `table:0.3,1.1:0.5,0.5` — atoms at explicit radian inclinations
pub fn parse_angle_law(text: &str) -> Result<AngleLaw> {
    let text = text.trim();
    let law = if text == "uniform" {
        AngleLaw::Uniform
    } else if let Some(rest) = text.strip_prefix("degenerate:") {
        let angle: f64 = rest
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("bad degenerate inclination {rest:?}: {e}")))?;
        AngleLaw::Degenerate(angle)
    } else if let Some(rest) = text.strip_prefix("atoms:") {
        let (angles, weights) = split_atoms(rest)?;
        let angles: Result<Vec<Rational64>> = angles
            .iter()
            .map(|a| {
                a.parse::<Rational64>()
                    .map_err(|e| Error::Parse(format!("bad rational multiple {a:?}: {e}")))
            })
            .collect();
        let weights = parse_weights(&weights)?;
        AngleLaw::DiscreteRational(angles?.into_iter().zip(weights).collect())
    } else if let Some(rest) = text.strip_prefix("table:") {
        let (angles, weights) = split_atoms(rest)?;
        let angles: Result<Vec<f64>> = angles
            .iter()
            .map(|a| {
                a.parse::<f64>().map_err(|e| Error::Parse(format!("bad inclination {a:?}: {e}")))
            })
            .collect();
        let weights = parse_weights(&weights)?;
        AngleLaw::Table(angles?.into_iter().zip(weights).collect())
    } else {
        return Err(Error::Parse(format!(
            "unknown angle law {text:?} (expected uniform, degenerate:T, \
             atoms:R,..:W,.., or table:T,..:W,..)"
        )));
    };
    law.validate()?;
    Ok(law)
}

fn split_atoms(rest: &str) -> Result<(Vec<String>, Vec<String>)> {
    let (angle_part, weight_part) = rest
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("atom list {rest:?} needs ANGLES:WEIGHTS")))?;
    let angles: Vec<String> = angle_part.split(',').map(|s| s.trim().to_string()).collect();
    let weights: Vec<String> = weight_part.split(',').map(|s| s.trim().to_string()).collect();
    if angles.len() != weights.len() {
        return Err(Error::Parse(format!(
            "{} angles but {} weights in {rest:?}",
            angles.len(),
            weights.len()
        )));
    }
    Ok((angles, weights))
}

fn parse_weights(weights: &[String]) -> Result<Vec<f64>> {
    weights
        .iter()
        .map(|w| w.parse::<f64>().map_err(|e| Error::Parse(format!("bad weight {w:?}: {e}"))))
        .collect()
}
