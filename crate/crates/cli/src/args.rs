//! Command-line grammar.
//!
//! One binary, one subcommand per experiment family. Every leaf subcommand
//! maps onto a [`crate::config::Operation`], so the flags you type and the
//! JSON config embedded in outputs carry exactly the same information.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{ClassArg, FamilyArg, LatticeArg, ModelArg, Operation};

#[derive(Debug, Parser)]
#[command(
    name = "problab",
    version,
    about = "Simulation lab for walks, mirrors, needles, small-graph conjectures, \
             oriented lattices, and spatial epidemics",
    propagate_version = true
)]
pub struct Cli {
    /// Master seed; falls back to the PROBLAB_SEED environment variable,
    /// then to the built-in default.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for the parallel estimators (default: all cores).
    /// Results do not depend on this setting.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Write the CSV to this file (atomically) instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Self-avoiding walks: exact counts, connective-constant estimates,
    /// uniform samples.
    Saw {
        #[command(subcommand)]
        cmd: SawCmd,
    },
    /// Lorentz mirror models on the square lattice.
    Mirrors {
        #[command(subcommand)]
        cmd: MirrorsCmd,
    },
    /// Continuum Lorentz gas among Poisson needles.
    Needles {
        #[command(subcommand)]
        cmd: NeedlesCmd,
    },
    /// Exact bunkbed-inequality sweeps over small graphs.
    Bunkbed {
        #[command(subcommand)]
        cmd: BunkbedCmd,
    },
    /// Exact negative-association checks for random subgraph families.
    Forest {
        #[command(subcommand)]
        cmd: ForestCmd,
    },
    /// Escape probabilities on the randomly oriented square lattice.
    Oriented {
        #[command(subcommand)]
        cmd: OrientedCmd,
    },
    /// Spatial epidemic among moving particles.
    Epidemic {
        #[command(subcommand)]
        cmd: EpidemicCmd,
    },
    /// Re-run the experiment embedded in a previous output (or a bare JSON
    /// config), reusing its seed.
    Rerun {
        /// A previous CSV output or a JSON config file.
        #[arg(long)]
        from: PathBuf,
    },
    /// Fast end-to-end checks of every module.
    Selftest,
}

#[derive(Debug, Subcommand)]
pub enum SawCmd {
    /// Exact counts of n-step walks from the origin, one row per n.
    Count {
        #[arg(long, value_enum, default_value = "square")]
        lattice: LatticeArg,
        /// Count walks of every length 1..=n.
        #[arg(long)]
        n: u32,
    },
    /// Per-n connective-constant estimates (sigma_n^(1/n)) from exact counts.
    #[command(name = "estimate-kappa")]
    EstimateKappa {
        #[arg(long, value_enum, default_value = "square")]
        lattice: LatticeArg,
        #[arg(long)]
        n: u32,
    },
    /// Uniform n-step walk samples; one row per walk endpoint.
    Sample {
        #[arg(long, value_enum, default_value = "square")]
        lattice: LatticeArg,
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        /// Also write every sampled walk rescaled by n^(-3/4) to this CSV.
        #[arg(long)]
        rescaled_out: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum MirrorsCmd {
    /// Mirrors with probability p at every vertex, NE/NW fair; estimates the
    /// chance the ray from the origin leaves an L-box.
    Ehrenfest {
        /// Mirror density in [0, 1].
        #[arg(long)]
        p: f64,
        /// Box radii, comma separated; one CSV row each.
        #[arg(long = "L", alias = "l", value_delimiter = ',', default_value = "50,100,200")]
        l_grid: Vec<i32>,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
    },
    /// Mirrors on one diagonal sublattice only, density q on its vertices.
    Manhattan {
        /// Mirror density in [0, 1] on the chosen diagonal class.
        #[arg(long)]
        q: f64,
        #[arg(long = "L", alias = "l", value_delimiter = ',', default_value = "50,100,200")]
        l_grid: Vec<i32>,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        /// Which diagonal sublattice carries the mirrors.
        #[arg(long, value_enum, default_value = "a")]
        class: ClassArg,
    },
}

#[derive(Debug, Subcommand)]
pub enum NeedlesCmd {
    /// Trace rays from the origin through one needle field, one row per
    /// initial angle.
    Escape {
        /// Needle length.
        #[arg(long)]
        epsilon: f64,
        /// uniform | degenerate:T | atoms:1/4,1/2:0.5,0.5 | table:T,..:W,..
        #[arg(long, default_value = "uniform")]
        law: String,
        /// Escape radius: a ray ends when it gets this far from the origin.
        #[arg(long = "R", alias = "r", default_value_t = 20.0)]
        escape_radius: f64,
        /// Field extent (defaults to escape radius + 2).
        #[arg(long)]
        window_radius: Option<f64>,
        /// Number of evenly spaced initial angles.
        #[arg(long, default_value_t = 256)]
        angles: u32,
        #[arg(long, default_value_t = 10_000)]
        max_reflections: u64,
    },
    /// Probability that a vacant horizontal channel crosses a box of the
    /// given side, one row per needle length.
    Crossing {
        /// Needle lengths, comma separated.
        #[arg(long = "grid", alias = "epsilon-grid", value_delimiter = ',', required = true)]
        epsilon_grid: Vec<f64>,
        #[arg(long, default_value = "uniform")]
        law: String,
        #[arg(long, default_value_t = 10.0)]
        side: f64,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
    },
    /// Variance-versus-time table over a fan of traced rays, with a
    /// least-squares diffusivity fit.
    Diffusivity {
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value = "uniform")]
        law: String,
        #[arg(long = "R", alias = "r", default_value_t = 30.0)]
        escape_radius: f64,
        /// Number of rays, fanned evenly over [0, 2pi).
        #[arg(long, default_value_t = 200)]
        traces: u32,
        /// Path-length times at which the transverse variance is sampled.
        #[arg(long = "t-grid", value_delimiter = ',', default_value = "2,4,8,16")]
        t_grid: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        max_reflections: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum BunkbedCmd {
    /// Exact two-sheet connection probabilities for every ordered vertex
    /// pair of every input graph, over a probability grid.
    Check {
        /// graph6 file, one graph per line.
        #[arg(long = "graph", alias = "graphs")]
        graph: String,
        /// Edge probabilities, exact ("1/10" or "0.1"), comma separated.
        #[arg(
            long = "p-grid",
            value_delimiter = ',',
            default_value = "1/10,2/10,3/10,4/10,5/10,6/10,7/10,8/10,9/10"
        )]
        p_grid: Vec<String>,
        /// Witness file written if a violation is found.
        #[arg(long, default_value = "bunkbed-witness.txt")]
        witness: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum ForestCmd {
    /// Exact pairwise edge-association check over a subgraph family.
    Check {
        /// usf = uniform forest, ucs = uniform connected subgraph,
        /// ust = uniform spanning tree.
        #[arg(long, value_enum)]
        class: FamilyArg,
        /// graph6 file, one graph per line.
        #[arg(long = "graphs", alias = "graph")]
        graphs: String,
        #[arg(long, default_value = "forest-witness.txt")]
        witness: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum OrientedCmd {
    /// Estimate the probability that the origin reaches the boundary of an
    /// L-box along randomly oriented edges, one row per L.
    Theta {
        /// Probability an edge points north/east.
        #[arg(long)]
        p: f64,
        #[arg(long = "L-grid", alias = "l-grid", value_delimiter = ',', default_value = "50,100,200")]
        l_grid: Vec<i32>,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        /// Extra density of two-way edges (0 disables enhancement).
        #[arg(long, default_value_t = 0.0)]
        enhance: f64,
    },
}

#[derive(Debug, Subcommand)]
pub enum EpidemicCmd {
    /// One full run; the event log (infections and removals) as CSV.
    Run {
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Dimension, 1 or 2.
        #[arg(long, default_value_t = 2)]
        d: u32,
        /// Removal rate.
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 10.0)]
        box_radius: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        /// Survival proxy: stop once this many particles were ever infected.
        #[arg(long, default_value_t = 500)]
        max_infected: u64,
        /// Survival proxy: stop once an infected particle is this close to
        /// the box boundary.
        #[arg(long, default_value_t = 1.0)]
        boundary_margin: f64,
        /// Variance of each coordinate increment per unit time.
        #[arg(long, default_value_t = 1.0)]
        diffusion_coefficient: f64,
    },
    /// Survival-proxy frequencies over a grid of removal rates.
    Scan {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long, default_value_t = 2)]
        d: u32,
        /// Increasing removal rates, comma separated.
        #[arg(long = "alpha-grid", value_delimiter = ',', required = true)]
        alpha_grid: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        /// Share one trajectory realization across all rates (delayed model
        /// only); makes the scan exactly monotone.
        #[arg(long)]
        coupled: bool,
        #[arg(long, default_value_t = 10.0)]
        box_radius: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, default_value_t = 500)]
        max_infected: u64,
        #[arg(long, default_value_t = 1.0)]
        boundary_margin: f64,
        #[arg(long, default_value_t = 1.0)]
        diffusion_coefficient: f64,
    },
}

/// What the parsed command line asks the process to do.
#[derive(Debug)]
pub enum Invocation {
    Experiment(Operation),
    Rerun(PathBuf),
    Selftest,
}

impl Command {
    pub fn into_invocation(self) -> Invocation {
        match self {
            Command::Saw { cmd } => Invocation::Experiment(match cmd {
                SawCmd::Count { lattice, n } => Operation::SawCount { lattice, n },
                SawCmd::EstimateKappa { lattice, n } => Operation::SawKappa { lattice, n },
                SawCmd::Sample { lattice, n, trials, rescaled_out } => {
                    Operation::SawSample { lattice, n, trials, rescaled_out }
                }
            }),
            Command::Mirrors { cmd } => Invocation::Experiment(match cmd {
                MirrorsCmd::Ehrenfest { p, l_grid, trials } => {
                    Operation::MirrorsEhrenfest { p, l_grid, trials }
                }
                MirrorsCmd::Manhattan { q, l_grid, trials, class } => {
                    Operation::MirrorsManhattan { q, l_grid, trials, class }
                }
            }),
            Command::Needles { cmd } => Invocation::Experiment(match cmd {
                NeedlesCmd::Escape {
                    epsilon,
                    law,
                    escape_radius,
                    window_radius,
                    angles,
                    max_reflections,
                } => Operation::NeedlesEscape {
                    epsilon,
                    law,
                    escape_radius,
                    window_radius,
                    angles,
                    max_reflections,
                },
                NeedlesCmd::Crossing { epsilon_grid, law, side, trials } => {
                    Operation::NeedlesCrossing { epsilon_grid, law, side, trials }
                }
                NeedlesCmd::Diffusivity {
                    epsilon,
                    law,
                    escape_radius,
                    traces,
                    t_grid,
                    max_reflections,
                } => Operation::NeedlesDiffusivity {
                    epsilon,
                    law,
                    escape_radius,
                    traces,
                    t_grid,
                    max_reflections,
                },
            }),
            Command::Bunkbed { cmd } => Invocation::Experiment(match cmd {
                BunkbedCmd::Check { graph, p_grid, witness } => {
                    Operation::BunkbedCheck { graphs: graph, p_grid, witness }
                }
            }),
            Command::Forest { cmd } => Invocation::Experiment(match cmd {
                ForestCmd::Check { class, graphs, witness } => {
                    Operation::ForestCheck { family: class, graphs, witness }
                }
            }),
            Command::Oriented { cmd } => Invocation::Experiment(match cmd {
                OrientedCmd::Theta { p, l_grid, trials, enhance } => {
                    Operation::OrientedTheta { p, l_grid, trials, enhance }
                }
            }),
            Command::Epidemic { cmd } => Invocation::Experiment(match cmd {
                EpidemicCmd::Run {
                    model,
                    d,
                    alpha,
                    box_radius,
                    dt,
                    max_infected,
                    boundary_margin,
                    diffusion_coefficient,
                } => Operation::EpidemicRun {
                    model,
                    dimension: d,
                    alpha,
                    box_radius,
                    dt,
                    max_infected,
                    boundary_margin,
                    diffusion_coefficient,
                },
                EpidemicCmd::Scan {
                    model,
                    d,
                    alpha_grid,
                    trials,
                    coupled,
                    box_radius,
                    dt,
                    max_infected,
                    boundary_margin,
                    diffusion_coefficient,
                } => Operation::EpidemicScan {
                    model,
                    dimension: d,
                    alpha_grid,
                    trials,
                    coupled,
                    box_radius,
                    dt,
                    max_infected,
                    boundary_margin,
                    diffusion_coefficient,
                },
            }),
            Command::Rerun { from } => Invocation::Rerun(from),
            Command::Selftest => Invocation::Selftest,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(args).expect("args should parse")
    }

    #[test]
    fn grids_split_on_commas_including_defaults() {
        let cli = parse(&["problab", "mirrors", "ehrenfest", "--p", "1.0", "--L", "50,100"]);
        match cli.command.into_invocation() {
            Invocation::Experiment(Operation::MirrorsEhrenfest { p, l_grid, trials }) => {
                assert_eq!(p, 1.0);
                assert_eq!(l_grid, vec![50, 100]);
                assert_eq!(trials, 10_000);
            }
            other => panic!("unexpected invocation {other:?}"),
        }
        // the default grid must split too
        let cli = parse(&["problab", "oriented", "theta", "--p", "0.5"]);
        match cli.command.into_invocation() {
            Invocation::Experiment(Operation::OrientedTheta { l_grid, .. }) => {
                assert_eq!(l_grid, vec![50, 100, 200]);
            }
            other => panic!("unexpected invocation {other:?}"),
        }
    }

    #[test]
    fn global_flags_work_after_the_subcommand() {
        let cli = parse(&["problab", "saw", "count", "--n", "4", "--seed", "7", "--workers", "2"]);
        assert_eq!(cli.seed, Some(7));
        assert_eq!(cli.workers, Some(2));
        match cli.command.into_invocation() {
            Invocation::Experiment(Operation::SawCount { lattice, n }) => {
                assert_eq!(lattice, LatticeArg::Square);
                assert_eq!(n, 4);
            }
            other => panic!("unexpected invocation {other:?}"),
        }
    }

    #[test]
    fn spec_style_spellings_parse() {
        parse(&["problab", "saw", "estimate-kappa", "--lattice", "hex", "--n", "10"]);
        parse(&["problab", "mirrors", "manhattan", "--q", "0.5", "--class", "b"]);
        parse(&[
            "problab", "needles", "escape", "--epsilon", "0.4", "--law",
            "atoms:1/4,1/2:0.5,0.5", "--R", "15",
        ]);
        parse(&["problab", "needles", "crossing", "--grid", "0.1,0.2"]);
        parse(&["problab", "bunkbed", "check", "--graph", "x.g6", "--p-grid", "1/4,1/2"]);
        parse(&["problab", "forest", "check", "--class", "ust", "--graphs", "x.g6"]);
        parse(&["problab", "oriented", "theta", "--p", "0.5", "--L-grid", "50", "--enhance", "0.01"]);
        parse(&["problab", "epidemic", "run", "--model", "delayed", "--d", "1", "--alpha", "2.0"]);
        parse(&[
            "problab", "epidemic", "scan", "--model", "delayed", "--alpha-grid", "1,4,16",
            "--coupled",
        ]);
        parse(&["problab", "rerun", "--from", "old.csv"]);
        parse(&["problab", "selftest"]);
    }

    #[test]
    fn missing_required_flags_fail_to_parse() {
        assert!(Cli::try_parse_from(["problab", "saw", "count"]).is_err());
        assert!(Cli::try_parse_from(["problab", "mirrors", "ehrenfest"]).is_err());
        assert!(Cli::try_parse_from(["problab", "epidemic", "scan", "--model", "delayed"]).is_err());
        assert!(Cli::try_parse_from(["problab", "bogus"]).is_err());
    }
}
