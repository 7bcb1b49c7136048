//! Experiment dispatch: run one configured operation and collect its rows.
//!
//! Every operation derives its randomness from the config's master seed
//! through fixed stream tags, and the parallel estimators hand each trial its
//! own substream, so results are identical for any `--workers` setting.

use std::f64::consts::TAU;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_rational::BigRational;
use problab_core::bunkbed::bunkbed_check;
use problab_core::epidemic::{self, EpidemicConfig, EventKind, RunVerdict};
use problab_core::forests::{ucs_check, usf_check, ust_check, PairAssociationReport};
use problab_core::graphs::{read_graph6_lines, SimpleGraph};
use problab_core::mirrors::{estimate_theta_ehrenfest, estimate_theta_manhattan};
use problab_core::needles::{
    escape_spectrum, estimate_diffusivity, generate_field, trace_continuum,
    vacant_crossing_probability, ContinuumOutcome,
};
use problab_core::oriented::estimate_theta_with;
use problab_core::saw::{
    connective_estimates, count_saws_upto_parallel, export_rescaled_walks, SamplerMode, SawSampler,
};
use problab_core::{Error, EstimateCI, Result, RngStream};

use crate::config::{
    parse_angle_law, parse_prob, ClassArg, ExperimentConfig, FamilyArg, LatticeArg, ModelArg,
    Operation,
};
use crate::output::{render_bunkbed_witness, render_forest_witness, write_atomic, ResultRecord};

// Stream tags keeping the operations' randomness disjoint under one seed.
const STREAM_SAW_SAMPLE: u64 = 0x5357_5350;
const STREAM_MIRRORS: u64 = 0x4d52_5253;
const STREAM_NEEDLES: u64 = 0x4e44_4c53;
const STREAM_ORIENTED: u64 = 0x4f52_4e54;
const STREAM_EPIDEMIC: u64 = 0x4550_444d;

/// The record plus whether the run uncovered a conjecture violation.
#[derive(Debug)]
pub struct ExecOutcome {
    pub record: ResultRecord,
    pub violation: bool,
    pub witness_path: Option<PathBuf>,
}

impl ExecOutcome {
    fn clean(record: ResultRecord) -> ExecOutcome {
        ExecOutcome { record, violation: false, witness_path: None }
    }
}

/// Run the configured experiment and time it.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExecOutcome> {
    let start = Instant::now();
    let mut outcome = dispatch(config)?;
    outcome.record.runtime_ms = start.elapsed().as_millis();
    Ok(outcome)
}

fn dispatch(config: &ExperimentConfig) -> Result<ExecOutcome> {
    match &config.op {
        Operation::SawCount { lattice, n } => saw_count(config, *lattice, *n),
        Operation::SawKappa { lattice, n } => saw_kappa(config, *lattice, *n),
        Operation::SawSample { lattice, n, trials, rescaled_out } => {
            saw_sample(config, *lattice, *n, *trials, rescaled_out.as_deref())
        }
        Operation::MirrorsEhrenfest { p, l_grid, trials } => {
            mirrors(config, "ehrenfest", *p, l_grid, *trials, None)
        }
        Operation::MirrorsManhattan { q, l_grid, trials, class } => {
            mirrors(config, "manhattan", *q, l_grid, *trials, Some(*class))
        }
        Operation::NeedlesEscape {
            epsilon,
            law,
            escape_radius,
            window_radius,
            angles,
            max_reflections,
        } => needles_escape(
            config,
            *epsilon,
            law,
            *escape_radius,
            *window_radius,
            *angles,
            *max_reflections,
        ),
        Operation::NeedlesCrossing { epsilon_grid, law, side, trials } => {
            needles_crossing(config, epsilon_grid, law, *side, *trials)
        }
        Operation::NeedlesDiffusivity {
            epsilon,
            law,
            escape_radius,
            traces,
            t_grid,
            max_reflections,
        } => needles_diffusivity(
            config,
            *epsilon,
            law,
            *escape_radius,
            *traces,
            t_grid,
            *max_reflections,
        ),
        Operation::BunkbedCheck { graphs, p_grid, witness } => {
            bunkbed(config, graphs, p_grid, witness)
        }
        Operation::ForestCheck { family, graphs, witness } => {
            forest(config, *family, graphs, witness)
        }
        Operation::OrientedTheta { p, l_grid, trials, enhance } => {
            oriented(config, *p, l_grid, *trials, *enhance)
        }
        Operation::EpidemicRun {
            model,
            dimension,
            alpha,
            box_radius,
            dt,
            max_infected,
            boundary_margin,
            diffusion_coefficient,
        } => {
            let core = epidemic_config(
                *model,
                *dimension,
                *alpha,
                *box_radius,
                *dt,
                *max_infected,
                *boundary_margin,
                *diffusion_coefficient,
            );
            epidemic_run(config, *model, core)
        }
        Operation::EpidemicScan {
            model,
            dimension,
            alpha_grid,
            trials,
            coupled,
            box_radius,
            dt,
            max_infected,
            boundary_margin,
            diffusion_coefficient,
        } => {
            if alpha_grid.is_empty() {
                return Err(Error::invalid("alpha grid must be non-empty"));
            }
            let core = epidemic_config(
                *model,
                *dimension,
                alpha_grid[0],
                *box_radius,
                *dt,
                *max_infected,
                *boundary_margin,
                *diffusion_coefficient,
            );
            epidemic_scan(config, *model, core, alpha_grid, *trials, *coupled)
        }
    }
}

/// Shortest round-trip decimal for a float, so re-reading a CSV recovers the
/// exact bits.
fn fmt64(x: f64) -> String {
    format!("{x}")
}

fn ci_cells(e: &EstimateCI) -> [String; 5] {
    [
        fmt64(e.point),
        fmt64(e.lo),
        fmt64(e.hi),
        e.successes.to_string(),
        e.trials.to_string(),
    ]
}

fn read_text(path: &str) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{path}: {e}"))))
}

// ---------------------------------------------------------------------------
// self-avoiding walks

fn saw_count(config: &ExperimentConfig, lattice: LatticeArg, n: u32) -> Result<ExecOutcome> {
    let counts = count_saws_upto_parallel(lattice.core(), n as usize)?;
    let mut record = ResultRecord::new(config, vec!["lattice", "n", "sigma"]);
    for c in &counts {
        record.push_row(vec![lattice.name().to_string(), c.n.to_string(), c.sigma.to_string()]);
    }
    Ok(ExecOutcome::clean(record))
}

fn saw_kappa(config: &ExperimentConfig, lattice: LatticeArg, n: u32) -> Result<ExecOutcome> {
    let counts = count_saws_upto_parallel(lattice.core(), n as usize)?;
    let estimate = connective_estimates(&counts)?;
    let mut record =
        ResultRecord::new(config, vec!["lattice", "n", "sigma", "kappa_per_n"]);
    record.note("fekete_ok", estimate.fekete_ok);
    if let Some(fit) = &estimate.fit {
        record.note("fit_kappa_used", fmt64(fit.kappa_used));
        record.note("fit_amplitude", fmt64(fit.amplitude));
        record.note("fit_gamma", fmt64(fit.gamma));
        record.note("fit_residual_sum_squares", fmt64(fit.residual_sum_squares));
    }
    for (c, kappa) in counts.iter().zip(&estimate.kappa_per_n) {
        record.push_row(vec![
            lattice.name().to_string(),
            c.n.to_string(),
            c.sigma.to_string(),
            fmt64(*kappa),
        ]);
    }
    Ok(ExecOutcome::clean(record))
}

fn saw_sample(
    config: &ExperimentConfig,
    lattice: LatticeArg,
    n: u32,
    trials: u64,
    rescaled_out: Option<&str>,
) -> Result<ExecOutcome> {
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let mut sampler = SawSampler::new(lattice.core(), n as usize)?;
    let mut stream = RngStream::derive(config.seed, STREAM_SAW_SAMPLE);
    let mut record =
        ResultRecord::new(config, vec!["trial", "end_x", "end_y", "sq_end"]);
    let mut walks = Vec::with_capacity(trials as usize);
    let mut sq_sum = 0.0f64;
    for t in 0..trials {
        let walk = sampler.sample(&mut stream);
        let end = walk.endpoint();
        let sq = (end.x as f64).powi(2) + (end.y as f64).powi(2);
        sq_sum += sq;
        record.push_row(vec![
            t.to_string(),
            end.x.to_string(),
            end.y.to_string(),
            fmt64(sq),
        ]);
        walks.push(walk);
    }
    record.note("lattice", lattice.name());
    record.note(
        "sampler_mode",
        match sampler.mode() {
            SamplerMode::Exact => "exact",
            SamplerMode::Pivot => "pivot",
        },
    );
    if let Some(count) = sampler.walk_count() {
        record.note("walks_enumerated", count);
    }
    if let Some((attempts, accepted)) = sampler.pivot_stats() {
        record.note("pivot_attempts", attempts);
        record.note("pivot_accepted", accepted);
    }
    record.note("mean_sq_endpoint", fmt64(sq_sum / trials as f64));
    if let Some(path) = rescaled_out {
        let mut buf: Vec<u8> = Vec::new();
        let summary = export_rescaled_walks(&walks, &mut buf)?;
        let text = String::from_utf8(buf).expect("rescaled CSV is ASCII");
        write_atomic(Path::new(path), &text)?;
        record.note("rescaled_out", path);
        record.note("rescaled_rows", summary.rows);
        record.note("rescaled_mean_sq_endpoint", fmt64(summary.mean_sq_endpoint));
    }
    Ok(ExecOutcome::clean(record))
}

// ---------------------------------------------------------------------------
// lattice mirrors

fn mirrors(
    config: &ExperimentConfig,
    model: &str,
    parameter: f64,
    l_grid: &[i32],
    trials: u64,
    class: Option<ClassArg>,
) -> Result<ExecOutcome> {
    if l_grid.is_empty() {
        return Err(Error::invalid("L grid must be non-empty"));
    }
    let mut record = ResultRecord::new(
        config,
        vec!["model", "parameter", "l", "estimate", "lo", "hi", "successes", "trials"],
    );
    if let Some(c) = class {
        record.note("diagonal_class", c.name());
    }
    record.note("confidence", "0.95");
    let base = RngStream::derive(config.seed, STREAM_MIRRORS);
    for (i, &l) in l_grid.iter().enumerate() {
        let estimate = match class {
            None => estimate_theta_ehrenfest(parameter, l, trials, &base.substream(&[1, i as u64]))?,
            Some(c) => estimate_theta_manhattan(
                parameter,
                l,
                trials,
                c.core(),
                &base.substream(&[2, i as u64]),
            )?,
        };
        let [point, lo, hi, successes, total] = ci_cells(&estimate);
        record.push_row(vec![
            model.to_string(),
            fmt64(parameter),
            l.to_string(),
            point,
            lo,
            hi,
            successes,
            total,
        ]);
    }
    Ok(ExecOutcome::clean(record))
}

// ---------------------------------------------------------------------------
// continuum needles

fn outcome_name(outcome: &ContinuumOutcome) -> &'static str {
    match outcome {
        ContinuumOutcome::EscapedRadius(_) => "escaped",
        ContinuumOutcome::ReflectionBudgetExhausted => "exhausted",
        ContinuumOutcome::DegenerateHit => "degenerate",
    }
}

fn needles_escape(
    config: &ExperimentConfig,
    epsilon: f64,
    law_text: &str,
    escape_radius: f64,
    window_radius: Option<f64>,
    angles: u32,
    max_reflections: u64,
) -> Result<ExecOutcome> {
    let law = parse_angle_law(law_text)?;
    if angles == 0 {
        return Err(Error::invalid("need at least one initial angle"));
    }
    let window = window_radius.unwrap_or(escape_radius + 2.0);
    if window < escape_radius {
        return Err(Error::invalid(format!(
            "window radius {window} smaller than escape radius {escape_radius}"
        )));
    }
    let field = generate_field(config.seed, window, epsilon, law)?;
    let alphas: Vec<f64> = (0..angles).map(|k| k as f64 * TAU / angles as f64).collect();
    let report = escape_spectrum(&field, &alphas, escape_radius, max_reflections)?;
    let mut record =
        ResultRecord::new(config, vec!["alpha", "outcome", "reflections", "path_length"]);
    record.note("law", law_text);
    record.note("window_radius", fmt64(window));
    record.note("origin_resamples", field.origin_resamples);
    record.note("escaping", report.escaping);
    record.note("escaping_fraction", fmt64(report.escaping_fraction));
    record.note("any_escape", report.any_escape);
    for row in &report.rows {
        record.push_row(vec![
            fmt64(row.alpha),
            outcome_name(&row.outcome).to_string(),
            row.reflections.to_string(),
            fmt64(row.path_length),
        ]);
    }
    Ok(ExecOutcome::clean(record))
}

fn needles_crossing(
    config: &ExperimentConfig,
    epsilon_grid: &[f64],
    law_text: &str,
    side: f64,
    trials: u64,
) -> Result<ExecOutcome> {
    let law = parse_angle_law(law_text)?;
    if epsilon_grid.is_empty() {
        return Err(Error::invalid("epsilon grid must be non-empty"));
    }
    let mut record = ResultRecord::new(
        config,
        vec!["epsilon", "estimate", "lo", "hi", "successes", "trials"],
    );
    record.note("law", law_text);
    record.note("side", fmt64(side));
    record.note("confidence", "0.95");
    let base = RngStream::derive(config.seed, STREAM_NEEDLES);
    for (i, &epsilon) in epsilon_grid.iter().enumerate() {
        let estimate =
            vacant_crossing_probability(epsilon, &law, side, trials, &base.substream(&[1, i as u64]))?;
        let [point, lo, hi, successes, total] = ci_cells(&estimate);
        record.push_row(vec![fmt64(epsilon), point, lo, hi, successes, total]);
    }
    Ok(ExecOutcome::clean(record))
}

fn needles_diffusivity(
    config: &ExperimentConfig,
    epsilon: f64,
    law_text: &str,
    escape_radius: f64,
    traces: u32,
    t_grid: &[f64],
    max_reflections: u64,
) -> Result<ExecOutcome> {
    let law = parse_angle_law(law_text)?;
    if traces == 0 {
        return Err(Error::invalid("need at least one trace"));
    }
    let field = generate_field(config.seed, escape_radius + 2.0, epsilon, law)?;
    let mut all = Vec::with_capacity(traces as usize);
    for k in 0..traces {
        let alpha = k as f64 * TAU / traces as f64;
        all.push(trace_continuum(&field, alpha, escape_radius, max_reflections)?);
    }
    let report = estimate_diffusivity(&all, t_grid)?;
    let mut record =
        ResultRecord::new(config, vec!["t", "variance", "variance_over_t"]);
    record.note("law", law_text);
    record.note("traces_total", traces);
    record.note("traces_used", report.traces_used);
    record.note("sigma_squared", fmt64(report.sigma_squared));
    record.note("intercept", fmt64(report.intercept));
    record.note("r_squared", fmt64(report.r_squared));
    record.note("growth_exponent", fmt64(report.growth_exponent));
    record.note("diffusive_fit_ok", report.diffusive_fit_ok);
    for row in &report.rows {
        record.push_row(vec![fmt64(row.t), fmt64(row.variance), fmt64(row.variance_over_t)]);
    }
    Ok(ExecOutcome::clean(record))
}

// ---------------------------------------------------------------------------
// exact conjecture checks

/// Read a graph6 file, returning the graphs with their input lines.
fn load_graphs(path: &str) -> Result<Vec<(String, SimpleGraph)>> {
    let text = read_text(path)?;
    let graphs = read_graph6_lines(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{path}: {msg}")),
        other => other,
    })?;
    if graphs.is_empty() {
        return Err(Error::invalid(format!("{path}: no graphs found")));
    }
    let labels = text.lines().map(str::trim).filter(|l| !l.is_empty());
    Ok(labels.map(str::to_string).zip(graphs).collect())
}

fn bunkbed(
    config: &ExperimentConfig,
    graphs_path: &str,
    p_grid_text: &[String],
    witness_path: &str,
) -> Result<ExecOutcome> {
    let graphs = load_graphs(graphs_path)?;
    let grid: Result<Vec<BigRational>> = p_grid_text.iter().map(|s| parse_prob(s)).collect();
    let grid = grid?;
    let mut record = ResultRecord::new(
        config,
        vec![
            "graph",
            "graph6",
            "vertices",
            "edges",
            "pairs_checked",
            "grid_size",
            "min_gap",
            "witness_u",
            "witness_v",
            "witness_p",
            "violation",
        ],
    );
    let mut first_violation = None;
    let mut violations = 0usize;
    for (gi, (label, g)) in graphs.iter().enumerate() {
        let report = bunkbed_check(g, &grid)?;
        record.push_row(vec![
            gi.to_string(),
            label.clone(),
            g.vertex_count().to_string(),
            g.edges().len().to_string(),
            report.pairs_checked.to_string(),
            report.grid_size.to_string(),
            report.min_gap.to_string(),
            report.witness.u.to_string(),
            report.witness.v.to_string(),
            report.witness.p.to_string(),
            report.violation.to_string(),
        ]);
        if report.violation {
            violations += 1;
            if first_violation.is_none() {
                first_violation = Some((label.clone(), report));
            }
        }
    }
    record.note("graphs_checked", graphs.len());
    record.note("violations", violations);
    if let Some((label, report)) = first_violation {
        let text = render_bunkbed_witness(&label, &report);
        write_atomic(Path::new(witness_path), &text)?;
        record.note("witness_file", witness_path);
        return Ok(ExecOutcome {
            record,
            violation: true,
            witness_path: Some(PathBuf::from(witness_path)),
        });
    }
    Ok(ExecOutcome::clean(record))
}

fn forest(
    config: &ExperimentConfig,
    family: FamilyArg,
    graphs_path: &str,
    witness_path: &str,
) -> Result<ExecOutcome> {
    let graphs = load_graphs(graphs_path)?;
    let check: fn(&SimpleGraph) -> Result<PairAssociationReport> = match family {
        FamilyArg::Usf => usf_check,
        FamilyArg::Ucs => ucs_check,
        FamilyArg::Ust => ust_check,
    };
    let mut record = ResultRecord::new(
        config,
        vec![
            "graph",
            "graph6",
            "vertices",
            "edges",
            "family",
            "subgraphs",
            "pairs_checked",
            "max_excess",
            "violation",
        ],
    );
    let mut first_violation = None;
    let mut violations = 0usize;
    for (gi, (label, g)) in graphs.iter().enumerate() {
        let report = check(g)?;
        record.push_row(vec![
            gi.to_string(),
            label.clone(),
            g.vertex_count().to_string(),
            g.edges().len().to_string(),
            family.name().to_string(),
            report.total.to_string(),
            report.pairs_checked.to_string(),
            report.max_excess.to_string(),
            report.violation.to_string(),
        ]);
        if report.violation {
            violations += 1;
            if first_violation.is_none() {
                first_violation = Some((label.clone(), report));
            }
        }
    }
    record.note("graphs_checked", graphs.len());
    record.note("violations", violations);
    if let Some((label, report)) = first_violation {
        let text = render_forest_witness(&label, &report);
        write_atomic(Path::new(witness_path), &text)?;
        record.note("witness_file", witness_path);
        return Ok(ExecOutcome {
            record,
            violation: true,
            witness_path: Some(PathBuf::from(witness_path)),
        });
    }
    Ok(ExecOutcome::clean(record))
}

// ---------------------------------------------------------------------------
// oriented lattice

fn oriented(
    config: &ExperimentConfig,
    p: f64,
    l_grid: &[i32],
    trials: u64,
    enhance: f64,
) -> Result<ExecOutcome> {
    if l_grid.is_empty() {
        return Err(Error::invalid("L grid must be non-empty"));
    }
    let mut record = ResultRecord::new(
        config,
        vec!["p", "l", "estimate", "lo", "hi", "trials", "seed"],
    );
    record.note("enhance", fmt64(enhance));
    record.note("confidence", "0.95");
    let base = RngStream::derive(config.seed, STREAM_ORIENTED);
    for (i, &l) in l_grid.iter().enumerate() {
        let estimate = estimate_theta_with(p, l, enhance, trials, &base.substream(&[i as u64]))?;
        record.push_row(vec![
            fmt64(p),
            l.to_string(),
            fmt64(estimate.point),
            fmt64(estimate.lo),
            fmt64(estimate.hi),
            estimate.trials.to_string(),
            config.seed.to_string(),
        ]);
    }
    Ok(ExecOutcome::clean(record))
}

// ---------------------------------------------------------------------------
// spatial epidemics

#[allow(clippy::too_many_arguments)]
fn epidemic_config(
    model: ModelArg,
    dimension: u32,
    alpha: f64,
    box_radius: f64,
    dt: f64,
    max_infected: u64,
    boundary_margin: f64,
    diffusion_coefficient: f64,
) -> EpidemicConfig {
    let mut cfg = EpidemicConfig::new(dimension, model.core(), alpha);
    cfg.box_radius = box_radius;
    cfg.dt = dt;
    cfg.max_infected = max_infected;
    cfg.boundary_margin = boundary_margin;
    cfg.diffusion_coefficient = diffusion_coefficient;
    cfg
}

fn epidemic_run(
    config: &ExperimentConfig,
    model: ModelArg,
    core: EpidemicConfig,
) -> Result<ExecOutcome> {
    let outcome = epidemic::run(&core, &RngStream::derive(config.seed, STREAM_EPIDEMIC))?;
    let mut record =
        ResultRecord::new(config, vec!["time", "event", "particle", "x", "y"]);
    record.note("model", model.name());
    match &outcome.verdict {
        RunVerdict::Extinct { total_infected } => {
            record.note("verdict", "extinct");
            record.note("total_infected", total_infected);
        }
        RunVerdict::SurvivalProxy { reason } => {
            record.note("verdict", "survival-proxy");
            record.note("proxy_reason", reason);
        }
    }
    record.note("ever_infected", outcome.ever_infected);
    record.note("steps", outcome.steps);
    record.note("final_time", fmt64(outcome.final_time));
    record.note("final_susceptible", outcome.final_susceptible);
    record.note("final_infected", outcome.final_infected);
    record.note("final_removed", outcome.final_removed);
    for event in &outcome.events {
        record.push_row(vec![
            fmt64(event.time),
            match event.kind {
                EventKind::Infection => "infection".to_string(),
                EventKind::Removal => "removal".to_string(),
            },
            event.particle.to_string(),
            fmt64(event.position[0]),
            fmt64(event.position[1]),
        ]);
    }
    Ok(ExecOutcome::clean(record))
}

fn epidemic_scan(
    config: &ExperimentConfig,
    model: ModelArg,
    core: EpidemicConfig,
    alpha_grid: &[f64],
    trials: u64,
    coupled: bool,
) -> Result<ExecOutcome> {
    let stream = RngStream::derive(config.seed, STREAM_EPIDEMIC).substream(&[7]);
    let scan = if coupled {
        epidemic::scan_alpha_coupled(&core, alpha_grid, trials, &stream)?
    } else {
        epidemic::scan_alpha(&core, alpha_grid, trials, &stream)?
    };
    let mut record = ResultRecord::new(
        config,
        vec!["alpha", "estimate", "lo", "hi", "successes", "trials"],
    );
    record.note("model", model.name());
    record.note("coupled", coupled);
    record.note("confidence", "0.95");
    match scan.crossover {
        Some(alpha) => record.note("crossover_alpha", fmt64(alpha)),
        None => record.note("crossover_alpha", "none"),
    }
    for row in &scan.rows {
        let [point, lo, hi, successes, total] = ci_cells(&row.estimate);
        record.push_row(vec![fmt64(row.alpha), point, lo, hi, successes, total]);
    }
    Ok(ExecOutcome::clean(record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use problab_core::graphs::graph6_string;
    use std::io::Write as _;

    fn run_op(seed: u64, op: Operation) -> Result<ExecOutcome> {
        run_experiment(&ExperimentConfig::new(seed, op))
    }

    #[test]
    fn saw_count_rows_hold_known_values() {
        let out = run_op(1, Operation::SawCount { lattice: LatticeArg::Square, n: 4 }).unwrap();
        assert!(!out.violation);
        let sigmas: Vec<&str> = out.record.rows.iter().map(|r| r[2].as_str()).collect();
        assert_eq!(sigmas, vec!["4", "12", "36", "100"]);
        let out = run_op(1, Operation::SawCount { lattice: LatticeArg::Hex, n: 4 }).unwrap();
        let sigmas: Vec<&str> = out.record.rows.iter().map(|r| r[2].as_str()).collect();
        assert_eq!(sigmas, vec!["3", "6", "12", "24"]);
    }

    #[test]
    fn saw_sample_is_reproducible_per_seed() {
        let op = |seed| {
            run_op(
                seed,
                Operation::SawSample {
                    lattice: LatticeArg::Square,
                    n: 8,
                    trials: 20,
                    rescaled_out: None,
                },
            )
            .unwrap()
        };
        let a = op(5);
        let b = op(5);
        let c = op(6);
        assert_eq!(a.record.rows, b.record.rows);
        assert_ne!(a.record.rows, c.record.rows);
    }

    #[test]
    fn graph_checks_read_files_and_report_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graphs.g6");
        let mut file = std::fs::File::create(&path).unwrap();
        for g in [SimpleGraph::complete(2), SimpleGraph::path(3), SimpleGraph::cycle(4).unwrap()] {
            writeln!(file, "{}", graph6_string(&g).unwrap()).unwrap();
        }
        drop(file);
        let witness = dir.path().join("w.txt").to_string_lossy().to_string();
        let graphs = path.to_string_lossy().to_string();

        let out = run_op(
            1,
            Operation::BunkbedCheck {
                graphs: graphs.clone(),
                p_grid: vec!["1/2".into(), "0.3".into()],
                witness: witness.clone(),
            },
        )
        .unwrap();
        assert!(!out.violation, "no violation expected on tiny graphs");
        assert!(out.witness_path.is_none());
        assert_eq!(out.record.rows.len(), 3);
        for row in &out.record.rows {
            assert_eq!(row[10], "false");
        }

        let out = run_op(
            1,
            Operation::ForestCheck { family: FamilyArg::Ust, graphs, witness },
        )
        .unwrap();
        assert!(!out.violation);
        // spanning tree counts: K2 has 1, P3 has 1, C4 has 4
        let totals: Vec<&str> = out.record.rows.iter().map(|r| r[5].as_str()).collect();
        assert_eq!(totals, vec!["1", "1", "4"]);
    }

    #[test]
    fn missing_graph_file_and_bad_lines_are_reported_with_context() {
        let err = run_op(
            1,
            Operation::BunkbedCheck {
                graphs: "/nonexistent/graphs.g6".into(),
                p_grid: vec!["1/2".into()],
                witness: "w.txt".into(),
            },
        )
        .unwrap_err();
        assert!(err.to_string().contains("/nonexistent/graphs.g6"));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.g6");
        std::fs::write(&path, "A_\n\x01!bogus\n").unwrap();
        let err = run_op(
            1,
            Operation::ForestCheck {
                family: FamilyArg::Usf,
                graphs: path.to_string_lossy().to_string(),
                witness: "w.txt".into(),
            },
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "error should name the line: {msg}");
        assert!(msg.contains("bad.g6"), "error should name the file: {msg}");
    }

    #[test]
    fn coupled_scan_rejects_the_diffusion_model() {
        let err = run_op(
            1,
            Operation::EpidemicScan {
                model: ModelArg::Diffusion,
                dimension: 2,
                alpha_grid: vec![1.0, 2.0],
                trials: 2,
                coupled: true,
                box_radius: 6.0,
                dt: 0.05,
                max_infected: 10,
                boundary_margin: 1.0,
                diffusion_coefficient: 1.0,
            },
        )
        .unwrap_err();
        assert!(err.to_string().contains("delayed"));
    }

    #[test]
    fn oriented_rows_match_the_documented_shape() {
        let out = run_op(
            9,
            Operation::OrientedTheta { p: 0.5, l_grid: vec![10, 20], trials: 50, enhance: 0.0 },
        )
        .unwrap();
        assert_eq!(out.record.columns, vec!["p", "l", "estimate", "lo", "hi", "trials", "seed"]);
        assert_eq!(out.record.rows.len(), 2);
        for row in &out.record.rows {
            assert_eq!(row[0], "0.5");
            assert_eq!(row[5], "50");
            assert_eq!(row[6], "9");
            let (lo, point, hi): (f64, f64, f64) =
                (row[3].parse().unwrap(), row[2].parse().unwrap(), row[4].parse().unwrap());
            assert!(lo <= point && point <= hi);
        }
    }
}
