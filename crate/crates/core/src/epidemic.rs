//! Spatial S/I/R epidemic among Brownian particles.
//!
//! Susceptible particles are laid down as a rate-1 Poisson cloud in a box,
//! one infected particle starts at the origin, and infection happens by
//! radius-1 contact.  Two movement rules are supported: in the *diffusion*
//! model every particle that is not removed diffuses; in the *delayed*
//! model a particle stands still until it is infected and only then starts
//! to move.  Each particle carries a standard exponential mark e_i drawn up
//! front, and is removed once it has been infected for longer than e_i / α.
//!
//! "The epidemic survives" is not observable in a finite run, so two proxies
//! stand in for it: the total ever infected reaching a cap, or an infected
//! particle coming within a margin of the box boundary.
//!
//! Randomness discipline: positions, marks, and each particle's k-th
//! movement increment are pure functions of (stream, particle, k).  Runs of
//! the delayed model with different removal rates α on the same stream then
//! share trajectories outright, and shortening e_i / α can only truncate a
//! particle's infectious journey — which makes the ever-infected set exactly
//! monotone in α.  [`coupled_delayed_run`] exploits and asserts this; the
//! diffusion model gets no such guarantee (susceptibles move there, so the
//! contact geometry is not a prefix structure) and is refused.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;

use crate::randstat::{estimate_proportion, EstimateCI, RngStream};
use crate::{Error, Result};

const TAG_POP_COUNT: u64 = 0x4550_4354; // "EPCT"
const TAG_POP_POS: u64 = 0x4550_504f; // "EPPO"
const TAG_MARK: u64 = 0x4550_4d4b; // "EPMK"
const TAG_MOVE: u64 = 0x4550_4d56; // "EPMV"
const TAG_RUN_TRIAL: u64 = 0x4550_5254; // "EPRT"
const TAG_SCAN: u64 = 0x4550_5343; // "EPSC"

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compartment {
    Susceptible,
    Infected,
    Removed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Everyone not removed diffuses.
    Diffusion,
    /// A particle moves only while infected.
    Delayed,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Diffusion => "diffusion",
            ModelKind::Delayed => "delayed",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Particle {
    pub id: u32,
    /// Position in the plane; one-dimensional runs keep coordinate 1 at 0.
    pub position: [f64; 2],
    pub compartment: Compartment,
    /// Standard exponential mark; removal happens after e_i / α infected time.
    pub exp_mark: f64,
    /// Time spent infected so far.
    pub infected_elapsed: f64,
    moves_made: u64,
}

impl Particle {
    pub fn new(id: u32, position: [f64; 2], compartment: Compartment, exp_mark: f64) -> Particle {
        Particle {
            id,
            position,
            compartment,
            exp_mark,
            infected_elapsed: 0.0,
            moves_made: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpidemicConfig {
    /// 1 or 2.
    pub dimension: u32,
    /// Removal rate; infected for e_i / alpha before removal.
    pub alpha: f64,
    pub model: ModelKind,
    /// Susceptibles fill [-R, R]^d.
    pub box_radius: f64,
    /// Euler time step.
    pub dt: f64,
    /// Survival proxy: total ever infected reaching this cap.
    pub max_infected: u64,
    /// Survival proxy: an infected particle within this distance of the
    /// box boundary (sup-norm).
    pub boundary_margin: f64,
    /// Variance of each coordinate increment per unit time.
    pub diffusion_coefficient: f64,
}

impl EpidemicConfig {
    pub fn new(dimension: u32, model: ModelKind, alpha: f64) -> EpidemicConfig {
        EpidemicConfig {
            dimension,
            alpha,
            model,
            box_radius: 10.0,
            dt: 0.01,
            max_infected: 500,
            boundary_margin: 1.0,
            diffusion_coefficient: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension != 1 && self.dimension != 2 {
            return Err(Error::invalid("dimension must be 1 or 2"));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::invalid("removal rate alpha must be finite and > 0"));
        }
        if !(self.box_radius > 2.0) || !self.box_radius.is_finite() {
            return Err(Error::invalid("box radius must exceed 2"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("time step must be positive"));
        }
        if self.max_infected == 0 {
            return Err(Error::invalid("infected cap must be at least 1"));
        }
        if !(self.boundary_margin >= 0.0) || self.boundary_margin >= self.box_radius {
            return Err(Error::invalid(
                "boundary margin must be in [0, box radius)",
            ));
        }
        if !(self.diffusion_coefficient > 0.0) || !self.diffusion_coefficient.is_finite() {
            return Err(Error::invalid("diffusion coefficient must be finite and > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Infection,
    Removal,
}

#[derive(Debug, Clone)]
pub struct EpidemicEvent {
    pub time: f64,
    pub kind: EventKind,
    pub particle: u32,
    pub position: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxyReason {
    /// Total ever infected reached the cap.
    InfectedCap,
    /// An infected particle came within the margin of the box boundary.
    BoundaryMargin,
}

impl fmt::Display for ProxyReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProxyReason::InfectedCap => "infected-cap",
            ProxyReason::BoundaryMargin => "boundary-margin",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunVerdict {
    Extinct { total_infected: u64 },
    SurvivalProxy { reason: ProxyReason },
}

impl RunVerdict {
    pub fn survived(&self) -> bool {
        matches!(self, RunVerdict::SurvivalProxy { .. })
    }
}

#[derive(Debug, Clone)]
pub struct EpidemicOutcome {
    pub verdict: RunVerdict,
    pub events: Vec<EpidemicEvent>,
    pub final_time: f64,
    pub steps: u64,
    pub ever_infected: u64,
    pub final_susceptible: u64,
    pub final_infected: u64,
    pub final_removed: u64,
}

#[derive(Debug, Clone)]
pub struct Population {
    pub particles: Vec<Particle>,
    pub time: f64,
    pub events: Vec<EpidemicEvent>,
    /// Indices (not ids) of currently infected particles.
    infected: Vec<usize>,
    ever_infected: u64,
}

impl Population {
    /// Wrap a hand-built particle list; initially infected particles get an
    /// infection event stamped at the current time (0).
    pub fn from_particles(particles: Vec<Particle>) -> Result<Population> {
        let mut seen = std::collections::HashSet::new();
        for p in &particles {
            if !seen.insert(p.id) {
                return Err(Error::invalid(format!("duplicate particle id {}", p.id)));
            }
        }
        let infected: Vec<usize> = particles
            .iter()
            .enumerate()
            .filter(|(_, p)| p.compartment == Compartment::Infected)
            .map(|(i, _)| i)
            .collect();
        let ever_infected = particles
            .iter()
            .filter(|p| p.compartment != Compartment::Susceptible)
            .count() as u64;
        let events = infected
            .iter()
            .map(|&i| EpidemicEvent {
                time: 0.0,
                kind: EventKind::Infection,
                particle: particles[i].id,
                position: particles[i].position,
            })
            .collect();
        Ok(Population {
            particles,
            time: 0.0,
            events,
            infected,
            ever_infected,
        })
    }

    pub fn infected_count(&self) -> u64 {
        self.infected.len() as u64
    }

    pub fn ever_infected(&self) -> u64 {
        self.ever_infected
    }

    pub fn count(&self, c: Compartment) -> u64 {
        self.particles.iter().filter(|p| p.compartment == c).count() as u64
    }
}

/// Poisson susceptible cloud in the box plus one infected particle (id 0) at
/// the origin.  Pure function of the stream.
pub fn init_population(config: &EpidemicConfig, stream: &RngStream) -> Result<Population> {
    config.validate()?;
    let r = config.box_radius;
    let volume = if config.dimension == 2 {
        (2.0 * r) * (2.0 * r)
    } else {
        2.0 * r
    };
    let count = stream.substream(&[TAG_POP_COUNT]).poisson(volume)?;
    let mut particles = Vec::with_capacity(count as usize + 1);
    let origin_mark = stream.substream(&[TAG_MARK, 0]).exponential(1.0)?;
    particles.push(Particle::new(0, [0.0, 0.0], Compartment::Infected, origin_mark));
    let mut pos_stream = stream.substream(&[TAG_POP_POS]);
    for k in 0..count {
        let id = (k + 1) as u32;
        let x = pos_stream.uniform(-r, r);
        let y = if config.dimension == 2 {
            pos_stream.uniform(-r, r)
        } else {
            0.0
        };
        let mark = stream.substream(&[TAG_MARK, id as u64]).exponential(1.0)?;
        particles.push(Particle::new(id, [x, y], Compartment::Susceptible, mark));
    }
    Population::from_particles(particles)
}

fn cell_of(pos: [f64; 2]) -> (i64, i64) {
    (pos[0].floor() as i64, pos[1].floor() as i64)
}

fn dist_sq(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Susceptible particles bucketed by unit cell; with radius-1 infection the
/// 3x3 block around a cell is exactly the candidate set.
struct CellIndex {
    map: HashMap<(i64, i64), Vec<usize>>,
}

impl CellIndex {
    fn build(pop: &Population) -> CellIndex {
        let mut map: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in pop.particles.iter().enumerate() {
            if p.compartment == Compartment::Susceptible {
                map.entry(cell_of(p.position)).or_default().push(i);
            }
        }
        CellIndex { map }
    }
}

/// Close the infection relation at the current instant: any susceptible
/// within distance 1 of an infected becomes infected, repeatedly, so chains
/// of contacts resolve within the same instant.
fn cascade(pop: &mut Population, index: &mut CellIndex) {
    let mut queue: Vec<usize> = pop.infected.clone();
    let mut head = 0;
    while head < queue.len() {
        let source = queue[head];
        head += 1;
        let pos = pop.particles[source].position;
        let (cx, cy) = cell_of(pos);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(bucket) = index.map.get_mut(&(cx + dx, cy + dy)) else {
                    continue;
                };
                let mut j = 0;
                while j < bucket.len() {
                    let cand = bucket[j];
                    if dist_sq(pop.particles[cand].position, pos) <= 1.0 {
                        bucket.swap_remove(j);
                        let p = &mut pop.particles[cand];
                        p.compartment = Compartment::Infected;
                        p.infected_elapsed = 0.0;
                        pop.events.push(EpidemicEvent {
                            time: pop.time,
                            kind: EventKind::Infection,
                            particle: p.id,
                            position: p.position,
                        });
                        pop.infected.push(cand);
                        pop.ever_infected += 1;
                        queue.push(cand);
                    } else {
                        j += 1;
                    }
                }
            }
        }
    }
}

fn step_inner(
    pop: &mut Population,
    config: &EpidemicConfig,
    dt: f64,
    stream: &RngStream,
    index: &mut CellIndex,
) -> Result<()> {
    let var = config.diffusion_coefficient * dt;
    // 1. movement
    for p in pop.particles.iter_mut() {
        let moves = match (config.model, p.compartment) {
            (_, Compartment::Removed) => false,
            (ModelKind::Diffusion, _) => true,
            (ModelKind::Delayed, c) => c == Compartment::Infected,
        };
        if !moves {
            continue;
        }
        let mut sub = stream.substream(&[TAG_MOVE, p.id as u64, p.moves_made]);
        p.moves_made += 1;
        p.position[0] += sub.gaussian(0.0, var)?;
        if config.dimension == 2 {
            p.position[1] += sub.gaussian(0.0, var)?;
        }
    }
    pop.time += dt;
    // 2. removal: an infected particle outlives its scaled mark, it is gone
    //    before this step's contacts are evaluated
    let mut still = Vec::with_capacity(pop.infected.len());
    for &i in &pop.infected {
        let p = &mut pop.particles[i];
        p.infected_elapsed += dt;
        if p.infected_elapsed > p.exp_mark / config.alpha {
            p.compartment = Compartment::Removed;
            pop.events.push(EpidemicEvent {
                time: pop.time,
                kind: EventKind::Removal,
                particle: p.id,
                position: p.position,
            });
        } else {
            still.push(i);
        }
    }
    pop.infected = still;
    // 3. infection; under diffusion the susceptibles moved, so re-bucket them
    if config.model == ModelKind::Diffusion {
        *index = CellIndex::build(pop);
    }
    cascade(pop, index);
    Ok(())
}

/// Advance one time step: movement, then removal, then contact infection.
pub fn step(
    pop: &mut Population,
    config: &EpidemicConfig,
    dt: f64,
    stream: &RngStream,
) -> Result<()> {
    config.validate()?;
    if !(dt > 0.0) || dt > config.dt {
        return Err(Error::invalid(format!(
            "step size {dt} must be positive and at most the configured {}",
            config.dt
        )));
    }
    let mut index = CellIndex::build(pop);
    step_inner(pop, config, dt, stream, &mut index)
}

fn proxy_reason(pop: &Population, config: &EpidemicConfig) -> Option<ProxyReason> {
    if pop.ever_infected >= config.max_infected {
        return Some(ProxyReason::InfectedCap);
    }
    let threshold = config.box_radius - config.boundary_margin;
    for &i in &pop.infected {
        let p = &pop.particles[i].position;
        if p[0].abs().max(p[1].abs()) >= threshold {
            return Some(ProxyReason::BoundaryMargin);
        }
    }
    None
}

fn outcome_from(pop: Population, verdict: RunVerdict, steps: u64) -> EpidemicOutcome {
    EpidemicOutcome {
        verdict,
        final_time: pop.time,
        steps,
        ever_infected: pop.ever_infected,
        final_susceptible: pop.count(Compartment::Susceptible),
        final_infected: pop.count(Compartment::Infected),
        final_removed: pop.count(Compartment::Removed),
        events: pop.events,
    }
}

/// Evolve a prepared population to extinction or a survival proxy.  The
/// instant-0 contact closure runs first, so susceptibles that start within
/// distance 1 of an infected (or chains of them) count immediately.
pub fn run_population(
    mut pop: Population,
    config: &EpidemicConfig,
    stream: &RngStream,
) -> Result<EpidemicOutcome> {
    config.validate()?;
    let mut index = CellIndex::build(&pop);
    cascade(&mut pop, &mut index);
    let mut steps = 0u64;
    loop {
        if let Some(reason) = proxy_reason(&pop, config) {
            return Ok(outcome_from(pop, RunVerdict::SurvivalProxy { reason }, steps));
        }
        if pop.infected.is_empty() {
            let total = pop.ever_infected;
            return Ok(outcome_from(
                pop,
                RunVerdict::Extinct { total_infected: total },
                steps,
            ));
        }
        step_inner(&mut pop, config, config.dt, stream, &mut index)?;
        steps += 1;
    }
}

/// Fresh population, full run.
pub fn run(config: &EpidemicConfig, stream: &RngStream) -> Result<EpidemicOutcome> {
    let pop = init_population(config, stream)?;
    run_population(pop, config, stream)
}

/// Proportion of independent runs that end in a survival proxy.
pub fn estimate_survival(
    config: &EpidemicConfig,
    trials: u64,
    stream: &RngStream,
) -> Result<EstimateCI> {
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    config.validate()?;
    let hits: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let sub = stream.substream(&[TAG_RUN_TRIAL, t]);
            let outcome = run(config, &sub).expect("config validated above");
            u64::from(outcome.verdict.survived())
        })
        .sum();
    estimate_proportion(hits, trials, 0.95)
}

#[derive(Debug, Clone)]
pub struct AlphaRow {
    pub alpha: f64,
    pub estimate: EstimateCI,
}

#[derive(Debug, Clone)]
pub struct AlphaScan {
    pub rows: Vec<AlphaRow>,
    /// Midpoint of the grid pair bracketing 50% proxy-survival, if any.
    pub crossover: Option<f64>,
}

fn check_alpha_grid(alpha_grid: &[f64], strict: bool) -> Result<()> {
    if alpha_grid.is_empty() {
        return Err(Error::invalid("alpha grid must be non-empty"));
    }
    for pair in alpha_grid.windows(2) {
        let ok = if strict {
            pair[0] < pair[1]
        } else {
            pair[0] <= pair[1]
        };
        if !ok {
            return Err(Error::invalid("alpha grid must be increasing"));
        }
    }
    if alpha_grid.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
        return Err(Error::invalid("alpha values must be finite and > 0"));
    }
    Ok(())
}

fn crossover_of(rows: &[AlphaRow]) -> Option<f64> {
    rows.windows(2).find_map(|w| {
        if w[0].estimate.point >= 0.5 && w[1].estimate.point < 0.5 {
            Some(0.5 * (w[0].alpha + w[1].alpha))
        } else {
            None
        }
    })
}

/// Survival curve over a grid of removal rates, independent runs per alpha.
pub fn scan_alpha(
    config: &EpidemicConfig,
    alpha_grid: &[f64],
    trials: u64,
    stream: &RngStream,
) -> Result<AlphaScan> {
    check_alpha_grid(alpha_grid, true)?;
    let mut rows = Vec::with_capacity(alpha_grid.len());
    for (i, &alpha) in alpha_grid.iter().enumerate() {
        let mut cfg = config.clone();
        cfg.alpha = alpha;
        let estimate = estimate_survival(&cfg, trials, &stream.substream(&[TAG_SCAN, i as u64]))?;
        rows.push(AlphaRow { alpha, estimate });
    }
    Ok(AlphaScan {
        crossover: crossover_of(&rows),
        rows,
    })
}

#[derive(Debug, Clone)]
pub struct CoupledReport {
    pub alphas: Vec<f64>,
    pub outcomes: Vec<EpidemicOutcome>,
}

fn infection_times(outcome: &EpidemicOutcome) -> HashMap<u32, f64> {
    outcome
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Infection)
        .map(|e| (e.particle, e.time))
        .collect()
}

/// Run the delayed model at several removal rates on shared randomness and
/// assert the exact monotonicity this coupling guarantees: a run with faster
/// removal infects a subset of the particles, each no earlier.  Runs cut
/// short by a survival proxy are compared only up to their stopping time.
pub fn coupled_delayed_run(
    config: &EpidemicConfig,
    alpha_list: &[f64],
    stream: &RngStream,
) -> Result<CoupledReport> {
    if config.model != ModelKind::Delayed {
        return Err(Error::invalid(
            "coupled runs are only meaningful for the delayed model: its susceptibles \
             stand still, so trajectories shared across removal rates make the \
             ever-infected set monotone; under diffusion everyone moves and no such \
             pathwise comparison holds",
        ));
    }
    check_alpha_grid(alpha_list, false)?;
    config.validate()?;
    let mut outcomes = Vec::with_capacity(alpha_list.len());
    for &alpha in alpha_list {
        let mut cfg = config.clone();
        cfg.alpha = alpha;
        // same stream for every alpha: shared positions, marks, increments
        outcomes.push(run(&cfg, stream)?);
    }
    let eps = 1e-9;
    for w in outcomes.windows(2) {
        let (slow, fast) = (&w[0], &w[1]); // slower removal first (smaller alpha)
        let slow_times = infection_times(slow);
        let slow_horizon = match slow.verdict {
            RunVerdict::Extinct { .. } => f64::INFINITY,
            RunVerdict::SurvivalProxy { .. } => slow.final_time,
        };
        if fast.verdict.survived() && !slow.verdict.survived() {
            return Err(Error::invalid(format!(
                "coupling violated: survival proxy fired at alpha with faster removal \
                 but not slower (outcomes {:?} vs {:?})",
                fast.verdict, slow.verdict
            )));
        }
        for e in fast.events.iter().filter(|e| e.kind == EventKind::Infection) {
            if e.time > slow_horizon + eps {
                continue; // the slower run stopped before this instant
            }
            match slow_times.get(&e.particle) {
                Some(&t) if t <= e.time + eps => {}
                Some(&t) => {
                    return Err(Error::invalid(format!(
                        "coupling violated: particle {} infected at t={} under faster \
                         removal but only at t={t} under slower",
                        e.particle, e.time
                    )));
                }
                None => {
                    return Err(Error::invalid(format!(
                        "coupling violated: particle {} infected at t={} under faster \
                         removal, never under slower",
                        e.particle, e.time
                    )));
                }
            }
        }
    }
    Ok(CoupledReport {
        alphas: alpha_list.to_vec(),
        outcomes,
    })
}

/// Survival curve from coupled runs: within each trial the per-alpha
/// indicators are monotone by construction, so the resulting curve is
/// exactly nonincreasing, not just statistically.
pub fn scan_alpha_coupled(
    config: &EpidemicConfig,
    alpha_grid: &[f64],
    trials: u64,
    stream: &RngStream,
) -> Result<AlphaScan> {
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    check_alpha_grid(alpha_grid, true)?;
    let hits = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<u64>> {
            let sub = stream.substream(&[TAG_SCAN, t]);
            let report = coupled_delayed_run(config, alpha_grid, &sub)?;
            Ok(report
                .outcomes
                .iter()
                .map(|o| u64::from(o.verdict.survived()))
                .collect())
        })
        .try_reduce(
            || vec![0u64; alpha_grid.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                Ok(a)
            },
        )?;
    debug_assert!(hits.windows(2).all(|w| w[0] >= w[1]));
    let mut rows = Vec::with_capacity(alpha_grid.len());
    for (i, &alpha) in alpha_grid.iter().enumerate() {
        rows.push(AlphaRow {
            alpha,
            estimate: estimate_proportion(hits[i], trials, 0.95)?,
        });
    }
    Ok(AlphaScan {
        crossover: crossover_of(&rows),
        rows,
    })
}
