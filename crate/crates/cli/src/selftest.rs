//! `problab selftest`: one fast end-to-end check per module, each asserting
//! a value that is known exactly or an invariant that must hold pathwise.
//! Prints one line per check; any failure aborts with a named error.

use num_bigint::BigInt;
use num_rational::BigRational;
use problab_core::bunkbed::bunkbed_check;
use problab_core::epidemic::{
    run_population, Compartment, EpidemicConfig, ModelKind, Particle, Population, RunVerdict,
};
use problab_core::forests::{usf_check, ust_check};
use problab_core::graphs::SimpleGraph;
use problab_core::lattice::{Heading, LatticeKind, ORIGIN};
use problab_core::mirrors::{
    blocked_by_circuit, full_state_budget, trace_ray, MirrorField, RayState, TraceOutcome,
};
use problab_core::needles::{generate_field, trace_continuum, vacant_crossing_probability, AngleLaw};
use problab_core::oriented::estimate_theta_with;
use problab_core::saw::count_saws_upto;
use problab_core::{Error, Result, RngStream};

pub fn selftest() -> Result<()> {
    check("rng-streams", rng_streams)?;
    check("saw-exact-counts", saw_exact_counts)?;
    check("saw-submultiplicative", saw_submultiplicative)?;
    check("mirror-circuits", mirror_circuits)?;
    check("needle-tracing", needle_tracing)?;
    check("bunkbed-exact", bunkbed_exact)?;
    check("forest-counts", forest_counts)?;
    check("oriented-certain-escape", oriented_certain_escape)?;
    check("epidemic-contact-radius", epidemic_contact_radius)?;
    println!("selftest: all checks passed");
    Ok(())
}

fn check(name: &str, body: fn() -> Result<()>) -> Result<()> {
    body().map_err(|e| Error::invalid(format!("selftest {name}: {e}")))?;
    println!("selftest {name}: ok");
    Ok(())
}

fn fail(msg: impl Into<String>) -> Error {
    Error::invalid(msg.into())
}

fn rng_streams() -> Result<()> {
    let mut a = RngStream::derive(1, 2);
    let mut b = RngStream::derive(1, 2);
    for _ in 0..16 {
        if a.next_u64() != b.next_u64() {
            return Err(fail("identical streams diverged"));
        }
    }
    let mut c = RngStream::derive(1, 2).substream(&[9]);
    if c.next_u64() == RngStream::derive(1, 2).next_u64() {
        return Err(fail("substream repeats its parent"));
    }
    for _ in 0..64 {
        let u = a.uniform01();
        if !(0.0..1.0).contains(&u) {
            return Err(fail(format!("uniform01 produced {u}")));
        }
    }
    Ok(())
}

fn saw_exact_counts() -> Result<()> {
    let square: Vec<u64> = count_saws_upto(LatticeKind::Square, 4)?
        .iter()
        .map(|c| u64::try_from(&c.sigma).expect("small count"))
        .collect();
    if square != [4, 12, 36, 100] {
        return Err(fail(format!("square counts {square:?}")));
    }
    let hex: Vec<u64> = count_saws_upto(LatticeKind::Hex, 4)?
        .iter()
        .map(|c| u64::try_from(&c.sigma).expect("small count"))
        .collect();
    if hex != [3, 6, 12, 24] {
        return Err(fail(format!("hex counts {hex:?}")));
    }
    Ok(())
}

fn saw_submultiplicative() -> Result<()> {
    let counts = count_saws_upto(LatticeKind::Square, 8)?;
    for m in 1..=4usize {
        for n in 1..=4usize {
            let lhs = &counts[m + n - 1].sigma;
            let rhs = &counts[m - 1].sigma * &counts[n - 1].sigma;
            if *lhs > rhs {
                return Err(fail(format!("sigma_{} > sigma_{m} * sigma_{n}", m + n)));
            }
        }
    }
    Ok(())
}

fn mirror_circuits() -> Result<()> {
    let l = 8;
    let budget = full_state_budget(l);
    let mut loops = 0u32;
    for seed in 0..40 {
        let field = MirrorField::from_stream(1.0, l, &RngStream::derive(seed, 7))?;
        let start = RayState { pos: ORIGIN, heading: Heading::N };
        let outcome = trace_ray(&field, start, budget)?;
        if matches!(outcome, TraceOutcome::Exhausted { .. }) {
            return Err(fail("full budget must settle every trace"));
        }
        if matches!(outcome, TraceOutcome::Looped { .. }) {
            loops += 1;
        }
        if blocked_by_circuit(&field, l) && !matches!(outcome, TraceOutcome::Looped { .. }) {
            return Err(fail(format!("seed {seed}: blocking circuit but the ray escaped")));
        }
    }
    if loops == 0 {
        return Err(fail("no looping ray in 40 full-density fields"));
    }
    Ok(())
}

fn needle_tracing() -> Result<()> {
    let field = generate_field(3, 8.0, 0.5, AngleLaw::Uniform)?;
    let trace = trace_continuum(&field, 0.3, 6.0, 100_000)?;
    if !(trace.total_length > 0.0) {
        return Err(fail("trace has no length"));
    }
    if trace.escaped() {
        let end = trace.points.last().expect("trace has points");
        if end.norm() < 6.0 - 1e-9 {
            return Err(fail("escaped trace ends inside the escape radius"));
        }
    }
    let ci = vacant_crossing_probability(
        0.5,
        &AngleLaw::Uniform,
        4.0,
        100,
        &RngStream::derive(11, 3),
    )?;
    if !(0.0 <= ci.lo && ci.lo <= ci.point && ci.point <= ci.hi && ci.hi <= 1.0) {
        return Err(fail(format!("malformed interval [{}, {}] around {}", ci.lo, ci.hi, ci.point)));
    }
    Ok(())
}

fn bunkbed_exact() -> Result<()> {
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let report = bunkbed_check(&SimpleGraph::complete(2), &[half])?;
    let gap = BigRational::new(BigInt::from(1), BigInt::from(8));
    if report.min_gap != gap || report.violation {
        return Err(fail(format!("single-edge gap came out {}", report.min_gap)));
    }
    let same = BigRational::new(BigInt::from(9), BigInt::from(16));
    let cross = BigRational::new(BigInt::from(7), BigInt::from(16));
    if *report.witness.p11.value() != same || *report.witness.p12.value() != cross {
        return Err(fail("single-edge sheet probabilities are off"));
    }
    Ok(())
}

fn forest_counts() -> Result<()> {
    let triangle = SimpleGraph::cycle(3)?;
    let forests = usf_check(&triangle)?;
    if forests.total != 7 {
        return Err(fail(format!("triangle has {} forests, expected 7", forests.total)));
    }
    if forests.violation {
        return Err(fail("negative association failed on the triangle"));
    }
    let trees = ust_check(&triangle)?;
    if trees.total != 3 || trees.violation {
        return Err(fail(format!("triangle has {} spanning trees, expected 3", trees.total)));
    }
    Ok(())
}

fn oriented_certain_escape() -> Result<()> {
    let ci = estimate_theta_with(1.0, 6, 0.0, 20, &RngStream::derive(5, 1))?;
    if ci.point != 1.0 {
        return Err(fail(format!("all edges point outward yet escape rate is {}", ci.point)));
    }
    Ok(())
}

fn epidemic_contact_radius() -> Result<()> {
    let mut config = EpidemicConfig::new(2, ModelKind::Diffusion, 1e12);
    config.box_radius = 6.0;
    config.boundary_margin = 0.0;
    config.max_infected = u64::MAX;
    config.dt = 0.05;
    let pair = |x: f64| -> Result<Population> {
        Population::from_particles(vec![
            Particle::new(0, [0.0, 0.0], Compartment::Infected, 1.0),
            Particle::new(1, [x, 0.0], Compartment::Susceptible, 1.0),
        ])
    };
    let stream = RngStream::derive(99, 1);
    match run_population(pair(0.5)?, &config, &stream)?.verdict {
        RunVerdict::Extinct { total_infected: 2 } => {}
        other => return Err(fail(format!("contact at distance 0.5 gave {other:?}"))),
    }
    match run_population(pair(1.5)?, &config, &stream)?.verdict {
        RunVerdict::Extinct { total_infected: 1 } => {}
        other => return Err(fail(format!("no contact at distance 1.5 gave {other:?}"))),
    }
    Ok(())
}
