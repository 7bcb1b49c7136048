//! Mirror billiards on ℤ²: random two-sided mirrors at vertices (the wind/tree
//! mirror model), finite-box escape estimates, a rigorous circuit-blocking
//! certificate via the diagonal-lattice coupling, and Manhattan pinball on the
//! oriented street grid.
//!
//! Geometry conventions (also documented on `reflect`): a NE mirror lies along
//! the NE–SW diagonal of its vertex, a NW mirror along the NW–SE diagonal. A
//! ray occupies a vertex and a heading; the mirror at a vertex acts when the
//! ray *enters* that vertex, so a ray starting on a mirror is deflected only
//! if it comes back.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::lattice::{DiagonalClass, Heading, MirrorKind, Site, ORIGIN};
use crate::randstat::{estimate_proportion, fold, unit_f64, EstimateCI, RngStream};
use crate::{Error, Result};

/// A ray: current vertex plus the heading it will move along next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RayState {
    pub pos: Site,
    pub heading: Heading,
}

/// Result of tracing a deterministic ray on a finite box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceOutcome {
    /// Left the box; `steps` counts the moves that landed inside before the
    /// exiting move.
    Escaped { steps: u64 },
    /// First repeated (vertex, heading) pair; the trajectory is exactly
    /// periodic from `loop_start` with the given period.
    Looped { period: u64, loop_start: u64 },
    /// Step limit hit first (cannot happen once the limit reaches the state
    /// count, see [`full_state_budget`]).
    Exhausted { limit: u64 },
}

impl TraceOutcome {
    pub fn escaped(&self) -> bool {
        matches!(self, TraceOutcome::Escaped { .. })
    }
}

/// Number of distinct ray states on the radius-L box: 4 headings per vertex.
/// Any deterministic trace must escape or loop within this many steps.
pub fn full_state_budget(l: i32) -> u64 {
    let w = (2 * l + 1) as u64;
    4 * w * w
}

/// Read access to a mirror configuration on a sup-norm box.
pub trait Mirrors {
    fn box_radius(&self) -> i32;
    /// Mirror at `v`, or None when the site is empty or outside the box.
    fn mirror_at(&self, v: Site) -> Option<MirrorKind>;
}

/// Random mirror field: each vertex independently holds a mirror with
/// probability p, NE or NW with equal odds, as a pure function of
/// (seed, stream_id, site) — nothing is stored, so a field is cheap to share
/// and identical however it is scanned.
#[derive(Debug, Clone)]
pub struct MirrorField {
    pub p: f64,
    pub box_radius: i32,
    key: u64,
    swapped: bool,
}

const TAG_MIRROR: u64 = 0x4d49_5252; // "MIRR"

pub fn sample_mirror_field(
    p: f64,
    box_radius: i32,
    master_seed: u64,
    stream_id: u64,
) -> Result<MirrorField> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("mirror density p={p} outside [0,1]")));
    }
    if box_radius < 1 {
        return Err(Error::invalid(format!("box radius {box_radius} must be >= 1")));
    }
    Ok(MirrorField {
        p,
        box_radius,
        key: fold(&[master_seed, stream_id, TAG_MIRROR]),
        swapped: false,
    })
}

impl MirrorField {
    pub fn from_stream(p: f64, box_radius: i32, stream: &RngStream) -> Result<MirrorField> {
        sample_mirror_field(p, box_radius, stream.master_seed(), stream.stream_id())
    }

    /// Same randomness with every NE mirror read as NW and vice versa; the
    /// mirror law is symmetric under this swap, which is checked statistically
    /// in tests.
    pub fn with_swapped_orientations(mut self) -> MirrorField {
        self.swapped = !self.swapped;
        self
    }

    /// Pin every site state eagerly (for oracle comparisons).
    pub fn materialize(&self) -> ExplicitMirrors {
        let mut mirrors = HashMap::new();
        let l = self.box_radius;
        for x in -l..=l {
            for y in -l..=l {
                let v = Site::new(x, y);
                if let Some(m) = self.mirror_at(v) {
                    mirrors.insert(v, m);
                }
            }
        }
        ExplicitMirrors { box_radius: l, mirrors }
    }
}

impl Mirrors for MirrorField {
    fn box_radius(&self) -> i32 {
        self.box_radius
    }

    fn mirror_at(&self, v: Site) -> Option<MirrorKind> {
        if !v.in_box(self.box_radius) {
            return None;
        }
        // One hashed word per site: the high bits decide presence, bit 0 the
        // orientation.
        let bits = fold(&[self.key, v.x as i64 as u64, v.y as i64 as u64]);
        if unit_f64(bits) >= self.p {
            return None;
        }
        let ne = (bits & 1) == 0;
        Some(match (ne, self.swapped) {
            (true, false) | (false, true) => MirrorKind::Ne,
            (false, false) | (true, true) => MirrorKind::Nw,
        })
    }
}

/// Hand-built mirror configuration (tests, small examples).
#[derive(Debug, Clone, Default)]
pub struct ExplicitMirrors {
    pub box_radius: i32,
    pub mirrors: HashMap<Site, MirrorKind>,
}

impl ExplicitMirrors {
    pub fn new(box_radius: i32) -> ExplicitMirrors {
        ExplicitMirrors { box_radius, mirrors: HashMap::new() }
    }

    pub fn place(&mut self, v: Site, m: MirrorKind) {
        self.mirrors.insert(v, m);
    }
}

impl Mirrors for ExplicitMirrors {
    fn box_radius(&self) -> i32 {
        self.box_radius
    }

    fn mirror_at(&self, v: Site) -> Option<MirrorKind> {
        if !v.in_box(self.box_radius) {
            return None;
        }
        self.mirrors.get(&v).copied()
    }
}

/// Specular reflection. Convention: the NE mirror (lying along the NE–SW
/// diagonal) maps N↔E and S↔W; the NW mirror (NW–SE diagonal) maps N↔W and
/// S↔E. Both are involutions.
pub fn reflect(mirror: MirrorKind, heading: Heading) -> Heading {
    match (mirror, heading) {
        (MirrorKind::Ne, Heading::N) => Heading::E,
        (MirrorKind::Ne, Heading::E) => Heading::N,
        (MirrorKind::Ne, Heading::S) => Heading::W,
        (MirrorKind::Ne, Heading::W) => Heading::S,
        (MirrorKind::Nw, Heading::N) => Heading::W,
        (MirrorKind::Nw, Heading::W) => Heading::N,
        (MirrorKind::Nw, Heading::S) => Heading::E,
        (MirrorKind::Nw, Heading::E) => Heading::S,
    }
}

fn state_index(l: i32, s: RayState) -> usize {
    let w = (2 * l + 1) as usize;
    let x = (s.pos.x + l) as usize;
    let y = (s.pos.y + l) as usize;
    (x * w + y) * 4 + s.heading.index()
}

fn trace_impl<M: Mirrors>(
    field: &M,
    start: RayState,
    max_steps: u64,
    mut path: Option<&mut Vec<RayState>>,
) -> Result<TraceOutcome> {
    let l = field.box_radius();
    if !start.pos.in_box(l) {
        return Err(Error::invalid(format!(
            "ray start ({}, {}) outside the radius-{l} box",
            start.pos.x, start.pos.y
        )));
    }
    // first-visit times, offset by one so 0 means unseen
    let mut seen = vec![0u32; full_state_budget(l) as usize];
    let mut s = start;
    seen[state_index(l, s)] = 1;
    if let Some(p) = path.as_deref_mut() {
        p.push(s);
    }
    let mut t: u64 = 0;
    while t < max_steps {
        let nxt = s.heading.apply(s.pos);
        if !nxt.in_box(l) {
            return Ok(TraceOutcome::Escaped { steps: t });
        }
        let heading = match field.mirror_at(nxt) {
            Some(m) => reflect(m, s.heading),
            None => s.heading,
        };
        s = RayState { pos: nxt, heading };
        t += 1;
        if let Some(p) = path.as_deref_mut() {
            p.push(s);
        }
        let idx = state_index(l, s);
        if seen[idx] != 0 {
            let loop_start = (seen[idx] - 1) as u64;
            return Ok(TraceOutcome::Looped { period: t - loop_start, loop_start });
        }
        seen[idx] = (t + 1) as u32;
    }
    Ok(TraceOutcome::Exhausted { limit: max_steps })
}

/// Trace a ray until it escapes the box, repeats a state, or exhausts
/// `max_steps`. Deterministic; a budget of [`full_state_budget`] rules out
/// Exhausted.
pub fn trace_ray<M: Mirrors>(field: &M, start: RayState, max_steps: u64) -> Result<TraceOutcome> {
    trace_impl(field, start, max_steps, None)
}

/// As [`trace_ray`], also returning every visited state (post-reflection
/// headings), starting with `start`.
pub fn trace_ray_with_path<M: Mirrors>(
    field: &M,
    start: RayState,
    max_steps: u64,
) -> Result<(TraceOutcome, Vec<RayState>)> {
    let mut path = Vec::new();
    let outcome = trace_impl(field, start, max_steps, Some(&mut path))?;
    Ok((outcome, path))
}

const TAG_TRIAL: u64 = 0x5452_4941; // "TRIA"

/// Escape proportion of the northward ray from the origin over independent
/// mirror fields: a finite-volume upper proxy for the unbounded-ray
/// probability. Trials run in parallel; each derives its own field from the
/// stream, so the result does not depend on scheduling.
pub fn estimate_theta_ehrenfest(
    p: f64,
    l: i32,
    trials: u64,
    stream: &RngStream,
) -> Result<EstimateCI> {
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    sample_mirror_field(p, l, 0, 0)?; // validate parameters once
    let budget = full_state_budget(l);
    let escapes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let sub = stream.substream(&[TAG_TRIAL, t]);
            let field = MirrorField::from_stream(p, l, &sub).expect("validated");
            let start = RayState { pos: ORIGIN, heading: Heading::N };
            let outcome = trace_ray(&field, start, budget).expect("origin is inside the box");
            debug_assert!(!matches!(outcome, TraceOutcome::Exhausted { .. }));
            outcome.escaped() as u64
        })
        .sum();
    estimate_proportion(escapes, trials, 0.95)
}

/// Orientation a mirror must have at `v` to lie on the given diagonal class:
/// class A consists of NE mirrors at even sites and NW mirrors at odd sites,
/// class B the complement.
pub fn class_orientation(class: DiagonalClass, v: Site) -> MirrorKind {
    match (class, v.parity()) {
        (DiagonalClass::A, 0) | (DiagonalClass::B, 1) => MirrorKind::Ne,
        _ => MirrorKind::Nw,
    }
}

/// True iff the mirrors of one diagonal class form a closed circuit around
/// the origin inside the radius-`l` box.
///
/// Each class of mirror segments tiles the plane into unit diamonds (centered
/// on the faces of the opposite parity); a ray edge never leaves its diamond
/// except through the midpoint of a side, which is exactly a potential mirror
/// segment of the class. Reflection at a present segment keeps the ray in its
/// diamond, so if the diamond containing the ray's first edge cannot reach
/// the outside of the box through absent segments, the ray is confined. The
/// check runs a flood fill over diamonds (indexed by faces of one parity)
/// with moves across shared corners of ℤ² faces; a move is blocked when the
/// crossed vertex carries the class's mirror.
pub fn blocked_by_circuit<M: Mirrors>(field: &M, l: i32) -> bool {
    let l = l.min(field.box_radius());
    // Northward first edge from the origin: class-A diamond of face (-1, 0),
    // class-B diamond of face (0, 0).
    class_flood_confined(field, l, DiagonalClass::A, Site::new(-1, 0))
        || class_flood_confined(field, l, DiagonalClass::B, ORIGIN)
}

fn class_flood_confined<M: Mirrors>(field: &M, l: i32, class: DiagonalClass, start: Site) -> bool {
    // Faces (i, j) of the flood have parity opposite to the class's lattice;
    // start is such a face by construction.
    let lo = -l - 1;
    let hi = l;
    let w = (hi - lo + 1) as usize;
    let idx = |f: Site| ((f.x - lo) as usize) * w + ((f.y - lo) as usize);
    let mut seen = vec![false; w * w];
    let mut queue = std::collections::VecDeque::new();
    seen[idx(start)] = true;
    queue.push_back(start);
    while let Some(f) = queue.pop_front() {
        // center coordinate beyond the box ⇒ the diamond pokes outside any
        // circuit of in-box mirrors
        if f.x >= hi || f.x <= lo || f.y >= hi || f.y <= lo {
            return false;
        }
        for (dx, dy) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
            let g = f.offset(dx, dy);
            if seen[idx(g)] {
                continue;
            }
            // crossing the corner vertex shared by faces f and g
            let v = Site::new(f.x + (dx > 0) as i32, f.y + (dy > 0) as i32);
            let blocked =
                v.in_box(l) && field.mirror_at(v) == Some(class_orientation(class, v));
            if !blocked {
                seen[idx(g)] = true;
                queue.push_back(g);
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Manhattan pinball

/// Read access to a Manhattan mirror configuration: mirrors sit on one
/// diagonal class only, so the orientation at an occupied vertex is forced by
/// the vertex parity and every reflection is consistent with the streets.
pub trait ManhattanMirrors {
    fn box_radius(&self) -> i32;
    fn class(&self) -> DiagonalClass;
    /// Whether the class's diagonal segment through `v` is open (a mirror).
    fn open_at(&self, v: Site) -> bool;

    fn mirror_at(&self, v: Site) -> Option<MirrorKind> {
        if v.in_box(self.box_radius()) && self.open_at(v) {
            Some(class_orientation(self.class(), v))
        } else {
            None
        }
    }

    /// Street pattern consistent with the mirror class: rows alternate
    /// east/west with eastbound even rows; columns alternate north/south,
    /// northbound on even columns for class A and on odd columns for class B.
    fn eastbound(&self, y: i32) -> bool {
        y.rem_euclid(2) == 0
    }

    fn northbound(&self, x: i32) -> bool {
        match self.class() {
            DiagonalClass::A => x.rem_euclid(2) == 0,
            DiagonalClass::B => x.rem_euclid(2) == 1,
        }
    }

    /// A heading is admissible at `v` when it agrees with the one-way street
    /// it moves along.
    fn admissible(&self, s: RayState) -> bool {
        match s.heading {
            Heading::E => self.eastbound(s.pos.y),
            Heading::W => !self.eastbound(s.pos.y),
            Heading::N => self.northbound(s.pos.x),
            Heading::S => !self.northbound(s.pos.x),
        }
    }
}

/// Random Manhattan field: the chosen diagonal class's segment through each
/// vertex is open with probability q, independently (bond percolation with
/// density q on that diagonal lattice).
#[derive(Debug, Clone)]
pub struct ManhattanField {
    pub q: f64,
    pub box_radius: i32,
    pub class: DiagonalClass,
    key: u64,
}

const TAG_MANHATTAN: u64 = 0x4d41_4e48; // "MANH"

pub fn sample_manhattan_field(
    q: f64,
    box_radius: i32,
    class: DiagonalClass,
    master_seed: u64,
    stream_id: u64,
) -> Result<ManhattanField> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(format!("diagonal density q={q} outside [0,1]")));
    }
    if box_radius < 1 {
        return Err(Error::invalid(format!("box radius {box_radius} must be >= 1")));
    }
    Ok(ManhattanField {
        q,
        box_radius,
        class,
        key: fold(&[master_seed, stream_id, TAG_MANHATTAN]),
    })
}

impl ManhattanField {
    pub fn from_stream(
        q: f64,
        box_radius: i32,
        class: DiagonalClass,
        stream: &RngStream,
    ) -> Result<ManhattanField> {
        sample_manhattan_field(q, box_radius, class, stream.master_seed(), stream.stream_id())
    }
}

impl ManhattanMirrors for ManhattanField {
    fn box_radius(&self) -> i32 {
        self.box_radius
    }

    fn class(&self) -> DiagonalClass {
        self.class
    }

    fn open_at(&self, v: Site) -> bool {
        unit_f64(fold(&[self.key, v.x as i64 as u64, v.y as i64 as u64])) < self.q
    }
}

/// Hand-built Manhattan configuration.
#[derive(Debug, Clone)]
pub struct ExplicitManhattan {
    pub box_radius: i32,
    pub class: DiagonalClass,
    pub open: std::collections::HashSet<Site>,
}

impl ExplicitManhattan {
    pub fn new(box_radius: i32, class: DiagonalClass) -> ExplicitManhattan {
        ExplicitManhattan { box_radius, class, open: Default::default() }
    }
}

impl ManhattanMirrors for ExplicitManhattan {
    fn box_radius(&self) -> i32 {
        self.box_radius
    }

    fn class(&self) -> DiagonalClass {
        self.class
    }

    fn open_at(&self, v: Site) -> bool {
        self.open.contains(&v)
    }
}

fn trace_manhattan_impl<M: ManhattanMirrors>(
    field: &M,
    start: RayState,
    max_steps: u64,
    mut path: Option<&mut Vec<RayState>>,
) -> Result<TraceOutcome> {
    let l = field.box_radius();
    if !start.pos.in_box(l) {
        return Err(Error::invalid(format!(
            "ray start ({}, {}) outside the radius-{l} box",
            start.pos.x, start.pos.y
        )));
    }
    if !field.admissible(start) {
        return Err(Error::invalid(format!(
            "heading {:?} at ({}, {}) runs against the one-way street",
            start.heading, start.pos.x, start.pos.y
        )));
    }
    let mut seen = vec![0u32; full_state_budget(l) as usize];
    let mut s = start;
    seen[state_index(l, s)] = 1;
    if let Some(p) = path.as_deref_mut() {
        p.push(s);
    }
    let mut t: u64 = 0;
    while t < max_steps {
        let nxt = s.heading.apply(s.pos);
        if !nxt.in_box(l) {
            return Ok(TraceOutcome::Escaped { steps: t });
        }
        let heading = match field.mirror_at(nxt) {
            Some(m) => reflect(m, s.heading),
            None => s.heading,
        };
        s = RayState { pos: nxt, heading };
        debug_assert!(field.admissible(s), "street consistency violated at {s:?}");
        t += 1;
        if let Some(p) = path.as_deref_mut() {
            p.push(s);
        }
        let idx = state_index(l, s);
        if seen[idx] != 0 {
            let loop_start = (seen[idx] - 1) as u64;
            return Ok(TraceOutcome::Looped { period: t - loop_start, loop_start });
        }
        seen[idx] = (t + 1) as u32;
    }
    Ok(TraceOutcome::Exhausted { limit: max_steps })
}

/// Trace a pinball ray along the one-way streets, deflected by open diagonal
/// mirrors. Errors if the start heading runs against its street.
pub fn trace_manhattan<M: ManhattanMirrors>(
    field: &M,
    start: RayState,
    max_steps: u64,
) -> Result<TraceOutcome> {
    trace_manhattan_impl(field, start, max_steps, None)
}

pub fn trace_manhattan_with_path<M: ManhattanMirrors>(
    field: &M,
    start: RayState,
    max_steps: u64,
) -> Result<(TraceOutcome, Vec<RayState>)> {
    let mut path = Vec::new();
    let outcome = trace_manhattan_impl(field, start, max_steps, Some(&mut path))?;
    Ok((outcome, path))
}

/// Escape proportion of the eastward pinball ray from the origin (row 0 is
/// eastbound in both classes).
pub fn estimate_theta_manhattan(
    q: f64,
    l: i32,
    trials: u64,
    class: DiagonalClass,
    stream: &RngStream,
) -> Result<EstimateCI> {
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    sample_manhattan_field(q, l, class, 0, 0)?;
    let budget = full_state_budget(l);
    let escapes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let sub = stream.substream(&[TAG_TRIAL, t]);
            let field = ManhattanField::from_stream(q, l, class, &sub).expect("validated");
            let start = RayState { pos: ORIGIN, heading: Heading::E };
            let outcome =
                trace_manhattan(&field, start, budget).expect("eastward start is admissible");
            debug_assert!(!matches!(outcome, TraceOutcome::Exhausted { .. }));
            outcome.escaped() as u64
        })
        .sum();
    estimate_proportion(escapes, trials, 0.95)
}
