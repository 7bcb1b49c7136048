//! Poisson needle mirrors in the plane: a rate-1 Poisson field of short
//! two-sided segment mirrors with random inclinations, exact ray tracing with
//! specular reflection, escape statistics over angle grids, vacant-crossing
//! estimates for the needle union, and a diffusivity fit for escaping rays.
//!
//! All geometry is double precision. Hits that land within `DEGENERATE_TOLERANCE`
//! of a needle endpoint or of a point where two needles (nearly) cross are
//! reported as degenerate and never silently resolved.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;
use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};

use num_rational::Rational64;
use rayon::prelude::*;

use crate::randstat::{estimate_proportion, EstimateCI, RngStream};
use crate::util::UnionFind;
use crate::{Error, Result};

/// Proximity tolerance below which a hit is declared degenerate.
pub const DEGENERATE_TOLERANCE: f64 = 1e-12;

const MAX_ORIGIN_RESAMPLE_ROUNDS: u64 = 64;

// ---------------------------------------------------------------------------
// plane geometry

/// Plain 2D vector / point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Vec2 {
        Vec2 { x, y }
    }

    pub fn from_angle(theta: f64) -> Vec2 {
        Vec2 { x: theta.cos(), y: theta.sin() }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2 { x: self.x / n, y: self.y / n }
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl std::ops::Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

fn dist_point_segment(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    let t = if len_sq == 0.0 { 0.0 } else { ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0) };
    (p - (a + ab * t)).norm()
}

/// Intersection of the ray `from + t·dir` (t ≥ 0) with segment a–b; returns
/// (t, s) with s the segment parameter in [0, 1]. Rays parallel to the
/// segment never intersect under this predicate (edge-on passes are a
/// measure-zero grazing case).
fn ray_segment_intersection(from: Vec2, dir: Vec2, a: Vec2, b: Vec2) -> Option<(f64, f64)> {
    let e = b - a;
    let f = a - from;
    let denom = e.cross(dir);
    if denom.abs() < 1e-15 {
        return None;
    }
    let t = e.cross(f) / denom;
    let s = dir.cross(f) / denom;
    if t >= 0.0 && (0.0..=1.0).contains(&s) {
        Some((t, s))
    } else {
        None
    }
}

/// Mirror-line reflection of a direction: the component along the needle is
/// kept, the normal component flipped.
pub fn reflect_direction(dir: Vec2, along: Vec2) -> Vec2 {
    (along * (2.0 * dir.dot(along)) - dir).normalized()
}

// ---------------------------------------------------------------------------
// angle laws and needles

/// Distribution of needle inclinations on [0, π).
#[derive(Debug, Clone, PartialEq)]
pub enum AngleLaw {
    /// A single fixed inclination (a degenerate control case: all mirrors
    /// parallel).
    Degenerate(f64),
    /// Atoms at rational multiples of π, e.g. (1/4)·π with weight 1/2.
    DiscreteRational(Vec<(Rational64, f64)>),
    /// Uniform on [0, π).
    Uniform,
    /// Arbitrary finite atom table (angle, weight).
    Table(Vec<(f64, f64)>),
}

/// The angle r·π of a rational multiple r.
pub fn rational_angle(r: Rational64) -> f64 {
    (*r.numer() as f64 / *r.denom() as f64) * PI
}

impl AngleLaw {
    pub fn validate(&self) -> Result<()> {
        let check_weights = |ws: &[f64]| -> Result<()> {
            let sum: f64 = ws.iter().sum();
            if ws.iter().any(|w| !w.is_finite() || *w <= 0.0) {
                return Err(Error::invalid("angle-law weights must be positive"));
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("angle-law weights sum to {sum}, not 1")));
            }
            Ok(())
        };
        match self {
            AngleLaw::Degenerate(t) => {
                if !t.is_finite() || !(0.0..PI).contains(t) {
                    return Err(Error::invalid(format!("inclination {t} outside [0, pi)")));
                }
            }
            AngleLaw::DiscreteRational(atoms) => {
                if atoms.is_empty() {
                    return Err(Error::invalid("angle law needs at least one atom"));
                }
                for (r, _) in atoms {
                    if *r < Rational64::from_integer(0) || *r >= Rational64::from_integer(1) {
                        return Err(Error::invalid(format!(
                            "rational angle multiple {r} outside [0, 1)"
                        )));
                    }
                }
                check_weights(&atoms.iter().map(|a| a.1).collect::<Vec<_>>())?;
            }
            AngleLaw::Uniform => {}
            AngleLaw::Table(atoms) => {
                if atoms.is_empty() {
                    return Err(Error::invalid("angle law needs at least one atom"));
                }
                for (t, _) in atoms {
                    if !t.is_finite() || !(0.0..PI).contains(t) {
                        return Err(Error::invalid(format!("inclination {t} outside [0, pi)")));
                    }
                }
                check_weights(&atoms.iter().map(|a| a.1).collect::<Vec<_>>())?;
            }
        }
        Ok(())
    }

    /// Draw one inclination. Atom laws return their atom values exactly.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match self {
            AngleLaw::Degenerate(t) => *t,
            AngleLaw::Uniform => rng.uniform01() * PI,
            AngleLaw::DiscreteRational(atoms) => {
                let u = rng.uniform01();
                let mut acc = 0.0;
                for (r, w) in atoms {
                    acc += w;
                    if u < acc {
                        return rational_angle(*r);
                    }
                }
                rational_angle(atoms.last().expect("validated non-empty").0)
            }
            AngleLaw::Table(atoms) => {
                let u = rng.uniform01();
                let mut acc = 0.0;
                for (t, w) in atoms {
                    acc += w;
                    if u < acc {
                        return *t;
                    }
                }
                atoms.last().expect("validated non-empty").0
            }
        }
    }
}

/// A segment mirror: a closed segment of the given length centered at
/// `center` with inclination `angle` to the horizontal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Needle {
    pub center: Vec2,
    pub angle: f64,
    pub length: f64,
}

impl Needle {
    pub fn direction(&self) -> Vec2 {
        Vec2::from_angle(self.angle)
    }

    pub fn endpoints(&self) -> (Vec2, Vec2) {
        let h = self.direction() * (self.length / 2.0);
        (self.center - h, self.center + h)
    }
}

/// Identifies a needle by the unit cell holding its center plus its index in
/// that cell's draw order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NeedleId {
    pub cell: (i64, i64),
    pub index: u32,
}

fn cell_of(p: Vec2) -> (i64, i64) {
    (p.x.floor() as i64, p.y.floor() as i64)
}

fn empty_needles() -> Arc<Vec<Needle>> {
    static EMPTY: OnceLock<Arc<Vec<Needle>>> = OnceLock::new();
    EMPTY.get_or_init(|| Arc::new(Vec::new())).clone()
}

/// Anything that can serve needles per unit cell to the tracing kernels.
pub trait NeedleSource {
    fn needles_in_cell(&self, cell: (i64, i64)) -> Arc<Vec<Needle>>;
    /// How many cells away from a cell a relevant needle's center can sit.
    fn cell_reach(&self) -> i64;
}

fn reach_for_length(len: f64) -> i64 {
    (len / 2.0).ceil() as i64 + 1
}

// ---------------------------------------------------------------------------
// the Poisson field

const NEEDLE_STREAM_ID: u64 = 0x4e44_4c53; // "NDLS"
const TAG_CELL: u64 = 0x4e43_454c; // "NCEL"
const TAG_CROSS_CELL: u64 = 0x5843_454c; // "XCEL"
const TAG_CROSS_TRIAL: u64 = 0x5854_5249; // "XTRI"

/// Lazy Poisson needle field of unit intensity: each unit cell's needles are a
/// pure function of (stream, resample round, cell index), so the field is
/// unbounded, immutable and identical however it is scanned. The origin is
/// guaranteed clear of needles: configurations violating that are resampled
/// wholesale and the rejections counted.
pub struct NeedleField {
    pub epsilon: f64,
    pub law: AngleLaw,
    pub window_radius: f64,
    /// How many whole-field redraws were needed to clear the origin.
    pub origin_resamples: u64,
    stream: RngStream,
    round: u64,
    cache: Mutex<HashMap<(i64, i64), Arc<Vec<Needle>>>>,
}

fn raw_cell(
    stream: &RngStream,
    round: u64,
    cell: (i64, i64),
    epsilon: f64,
    law: &AngleLaw,
) -> Vec<Needle> {
    let mut sub = stream.substream(&[TAG_CELL, round, cell.0 as u64, cell.1 as u64]);
    let n = sub.poisson(1.0).expect("unit mean is valid");
    (0..n)
        .map(|_| {
            let x = cell.0 as f64 + sub.uniform01();
            let y = cell.1 as f64 + sub.uniform01();
            let angle = law.sample(&mut sub);
            Needle { center: Vec2::new(x, y), angle, length: epsilon }
        })
        .collect()
}

pub fn generate_field(
    seed: u64,
    window_radius: f64,
    epsilon: f64,
    law: AngleLaw,
) -> Result<NeedleField> {
    NeedleField::from_stream(RngStream::derive(seed, NEEDLE_STREAM_ID), window_radius, epsilon, law)
}

impl NeedleField {
    pub fn from_stream(
        stream: RngStream,
        window_radius: f64,
        epsilon: f64,
        law: AngleLaw,
    ) -> Result<NeedleField> {
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(Error::invalid(format!("needle length {epsilon} must be positive")));
        }
        if !window_radius.is_finite() || window_radius <= 0.0 {
            return Err(Error::invalid(format!("window radius {window_radius} must be positive")));
        }
        law.validate()?;
        let reach = reach_for_length(epsilon);
        let mut origin_resamples = 0;
        let mut round = None;
        'rounds: for r in 0..MAX_ORIGIN_RESAMPLE_ROUNDS {
            for a in -reach..=reach {
                for b in -reach..=reach {
                    for ndl in raw_cell(&stream, r, (a, b), epsilon, &law) {
                        let (ea, eb) = ndl.endpoints();
                        if dist_point_segment(Vec2::ZERO, ea, eb) <= DEGENERATE_TOLERANCE {
                            origin_resamples += 1;
                            continue 'rounds;
                        }
                    }
                }
            }
            round = Some(r);
            break;
        }
        let round = round.ok_or_else(|| {
            Error::ResourceLimit(format!(
                "origin still covered after {MAX_ORIGIN_RESAMPLE_ROUNDS} field redraws"
            ))
        })?;
        Ok(NeedleField {
            epsilon,
            law,
            window_radius,
            origin_resamples,
            stream,
            round,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// All needles whose centers fall in the sup-norm window; the count is
    /// Poisson with mean equal to the window's area.
    pub fn needles_in_window(&self) -> Vec<Needle> {
        let r = self.window_radius;
        let lo = (-r).floor() as i64;
        let hi = r.floor() as i64;
        let mut out = Vec::new();
        for a in lo..=hi {
            for b in lo..=hi {
                for ndl in self.needles_in_cell((a, b)).iter() {
                    if ndl.center.x.abs() <= r && ndl.center.y.abs() <= r {
                        out.push(*ndl);
                    }
                }
            }
        }
        out
    }
}

impl NeedleSource for NeedleField {
    fn needles_in_cell(&self, cell: (i64, i64)) -> Arc<Vec<Needle>> {
        let mut cache = self.cache.lock().expect("needle cache poisoned");
        cache
            .entry(cell)
            .or_insert_with(|| {
                let v = raw_cell(&self.stream, self.round, cell, self.epsilon, &self.law);
                if v.is_empty() {
                    empty_needles()
                } else {
                    Arc::new(v)
                }
            })
            .clone()
    }

    fn cell_reach(&self) -> i64 {
        reach_for_length(self.epsilon)
    }
}

/// Hand-built needle configuration for tests and worked examples.
#[derive(Debug, Clone, Default)]
pub struct ExplicitNeedles {
    buckets: HashMap<(i64, i64), Arc<Vec<Needle>>>,
    max_length: f64,
}

impl ExplicitNeedles {
    pub fn new() -> ExplicitNeedles {
        ExplicitNeedles::default()
    }

    pub fn place(&mut self, needle: Needle) {
        let cell = cell_of(needle.center);
        Arc::make_mut(self.buckets.entry(cell).or_default()).push(needle);
        self.max_length = self.max_length.max(needle.length);
    }
}

impl NeedleSource for ExplicitNeedles {
    fn needles_in_cell(&self, cell: (i64, i64)) -> Arc<Vec<Needle>> {
        self.buckets.get(&cell).cloned().unwrap_or_else(empty_needles)
    }

    fn cell_reach(&self) -> i64 {
        reach_for_length(self.max_length.max(1e-9))
    }
}

// ---------------------------------------------------------------------------
// first hit

/// A resolved nearest intersection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub id: NeedleId,
    pub needle: Needle,
    pub point: Vec2,
    pub distance: f64,
}

/// Outcome of a nearest-intersection query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HitResult {
    Miss,
    Hit(Hit),
    /// Nearest hit within tolerance of a needle endpoint or of another
    /// needle (a crossing); the trace must not guess a convention.
    Degenerate { point: Vec2 },
}

fn axis_setup(x: f64, d: f64, cell: i64) -> (i64, f64, f64) {
    if d > 0.0 {
        (1, (cell as f64 + 1.0 - x) / d, 1.0 / d)
    } else if d < 0.0 {
        (-1, (x - cell as f64) / -d, 1.0 / -d)
    } else {
        (0, f64::INFINITY, f64::INFINITY)
    }
}

fn first_hit_impl<F: NeedleSource + ?Sized>(
    field: &F,
    from: Vec2,
    dir: Vec2,
    max_range: f64,
    skip: Option<NeedleId>,
) -> Result<HitResult> {
    if (dir.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("ray direction must be a unit vector"));
    }
    if !max_range.is_finite() || max_range < 0.0 {
        return Err(Error::invalid(format!("max range {max_range} must be finite and >= 0")));
    }
    let reach = field.cell_reach();
    let mut best: Option<Hit> = None;
    let mut scanned: HashSet<(i64, i64)> = HashSet::new();
    let mut cell = cell_of(from);
    let (step_x, mut t_max_x, t_delta_x) = axis_setup(from.x, dir.x, cell.0);
    let (step_y, mut t_max_y, t_delta_y) = axis_setup(from.y, dir.y, cell.1);
    loop {
        for a in (cell.0 - reach)..=(cell.0 + reach) {
            for b in (cell.1 - reach)..=(cell.1 + reach) {
                if !scanned.insert((a, b)) {
                    continue;
                }
                for (k, ndl) in field.needles_in_cell((a, b)).iter().enumerate() {
                    let id = NeedleId { cell: (a, b), index: k as u32 };
                    if skip == Some(id) {
                        continue;
                    }
                    let (ea, eb) = ndl.endpoints();
                    if let Some((t, _)) = ray_segment_intersection(from, dir, ea, eb) {
                        if t <= max_range && best.map_or(true, |h| t < h.distance) {
                            best = Some(Hit {
                                id,
                                needle: *ndl,
                                point: from + dir * t,
                                distance: t,
                            });
                        }
                    }
                }
            }
        }
        let limit = best.map_or(max_range, |h| h.distance.min(max_range));
        let t_next = t_max_x.min(t_max_y);
        if t_next > limit {
            break;
        }
        if t_max_x <= t_max_y {
            cell.0 += step_x;
            t_max_x += t_delta_x;
        } else {
            cell.1 += step_y;
            t_max_y += t_delta_y;
        }
    }
    let hit = match best {
        None => return Ok(HitResult::Miss),
        Some(h) => h,
    };
    // degenerate screens: endpoint proximity, then proximity of any other
    // needle to the hit point (a near-crossing)
    let (ea, eb) = hit.needle.endpoints();
    if (hit.point - ea).norm() <= DEGENERATE_TOLERANCE
        || (hit.point - eb).norm() <= DEGENERATE_TOLERANCE
    {
        return Ok(HitResult::Degenerate { point: hit.point });
    }
    let hc = cell_of(hit.point);
    for a in (hc.0 - reach)..=(hc.0 + reach) {
        for b in (hc.1 - reach)..=(hc.1 + reach) {
            for (k, ndl) in field.needles_in_cell((a, b)).iter().enumerate() {
                let id = NeedleId { cell: (a, b), index: k as u32 };
                if id == hit.id {
                    continue;
                }
                let (oa, ob) = ndl.endpoints();
                if dist_point_segment(hit.point, oa, ob) <= DEGENERATE_TOLERANCE {
                    return Ok(HitResult::Degenerate { point: hit.point });
                }
            }
        }
    }
    Ok(HitResult::Hit(hit))
}

/// Nearest needle intersection along a ray, found by marching the unit-cell
/// grid; exact segment arithmetic, with degenerate proximity reported rather
/// than resolved.
pub fn first_hit<F: NeedleSource + ?Sized>(
    field: &F,
    from: Vec2,
    dir: Vec2,
    max_range: f64,
) -> Result<HitResult> {
    first_hit_impl(field, from, dir, max_range, None)
}

/// [`first_hit`] with one needle excluded: the continuation query when the
/// ray starts exactly on `skip` (e.g. retracing from a reflection point).
pub fn first_hit_skipping<F: NeedleSource + ?Sized>(
    field: &F,
    from: Vec2,
    dir: Vec2,
    max_range: f64,
    skip: Option<NeedleId>,
) -> Result<HitResult> {
    first_hit_impl(field, from, dir, max_range, skip)
}

// ---------------------------------------------------------------------------
// continuum tracing

/// One reflection event of a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reflection {
    pub point: Vec2,
    pub needle: Needle,
    pub id: NeedleId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContinuumOutcome {
    /// The ray crossed the circle of this radius around the origin.
    EscapedRadius(f64),
    ReflectionBudgetExhausted,
    DegenerateHit,
}

/// A traced light ray: polyline vertices (origin, each reflection point, and
/// the final point), reflection records, and the arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumTrace {
    pub alpha: f64,
    pub points: Vec<Vec2>,
    pub reflections: Vec<Reflection>,
    pub total_length: f64,
    pub final_direction: Vec2,
    pub outcome: ContinuumOutcome,
}

impl ContinuumTrace {
    pub fn escaped(&self) -> bool {
        matches!(self.outcome, ContinuumOutcome::EscapedRadius(_))
    }

    /// Position at arc length t along the polyline (unit-speed
    /// parameterization); None beyond the end.
    pub fn position_at_arc_length(&self, t: f64) -> Option<Vec2> {
        if t < 0.0 {
            return None;
        }
        let mut acc = 0.0;
        for w in self.points.windows(2) {
            let leg = (w[1] - w[0]).norm();
            if t <= acc + leg {
                let u = if leg == 0.0 { 0.0 } else { (t - acc) / leg };
                return Some(w[0] + (w[1] - w[0]) * u);
            }
            acc += leg;
        }
        if t <= acc + 1e-9 {
            return self.points.last().copied();
        }
        None
    }
}

fn exit_parameter(pos: Vec2, dir: Vec2, radius: f64) -> f64 {
    let b = pos.dot(dir);
    let radicand = (b * b + radius * radius - pos.norm_sq()).max(0.0);
    (-b + radicand.sqrt()).max(0.0)
}

/// Shine light from the origin at angle `alpha` and follow it through
/// specular reflections until it leaves the escape circle, exhausts the
/// reflection budget, or strikes a degenerate point.
pub fn trace_continuum<F: NeedleSource + ?Sized>(
    field: &F,
    alpha: f64,
    escape_radius: f64,
    max_reflections: u64,
) -> Result<ContinuumTrace> {
    if !alpha.is_finite() {
        return Err(Error::invalid("initial angle must be finite"));
    }
    if !escape_radius.is_finite() || escape_radius <= 0.0 {
        return Err(Error::invalid(format!("escape radius {escape_radius} must be positive")));
    }
    // the model assumes a clear origin; verify rather than trust the source
    let reach = field.cell_reach();
    for a in -reach..=reach {
        for b in -reach..=reach {
            for ndl in field.needles_in_cell((a, b)).iter() {
                let (ea, eb) = ndl.endpoints();
                if dist_point_segment(Vec2::ZERO, ea, eb) <= DEGENERATE_TOLERANCE {
                    return Err(Error::invalid("origin lies on a needle"));
                }
            }
        }
    }
    let mut pos = Vec2::ZERO;
    let mut dir = Vec2::from_angle(alpha);
    let mut points = vec![pos];
    let mut reflections: Vec<Reflection> = Vec::new();
    let mut total_length = 0.0;
    let mut skip = None;
    loop {
        let t_exit = exit_parameter(pos, dir, escape_radius);
        match first_hit_impl(field, pos, dir, t_exit, skip)? {
            HitResult::Miss => {
                let exit = pos + dir * t_exit;
                points.push(exit);
                total_length += t_exit;
                return Ok(ContinuumTrace {
                    alpha,
                    points,
                    reflections,
                    total_length,
                    final_direction: dir,
                    outcome: ContinuumOutcome::EscapedRadius(escape_radius),
                });
            }
            HitResult::Degenerate { point } => {
                total_length += (point - pos).norm();
                points.push(point);
                return Ok(ContinuumTrace {
                    alpha,
                    points,
                    reflections,
                    total_length,
                    final_direction: dir,
                    outcome: ContinuumOutcome::DegenerateHit,
                });
            }
            HitResult::Hit(hit) => {
                points.push(hit.point);
                total_length += hit.distance;
                reflections.push(Reflection { point: hit.point, needle: hit.needle, id: hit.id });
                dir = reflect_direction(dir, hit.needle.direction());
                pos = hit.point;
                skip = Some(hit.id);
                if reflections.len() as u64 >= max_reflections {
                    return Ok(ContinuumTrace {
                        alpha,
                        points,
                        reflections,
                        total_length,
                        final_direction: dir,
                        outcome: ContinuumOutcome::ReflectionBudgetExhausted,
                    });
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// escape spectrum

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub alpha: f64,
    pub outcome: ContinuumOutcome,
    pub reflections: u64,
    pub path_length: f64,
}

/// Per-angle outcomes on one fixed field, plus the escaping fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub rows: Vec<SpectrumRow>,
    pub escaping: usize,
    pub escaping_fraction: f64,
    pub any_escape: bool,
}

pub fn escape_spectrum<F: NeedleSource + Sync + ?Sized>(
    field: &F,
    alpha_grid: &[f64],
    escape_radius: f64,
    max_reflections: u64,
) -> Result<SpectrumReport> {
    if alpha_grid.is_empty() {
        return Err(Error::invalid("angle grid must be non-empty"));
    }
    let rows = alpha_grid
        .par_iter()
        .map(|&alpha| {
            let tr = trace_continuum(field, alpha, escape_radius, max_reflections)?;
            Ok(SpectrumRow {
                alpha,
                outcome: tr.outcome,
                reflections: tr.reflections.len() as u64,
                path_length: tr.total_length,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let escaping =
        rows.iter().filter(|r| matches!(r.outcome, ContinuumOutcome::EscapedRadius(_))).count();
    Ok(SpectrumReport {
        escaping,
        escaping_fraction: escaping as f64 / rows.len() as f64,
        any_escape: escaping > 0,
        rows,
    })
}

// ---------------------------------------------------------------------------
// vacant crossing

/// A sampled needle configuration near an s×s box, stored as centers plus
/// angles so the same randomness can be evaluated at any length up to
/// `eps_max` (coupled comparisons).
#[derive(Debug, Clone)]
pub struct CrossingSample {
    pub centers: Vec<Vec2>,
    pub angles: Vec<f64>,
    pub eps_max: f64,
    pub side: f64,
}

pub fn sample_crossing_configuration(
    law: &AngleLaw,
    side: f64,
    eps_max: f64,
    stream: &RngStream,
) -> Result<CrossingSample> {
    if !side.is_finite() || side <= 0.0 {
        return Err(Error::invalid(format!("box side {side} must be positive")));
    }
    if !eps_max.is_finite() || eps_max <= 0.0 {
        return Err(Error::invalid(format!("needle length {eps_max} must be positive")));
    }
    law.validate()?;
    let pad = eps_max / 2.0;
    let lo = (-pad).floor() as i64;
    let hi = (side + pad).floor() as i64;
    let mut centers = Vec::new();
    let mut angles = Vec::new();
    for a in lo..=hi {
        for b in lo..=hi {
            let mut sub = stream.substream(&[TAG_CROSS_CELL, a as u64, b as u64]);
            let n = sub.poisson(1.0).expect("unit mean is valid");
            for _ in 0..n {
                let x = a as f64 + sub.uniform01();
                let y = b as f64 + sub.uniform01();
                let angle = law.sample(&mut sub);
                if x >= -pad && x <= side + pad && y >= -pad && y <= side + pad {
                    centers.push(Vec2::new(x, y));
                    angles.push(angle);
                }
            }
        }
    }
    Ok(CrossingSample { centers, angles, eps_max, side })
}

fn clip_segment_to_box(a: Vec2, b: Vec2, side: f64) -> Option<(Vec2, Vec2)> {
    let d = b - a;
    let mut u0 = 0.0_f64;
    let mut u1 = 1.0_f64;
    for (p, q) in [(-d.x, a.x), (d.x, side - a.x), (-d.y, a.y), (d.y, side - a.y)] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                u0 = u0.max(r);
            } else {
                u1 = u1.min(r);
            }
        }
    }
    if u0 > u1 {
        return None;
    }
    Some((a + d * u0, a + d * u1))
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment_bbox(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed segment intersection (touching counts).
fn segments_intersect(p1: Vec2, p2: Vec2, p3: Vec2, p4: Vec2) -> bool {
    let d1 = orient(p3, p4, p1);
    let d2 = orient(p3, p4, p2);
    let d3 = orient(p1, p2, p3);
    let d4 = orient(p1, p2, p4);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment_bbox(p3, p4, p1))
        || (d2 == 0.0 && on_segment_bbox(p3, p4, p2))
        || (d3 == 0.0 && on_segment_bbox(p1, p2, p3))
        || (d4 == 0.0 && on_segment_bbox(p1, p2, p4))
}

const TOUCH_TOLERANCE: f64 = 1e-9;

/// Whether the left and right sides of the [0,s]² box are joined by a path
/// avoiding every needle, at needle length `epsilon`. Decided through the
/// dual: a left-right vacant path exists iff no chain of needles clipped to
/// the box connects its top side to its bottom side.
pub fn vacant_crossing_indicator(sample: &CrossingSample, epsilon: f64) -> Result<bool> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::invalid(format!("needle length {epsilon} must be positive")));
    }
    if epsilon > sample.eps_max + 1e-12 {
        return Err(Error::invalid(format!(
            "length {epsilon} exceeds the sampled margin {}",
            sample.eps_max
        )));
    }
    let side = sample.side;
    let mut clipped: Vec<(Vec2, Vec2)> = Vec::new();
    for (c, t) in sample.centers.iter().zip(&sample.angles) {
        let h = Vec2::from_angle(*t) * (epsilon / 2.0);
        if let Some(seg) = clip_segment_to_box(*c - h, *c + h, side) {
            clipped.push(seg);
        }
    }
    let n = clipped.len();
    let (top, bottom) = (n, n + 1);
    let mut uf = UnionFind::new(n + 2);
    // bucket by unit cell so only nearby pairs are tested
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, (a, b)) in clipped.iter().enumerate() {
        if a.y.max(b.y) >= side - TOUCH_TOLERANCE {
            uf.union(i, top);
        }
        if a.y.min(b.y) <= TOUCH_TOLERANCE {
            uf.union(i, bottom);
        }
        let (xlo, xhi) = (a.x.min(b.x).floor() as i64, a.x.max(b.x).floor() as i64);
        let (ylo, yhi) = (a.y.min(b.y).floor() as i64, a.y.max(b.y).floor() as i64);
        for cx in xlo..=xhi {
            for cy in ylo..=yhi {
                buckets.entry((cx, cy)).or_default().push(i);
            }
        }
    }
    for ids in buckets.values() {
        for (k, &i) in ids.iter().enumerate() {
            for &j in &ids[k + 1..] {
                if !uf.connected(i, j) {
                    let (a, b) = clipped[i];
                    let (c, d) = clipped[j];
                    if segments_intersect(a, b, c, d) {
                        uf.union(i, j);
                    }
                }
            }
        }
    }
    Ok(!uf.connected(top, bottom))
}

/// Monte Carlo estimate of the vacant left-right crossing probability of an
/// s×s box at needle length epsilon; independent configurations per trial.
pub fn vacant_crossing_probability(
    epsilon: f64,
    law: &AngleLaw,
    side: f64,
    trials: u64,
    stream: &RngStream,
) -> Result<EstimateCI> {
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    law.validate()?;
    // validate the geometry once before fanning out
    sample_crossing_configuration(law, side, epsilon, &stream.substream(&[TAG_CROSS_TRIAL]))?;
    let successes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let sub = stream.substream(&[TAG_CROSS_TRIAL, t]);
            let sample = sample_crossing_configuration(law, side, epsilon, &sub)
                .expect("validated parameters");
            vacant_crossing_indicator(&sample, epsilon).expect("epsilon within margin") as u64
        })
        .sum();
    estimate_proportion(successes, trials, 0.95)
}

// ---------------------------------------------------------------------------
// diffusivity

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusivityRow {
    pub t: f64,
    pub variance: f64,
    pub variance_over_t: f64,
}

/// Variance-versus-time table for escaping traces with a least-squares
/// diffusivity slope. The growth exponent (log-log slope) diagnoses whether a
/// linear fit is honest: ballistic ensembles show exponent near 2.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusivityReport {
    pub rows: Vec<DiffusivityRow>,
    pub sigma_squared: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub growth_exponent: f64,
    pub diffusive_fit_ok: bool,
    pub traces_used: usize,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 =
        xs.iter().zip(ys).map(|(x, y)| (y - (slope * x + intercept)).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    (slope, intercept, r2)
}

/// Fit var(X(t)) against t over the escaping traces, parameterized by arc
/// length. Report-only: the slope estimates the diffusive constant if the
/// motion is in fact diffusive, and the fit quality says whether it is.
pub fn estimate_diffusivity(
    traces: &[ContinuumTrace],
    t_grid: &[f64],
) -> Result<DiffusivityReport> {
    let escaping: Vec<&ContinuumTrace> = traces.iter().filter(|t| t.escaped()).collect();
    if escaping.len() < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 escaping traces, have {}",
            escaping.len()
        )));
    }
    if t_grid.len() < 2 {
        return Err(Error::invalid("time grid needs at least 2 points"));
    }
    if t_grid.iter().any(|t| !t.is_finite() || *t <= 0.0) {
        return Err(Error::invalid("time grid must be positive"));
    }
    let shortest =
        escaping.iter().map(|t| t.total_length).fold(f64::INFINITY, f64::min);
    let t_max = t_grid.iter().cloned().fold(0.0, f64::max);
    if t_max > shortest + 1e-9 {
        return Err(Error::invalid(format!(
            "grid time {t_max} exceeds the shortest escaping trace length {shortest}"
        )));
    }
    let n = escaping.len() as f64;
    let rows: Vec<DiffusivityRow> = t_grid
        .iter()
        .map(|&t| {
            let pts: Vec<Vec2> = escaping
                .iter()
                .map(|tr| tr.position_at_arc_length(t).expect("t within every trace"))
                .collect();
            let mean = pts.iter().fold(Vec2::ZERO, |acc, p| acc + *p) * (1.0 / n);
            let variance =
                pts.iter().map(|p| (*p - mean).norm_sq()).sum::<f64>() / (n - 1.0);
            DiffusivityRow { t, variance, variance_over_t: variance / t }
        })
        .collect();
    let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let vars: Vec<f64> = rows.iter().map(|r| r.variance).collect();
    let (sigma_squared, intercept, r_squared) = least_squares(&ts, &vars);
    let log_ts: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let log_vars: Vec<f64> = vars.iter().map(|v| v.max(1e-300).ln()).collect();
    let (growth_exponent, _, _) = least_squares(&log_ts, &log_vars);
    let diffusive_fit_ok = r_squared >= 0.9 && (growth_exponent - 1.0).abs() <= 0.25;
    Ok(DiffusivityReport {
        rows,
        sigma_squared,
        intercept,
        r_squared,
        growth_exponent,
        diffusive_fit_ok,
        traces_used: escaping.len(),
    })
}

/// Write trace polylines as CSV rows `trace,alpha,point,x,y`; returns the
/// number of data rows.
pub fn export_traces<W: Write>(traces: &[ContinuumTrace], mut out: W) -> Result<usize> {
    if traces.is_empty() {
        return Err(Error::invalid("no traces to export"));
    }
    writeln!(out, "trace,alpha,point,x,y")?;
    let mut rows = 0;
    for (i, tr) in traces.iter().enumerate() {
        for (k, p) in tr.points.iter().enumerate() {
            writeln!(out, "{i},{},{k},{},{}", tr.alpha, p.x, p.y)?;
            rows += 1;
        }
    }
    Ok(rows)
}
