//! Randomly oriented square lattice: every horizontal edge points right with
//! probability p (else left), every vertical edge up with probability p (else
//! down), independently.  From the origin one may only walk along arcs in
//! their sampled direction, and the object of interest is the probability
//! that such a walk escapes a large box — a finite-volume stand-in for the
//! origin starting an infinite oriented path.
//!
//! Configurations are lazy: each edge direction is a pure hash of
//! (seed, stream, edge), so two scans of the same configuration always agree
//! and nothing is stored.  The estimators below parallelize over trials with
//! one addressable substream per trial.
//!
//! By a 180-degree rotation the model at density p is the model at 1 - p, so
//! escape estimates at p and 1 - p must agree statistically; by contrast the
//! reached set is NOT monotone under re-orienting a single edge (a test below
//! constructs a shrinking example), and the honest monotone comparison is
//! *adding* extra right/up arcs, which can only grow the reached set.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::lattice::{Site, ORIGIN};
use crate::randstat::{estimate_proportion, fold, unit_f64, EstimateCI, RngStream};
use crate::{Error, Result};

const TAG_ORIENT: u64 = 0x4f52_4e54; // "ORNT"
const TAG_ENHANCE: u64 = 0x454e_4843; // "ENHC"
const TAG_THETA_TRIAL: u64 = 0x4f54_5249; // "OTRI"

/// Which lattice direction an edge spans.  An edge is addressed by its
/// lower-left endpoint: `(v, Horizontal)` is {v, v+(1,0)}, `(v, Vertical)`
/// is {v, v+(0,1)}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeAxis {
    Horizontal,
    Vertical,
}

impl EdgeAxis {
    fn tag(self) -> u64 {
        match self {
            EdgeAxis::Horizontal => 0,
            EdgeAxis::Vertical => 1,
        }
    }
}

/// An assignment of directions to the edges of a box.
pub trait Orientations {
    fn box_radius(&self) -> i32;

    /// Direction of the edge at `(site, axis)`: true means the arc points
    /// right (horizontal) or up (vertical), false means left/down.
    fn forward(&self, site: Site, axis: EdgeAxis) -> bool;

    /// An extra right/up arc on this edge, on top of its sampled direction.
    /// Default: none.
    fn extra_forward(&self, _site: Site, _axis: EdgeAxis) -> bool {
        false
    }
}

/// Lazily sampled orientation configuration.
#[derive(Debug, Clone)]
pub struct OrientedConfig {
    pub p: f64,
    pub box_radius: i32,
    /// Density of extra right/up arcs, 0 = plain model.
    pub enhance: f64,
    key: u64,
    enhance_key: u64,
}

/// Sample a configuration on the box [-L, L]^2 as a pure function of the
/// stream identity.
pub fn sample_oriented(box_radius: i32, p: f64, stream: &RngStream) -> Result<OrientedConfig> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("edge density p={p} outside [0,1]")));
    }
    if box_radius < 1 {
        return Err(Error::invalid(format!("box radius {box_radius} must be >= 1")));
    }
    let master = stream.master_seed();
    let id = stream.stream_id();
    Ok(OrientedConfig {
        p,
        box_radius,
        enhance: 0.0,
        key: fold(&[master, id, TAG_ORIENT]),
        enhance_key: fold(&[master, id, TAG_ENHANCE]),
    })
}

impl OrientedConfig {
    /// Same sampled directions plus independent extra right/up arcs with
    /// density `delta`.
    pub fn with_enhancement(mut self, delta: f64) -> Result<OrientedConfig> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::invalid(format!(
                "enhancement density {delta} outside [0,1]"
            )));
        }
        self.enhance = delta;
        Ok(self)
    }
}

impl Orientations for OrientedConfig {
    fn box_radius(&self) -> i32 {
        self.box_radius
    }

    fn forward(&self, site: Site, axis: EdgeAxis) -> bool {
        let bits = fold(&[
            self.key,
            site.x as i64 as u64,
            site.y as i64 as u64,
            axis.tag(),
        ]);
        unit_f64(bits) < self.p
    }

    fn extra_forward(&self, site: Site, axis: EdgeAxis) -> bool {
        if self.enhance <= 0.0 {
            return false;
        }
        let bits = fold(&[
            self.enhance_key,
            site.x as i64 as u64,
            site.y as i64 as u64,
            axis.tag(),
        ]);
        unit_f64(bits) < self.enhance
    }
}

/// Hand-built configuration: a default direction plus explicit overrides.
#[derive(Debug, Clone)]
pub struct ExplicitOrientations {
    pub box_radius: i32,
    pub default_forward: bool,
    overrides: HashMap<(Site, EdgeAxis), bool>,
    extras: Vec<(Site, EdgeAxis)>,
}

impl ExplicitOrientations {
    pub fn new(box_radius: i32, default_forward: bool) -> ExplicitOrientations {
        ExplicitOrientations {
            box_radius,
            default_forward,
            overrides: HashMap::new(),
            extras: Vec::new(),
        }
    }

    pub fn set(&mut self, site: Site, axis: EdgeAxis, forward: bool) {
        self.overrides.insert((site, axis), forward);
    }

    pub fn add_extra(&mut self, site: Site, axis: EdgeAxis) {
        self.extras.push((site, axis));
    }
}

impl Orientations for ExplicitOrientations {
    fn box_radius(&self) -> i32 {
        self.box_radius
    }

    fn forward(&self, site: Site, axis: EdgeAxis) -> bool {
        *self
            .overrides
            .get(&(site, axis))
            .unwrap_or(&self.default_forward)
    }

    fn extra_forward(&self, site: Site, axis: EdgeAxis) -> bool {
        self.extras.contains(&(site, axis))
    }
}

/// Everything reachable from the origin along sampled (and extra) arcs.
#[derive(Debug, Clone)]
pub struct ReachResult {
    /// Sites in discovery order, origin first.
    pub reached: Vec<Site>,
    /// True iff some reached site sits on the box boundary.
    pub touched_boundary: bool,
    /// Number of sites first discovered in each breadth-first layer.
    pub frontier_history: Vec<u64>,
}

impl ReachResult {
    pub fn len(&self) -> usize {
        self.reached.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reached.is_empty()
    }
}

fn bfs(config: &impl Orientations, stop_at_boundary: bool) -> ReachResult {
    let l = config.box_radius();
    let side = (2 * l + 1) as usize;
    let index = |v: Site| ((v.x + l) as usize) * side + ((v.y + l) as usize);
    let mut seen = vec![false; side * side];
    let mut reached = Vec::new();
    let mut history = Vec::new();
    let mut touched = ORIGIN.sup_norm() >= l;

    seen[index(ORIGIN)] = true;
    reached.push(ORIGIN);
    history.push(1);
    let mut current = vec![ORIGIN];
    while !current.is_empty() && !(stop_at_boundary && touched) {
        let mut next = Vec::new();
        'layer: for &v in &current {
            // the four possible arcs out of v; left/down exist when the
            // neighboring edge is oriented toward v's lesser side
            let mut push = |w: Site,
                            seen: &mut Vec<bool>,
                            next: &mut Vec<Site>,
                            reached: &mut Vec<Site>| {
                let i = index(w);
                if !seen[i] {
                    seen[i] = true;
                    reached.push(w);
                    next.push(w);
                    if w.sup_norm() >= l {
                        touched = true;
                    }
                }
            };
            if v.x < l && (config.forward(v, EdgeAxis::Horizontal)
                || config.extra_forward(v, EdgeAxis::Horizontal))
            {
                push(Site::new(v.x + 1, v.y), &mut seen, &mut next, &mut reached);
            }
            if v.x > -l && !config.forward(Site::new(v.x - 1, v.y), EdgeAxis::Horizontal) {
                push(Site::new(v.x - 1, v.y), &mut seen, &mut next, &mut reached);
            }
            if v.y < l && (config.forward(v, EdgeAxis::Vertical)
                || config.extra_forward(v, EdgeAxis::Vertical))
            {
                push(Site::new(v.x, v.y + 1), &mut seen, &mut next, &mut reached);
            }
            if v.y > -l && !config.forward(Site::new(v.x, v.y - 1), EdgeAxis::Vertical) {
                push(Site::new(v.x, v.y - 1), &mut seen, &mut next, &mut reached);
            }
            if stop_at_boundary && touched {
                break 'layer;
            }
        }
        if !next.is_empty() {
            history.push(next.len() as u64);
        }
        current = next;
    }
    ReachResult {
        reached,
        touched_boundary: touched,
        frontier_history: history,
    }
}

/// Breadth-first closure of the origin under the sampled arcs.
pub fn reachable_from_origin(config: &impl Orientations) -> ReachResult {
    bfs(config, false)
}

/// Just the escape indicator, stopping as soon as the boundary is hit.
pub fn touches_boundary(config: &impl Orientations) -> bool {
    bfs(config, true).touched_boundary
}

/// Proportion of independent configurations whose origin cluster reaches the
/// box boundary, with extra right/up arcs at density `enhance`.
pub fn estimate_theta_with(
    p: f64,
    box_radius: i32,
    enhance: f64,
    trials: u64,
    stream: &RngStream,
) -> Result<EstimateCI> {
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    // validate parameters once up front so the parallel loop cannot fail
    sample_oriented(box_radius, p, stream)?.with_enhancement(enhance)?;
    let hits: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let sub = stream.substream(&[TAG_THETA_TRIAL, t]);
            let config = sample_oriented(box_radius, p, &sub)
                .and_then(|c| c.with_enhancement(enhance))
                .expect("parameters validated above");
            u64::from(touches_boundary(&config))
        })
        .sum();
    estimate_proportion(hits, trials, 0.95)
}

/// Escape probability of the plain model.
pub fn estimate_theta_oriented(
    p: f64,
    box_radius: i32,
    trials: u64,
    stream: &RngStream,
) -> Result<EstimateCI> {
    estimate_theta_with(p, box_radius, 0.0, trials, stream)
}

/// Escape estimates at p and 1-p, which the rotation symmetry forces to
/// agree in law.
#[derive(Debug, Clone)]
pub struct SymmetryReport {
    pub p: f64,
    pub box_radius: i32,
    pub at_p: EstimateCI,
    pub at_complement: EstimateCI,
    pub difference: f64,
    pub pooled_se: f64,
    /// |difference| in units of pooled SE (0 when both sides are degenerate
    /// and equal).
    pub diff_in_se: f64,
}

pub fn symmetry_report(
    p: f64,
    box_radius: i32,
    trials: u64,
    stream: &RngStream,
) -> Result<SymmetryReport> {
    let at_p = estimate_theta_oriented(p, box_radius, trials, &stream.substream(&[101]))?;
    let at_complement =
        estimate_theta_oriented(1.0 - p, box_radius, trials, &stream.substream(&[102]))?;
    let difference = at_p.point - at_complement.point;
    let var = |e: &EstimateCI| e.point * (1.0 - e.point) / e.trials as f64;
    let pooled_se = (var(&at_p) + var(&at_complement)).sqrt();
    let diff_in_se = if pooled_se > 0.0 {
        difference.abs() / pooled_se
    } else if difference == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(SymmetryReport {
        p,
        box_radius,
        at_p,
        at_complement,
        difference,
        pooled_se,
        diff_in_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn site(x: i32, y: i32) -> Site {
        Site::new(x, y)
    }

    #[test]
    fn degenerate_densities_reach_full_quadrants() {
        let stream = RngStream::derive(7, 1);
        let l = 8;
        let all_forward = sample_oriented(l, 1.0, &stream).unwrap();
        let reach = reachable_from_origin(&all_forward);
        assert!(reach.touched_boundary);
        assert_eq!(reach.len() as i64, ((l as i64) + 1).pow(2)); // NE quadrant
        let set: HashSet<Site> = reach.reached.iter().copied().collect();
        assert!(set.contains(&site(l, l)));
        assert!(!set.contains(&site(-1, 0)));
        assert_eq!(reach.frontier_history.iter().sum::<u64>(), reach.len() as u64);
        assert_eq!(reach.frontier_history[0], 1);

        let all_backward = sample_oriented(l, 0.0, &stream).unwrap();
        let reach = reachable_from_origin(&all_backward);
        assert!(reach.touched_boundary);
        let set: HashSet<Site> = reach.reached.iter().copied().collect();
        assert!(set.contains(&site(-l, -l)));
        assert!(!set.contains(&site(1, 0)));
    }

    #[test]
    fn direction_fractions_track_density() {
        let l = 100;
        for (p, seed) in [(0.5, 11u64), (0.7, 12)] {
            let config = sample_oriented(l, p, &RngStream::derive(seed, 3)).unwrap();
            let mut forward = 0u64;
            let mut edges = 0u64;
            for x in -l..l {
                for y in -l..=l {
                    edges += 1;
                    if config.forward(site(x, y), EdgeAxis::Horizontal) {
                        forward += 1;
                    }
                }
            }
            let frac = forward as f64 / edges as f64;
            let tol = 5.0 * (p * (1.0 - p) / edges as f64).sqrt();
            assert!((frac - p).abs() < tol, "horizontal fraction {frac} vs {p}");

            let mut forward = 0u64;
            let mut edges = 0u64;
            for x in -l..=l {
                for y in -l..l {
                    edges += 1;
                    if config.forward(site(x, y), EdgeAxis::Vertical) {
                        forward += 1;
                    }
                }
            }
            let frac = forward as f64 / edges as f64;
            let tol = 5.0 * (p * (1.0 - p) / edges as f64).sqrt();
            assert!((frac - p).abs() < tol, "vertical fraction {frac} vs {p}");
        }
    }

    #[test]
    fn configurations_are_reproducible_per_stream() {
        let a = sample_oriented(20, 0.5, &RngStream::derive(5, 9)).unwrap();
        let b = sample_oriented(20, 0.5, &RngStream::derive(5, 9)).unwrap();
        let c = sample_oriented(20, 0.5, &RngStream::derive(6, 9)).unwrap();
        let mut diffs = 0;
        for x in -20..20 {
            for y in -20..20 {
                for axis in [EdgeAxis::Horizontal, EdgeAxis::Vertical] {
                    assert_eq!(a.forward(site(x, y), axis), b.forward(site(x, y), axis));
                    if a.forward(site(x, y), axis) != c.forward(site(x, y), axis) {
                        diffs += 1;
                    }
                }
            }
        }
        assert!(diffs > 0, "different master seeds produced identical fields");
        assert!(sample_oriented(10, 1.5, &RngStream::derive(1, 1)).is_err());
        assert!(sample_oriented(0, 0.5, &RngStream::derive(1, 1)).is_err());
    }

    #[test]
    fn hand_built_blockade_isolates_origin() {
        // all four arcs at the origin point inward: the two incident edges on
        // the lesser sides are overridden to forward (their arcs end at 0),
        // the two on the greater sides default to backward (same)
        let mut config = ExplicitOrientations::new(1, false);
        config.set(site(-1, 0), EdgeAxis::Horizontal, true);
        config.set(site(0, -1), EdgeAxis::Vertical, true);
        let reach = reachable_from_origin(&config);
        assert_eq!(reach.reached, vec![ORIGIN]);
        assert!(!reach.touched_boundary);
        assert_eq!(reach.frontier_history, vec![1]);
    }

    // Independent oracle: saturate the arc relation by fixed-point iteration
    // over the whole box, no BFS involved.
    fn fixed_point_reach(config: &impl Orientations) -> HashSet<Site> {
        let l = config.box_radius();
        let mut set = HashSet::from([ORIGIN]);
        loop {
            let mut grew = false;
            for x in -l..=l {
                for y in -l..=l {
                    let v = site(x, y);
                    if !set.contains(&v) {
                        continue;
                    }
                    let mut targets = Vec::new();
                    if x < l
                        && (config.forward(v, EdgeAxis::Horizontal)
                            || config.extra_forward(v, EdgeAxis::Horizontal))
                    {
                        targets.push(site(x + 1, y));
                    }
                    if x > -l && !config.forward(site(x - 1, y), EdgeAxis::Horizontal) {
                        targets.push(site(x - 1, y));
                    }
                    if y < l
                        && (config.forward(v, EdgeAxis::Vertical)
                            || config.extra_forward(v, EdgeAxis::Vertical))
                    {
                        targets.push(site(x, y + 1));
                    }
                    if y > -l && !config.forward(site(x, y - 1), EdgeAxis::Vertical) {
                        targets.push(site(x, y - 1));
                    }
                    for w in targets {
                        if set.insert(w) {
                            grew = true;
                        }
                    }
                }
            }
            if !grew {
                return set;
            }
        }
    }

    #[test]
    fn reach_matches_fixed_point_oracle() {
        let densities = [0.2, 0.5, 0.8];
        for seed in 0..100u64 {
            let p = densities[(seed % 3) as usize];
            let stream = RngStream::derive(900 + seed, 4);
            let config = sample_oriented(10, p, &stream).unwrap();
            let reach = reachable_from_origin(&config);
            let got: HashSet<Site> = reach.reached.iter().copied().collect();
            assert_eq!(got.len(), reach.reached.len(), "duplicate site in reach");
            let oracle = fixed_point_reach(&config);
            assert_eq!(got, oracle, "seed {seed} p {p}");
            let oracle_touched = oracle.iter().any(|v| v.sup_norm() >= 10);
            assert_eq!(reach.touched_boundary, oracle_touched);
            assert_eq!(touches_boundary(&config), oracle_touched);
        }
    }

    // Re-orienting one edge outward is NOT monotone for directed reach: the
    // flip amputates the inward arc that was the only entrance to a site.
    #[test]
    fn single_reorientation_can_shrink_reach() {
        let build = |flipped: bool| {
            let mut c = ExplicitOrientations::new(2, false);
            c.set(ORIGIN, EdgeAxis::Vertical, true); // 0 -> (0,1)
            c.set(site(0, 1), EdgeAxis::Horizontal, true); // (0,1) -> (1,1)
            c.set(site(1, 1), EdgeAxis::Horizontal, true); // (1,1) -> (2,1)
            c.set(site(1, 0), EdgeAxis::Vertical, true); // keeps (1,1) -> (1,0) closed
            // {(2,0),(2,1)} stays backward: arc (2,1) -> (2,0)
            // {(1,0),(2,0)} backward gives (2,0) -> (1,0); flipping it to
            // forward removes that entrance
            c.set(site(1, 0), EdgeAxis::Horizontal, flipped);
            c
        };
        let before: HashSet<Site> =
            reachable_from_origin(&build(false)).reached.into_iter().collect();
        let after: HashSet<Site> =
            reachable_from_origin(&build(true)).reached.into_iter().collect();
        assert!(before.contains(&site(1, 0)));
        assert!(!after.contains(&site(1, 0)));
        assert!(after.len() < before.len());
    }

    #[test]
    fn extra_arcs_only_grow_reach() {
        let mut grew = 0usize;
        for seed in 0..200u64 {
            let stream = RngStream::derive(3000 + seed, 5);
            let base = sample_oriented(10, 0.4, &stream).unwrap();
            let enhanced = base.clone().with_enhancement(0.15).unwrap();
            let base_reach = reachable_from_origin(&base);
            let enhanced_reach = reachable_from_origin(&enhanced);
            let base_set: HashSet<Site> = base_reach.reached.iter().copied().collect();
            let enhanced_set: HashSet<Site> =
                enhanced_reach.reached.iter().copied().collect();
            assert!(
                base_set.is_subset(&enhanced_set),
                "seed {seed}: extra arcs lost sites"
            );
            if base_reach.touched_boundary {
                assert!(enhanced_reach.touched_boundary, "seed {seed}: escape lost");
            }
            if enhanced_set.len() > base_set.len() {
                grew += 1;
            }

            let same = base.clone().with_enhancement(0.0).unwrap();
            assert_eq!(
                reachable_from_origin(&same).reached,
                base_reach.reached,
                "zero enhancement changed the walk"
            );
        }
        assert!(grew > 20, "enhancement never did anything ({grew})");
        let stream = RngStream::derive(1, 1);
        assert!(sample_oriented(5, 0.5, &stream)
            .unwrap()
            .with_enhancement(1.5)
            .is_err());
    }

    #[test]
    fn theta_endpoints_and_validation() {
        let stream = RngStream::derive(42, 6);
        let est = estimate_theta_oriented(0.0, 10, 300, &stream).unwrap();
        assert_eq!(est.point, 1.0, "leftward/downward staircases always escape");
        let est = estimate_theta_oriented(1.0, 10, 300, &stream).unwrap();
        assert_eq!(est.point, 1.0);
        assert!(estimate_theta_oriented(0.5, 10, 0, &stream).is_err());
        assert!(estimate_theta_oriented(-0.1, 10, 10, &stream).is_err());
        assert!(estimate_theta_oriented(0.5, 0, 10, &stream).is_err());
    }

    #[test]
    fn escape_at_half_decays_with_box_size() {
        let stream = RngStream::derive(2026, 8);
        let trials = 1500;
        let small = estimate_theta_oriented(0.5, 10, trials, &stream.substream(&[10])).unwrap();
        let mid = estimate_theta_oriented(0.5, 20, trials, &stream.substream(&[20])).unwrap();
        let large = estimate_theta_oriented(0.5, 40, trials, &stream.substream(&[40])).unwrap();
        assert!(
            small.point > mid.point && mid.point > large.point,
            "no decay: {} {} {}",
            small.point,
            mid.point,
            large.point
        );
        let pooled = ((small.point * (1.0 - small.point)
            + large.point * (1.0 - large.point))
            / trials as f64)
            .sqrt();
        assert!(
            small.point - large.point > 2.0 * pooled,
            "gap {} vs pooled SE {pooled}",
            small.point - large.point
        );
    }

    #[test]
    fn escape_above_believed_critical_point_stays_positive() {
        let stream = RngStream::derive(99, 13);
        let at20 = estimate_theta_oriented(0.7, 20, 1000, &stream.substream(&[1])).unwrap();
        let at40 = estimate_theta_oriented(0.7, 40, 1000, &stream.substream(&[2])).unwrap();
        assert!(at20.point >= 0.1, "got {}", at20.point);
        assert!(at40.point >= 0.1, "got {}", at40.point);
    }

    #[test]
    fn complementary_densities_agree_statistically() {
        let stream = RngStream::derive(7, 21);
        let report = symmetry_report(0.3, 16, 3000, &stream).unwrap();
        assert!(
            report.diff_in_se <= 3.0,
            "p vs 1-p differ by {} pooled SEs ({} vs {})",
            report.diff_in_se,
            report.at_p.point,
            report.at_complement.point
        );

        let degenerate = symmetry_report(0.0, 10, 200, &stream).unwrap();
        assert_eq!(degenerate.at_p.point, 1.0);
        assert_eq!(degenerate.at_complement.point, 1.0);
        assert_eq!(degenerate.diff_in_se, 0.0);
    }
}
