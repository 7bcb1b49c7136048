//! Lattice geometry: sites, headings, the brick-wall embedding of the
//! hexagonal lattice, sampled bond configurations on sup-norm boxes, and the
//! diagonal lattice that couples vertex mirrors to bond percolation.

use std::collections::{HashSet, VecDeque};
use std::io::{self, Write};

use crate::randstat::{fold, unit_f64};
use crate::{Error, Result};

/// A lattice vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct Site {
    pub x: i32,
    pub y: i32,
}

pub const ORIGIN: Site = Site { x: 0, y: 0 };

impl Site {
    pub const fn new(x: i32, y: i32) -> Site {
        Site { x, y }
    }

    pub fn sup_norm(self) -> i32 {
        self.x.abs().max(self.y.abs())
    }

    pub fn in_box(self, radius: i32) -> bool {
        self.sup_norm() <= radius
    }

    pub fn offset(self, dx: i32, dy: i32) -> Site {
        Site::new(self.x + dx, self.y + dy)
    }

    /// Parity of x+y; decides the vertical-edge direction on the brick lattice
    /// and the diagonal-lattice class of a mirror.
    pub fn parity(self) -> u8 {
        ((self.x + self.y).rem_euclid(2)) as u8
    }

    fn key_parts(self) -> [u64; 2] {
        [self.x as i64 as u64, self.y as i64 as u64]
    }
}

/// Compass heading on the square lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Heading {
    N,
    E,
    S,
    W,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::N, Heading::E, Heading::S, Heading::W];

    pub fn reverse(self) -> Heading {
        match self {
            Heading::N => Heading::S,
            Heading::E => Heading::W,
            Heading::S => Heading::N,
            Heading::W => Heading::E,
        }
    }

    pub fn step(self) -> (i32, i32) {
        match self {
            Heading::N => (0, 1),
            Heading::E => (1, 0),
            Heading::S => (0, -1),
            Heading::W => (-1, 0),
        }
    }

    pub fn apply(self, s: Site) -> Site {
        let (dx, dy) = self.step();
        s.offset(dx, dy)
    }

    pub fn index(self) -> usize {
        match self {
            Heading::N => 0,
            Heading::E => 1,
            Heading::S => 2,
            Heading::W => 3,
        }
    }
}

/// Edge direction on the hexagonal (brick-wall) lattice: east, west, or the
/// single vertical edge whose direction depends on site parity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HexHeading {
    E,
    W,
    V,
}

impl HexHeading {
    /// Traversing an edge and turning around yields the opposite heading;
    /// a vertical edge is vertical seen from both ends.
    pub fn reverse(self) -> HexHeading {
        match self {
            HexHeading::E => HexHeading::W,
            HexHeading::W => HexHeading::E,
            HexHeading::V => HexHeading::V,
        }
    }

    pub fn apply(self, s: Site) -> Site {
        match self {
            HexHeading::E => s.offset(1, 0),
            HexHeading::W => s.offset(-1, 0),
            // Brick-wall rule: even sites connect upward, odd sites downward.
            HexHeading::V => {
                if s.parity() == 0 {
                    s.offset(0, 1)
                } else {
                    s.offset(0, -1)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum LatticeKind {
    Square,
    /// Hexagonal lattice in brick-wall coordinates on ℤ²: every site keeps its
    /// two horizontal edges and has one vertical edge, up from even-parity
    /// sites and down from odd ones. Integer arithmetic only.
    Hex,
}

impl LatticeKind {
    pub fn degree(self) -> usize {
        match self {
            LatticeKind::Square => 4,
            LatticeKind::Hex => 3,
        }
    }

    /// Neighbors of `v`, in a fixed deterministic order.
    pub fn neighbors(self, v: Site) -> Neighbors {
        let mut buf = [ORIGIN; 4];
        let len = match self {
            LatticeKind::Square => {
                for (i, h) in Heading::ALL.iter().enumerate() {
                    buf[i] = h.apply(v);
                }
                4
            }
            LatticeKind::Hex => {
                buf[0] = v.offset(1, 0);
                buf[1] = v.offset(-1, 0);
                buf[2] = HexHeading::V.apply(v);
                3
            }
        };
        Neighbors { buf, len, idx: 0 }
    }
}

/// Stack-allocated neighbor iterator.
#[derive(Debug, Clone, Copy)]
pub struct Neighbors {
    buf: [Site; 4],
    len: u8,
    idx: u8,
}

impl Iterator for Neighbors {
    type Item = Site;
    fn next(&mut self) -> Option<Site> {
        if self.idx < self.len {
            let s = self.buf[self.idx as usize];
            self.idx += 1;
            Some(s)
        } else {
            None
        }
    }
}

/// Canonical edge identity: the edge from `site` one step east or north.
/// (On the brick lattice a North edge exists only from even-parity sites.)
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeId {
    pub site: Site,
    pub dir: EdgeDir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeDir {
    E,
    N,
}

impl EdgeId {
    /// Canonicalize an unordered adjacent pair into an EdgeId.
    pub fn between(a: Site, b: Site) -> Option<EdgeId> {
        let (lo, hi) = if (a.x, a.y) <= (b.x, b.y) { (a, b) } else { (b, a) };
        if hi.x == lo.x + 1 && hi.y == lo.y {
            Some(EdgeId { site: lo, dir: EdgeDir::E })
        } else if hi.x == lo.x && hi.y == lo.y + 1 {
            Some(EdgeId { site: lo, dir: EdgeDir::N })
        } else {
            None
        }
    }

    pub fn endpoints(self) -> (Site, Site) {
        let other = match self.dir {
            EdgeDir::E => self.site.offset(1, 0),
            EdgeDir::N => self.site.offset(0, 1),
        };
        (self.site, other)
    }
}

/// Read access to an edge configuration. Implemented by the lazy
/// [`BondConfig`], its materialized twin, and hand-built test configs.
pub trait Bonds {
    fn kind(&self) -> LatticeKind;
    fn box_radius(&self) -> i32;
    fn edge_open(&self, e: EdgeId) -> bool;

    /// True when the edge exists on this lattice and both endpoints are in the box.
    fn edge_in_box(&self, e: EdgeId) -> bool {
        let (a, b) = e.endpoints();
        if !a.in_box(self.box_radius()) || !b.in_box(self.box_radius()) {
            return false;
        }
        match self.kind() {
            LatticeKind::Square => true,
            // Vertical brick edges only exist upward from even sites.
            LatticeKind::Hex => e.dir == EdgeDir::E || e.site.parity() == 0,
        }
    }
}

/// Bond percolation on a sup-norm box: every edge is open with probability `p`,
/// independently, as a pure function of `(seed, stream_id, edge)`. Nothing is
/// stored, so sharing across threads is free and lazy/eager agreement is
/// structural.
#[derive(Debug, Clone)]
pub struct BondConfig {
    pub kind: LatticeKind,
    pub box_radius: i32,
    pub p: f64,
    master_seed: u64,
    stream_id: u64,
    key: u64,
}

const TAG_BOND: u64 = 0x424f_4e44; // "BOND"

pub fn sample_bond_config(
    kind: LatticeKind,
    box_radius: i32,
    p: f64,
    master_seed: u64,
    stream_id: u64,
) -> Result<BondConfig> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("bond density p={p} outside [0,1]")));
    }
    if box_radius < 1 {
        return Err(Error::invalid(format!("box radius {box_radius} must be >= 1")));
    }
    Ok(BondConfig {
        kind,
        box_radius,
        p,
        master_seed,
        stream_id,
        key: fold(&[master_seed, stream_id, TAG_BOND]),
    })
}

impl BondConfig {
    pub fn seed_ids(&self) -> (u64, u64) {
        (self.master_seed, self.stream_id)
    }

    /// Pin every in-box edge state into a hash set of open edges.
    pub fn materialize(&self) -> ExplicitBonds {
        let mut open = HashSet::new();
        let l = self.box_radius;
        for x in -l..=l {
            for y in -l..=l {
                for dir in [EdgeDir::E, EdgeDir::N] {
                    let e = EdgeId { site: Site::new(x, y), dir };
                    if self.edge_in_box(e) && self.edge_open(e) {
                        open.insert(e);
                    }
                }
            }
        }
        ExplicitBonds { kind: self.kind, box_radius: self.box_radius, open }
    }
}

impl Bonds for BondConfig {
    fn kind(&self) -> LatticeKind {
        self.kind
    }

    fn box_radius(&self) -> i32 {
        self.box_radius
    }

    fn edge_open(&self, e: EdgeId) -> bool {
        if !self.edge_in_box(e) {
            return false;
        }
        let [x, y] = e.site.key_parts();
        let d = match e.dir {
            EdgeDir::E => 0u64,
            EdgeDir::N => 1u64,
        };
        unit_f64(fold(&[self.key, x, y, d])) < self.p
    }
}

/// Explicit edge set; doubles as the eager twin of a lazy config and as the
/// hand-built configuration type for tests.
#[derive(Debug, Clone)]
pub struct ExplicitBonds {
    pub kind: LatticeKind,
    pub box_radius: i32,
    pub open: HashSet<EdgeId>,
}

impl ExplicitBonds {
    pub fn new(kind: LatticeKind, box_radius: i32) -> ExplicitBonds {
        ExplicitBonds { kind, box_radius, open: HashSet::new() }
    }

    pub fn open_edge(&mut self, a: Site, b: Site) {
        let e = EdgeId::between(a, b).expect("sites not adjacent");
        self.open.insert(e);
    }
}

impl Bonds for ExplicitBonds {
    fn kind(&self) -> LatticeKind {
        self.kind
    }

    fn box_radius(&self) -> i32 {
        self.box_radius
    }

    fn edge_open(&self, e: EdgeId) -> bool {
        self.edge_in_box(e) && self.open.contains(&e)
    }
}

/// Open cluster of `v`: breadth-first search over open in-box edges.
pub fn cluster_of<B: Bonds>(config: &B, v: Site) -> Result<HashSet<Site>> {
    if !v.in_box(config.box_radius()) {
        return Err(Error::invalid(format!("site ({}, {}) outside box", v.x, v.y)));
    }
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(v);
    queue.push_back(v);
    while let Some(s) = queue.pop_front() {
        for nb in config.kind().neighbors(s) {
            if !nb.in_box(config.box_radius()) || seen.contains(&nb) {
                continue;
            }
            let e = EdgeId::between(s, nb).expect("neighbors are adjacent");
            if config.edge_open(e) {
                seen.insert(nb);
                queue.push_back(nb);
            }
        }
    }
    Ok(seen)
}

/// Mirror orientation: the NE mirror lies along the NE–SW diagonal, the NW
/// mirror along the NW–SE diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum MirrorKind {
    Ne,
    Nw,
}

/// One of the two interleaved diagonal lattices. Mirrors of matching
/// orientation and site parity form bond configurations on these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiagonalClass {
    A,
    B,
}

impl DiagonalClass {
    pub fn other(self) -> DiagonalClass {
        match self {
            DiagonalClass::A => DiagonalClass::B,
            DiagonalClass::B => DiagonalClass::A,
        }
    }
}

/// A potential edge of the diagonal lattice: the diagonal of one unit face of
/// ℤ², in one of the two orientations. `face` is the SW corner of the face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DiagonalEdge {
    pub face: Site,
    pub orientation: MirrorKind,
}

impl DiagonalEdge {
    /// Lattice-vertex endpoints of the face diagonal.
    pub fn endpoints(self) -> (Site, Site) {
        match self.orientation {
            MirrorKind::Ne => (self.face, self.face.offset(1, 1)),
            MirrorKind::Nw => (self.face.offset(0, 1), self.face.offset(1, 0)),
        }
    }

    /// Which of the two diagonal lattices this edge belongs to. NE diagonals
    /// of even faces and NW diagonals of odd faces make up class A; the rest
    /// is class B. Edges of one class never touch edges of the other.
    pub fn class(self) -> DiagonalClass {
        let flip = match self.orientation {
            MirrorKind::Ne => 0,
            MirrorKind::Nw => 1,
        };
        if (self.face.parity() + flip) % 2 == 0 {
            DiagonalClass::A
        } else {
            DiagonalClass::B
        }
    }
}

/// The diagonal-lattice edge occupied by a mirror at `site`.
///
/// Convention: the mirror maps to the parallel diagonal of the face whose SW
/// corner is `site`. Site ↔ face is a bijection, so (site, orientation) → edge
/// is injective, and the two potential diagonals of any face belong to the
/// same site — hence at most one of them is present in a mirror configuration.
pub fn mirror_to_diagonal(site: Site, orientation: MirrorKind) -> DiagonalEdge {
    DiagonalEdge { face: site, orientation }
}

/// Dump every in-box edge with its state, one per line:
/// `x1 y1 x2 y2 open|closed`.
pub fn write_edge_list<B: Bonds, W: Write>(config: &B, out: &mut W) -> io::Result<()> {
    let l = config.box_radius();
    for x in -l..=l {
        for y in -l..=l {
            for dir in [EdgeDir::E, EdgeDir::N] {
                let e = EdgeId { site: Site::new(x, y), dir };
                if !config.edge_in_box(e) {
                    continue;
                }
                let (a, b) = e.endpoints();
                let state = if config.edge_open(e) { "open" } else { "closed" };
                writeln!(out, "{} {} {} {} {}", a.x, a.y, b.x, b.y, state)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heading_reversal_is_an_involution() {
        for h in Heading::ALL {
            assert_eq!(h.reverse().reverse(), h);
            assert_ne!(h.reverse(), h);
        }
        for h in [HexHeading::E, HexHeading::W, HexHeading::V] {
            assert_eq!(h.reverse().reverse(), h);
        }
    }

    #[test]
    fn degrees_and_neighbor_symmetry() {
        for kind in [LatticeKind::Square, LatticeKind::Hex] {
            for x in -5..=5 {
                for y in -5..=5 {
                    let v = Site::new(x, y);
                    let nbs: Vec<Site> = kind.neighbors(v).collect();
                    assert_eq!(nbs.len(), kind.degree());
                    for nb in nbs {
                        assert!(
                            kind.neighbors(nb).any(|w| w == v),
                            "{kind:?}: {v:?} -> {nb:?} not symmetric"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn hex_vertical_edges_follow_parity() {
        let even = Site::new(2, 4);
        assert!(LatticeKind::Hex.neighbors(even).any(|w| w == even.offset(0, 1)));
        let odd = Site::new(2, 3);
        assert!(LatticeKind::Hex.neighbors(odd).any(|w| w == odd.offset(0, -1)));
    }

    #[test]
    fn degenerate_densities() {
        let closed = sample_bond_config(LatticeKind::Square, 5, 0.0, 1, 1).unwrap();
        let open = sample_bond_config(LatticeKind::Square, 5, 1.0, 1, 1).unwrap();
        for x in -5..5 {
            for y in -5..5 {
                for dir in [EdgeDir::E, EdgeDir::N] {
                    let e = EdgeId { site: Site::new(x, y), dir };
                    assert!(!closed.edge_open(e));
                    if open.edge_in_box(e) {
                        assert!(open.edge_open(e));
                    }
                }
            }
        }
    }

    #[test]
    fn open_fraction_concentrates_near_p() {
        // 10 seeds at p=0.6, L=100: mean open fraction within 0.01 of 0.6,
        // and each individual config within 5 SE.
        let mut total_open = 0u64;
        let mut total_edges = 0u64;
        for seed in 0..10 {
            let cfg = sample_bond_config(LatticeKind::Square, 100, 0.6, seed, 0).unwrap();
            let mut open = 0u64;
            let mut edges = 0u64;
            for x in -100..=100 {
                for y in -100..=100 {
                    for dir in [EdgeDir::E, EdgeDir::N] {
                        let e = EdgeId { site: Site::new(x, y), dir };
                        if cfg.edge_in_box(e) {
                            edges += 1;
                            if cfg.edge_open(e) {
                                open += 1;
                            }
                        }
                    }
                }
            }
            let frac = open as f64 / edges as f64;
            let se = (0.6 * 0.4 / edges as f64).sqrt();
            assert!((frac - 0.6).abs() < 5.0 * se, "seed {seed}: fraction {frac}");
            total_open += open;
            total_edges += edges;
        }
        let mean = total_open as f64 / total_edges as f64;
        assert!((mean - 0.6).abs() < 0.01, "mean open fraction {mean}");
    }

    #[test]
    fn lazy_and_materialized_configs_agree() {
        for seed in 0..10 {
            let cfg = sample_bond_config(LatticeKind::Square, 20, 0.37, seed, 3).unwrap();
            let eager = cfg.materialize();
            for x in -21..=21 {
                for y in -21..=21 {
                    for dir in [EdgeDir::E, EdgeDir::N] {
                        let e = EdgeId { site: Site::new(x, y), dir };
                        assert_eq!(cfg.edge_open(e), eager.edge_open(e), "seed {seed} {e:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn cluster_degenerate_cases() {
        let closed = sample_bond_config(LatticeKind::Square, 4, 0.0, 9, 9).unwrap();
        let c = cluster_of(&closed, ORIGIN).unwrap();
        assert_eq!(c.len(), 1);
        assert!(c.contains(&ORIGIN));

        let open = sample_bond_config(LatticeKind::Square, 4, 1.0, 9, 9).unwrap();
        let c = cluster_of(&open, ORIGIN).unwrap();
        assert_eq!(c.len(), 9 * 9);

        assert!(cluster_of(&open, Site::new(5, 0)).is_err());
    }

    /// Brute-force oracle: repeatedly merge any in-box site adjacent to the
    /// component through an open edge, until a fixed point. Independent of the
    /// BFS in cluster_of.
    fn flood_oracle<B: Bonds>(cfg: &B, v: Site) -> HashSet<Site> {
        let mut comp = HashSet::new();
        comp.insert(v);
        loop {
            let mut grew = false;
            let l = cfg.box_radius();
            for x in -l..=l {
                for y in -l..=l {
                    let s = Site::new(x, y);
                    if comp.contains(&s) {
                        continue;
                    }
                    let touches = cfg.kind().neighbors(s).any(|nb| {
                        comp.contains(&nb)
                            && nb.in_box(l)
                            && cfg.edge_open(EdgeId::between(s, nb).unwrap())
                    });
                    if touches {
                        comp.insert(s);
                        grew = true;
                    }
                }
            }
            if !grew {
                return comp;
            }
        }
    }

    #[test]
    fn hand_built_component_matches_flood_oracle() {
        // 3x3 box (radius 1) with an explicit L-shaped open path plus one
        // disconnected edge.
        let mut cfg = ExplicitBonds::new(LatticeKind::Square, 1);
        cfg.open_edge(Site::new(-1, -1), Site::new(0, -1));
        cfg.open_edge(Site::new(0, -1), Site::new(0, 0));
        cfg.open_edge(Site::new(1, 0), Site::new(1, 1));
        let got = cluster_of(&cfg, ORIGIN).unwrap();
        let want = flood_oracle(&cfg, ORIGIN);
        assert_eq!(got, want);
        assert_eq!(got.len(), 3);
        assert!(!got.contains(&Site::new(1, 1)));
    }

    #[test]
    fn random_clusters_match_flood_oracle_and_are_symmetric() {
        for seed in 0..5 {
            let cfg = sample_bond_config(LatticeKind::Square, 6, 0.45, seed, 1).unwrap();
            let c0 = cluster_of(&cfg, ORIGIN).unwrap();
            assert_eq!(c0, flood_oracle(&cfg, ORIGIN));
            for &w in c0.iter() {
                let cw = cluster_of(&cfg, w).unwrap();
                assert_eq!(cw, c0, "cluster symmetry broken at {w:?}");
            }
        }
    }

    #[test]
    fn hex_cluster_matches_flood_oracle() {
        for seed in 0..5 {
            let cfg = sample_bond_config(LatticeKind::Hex, 6, 0.55, seed, 2).unwrap();
            assert_eq!(cluster_of(&cfg, ORIGIN).unwrap(), flood_oracle(&cfg, ORIGIN));
        }
    }

    #[test]
    fn diagonal_map_is_injective_on_a_patch() {
        let mut seen = HashSet::new();
        for x in -2..=2 {
            for y in -2..=2 {
                for o in [MirrorKind::Ne, MirrorKind::Nw] {
                    let e = mirror_to_diagonal(Site::new(x, y), o);
                    assert!(seen.insert(e), "duplicate diagonal for ({x},{y},{o:?})");
                }
            }
        }
        assert_eq!(seen.len(), 50);
    }

    #[test]
    fn diagonal_geometry_and_classes() {
        let e = mirror_to_diagonal(ORIGIN, MirrorKind::Ne);
        assert_eq!(e.endpoints(), (ORIGIN, Site::new(1, 1)));
        assert_eq!(e.class(), DiagonalClass::A);
        let f = mirror_to_diagonal(ORIGIN, MirrorKind::Nw);
        assert_eq!(f.endpoints(), (Site::new(0, 1), Site::new(1, 0)));
        assert_eq!(f.class(), DiagonalClass::B);
        // Both diagonals of a face come from the same site, and a NE edge at an
        // odd site lands in the class of a NW edge at an even site.
        assert_eq!(mirror_to_diagonal(Site::new(1, 0), MirrorKind::Ne).class(), DiagonalClass::B);
        assert_eq!(mirror_to_diagonal(Site::new(1, 0), MirrorKind::Nw).class(), DiagonalClass::A);
    }

    #[test]
    fn edge_list_export_round_trips_state() {
        let cfg = sample_bond_config(LatticeKind::Square, 2, 0.5, 11, 0).unwrap();
        let mut buf = Vec::new();
        write_edge_list(&cfg, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut open_lines = 0;
        let mut total = 0;
        for line in text.lines() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            assert_eq!(parts.len(), 5);
            let a = Site::new(parts[0].parse().unwrap(), parts[1].parse().unwrap());
            let b = Site::new(parts[2].parse().unwrap(), parts[3].parse().unwrap());
            let e = EdgeId::between(a, b).unwrap();
            let open = parts[4] == "open";
            assert_eq!(open, cfg.edge_open(e));
            total += 1;
            open_lines += open as u32;
        }
        // radius-2 box: 2 * 4 * 5 = 40 in-box edges
        assert_eq!(total, 40);
        assert!(open_lines > 0 && open_lines < total);
    }
}
