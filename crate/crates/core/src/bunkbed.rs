//! Two-level "bunkbed" graphs and exact connection probabilities.
//!
//! Given a base graph G on n vertices, the bunkbed over G has two copies of
//! every vertex (a lower sheet and an upper sheet), a copy of every base edge
//! in each sheet, and a vertical rung joining the two copies of each vertex.
//! Every edge is kept open independently with probability p, and the question
//! is how the probability that two lower-sheet vertices connect compares with
//! the probability that a lower vertex connects to the upper copy of the
//! other one.  [`bunkbed_check`] scans a graph for ordered pairs and a grid
//! of p values and reports the minimal gap, exactly, in rational arithmetic.
//!
//! Everything here is exact: edge subsets are enumerated outright (so graphs
//! are capped by [`BUNKBED_EDGE_CEILING`]), subsets are bucketed by how many
//! edges are open, and the bucket counts are folded into a polynomial in p
//! evaluated over `BigRational`.  A Monte Carlo estimator is provided for
//! graphs past the ceiling and for cross-checking the exact path.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::graphs::SimpleGraph;
use crate::randstat::{estimate_proportion, EstimateCI, RngStream};
use crate::util::UnionFind;
use crate::{Error, Result};

/// Largest number of enumerated edges we are willing to sweep (2^24 subsets).
pub const BUNKBED_EDGE_CEILING: usize = 24;

const TAG_BUNKBED_TRIAL: u64 = 0x4242_5452;

/// A base graph together with its doubled edge lists.
///
/// Vertices `0..n` are the lower sheet, `n..2n` the upper sheet; vertex `v`
/// sits below `v + n`.
#[derive(Debug, Clone)]
pub struct BunkbedGraph {
    base: SimpleGraph,
    horizontal: Vec<(u32, u32)>,
    vertical: Vec<(u32, u32)>,
}

impl BunkbedGraph {
    pub fn base(&self) -> &SimpleGraph {
        &self.base
    }

    pub fn vertex_count(&self) -> u32 {
        2 * self.base.vertex_count()
    }

    pub fn edge_count(&self) -> usize {
        self.horizontal.len() + self.vertical.len()
    }

    /// Sheet copies of base edges, lower sheet first.
    pub fn horizontal_edges(&self) -> &[(u32, u32)] {
        &self.horizontal
    }

    /// The rungs (v, v + n), one per base vertex.
    pub fn vertical_edges(&self) -> &[(u32, u32)] {
        &self.vertical
    }

    pub fn all_edges(&self) -> Vec<(u32, u32)> {
        let mut edges = self.horizontal.clone();
        edges.extend_from_slice(&self.vertical);
        edges
    }

    /// Upper-sheet copy of a base vertex.
    pub fn upper(&self, v: u32) -> u32 {
        v + self.base.vertex_count()
    }
}

/// Double a graph into its bunkbed.
pub fn build_bunkbed(g: &SimpleGraph) -> BunkbedGraph {
    let n = g.vertex_count();
    let mut horizontal = Vec::with_capacity(2 * g.edge_count());
    for &(a, b) in g.edges() {
        horizontal.push((a, b));
    }
    for &(a, b) in g.edges() {
        horizontal.push((a + n, b + n));
    }
    let vertical = (0..n).map(|v| (v, v + n)).collect();
    BunkbedGraph {
        base: g.clone(),
        horizontal,
        vertical,
    }
}

/// A rational number checked to lie in [0, 1].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExactProb(BigRational);

impl ExactProb {
    pub fn new(value: BigRational) -> Result<Self> {
        if value < BigRational::zero() || value > BigRational::one() {
            return Err(Error::invalid("probability must lie in [0, 1]"));
        }
        Ok(ExactProb(value))
    }

    pub fn value(&self) -> &BigRational {
        &self.0
    }

    pub fn into_value(self) -> BigRational {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        // Good enough for display and cross-checks; exact paths never round.
        let num = self.0.numer();
        let den = self.0.denom();
        bigint_to_f64(num) / bigint_to_f64(den)
    }
}

impl fmt::Display for ExactProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn bigint_to_f64(x: &BigInt) -> f64 {
    // BigInt -> f64 via the num-traits conversion; saturates on overflow,
    // which cannot happen for the subset counts we produce.
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::INFINITY)
}

/// Parse "1/2"-style input into a checked probability.
pub fn parse_exact_prob(text: &str) -> Result<ExactProb> {
    let value: BigRational = text
        .trim()
        .parse()
        .map_err(|e| Error::Parse(format!("bad rational {text:?}: {e}")))?;
    ExactProb::new(value)
}

/// counts[k] = number of subsets S of `edges` with |S| = k such that a and b
/// are connected in the graph (fixed ∪ S) on `nverts` vertices.
fn subset_connection_counts(
    nverts: u32,
    edges: &[(u32, u32)],
    fixed: &[(u32, u32)],
    a: u32,
    b: u32,
) -> Vec<u64> {
    let m = edges.len();
    debug_assert!(m <= BUNKBED_EDGE_CEILING);
    let mut counts = vec![0u64; m + 1];
    let mut uf = UnionFind::new(nverts as usize);
    for mask in 0u32..(1u32 << m) {
        uf.reset();
        for &(x, y) in fixed {
            uf.union(x as usize, y as usize);
        }
        let mut bits = mask;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let (x, y) = edges[i];
            uf.union(x as usize, y as usize);
        }
        if uf.connected(a as usize, b as usize) {
            counts[mask.count_ones() as usize] += 1;
        }
    }
    counts
}

/// Σ_k counts[k] p^k (1-p)^(m-k) where m = counts.len() - 1.
fn binomial_mixture(counts: &[u64], p: &BigRational) -> BigRational {
    let m = counts.len() - 1;
    let q = BigRational::one() - p;
    let mut p_pow = vec![BigRational::one(); m + 1];
    let mut q_pow = vec![BigRational::one(); m + 1];
    for k in 1..=m {
        p_pow[k] = &p_pow[k - 1] * p;
        q_pow[k] = &q_pow[k - 1] * &q;
    }
    let mut acc = BigRational::zero();
    for (k, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        acc += BigRational::from_integer(BigInt::from(c)) * &p_pow[k] * &q_pow[m - k];
    }
    acc
}

fn check_bunkbed_ceiling(bb: &BunkbedGraph) -> Result<()> {
    let m = bb.edge_count();
    if m > BUNKBED_EDGE_CEILING {
        return Err(Error::ResourceLimit(format!(
            "bunkbed has {m} edges, exact enumeration capped at {BUNKBED_EDGE_CEILING}; \
             use the Monte Carlo estimator instead"
        )));
    }
    Ok(())
}

fn check_prob_param(p: &BigRational) -> Result<()> {
    if *p < BigRational::zero() || *p > BigRational::one() {
        return Err(Error::invalid("edge probability must lie in [0, 1]"));
    }
    Ok(())
}

/// Exact probability that two bunkbed vertices (indices in 0..2n) connect
/// when every edge is open independently with probability p.
pub fn bunkbed_connection(
    g: &SimpleGraph,
    a: u32,
    b: u32,
    p: &BigRational,
) -> Result<ExactProb> {
    let bb = build_bunkbed(g);
    check_bunkbed_ceiling(&bb)?;
    check_prob_param(p)?;
    let nn = bb.vertex_count();
    if a >= nn || b >= nn {
        return Err(Error::invalid("vertex index out of range for the bunkbed"));
    }
    if a == b {
        return Err(Error::invalid("connection endpoints must differ"));
    }
    let counts = subset_connection_counts(nn, &bb.all_edges(), &[], a, b);
    ExactProb::new(binomial_mixture(&counts, p))
}

/// Both probabilities of interest for a base pair (u, v): lower-to-lower
/// P(u1 <-> v1) and lower-to-upper P(u1 <-> v2), computed in one subset sweep.
pub fn bunkbed_probabilities(
    g: &SimpleGraph,
    u: u32,
    v: u32,
    p: &BigRational,
) -> Result<(ExactProb, ExactProb)> {
    let (same, cross) = pair_count_vectors(g, u, v)?;
    check_prob_param(p)?;
    let p11 = ExactProb::new(binomial_mixture(&same, p))?;
    let p12 = ExactProb::new(binomial_mixture(&cross, p))?;
    Ok((p11, p12))
}

/// Subset counts for both endpoints of interest in a single enumeration.
fn pair_count_vectors(g: &SimpleGraph, u: u32, v: u32) -> Result<(Vec<u64>, Vec<u64>)> {
    let n = g.vertex_count();
    if u >= n || v >= n {
        return Err(Error::invalid("base vertex index out of range"));
    }
    if u == v {
        return Err(Error::invalid("base vertices must differ"));
    }
    let bb = build_bunkbed(g);
    check_bunkbed_ceiling(&bb)?;
    let edges = bb.all_edges();
    let m = edges.len();
    let nn = bb.vertex_count() as usize;
    let v_up = bb.upper(v) as usize;
    let (u, v) = (u as usize, v as usize);
    let mut same = vec![0u64; m + 1];
    let mut cross = vec![0u64; m + 1];
    let mut uf = UnionFind::new(nn);
    for mask in 0u32..(1u32 << m) {
        uf.reset();
        let mut bits = mask;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let (x, y) = edges[i];
            uf.union(x as usize, y as usize);
        }
        let k = mask.count_ones() as usize;
        if uf.connected(u, v) {
            same[k] += 1;
        }
        if uf.connected(u, v_up) {
            cross[k] += 1;
        }
    }
    Ok((same, cross))
}

/// Where and by how much the lower-to-lower probability beat (or lost to)
/// the lower-to-upper one.
#[derive(Debug, Clone)]
pub struct BunkbedWitness {
    pub u: u32,
    pub v: u32,
    pub p: BigRational,
    pub p11: ExactProb,
    pub p12: ExactProb,
}

#[derive(Debug, Clone)]
pub struct BunkbedReport {
    /// min over pairs and grid points of P(u1<->v1) - P(u1<->v2).
    pub min_gap: BigRational,
    /// The pair and p value attaining the minimum.
    pub witness: BunkbedWitness,
    /// True iff some gap came out strictly negative.
    pub violation: bool,
    pub pairs_checked: usize,
    pub grid_size: usize,
}

/// Exact sweep over all ordered base pairs and every p in the grid.
pub fn bunkbed_check(g: &SimpleGraph, p_grid: &[BigRational]) -> Result<BunkbedReport> {
    let n = g.vertex_count();
    if n < 2 {
        return Err(Error::invalid("bunkbed check needs at least two base vertices"));
    }
    if p_grid.is_empty() {
        return Err(Error::invalid("probability grid must be non-empty"));
    }
    for p in p_grid {
        check_prob_param(p)?;
    }
    let mut best: Option<(BigRational, BunkbedWitness)> = None;
    let mut pairs_checked = 0usize;
    for u in 0..n {
        for v in 0..n {
            if u == v {
                continue;
            }
            pairs_checked += 1;
            let (same, cross) = pair_count_vectors(g, u, v)?;
            for p in p_grid {
                let p11 = binomial_mixture(&same, p);
                let p12 = binomial_mixture(&cross, p);
                let gap = &p11 - &p12;
                let better = match &best {
                    Some((g0, _)) => gap < *g0,
                    None => true,
                };
                if better {
                    best = Some((
                        gap,
                        BunkbedWitness {
                            u,
                            v,
                            p: p.clone(),
                            p11: ExactProb::new(p11.clone())?,
                            p12: ExactProb::new(p12.clone())?,
                        },
                    ));
                }
            }
        }
    }
    let (min_gap, witness) = best.expect("at least one ordered pair");
    let violation = min_gap < BigRational::zero();
    Ok(BunkbedReport {
        min_gap,
        witness,
        violation,
        pairs_checked,
        grid_size: p_grid.len(),
    })
}

#[derive(Debug, Clone)]
pub struct ConditionalBunkbedReport {
    pub min_gap: BigRational,
    pub witness: BunkbedWitness,
    pub violation: bool,
    pub pairs_checked: usize,
    /// Base vertices whose rung was conditioned open.
    pub open_verticals: Vec<u32>,
}

/// Same sweep, but with the rung states fixed: open exactly at the vertices
/// in `t`, closed elsewhere.  Only the horizontal edges stay random, so the
/// ceiling applies to 2|E| alone.
pub fn bunkbed_check_conditional(
    g: &SimpleGraph,
    t: &[u32],
    p: &BigRational,
) -> Result<ConditionalBunkbedReport> {
    let n = g.vertex_count();
    if n < 2 {
        return Err(Error::invalid("bunkbed check needs at least two base vertices"));
    }
    check_prob_param(p)?;
    let mut open = vec![false; n as usize];
    for &v in t {
        if v >= n {
            return Err(Error::invalid("conditioned vertex out of range"));
        }
        if open[v as usize] {
            return Err(Error::invalid("conditioned vertex listed twice"));
        }
        open[v as usize] = true;
    }
    let bb = build_bunkbed(g);
    let m = bb.horizontal_edges().len();
    if m > BUNKBED_EDGE_CEILING {
        return Err(Error::ResourceLimit(format!(
            "bunkbed has {m} horizontal edges, exact enumeration capped at {BUNKBED_EDGE_CEILING}"
        )));
    }
    let fixed: Vec<(u32, u32)> = bb
        .vertical_edges()
        .iter()
        .copied()
        .filter(|&(a, _)| open[a as usize])
        .collect();
    let nn = bb.vertex_count();
    let mut best: Option<(BigRational, BunkbedWitness)> = None;
    let mut pairs_checked = 0usize;
    for u in 0..n {
        for v in 0..n {
            if u == v {
                continue;
            }
            pairs_checked += 1;
            let same =
                subset_connection_counts(nn, bb.horizontal_edges(), &fixed, u, v);
            let cross =
                subset_connection_counts(nn, bb.horizontal_edges(), &fixed, u, bb.upper(v));
            let p11 = binomial_mixture(&same, p);
            let p12 = binomial_mixture(&cross, p);
            let gap = &p11 - &p12;
            let better = match &best {
                Some((g0, _)) => gap < *g0,
                None => true,
            };
            if better {
                best = Some((
                    gap,
                    BunkbedWitness {
                        u,
                        v,
                        p: p.clone(),
                        p11: ExactProb::new(p11.clone())?,
                        p12: ExactProb::new(p12.clone())?,
                    },
                ));
            }
        }
    }
    let (min_gap, witness) = best.expect("at least one ordered pair");
    let violation = min_gap < BigRational::zero();
    Ok(ConditionalBunkbedReport {
        min_gap,
        witness,
        violation,
        pairs_checked,
        open_verticals: t.to_vec(),
    })
}

/// Monte Carlo estimates of (P(u1<->v1), P(u1<->v2)) for graphs past the
/// exact ceiling.  Both indicators are read off the same sampled
/// configuration per trial, which makes their difference less noisy than
/// independent runs would be.
pub fn bunkbed_monte_carlo(
    g: &SimpleGraph,
    u: u32,
    v: u32,
    p: f64,
    trials: u64,
    stream: &RngStream,
) -> Result<(EstimateCI, EstimateCI)> {
    let n = g.vertex_count();
    if u >= n || v >= n {
        return Err(Error::invalid("base vertex index out of range"));
    }
    if u == v {
        return Err(Error::invalid("base vertices must differ"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("edge probability must lie in [0, 1]"));
    }
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let bb = build_bunkbed(g);
    let edges = bb.all_edges();
    let nn = bb.vertex_count() as usize;
    let v_up = bb.upper(v) as usize;
    let (u, v) = (u as usize, v as usize);
    let (same_hits, cross_hits) = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut sub = stream.substream(&[TAG_BUNKBED_TRIAL, t]);
            let mut uf = UnionFind::new(nn);
            for &(x, y) in &edges {
                if sub.bernoulli(p).expect("p validated above") {
                    uf.union(x as usize, y as usize);
                }
            }
            (
                u64::from(uf.connected(u, v)),
                u64::from(uf.connected(u, v_up)),
            )
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok((
        estimate_proportion(same_hits, trials, 0.95)?,
        estimate_proportion(cross_hits, trials, 0.95)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{connected_graphs_upto, SimpleGraph};

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn doubling_produces_expected_shapes() {
        let k2 = SimpleGraph::complete(2);
        let bb = build_bunkbed(&k2);
        assert_eq!(bb.vertex_count(), 4);
        assert_eq!(bb.edge_count(), 4);
        assert_eq!(bb.horizontal_edges(), &[(0, 1), (2, 3)]);
        assert_eq!(bb.vertical_edges(), &[(0, 2), (1, 3)]);
        assert_eq!(bb.upper(1), 3);

        let k3 = SimpleGraph::complete(3);
        let bb = build_bunkbed(&k3);
        assert_eq!(bb.vertex_count(), 6);
        assert_eq!(bb.edge_count(), 9);

        let p3 = SimpleGraph::path(3);
        let bb = build_bunkbed(&p3);
        assert_eq!(bb.vertex_count(), 6);
        assert_eq!(bb.edge_count(), 7);
    }

    #[test]
    fn exact_prob_guards_range() {
        assert!(ExactProb::new(ratio(1, 2)).is_ok());
        assert!(ExactProb::new(ratio(3, 2)).is_err());
        assert!(ExactProb::new(ratio(-1, 5)).is_err());
        assert_eq!(parse_exact_prob("9/16").unwrap().value(), &ratio(9, 16));
        assert!(parse_exact_prob("5/4").is_err());
        assert!(parse_exact_prob("zebra").is_err());
    }

    #[test]
    fn degenerate_probabilities_pin_down() {
        let k3 = SimpleGraph::complete(3);
        let (p11, p12) = bunkbed_probabilities(&k3, 0, 1, &ratio(0, 1)).unwrap();
        assert_eq!(p11.value(), &BigRational::zero());
        assert_eq!(p12.value(), &BigRational::zero());
        let (p11, p12) = bunkbed_probabilities(&k3, 0, 1, &ratio(1, 1)).unwrap();
        assert_eq!(p11.value(), &BigRational::one());
        assert_eq!(p12.value(), &BigRational::one());
    }

    // Hand count for the single-edge base at p = 1/2.  The bunkbed is a
    // 4-cycle 0-1-3-2-0, every subset has weight 1/16.  0 and 1 connect via
    // the direct edge (8 subsets) or, failing that, the three-edge detour
    // (1 subset): 9/16.  0 and 3 sit at distance two, connected through one
    // of the two-edge arcs: 4 + 4 - 1 = 7 subsets: 7/16.
    #[test]
    fn single_edge_half_matches_hand_count() {
        let k2 = SimpleGraph::complete(2);
        let (p11, p12) = bunkbed_probabilities(&k2, 0, 1, &ratio(1, 2)).unwrap();
        assert_eq!(p11.value(), &ratio(9, 16));
        assert_eq!(p12.value(), &ratio(7, 16));
    }

    #[test]
    fn mixture_over_all_subsets_sums_to_one() {
        // Take counts[k] = C(m, k); the mixture telescopes to 1 exactly.
        for m in [4usize, 9, 16] {
            let mut counts = vec![0u64; m + 1];
            counts[0] = 1;
            for k in 1..=m {
                counts[k] = counts[k - 1] * (m - k + 1) as u64 / k as u64;
            }
            for p in [ratio(1, 3), ratio(2, 7), ratio(9, 10)] {
                assert_eq!(binomial_mixture(&counts, &p), BigRational::one());
            }
        }
    }

    #[test]
    fn connection_is_monotone_in_p() {
        let k3 = SimpleGraph::complete(3);
        let grid: Vec<BigRational> = (0..=10).map(|k| ratio(k, 10)).collect();
        let mut prev: Option<(BigRational, BigRational)> = None;
        for p in &grid {
            let (p11, p12) = bunkbed_probabilities(&k3, 0, 2, p).unwrap();
            if let Some((q11, q12)) = prev {
                assert!(p11.value() >= &q11, "lower-lower dipped as p grew");
                assert!(p12.value() >= &q12, "lower-upper dipped as p grew");
            }
            prev = Some((p11.into_value(), p12.into_value()));
        }
    }

    #[test]
    fn sheet_swap_symmetry_is_exact() {
        let cases = [SimpleGraph::complete(3), SimpleGraph::path(4)];
        let p = ratio(2, 5);
        for g in &cases {
            let n = g.vertex_count();
            let bb = build_bunkbed(g);
            for (u, v) in [(0u32, 1u32), (1, 2)] {
                let lower = bunkbed_connection(g, u, v, &p).unwrap();
                let upper = bunkbed_connection(g, bb.upper(u), bb.upper(v), &p).unwrap();
                assert_eq!(lower, upper);
                let up_cross = bunkbed_connection(g, u, bb.upper(v), &p).unwrap();
                let down_cross = bunkbed_connection(g, bb.upper(u), v, &p).unwrap();
                assert_eq!(up_cross, down_cross);
                // and the doubled graph really uses those indices
                assert!(n >= 2);
            }
        }
    }

    #[test]
    fn disconnected_pair_gives_zero_gap() {
        let g = SimpleGraph::new(4, &[(0, 1), (2, 3)]).unwrap();
        let (p11, p12) = bunkbed_probabilities(&g, 0, 2, &ratio(1, 2)).unwrap();
        assert_eq!(p11.value(), &BigRational::zero());
        assert_eq!(p12.value(), &BigRational::zero());
    }

    #[test]
    fn sweep_small_connected_graphs_never_goes_negative() {
        let grid: Vec<BigRational> = (1..=9).map(|k| ratio(k, 10)).collect();
        let mut graphs_checked = 0usize;
        for g in connected_graphs_upto(4).unwrap() {
            if g.vertex_count() < 2 {
                assert!(bunkbed_check(&g, &grid).is_err());
                continue;
            }
            let report = bunkbed_check(&g, &grid).unwrap();
            assert!(
                !report.violation,
                "negative gap {} on {} vertices at p={} pair ({},{})",
                report.min_gap,
                g.vertex_count(),
                report.witness.p,
                report.witness.u,
                report.witness.v
            );
            assert!(report.min_gap >= BigRational::zero());
            // witness data must be reproducible
            let w = &report.witness;
            let (p11, p12) = bunkbed_probabilities(&g, w.u, w.v, &w.p).unwrap();
            assert_eq!(&p11, &w.p11);
            assert_eq!(&p12, &w.p12);
            assert_eq!(p11.value() - p12.value(), report.min_gap);
            let n = g.vertex_count() as usize;
            assert_eq!(report.pairs_checked, n * (n - 1));
            graphs_checked += 1;
        }
        assert_eq!(graphs_checked, 9); // all of them except the one-vertex graph
    }

    #[test]
    fn conditional_sweep_and_boundary_cases() {
        let p = ratio(1, 2);
        for g in [SimpleGraph::complete(2), SimpleGraph::path(3)] {
            let n = g.vertex_count();
            // all rungs open: the two sheets are interchangeable, so the two
            // probabilities agree pair by pair and the minimal gap is 0
            let all: Vec<u32> = (0..n).collect();
            let report = bunkbed_check_conditional(&g, &all, &p).unwrap();
            assert_eq!(report.min_gap, BigRational::zero());
            assert!(!report.violation);

            // no rungs open: the sheets never talk, lower-to-upper is 0
            let report = bunkbed_check_conditional(&g, &[], &p).unwrap();
            assert_eq!(report.witness.p12.value(), &BigRational::zero());
            assert!(!report.violation);

            // every conditioning set
            for mask in 0u32..(1 << n) {
                let t: Vec<u32> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
                let report = bunkbed_check_conditional(&g, &t, &p).unwrap();
                assert!(
                    !report.violation,
                    "conditional gap {} with rungs {:?}",
                    report.min_gap, t
                );
            }
        }
        let k3 = SimpleGraph::complete(3);
        assert!(bunkbed_check_conditional(&k3, &[7], &p).is_err());
        assert!(bunkbed_check_conditional(&k3, &[1, 1], &p).is_err());
    }

    #[test]
    fn parameter_validation_bites() {
        let k3 = SimpleGraph::complete(3);
        let half = ratio(1, 2);
        assert!(bunkbed_probabilities(&k3, 0, 0, &half).is_err());
        assert!(bunkbed_probabilities(&k3, 0, 9, &half).is_err());
        assert!(bunkbed_probabilities(&k3, 0, 1, &ratio(3, 2)).is_err());
        assert!(bunkbed_check(&k3, &[]).is_err());
        // 2*10 + 5 = 25 edges is one past the ceiling
        let k5 = SimpleGraph::complete(5);
        assert!(matches!(
            bunkbed_probabilities(&k5, 0, 1, &half),
            Err(Error::ResourceLimit(_))
        ));
        // conditional only enumerates horizontal edges: K5 fits (20), K6 not (30)
        assert!(bunkbed_check_conditional(&k5, &[0, 1], &half).is_ok());
        assert!(matches!(
            bunkbed_check_conditional(&SimpleGraph::complete(6), &[], &half),
            Err(Error::ResourceLimit(_))
        ));
    }

    #[test]
    fn monte_carlo_agrees_with_exact_values() {
        let k2 = SimpleGraph::complete(2);
        let stream = RngStream::derive(2026, 77);
        let trials = 200_000;
        let (same, cross) = bunkbed_monte_carlo(&k2, 0, 1, 0.5, trials, &stream).unwrap();
        let se_same = (0.5625 * (1.0 - 0.5625) / trials as f64).sqrt();
        let se_cross = (0.4375 * (1.0 - 0.4375) / trials as f64).sqrt();
        assert!((same.point - 0.5625).abs() < 4.0 * se_same, "got {}", same.point);
        assert!((cross.point - 0.4375).abs() < 4.0 * se_cross, "got {}", cross.point);

        let (same0, cross0) = bunkbed_monte_carlo(&k2, 0, 1, 0.0, 5_000, &stream).unwrap();
        assert_eq!(same0.point, 0.0);
        assert_eq!(cross0.point, 0.0);

        // past the exact ceiling the estimator is the only path; smoke it
        let pete = SimpleGraph::petersen();
        let (s, c) = bunkbed_monte_carlo(&pete, 0, 7, 0.5, 20_000, &stream).unwrap();
        assert!(s.point > 0.0 && s.point < 1.0);
        assert!(c.point > 0.0 && c.point < 1.0);
        assert!(s.lo <= s.point && s.point <= s.hi);
        assert!(bunkbed_monte_carlo(&pete, 0, 0, 0.5, 10, &stream).is_err());
        assert!(bunkbed_monte_carlo(&pete, 0, 1, 1.5, 10, &stream).is_err());
        assert!(bunkbed_monte_carlo(&pete, 0, 1, 0.5, 0, &stream).is_err());
    }
}
