//! Exact pairwise negative-association checks for random subgraph models.
//!
//! Three families of edge subsets of a finite graph are enumerated exactly:
//! forests (acyclic subsets), connected spanning subgraphs, and spanning
//! trees.  For the uniform measure on each family we tabulate, per edge and
//! per unordered edge pair, how many members contain them, and then test the
//! pairwise inequality P(e, f both in F) ≤ P(e in F) · P(f in F) in exact
//! rational arithmetic.  For spanning trees the inequality is a theorem, so
//! [`ust_check`] doubles as a self-test: a violation there means the
//! enumeration is broken, not the mathematics.
//!
//! Everything is capped at [`FOREST_EDGE_CEILING`] edges; past that the
//! subset space is too large to sweep honestly.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::graphs::SimpleGraph;
use crate::util::UnionFind;
use crate::{Error, Result};

/// Largest edge count we enumerate subsets over.
pub const FOREST_EDGE_CEILING: usize = 24;

/// Which random subgraph family a check ran over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubgraphFamily {
    Forests,
    ConnectedSpanning,
    SpanningTrees,
}

impl fmt::Display for SubgraphFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SubgraphFamily::Forests => "uniform forest",
            SubgraphFamily::ConnectedSpanning => "uniform connected subgraph",
            SubgraphFamily::SpanningTrees => "uniform spanning tree",
        };
        f.write_str(name)
    }
}

/// Exact occupation counts for one family on one graph.
///
/// `single[e]` counts members containing edge index `e`; `pair[e][f]` counts
/// members containing both (symmetric, diagonal unused and left at zero).
#[derive(Debug, Clone)]
pub struct ForestStats {
    pub graph: SimpleGraph,
    pub family: SubgraphFamily,
    pub total: u64,
    pub single: Vec<u64>,
    pub pair: Vec<Vec<u64>>,
}

impl ForestStats {
    pub fn edge_probability(&self, e: usize) -> BigRational {
        ratio_u64(self.single[e], self.total)
    }

    pub fn pair_probability(&self, e: usize, f: usize) -> BigRational {
        assert_ne!(e, f, "pair probability is about distinct edges");
        ratio_u64(self.pair[e][f], self.total)
    }
}

fn ratio_u64(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn check_edge_ceiling(g: &SimpleGraph) -> Result<()> {
    let m = g.edge_count();
    if m > FOREST_EDGE_CEILING {
        return Err(Error::ResourceLimit(format!(
            "graph has {m} edges, exact subset enumeration capped at {FOREST_EDGE_CEILING}"
        )));
    }
    Ok(())
}

fn record_member(chosen: &[usize], total: &mut u64, single: &mut [u64], pair: &mut [Vec<u64>]) {
    *total += 1;
    for (i, &e) in chosen.iter().enumerate() {
        single[e] += 1;
        for &f in &chosen[i + 1..] {
            pair[e][f] += 1;
            pair[f][e] += 1;
        }
    }
}

/// Depth-first walk over acyclic subsets: each edge is excluded, then
/// included when it joins two distinct components.  `need` (= n-1) restricts
/// recording to spanning trees; `None` records every forest.
fn explore_forests(
    edges: &[(u32, u32)],
    idx: usize,
    uf: &UnionFind,
    chosen: &mut Vec<usize>,
    need: Option<usize>,
    total: &mut u64,
    single: &mut [u64],
    pair: &mut [Vec<u64>],
) {
    if idx == edges.len() {
        match need {
            Some(k) if chosen.len() != k => {}
            _ => record_member(chosen, total, single, pair),
        }
        return;
    }
    // a spanning tree still needs (need - chosen) more edges out of what's left
    if let Some(k) = need {
        if chosen.len() + (edges.len() - idx) < k {
            return;
        }
    }
    explore_forests(edges, idx + 1, uf, chosen, need, total, single, pair);
    let (a, b) = edges[idx];
    let mut probe = uf.clone();
    if probe.union(a as usize, b as usize) {
        chosen.push(idx);
        explore_forests(edges, idx + 1, &probe, chosen, need, total, single, pair);
        chosen.pop();
    }
}

fn family_counts(g: &SimpleGraph, family: SubgraphFamily) -> Result<(u64, Vec<u64>, Vec<Vec<u64>>)> {
    check_edge_ceiling(g)?;
    let n = g.vertex_count() as usize;
    let edges = g.edges();
    let m = edges.len();
    let mut total = 0u64;
    let mut single = vec![0u64; m];
    let mut pair = vec![vec![0u64; m]; m];
    match family {
        SubgraphFamily::Forests => {
            let uf = UnionFind::new(n);
            let mut chosen = Vec::with_capacity(m);
            explore_forests(edges, 0, &uf, &mut chosen, None, &mut total, &mut single, &mut pair);
        }
        SubgraphFamily::SpanningTrees => {
            let uf = UnionFind::new(n);
            let mut chosen = Vec::with_capacity(m);
            explore_forests(
                edges,
                0,
                &uf,
                &mut chosen,
                Some(n - 1),
                &mut total,
                &mut single,
                &mut pair,
            );
        }
        SubgraphFamily::ConnectedSpanning => {
            let mut uf = UnionFind::new(n);
            let mut chosen = Vec::with_capacity(m);
            for mask in 0u32..(1u32 << m) {
                uf.reset();
                chosen.clear();
                let mut components = n;
                let mut bits = mask;
                while bits != 0 {
                    let i = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    chosen.push(i);
                    let (a, b) = edges[i];
                    if uf.union(a as usize, b as usize) {
                        components -= 1;
                    }
                }
                if components == 1 {
                    record_member(&chosen, &mut total, &mut single, &mut pair);
                }
            }
        }
    }
    Ok((total, single, pair))
}

/// Count every forest of `g`, with per-edge and per-pair membership tallies.
pub fn enumerate_forests(g: &SimpleGraph) -> Result<ForestStats> {
    let (total, single, pair) = family_counts(g, SubgraphFamily::Forests)?;
    Ok(ForestStats {
        graph: g.clone(),
        family: SubgraphFamily::Forests,
        total,
        single,
        pair,
    })
}

/// The edge pair attaining the worst excess, with both sides of the
/// inequality as exact rationals.
#[derive(Debug, Clone)]
pub struct PairWitness {
    pub e: (u32, u32),
    pub f: (u32, u32),
    /// P(both edges in the random subgraph).
    pub joint: BigRational,
    /// P(first edge) * P(second edge).
    pub product: BigRational,
}

#[derive(Debug, Clone)]
pub struct PairAssociationReport {
    pub family: SubgraphFamily,
    pub total: u64,
    /// max over unordered pairs e != f of P(e,f) - P(e)P(f); zero when the
    /// graph has fewer than two edges (vacuous pass).
    pub max_excess: BigRational,
    pub witness: Option<PairWitness>,
    /// True iff max_excess > 0, i.e. some pair is positively associated.
    pub violation: bool,
    pub pairs_checked: usize,
}

fn pair_association_report(
    g: &SimpleGraph,
    family: SubgraphFamily,
) -> Result<PairAssociationReport> {
    let (total, single, pair) = family_counts(g, family)?;
    if total == 0 {
        return Err(Error::invalid(
            "family is empty on this graph; probabilities are undefined",
        ));
    }
    let m = single.len();
    let edges = g.edges();
    let mut best: Option<(BigRational, PairWitness)> = None;
    let mut pairs_checked = 0usize;
    for e in 0..m {
        for f in (e + 1)..m {
            pairs_checked += 1;
            // compare joint*total vs single_e*single_f; exact in u128
            let lhs = pair[e][f] as u128 * total as u128;
            let rhs = single[e] as u128 * single[f] as u128;
            let excess_num = BigInt::from(lhs) - BigInt::from(rhs);
            let excess = BigRational::new(
                excess_num,
                BigInt::from(total as u128 * total as u128),
            );
            let better = match &best {
                Some((top, _)) => excess > *top,
                None => true,
            };
            if better {
                best = Some((
                    excess,
                    PairWitness {
                        e: edges[e],
                        f: edges[f],
                        joint: ratio_u64(pair[e][f], total),
                        product: ratio_u64(single[e], total) * ratio_u64(single[f], total),
                    },
                ));
            }
        }
    }
    let (max_excess, witness) = match best {
        Some((x, w)) => (x, Some(w)),
        None => (BigRational::zero(), None),
    };
    let violation = max_excess > BigRational::zero();
    Ok(PairAssociationReport {
        family,
        total,
        max_excess,
        witness,
        violation,
        pairs_checked,
    })
}

/// Pairwise negative-association check for the uniform random forest.
pub fn usf_check(g: &SimpleGraph) -> Result<PairAssociationReport> {
    pair_association_report(g, SubgraphFamily::Forests)
}

/// Same check over uniform connected spanning subgraphs; needs `g` connected.
pub fn ucs_check(g: &SimpleGraph) -> Result<PairAssociationReport> {
    if !g.is_connected() {
        return Err(Error::invalid(
            "connected spanning subgraphs need a connected graph",
        ));
    }
    pair_association_report(g, SubgraphFamily::ConnectedSpanning)
}

/// Same check over uniform spanning trees; needs `g` connected.  The
/// inequality is a theorem here, so a violation can only mean a bug.
pub fn ust_check(g: &SimpleGraph) -> Result<PairAssociationReport> {
    if !g.is_connected() {
        return Err(Error::invalid("spanning trees need a connected graph"));
    }
    pair_association_report(g, SubgraphFamily::SpanningTrees)
}

/// Forest measure biased by the cluster-count factor q^(components), with
/// edges weighted p / (1-p).  On forests components = n - |F|, so the bias
/// is equivalent to an edge-count tilt; q = 1, p = 1/2 recovers the uniform
/// forest.  Probabilities stay exact rationals.
#[derive(Debug, Clone)]
pub struct WeightedForestStats {
    /// Σ over forests of p^|F| (1-p)^(m-|F|) q^(n-|F|).
    pub partition: BigRational,
    pub edge_probability: Vec<BigRational>,
    pub pair_probability: Vec<Vec<BigRational>>,
}

pub fn enumerate_forests_weighted(
    g: &SimpleGraph,
    p: &BigRational,
    q: &BigRational,
) -> Result<WeightedForestStats> {
    if *p <= BigRational::zero() || *p >= BigRational::one() {
        return Err(Error::invalid("edge weight p must lie strictly between 0 and 1"));
    }
    if *q <= BigRational::zero() {
        return Err(Error::invalid("cluster weight q must be positive"));
    }
    check_edge_ceiling(g)?;
    let n = g.vertex_count() as usize;
    let m = g.edge_count();
    // weight of a forest with k edges; forests never exceed n-1 of them
    let kmax = m.min(n.saturating_sub(1));
    let weight_by_size: Vec<BigRational> = {
        let one = BigRational::one();
        let closed = &one - p;
        (0..=kmax)
            .map(|k| pow_ratio(p, k) * pow_ratio(&closed, m - k) * pow_ratio(q, n - k))
            .collect()
    };
    // re-walk the family, accumulating weights instead of counts
    let mut partition = BigRational::zero();
    let mut single = vec![BigRational::zero(); m];
    let mut pair = vec![vec![BigRational::zero(); m]; m];
    let uf = UnionFind::new(n);
    let mut chosen = Vec::with_capacity(m);
    explore_weighted(
        g.edges(),
        0,
        &uf,
        &mut chosen,
        &weight_by_size,
        &mut partition,
        &mut single,
        &mut pair,
    );
    debug_assert!(partition > BigRational::zero());
    let edge_probability = single.into_iter().map(|w| w / &partition).collect();
    let pair_probability = pair
        .into_iter()
        .map(|row| row.into_iter().map(|w| w / &partition).collect())
        .collect();
    Ok(WeightedForestStats {
        partition,
        edge_probability,
        pair_probability,
    })
}

fn pow_ratio(x: &BigRational, k: usize) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..k {
        acc *= x;
    }
    acc
}

#[allow(clippy::too_many_arguments)]
fn explore_weighted(
    edges: &[(u32, u32)],
    idx: usize,
    uf: &UnionFind,
    chosen: &mut Vec<usize>,
    weight_by_size: &[BigRational],
    partition: &mut BigRational,
    single: &mut [BigRational],
    pair: &mut [Vec<BigRational>],
) {
    if idx == edges.len() {
        let w = &weight_by_size[chosen.len()];
        *partition += w;
        for (i, &e) in chosen.iter().enumerate() {
            single[e] += w;
            for &f in &chosen[i + 1..] {
                pair[e][f] += w;
                pair[f][e] += w;
            }
        }
        return;
    }
    explore_weighted(edges, idx + 1, uf, chosen, weight_by_size, partition, single, pair);
    let (a, b) = edges[idx];
    let mut probe = uf.clone();
    if probe.union(a as usize, b as usize) {
        chosen.push(idx);
        explore_weighted(edges, idx + 1, &probe, chosen, weight_by_size, partition, single, pair);
        chosen.pop();
    }
}
