//! Small simple graphs: validated construction, graph6 interchange, and an
//! exhaustive corpus of connected graphs on up to six vertices (one
//! representative per isomorphism class), for use by the exact inequality
//! sweeps.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use crate::util::UnionFind;
use crate::{Error, Result};

/// Loop-free graph without multiple edges; edges are stored normalized
/// (small endpoint first) and sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SimpleGraph {
    n: u32,
    edges: Vec<(u32, u32)>,
}

impl SimpleGraph {
    pub fn new(n: u32, edges: &[(u32, u32)]) -> Result<SimpleGraph> {
        if n == 0 {
            return Err(Error::invalid("a graph needs at least one vertex"));
        }
        let mut norm: Vec<(u32, u32)> = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a == b {
                return Err(Error::invalid(format!("loop at vertex {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::invalid(format!(
                    "edge ({a}, {b}) outside vertex range 0..{n}"
                )));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        if norm.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("multiple edge in input"));
        }
        Ok(SimpleGraph { n, edges: norm })
    }

    pub fn vertex_count(&self) -> u32 {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.n as usize];
        for &(a, b) in &self.edges {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        let mut uf = UnionFind::new(self.n as usize);
        let mut parts = self.n as usize;
        for &(a, b) in &self.edges {
            if uf.union(a as usize, b as usize) {
                parts -= 1;
            }
        }
        parts == 1
    }

    pub fn complete(n: u32) -> SimpleGraph {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                edges.push((i, j));
            }
        }
        SimpleGraph::new(n.max(1), &edges).expect("complete graph is simple")
    }

    /// Path on n vertices (n-1 edges).
    pub fn path(n: u32) -> SimpleGraph {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        SimpleGraph::new(n.max(1), &edges).expect("path is simple")
    }

    pub fn cycle(n: u32) -> Result<SimpleGraph> {
        if n < 3 {
            return Err(Error::invalid("a cycle needs at least 3 vertices"));
        }
        let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        edges.push((n - 1, 0));
        SimpleGraph::new(n, &edges)
    }

    /// The Petersen graph: outer 5-cycle, inner 5-star, five spokes.
    pub fn petersen() -> SimpleGraph {
        let mut edges = Vec::new();
        for i in 0..5u32 {
            edges.push((i, (i + 1) % 5));
            edges.push((5 + i, 5 + (i + 2) % 5));
            edges.push((i, 5 + i));
        }
        SimpleGraph::new(10, &edges).expect("petersen is simple")
    }
}

// ---------------------------------------------------------------------------
// graph6

/// Parse one graph6 line (n ≤ 62, the single-byte size form).
pub fn parse_graph6(line: &str) -> Result<SimpleGraph> {
    let line = line.trim().strip_prefix(">>graph6<<").unwrap_or(line.trim());
    let bytes = line.as_bytes();
    if bytes.is_empty() {
        return Err(Error::invalid("empty graph6 line"));
    }
    if bytes.iter().any(|b| !(63..=126).contains(b)) {
        return Err(Error::invalid("graph6 byte outside the printable range 63..=126"));
    }
    let n = (bytes[0] - 63) as u32;
    if bytes[0] == 126 {
        return Err(Error::Unsupported(
            "multi-byte graph6 sizes (n > 62) are not supported".into(),
        ));
    }
    if n == 0 {
        return Err(Error::invalid("graph6 line encodes an empty graph"));
    }
    let bit_count = (n * (n - 1) / 2) as usize;
    let expect_bytes = bit_count.div_ceil(6);
    let data = &bytes[1..];
    if data.len() != expect_bytes {
        return Err(Error::invalid(format!(
            "graph6 body has {} bytes, expected {expect_bytes} for n={n}",
            data.len()
        )));
    }
    let mut bits = Vec::with_capacity(bit_count + 6);
    for &b in data {
        let v = b - 63;
        for k in (0..6).rev() {
            bits.push((v >> k) & 1 == 1);
        }
    }
    if bits[bit_count..].iter().any(|&b| b) {
        return Err(Error::invalid("graph6 padding bits are not zero"));
    }
    let mut edges = Vec::new();
    let mut idx = 0;
    for j in 1..n {
        for i in 0..j {
            if bits[idx] {
                edges.push((i, j));
            }
            idx += 1;
        }
    }
    SimpleGraph::new(n, &edges)
}

/// Encode as a graph6 line (n ≤ 62).
pub fn graph6_string(g: &SimpleGraph) -> Result<String> {
    let n = g.vertex_count();
    if n > 62 {
        return Err(Error::Unsupported(
            "multi-byte graph6 sizes (n > 62) are not supported".into(),
        ));
    }
    let mut present = vec![false; (n * n) as usize];
    for &(a, b) in g.edges() {
        present[(a * n + b) as usize] = true;
    }
    let mut bits = Vec::new();
    for j in 1..n {
        for i in 0..j {
            bits.push(present[(i * n + j) as usize]);
        }
    }
    while bits.len() % 6 != 0 {
        bits.push(false);
    }
    let mut out = String::new();
    out.push((n as u8 + 63) as char);
    for chunk in bits.chunks(6) {
        let mut v = 0u8;
        for (k, &b) in chunk.iter().enumerate() {
            if b {
                v |= 1 << (5 - k);
            }
        }
        out.push((v + 63) as char);
    }
    Ok(out)
}

/// Parse a whole graph6 file; blank lines are skipped and errors carry the
/// 1-based line number.
pub fn read_graph6_lines(text: &str) -> Result<Vec<SimpleGraph>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_graph6(line) {
            Ok(g) => out.push(g),
            Err(e) => {
                return Err(Error::Parse(format!("line {}: {e}", k + 1)));
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// the small connected corpus

const CORPUS_MAX_VERTICES: u32 = 6;

fn pair_table(n: u32) -> Vec<(u32, u32)> {
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j));
        }
    }
    pairs
}

fn permutations(n: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut items: Vec<u32> = (0..n).collect();
    fn go(k: usize, items: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            go(k + 1, items, out);
            items.swap(k, i);
        }
    }
    go(0, &mut items, &mut out);
    out
}

fn mask_connected(mask: u64, n: u32, pairs: &[(u32, u32)]) -> bool {
    let mut uf = UnionFind::new(n as usize);
    let mut parts = n as usize;
    for (k, &(a, b)) in pairs.iter().enumerate() {
        if mask >> k & 1 == 1 && uf.union(a as usize, b as usize) {
            parts -= 1;
        }
    }
    parts == 1
}

/// Every connected graph with between 1 and `max_n` vertices, one per
/// isomorphism class, in a fixed deterministic order. Classes are found by
/// exhausting labeled graphs and keeping the least adjacency bitmask over all
/// vertex relabelings.
pub fn connected_graphs_upto(max_n: u32) -> Result<Vec<SimpleGraph>> {
    if max_n == 0 {
        return Err(Error::invalid("need at least one vertex"));
    }
    if max_n > CORPUS_MAX_VERTICES {
        return Err(Error::ResourceLimit(format!(
            "connected corpus is capped at {CORPUS_MAX_VERTICES} vertices (asked for {max_n})"
        )));
    }
    static FULL: OnceLock<Vec<SimpleGraph>> = OnceLock::new();
    let full = FULL.get_or_init(|| {
        let mut graphs = Vec::new();
        for n in 1..=CORPUS_MAX_VERTICES {
            let pairs = pair_table(n);
            let perms = permutations(n);
            // remap tables: bit k moves to remap[p][k]
            let mut remap = Vec::with_capacity(perms.len());
            for perm in &perms {
                let table: Vec<usize> = pairs
                    .iter()
                    .map(|&(i, j)| {
                        let (a, b) = (perm[i as usize], perm[j as usize]);
                        let (a, b) = (a.min(b), a.max(b));
                        pairs.iter().position(|&p| p == (a, b)).expect("pair exists")
                    })
                    .collect();
                remap.push(table);
            }
            let mut canon: BTreeSet<u64> = BTreeSet::new();
            for mask in 0..(1u64 << pairs.len()) {
                if !mask_connected(mask, n, &pairs) {
                    continue;
                }
                let mut least = u64::MAX;
                for table in &remap {
                    let mut m = 0u64;
                    for (k, &to) in table.iter().enumerate() {
                        if mask >> k & 1 == 1 {
                            m |= 1 << to;
                        }
                    }
                    least = least.min(m);
                }
                canon.insert(least);
            }
            for mask in canon {
                let edges: Vec<(u32, u32)> = pairs
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask >> k & 1 == 1)
                    .map(|(_, &p)| p)
                    .collect();
                graphs.push(SimpleGraph::new(n, &edges).expect("corpus graph is simple"));
            }
        }
        graphs
    });
    Ok(full.iter().filter(|g| g.vertex_count() <= max_n).cloned().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructor_normalizes_and_rejects() {
        let g = SimpleGraph::new(4, &[(3, 1), (0, 2), (1, 0)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 3)]);
        assert!(SimpleGraph::new(3, &[(1, 1)]).is_err(), "loop");
        assert!(SimpleGraph::new(3, &[(0, 1), (1, 0)]).is_err(), "doubled edge");
        assert!(SimpleGraph::new(3, &[(0, 3)]).is_err(), "endpoint out of range");
        assert!(SimpleGraph::new(0, &[]).is_err(), "no vertices");
    }

    #[test]
    fn named_graphs_have_expected_shape() {
        let k4 = SimpleGraph::complete(4);
        assert_eq!((k4.vertex_count(), k4.edge_count()), (4, 6));
        assert!(k4.is_connected());
        let p3 = SimpleGraph::path(3);
        assert_eq!((p3.vertex_count(), p3.edge_count()), (3, 2));
        let c5 = SimpleGraph::cycle(5).unwrap();
        assert_eq!(c5.edge_count(), 5);
        assert!(SimpleGraph::cycle(2).is_err());
        let pet = SimpleGraph::petersen();
        assert_eq!((pet.vertex_count(), pet.edge_count()), (10, 15));
        assert!(pet.is_connected());
        assert!(pet.adjacency().iter().all(|nb| nb.len() == 3), "petersen is cubic");
        let disconnected = SimpleGraph::new(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(!disconnected.is_connected());
        let lonely = SimpleGraph::new(1, &[]).unwrap();
        assert!(lonely.is_connected());
    }

    #[test]
    fn graph6_known_vectors_and_roundtrip() {
        // standard encodings of the small complete graphs
        assert_eq!(graph6_string(&SimpleGraph::complete(2)).unwrap(), "A_");
        assert_eq!(graph6_string(&SimpleGraph::complete(3)).unwrap(), "Bw");
        assert_eq!(graph6_string(&SimpleGraph::complete(4)).unwrap(), "C~");
        let k3 = parse_graph6("Bw").unwrap();
        assert_eq!(k3.edges(), SimpleGraph::complete(3).edges());
        let back = parse_graph6(&graph6_string(&SimpleGraph::petersen()).unwrap()).unwrap();
        assert_eq!(back.edges(), SimpleGraph::petersen().edges());
        // header prefix is tolerated
        assert_eq!(parse_graph6(">>graph6<<A_").unwrap().edge_count(), 1);
    }

    #[test]
    fn graph6_rejects_malformed_lines() {
        assert!(parse_graph6("").is_err());
        assert!(parse_graph6("B").is_err(), "truncated body");
        assert!(parse_graph6("Bww").is_err(), "overlong body");
        assert!(parse_graph6("B\u{1}").is_err(), "byte below 63");
        // padding bits must be zero: n=2 needs 1 bit, '~'-63 = 63 sets all six
        assert!(parse_graph6("A~").is_err());
        let multi = "A_\nBw\n\nC~\n";
        assert_eq!(read_graph6_lines(multi).unwrap().len(), 3);
        let bad = "A_\nB\n";
        let err = read_graph6_lines(bad).unwrap_err().to_string();
        assert!(err.contains("line 2"), "error should name the line: {err}");
    }

    #[test]
    fn corpus_counts_match_known_values() {
        let all = connected_graphs_upto(6).unwrap();
        let count_n = |n: u32| all.iter().filter(|g| g.vertex_count() == n).count();
        assert_eq!(count_n(1), 1);
        assert_eq!(count_n(2), 1);
        assert_eq!(count_n(3), 2);
        assert_eq!(count_n(4), 6);
        assert_eq!(count_n(5), 21);
        assert_eq!(count_n(6), 112);
        assert_eq!(all.len(), 143);
        assert!(all.iter().all(|g| g.is_connected()));
        assert_eq!(connected_graphs_upto(4).unwrap().len(), 10);
        assert!(connected_graphs_upto(7).is_err());
        assert!(connected_graphs_upto(0).is_err());
    }

    #[test]
    fn corpus_roundtrips_through_graph6() {
        let all = connected_graphs_upto(5).unwrap();
        let file: String =
            all.iter().map(|g| graph6_string(g).unwrap() + "\n").collect();
        let back = read_graph6_lines(&file).unwrap();
        assert_eq!(back.len(), all.len());
        for (a, b) in all.iter().zip(&back) {
            assert_eq!(a.vertex_count(), b.vertex_count());
            assert_eq!(a.edges(), b.edges());
        }
    }
}
