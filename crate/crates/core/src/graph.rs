//! Simple undirected graphs with contiguous directed-edge indexing.
//!
//! Directed edges are laid out in CSR order: the outgoing edges of node `i`
//! occupy `offsets[i]..offsets[i + 1]`, and the directed edge at position
//! `offsets[i] + p` points from `i` to `neighbors[offsets[i] + p]`. Message
//! arrays indexed by directed edge therefore keep all messages *sent* by a
//! node next to each other, and `reverse` gives the opposite direction in
//! O(1).

use std::collections::{HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    /// Undirected edges with `u < v`, in insertion order.
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    /// Sorted neighbor lists, concatenated. Doubles as the head of each
    /// directed edge.
    neighbors: Vec<usize>,
    /// Tail of each directed edge.
    sources: Vec<usize>,
    reverse: Vec<usize>,
}

impl Graph {
    /// Builds a graph from an edge list. Rejects self-loops, duplicate edges
    /// and out-of-range endpoints.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        let mut canon = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({a}, {b}) out of range for n = {n}"
                )));
            }
            if a == b {
                return Err(Error::InvalidArgument(format!("self-loop at node {a}")));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate edge ({}, {})",
                    e.0, e.1
                )));
            }
            canon.push(e);
        }
        Ok(Self::build(n, canon))
    }

    fn build(n: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut degree = vec![0usize; n];
        for &(u, v) in &edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut neighbors = vec![0usize; 2 * edges.len()];
        for &(u, v) in &edges {
            neighbors[fill[u]] = v;
            fill[u] += 1;
            neighbors[fill[v]] = u;
            fill[v] += 1;
        }
        let mut sources = vec![0usize; neighbors.len()];
        for i in 0..n {
            neighbors[offsets[i]..offsets[i + 1]].sort_unstable();
            for s in &mut sources[offsets[i]..offsets[i + 1]] {
                *s = i;
            }
        }
        let mut reverse = vec![0usize; neighbors.len()];
        for e in 0..neighbors.len() {
            let (i, j) = (sources[e], neighbors[e]);
            let row = &neighbors[offsets[j]..offsets[j + 1]];
            let p = row.binary_search(&i).expect("adjacency is symmetric");
            reverse[e] = offsets[j] + p;
        }
        Graph {
            n,
            edges,
            offsets,
            neighbors,
            sources,
            reverse,
        }
    }

    pub fn empty(n: usize) -> Self {
        Self::build(n, Vec::new())
    }

    /// Path `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Self {
        Self::build(n, (1..n).map(|i| (i - 1, i)).collect())
    }

    /// Cycle on `n >= 3` nodes with edges `(i, i+1 mod n)`.
    pub fn ring(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("ring needs n >= 3, got {n}")));
        }
        let edges = (0..n).map(|i| (i.min((i + 1) % n), i.max((i + 1) % n))).collect();
        Ok(Self::build(n, edges))
    }

    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v));
            }
        }
        Self::build(n, edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Number of directed edges, `2M`.
    pub fn num_directed(&self) -> usize {
        self.neighbors.len()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Directed edge ids `i -> k` for every `k` in `A(i)`.
    pub fn out_edges(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn source(&self, e: usize) -> usize {
        self.sources[e]
    }

    pub fn target(&self, e: usize) -> usize {
        self.neighbors[e]
    }

    pub fn reverse(&self, e: usize) -> usize {
        self.reverse[e]
    }

    /// Id of the directed edge `i -> j`, if `{i, j}` is an edge.
    pub fn directed_index(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n {
            return None;
        }
        self.neighbors(i)
            .binary_search(&j)
            .ok()
            .map(|p| self.offsets[i] + p)
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.directed_index(i, j).is_some()
    }

    pub fn is_isolated(&self, i: usize) -> bool {
        self.degree(i) == 0
    }

    /// Breadth-first distances from `center`, truncated at `radius`.
    /// Returned in BFS order, so the center comes first.
    pub fn bfs_within(&self, center: usize, radius: usize) -> Vec<(usize, usize)> {
        let mut dist = std::collections::HashMap::new();
        let mut order = vec![(center, 0)];
        dist.insert(center, 0usize);
        let mut queue = VecDeque::from([center]);
        while let Some(u) = queue.pop_front() {
            let du = dist[&u];
            if du == radius {
                continue;
            }
            for &v in self.neighbors(u) {
                if let std::collections::hash_map::Entry::Vacant(slot) = dist.entry(v) {
                    slot.insert(du + 1);
                    order.push((v, du + 1));
                    queue.push_back(v);
                }
            }
        }
        order
    }

    /// Eccentricity-based diameter of the connected component of node 0, or
    /// of the whole graph when it is connected. Intended for small trees.
    pub fn diameter(&self) -> usize {
        (0..self.n)
            .map(|i| {
                self.bfs_within(i, usize::MAX)
                    .iter()
                    .map(|&(_, d)| d)
                    .max()
                    .unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
    }
}

/// Geodesic ball around a node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ball {
    pub center: usize,
    pub radius: usize,
    /// Sorted.
    pub nodes: Vec<usize>,
    /// Nodes at distance exactly `radius`, sorted.
    pub boundary: Vec<usize>,
}

impl Ball {
    pub fn contains(&self, v: usize) -> bool {
        self.nodes.binary_search(&v).is_ok()
    }
}

pub fn ball(g: &Graph, center: usize, radius: usize) -> Result<Ball> {
    if center >= g.n() {
        return Err(Error::InvalidArgument(format!(
            "center {center} out of range for n = {}",
            g.n()
        )));
    }
    let within = g.bfs_within(center, radius);
    let mut nodes: Vec<usize> = within.iter().map(|&(v, _)| v).collect();
    let mut boundary: Vec<usize> = within
        .iter()
        .filter(|&&(_, d)| d == radius)
        .map(|&(v, _)| v)
        .collect();
    nodes.sort_unstable();
    boundary.sort_unstable();
    Ok(Ball {
        center,
        radius,
        nodes,
        boundary,
    })
}

/// True iff the subgraph induced by `nodes` is connected and acyclic.
/// The empty set is not considered a tree.
pub fn is_tree_region(g: &Graph, nodes: &[usize]) -> bool {
    let set: HashSet<usize> = nodes.iter().copied().collect();
    if set.is_empty() || set.iter().any(|&v| v >= g.n()) {
        return false;
    }
    let mut internal = 0usize;
    for &u in &set {
        internal += g.neighbors(u).iter().filter(|v| set.contains(v)).count();
    }
    if internal / 2 != set.len() - 1 {
        return false;
    }
    let start = *set.iter().next().unwrap();
    let mut seen = HashSet::from([start]);
    let mut stack = vec![start];
    while let Some(u) = stack.pop() {
        for &v in g.neighbors(u) {
            if set.contains(&v) && seen.insert(v) {
                stack.push(v);
            }
        }
    }
    seen.len() == set.len()
}

fn max_edges(n: usize) -> Result<usize> {
    n.checked_mul(n.saturating_sub(1))
        .map(|x| x / 2)
        .ok_or_else(|| Error::InvalidParameter(format!("n = {n} too large")))
}

/// Uniform sample from the simple graphs on `n` nodes with exactly `m`
/// edges, deterministic for a fixed seed.
pub fn generate_random_graph(n: usize, m: usize, seed: u64) -> Result<Graph> {
    let total = max_edges(n)?;
    if m > total {
        return Err(Error::InvalidParameter(format!(
            "m = {m} exceeds the {total} possible edges on {n} nodes"
        )));
    }
    let mut rng = seed::rng(seed);
    // Dense regime: draw a uniform m-subset of all pairs directly.
    if m * 3 > total {
        let mut all = Vec::with_capacity(total);
        for u in 0..n {
            for v in u + 1..n {
                all.push((u, v));
            }
        }
        let (chosen, _) = all.partial_shuffle(&mut rng, m);
        return Ok(Graph::build(n, chosen.to_vec()));
    }
    let mut seen = HashSet::with_capacity(2 * m);
    let mut edges = Vec::with_capacity(m);
    while edges.len() < m {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b {
            continue;
        }
        let e = (a.min(b), a.max(b));
        if seen.insert(e) {
            edges.push(e);
        }
    }
    Ok(Graph::build(n, edges))
}

/// Random graph with `m` edges drawn uniformly among the pairs that are
/// bichromatic under a hidden uniform random `q`-coloring, which is returned
/// alongside (colors in `1..=q`). Used where colorings are needed above the
/// reach of local search.
pub fn generate_planted_graph(
    n: usize,
    m: usize,
    q: usize,
    seed: u64,
) -> Result<(Graph, Vec<u8>)> {
    if !(2..=crate::MAX_COLORS).contains(&q) {
        return Err(Error::InvalidParameter(format!("q = {q} out of range")));
    }
    let mut rng = seed::rng(seed);
    let colors: Vec<u8> = (0..n).map(|_| rng.random_range(1..=q as u8)).collect();
    let mut class_sizes = vec![0usize; q + 1];
    for &c in &colors {
        class_sizes[c as usize] += 1;
    }
    let mono: usize = class_sizes.iter().map(|&s| s * s.saturating_sub(1) / 2).sum();
    let available = max_edges(n)? - mono;
    if m > available {
        return Err(Error::InvalidParameter(format!(
            "m = {m} exceeds the {available} bichromatic pairs of the planted coloring"
        )));
    }
    if m * 3 > available {
        let mut all = Vec::with_capacity(available);
        for u in 0..n {
            for v in u + 1..n {
                if colors[u] != colors[v] {
                    all.push((u, v));
                }
            }
        }
        let (chosen, _) = all.partial_shuffle(&mut rng, m);
        return Ok((Graph::build(n, chosen.to_vec()), colors));
    }
    let mut seen = HashSet::with_capacity(2 * m);
    let mut edges = Vec::with_capacity(m);
    while edges.len() < m {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if colors[a] == colors[b] {
            continue;
        }
        let e = (a.min(b), a.max(b));
        if seen.insert(e) {
            edges.push(e);
        }
    }
    Ok((Graph::build(n, edges), colors))
}

/// Random recursive tree: node `i > 0` attaches to a uniform earlier node,
/// then labels are shuffled.
pub fn random_tree(n: usize, seed: u64) -> Graph {
    let mut rng = seed::rng(seed);
    let mut labels: Vec<usize> = (0..n).collect();
    labels.shuffle(&mut rng);
    let edges = (1..n)
        .map(|i| {
            let parent = rng.random_range(0..i);
            let (a, b) = (labels[i], labels[parent]);
            (a.min(b), a.max(b))
        })
        .collect();
    Graph::build(n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Graph {
        Graph::complete(3)
    }

    #[test]
    fn triangle_is_forced_by_counts() {
        for seed in 0..5 {
            let g = generate_random_graph(3, 3, seed).unwrap();
            assert_eq!(g.m(), 3);
            for i in 0..3 {
                assert_eq!(g.degree(i), 2);
            }
        }
    }

    #[test]
    fn handshake_identity() {
        let g = generate_random_graph(100, 230, 7).unwrap();
        let total: usize = (0..g.n()).map(|i| g.degree(i)).sum();
        assert_eq!(total, 460);
        assert_eq!(g.num_directed(), 460);
    }

    #[test]
    fn too_many_edges_is_rejected() {
        assert!(matches!(
            generate_random_graph(4, 7, 1),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_random_graph(200, 400, 3).unwrap();
        let b = generate_random_graph(200, 400, 3).unwrap();
        let c = generate_random_graph(200, 400, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn dense_generation_is_simple() {
        let g = generate_random_graph(10, 40, 9).unwrap();
        assert_eq!(g.m(), 40);
        assert!(Graph::from_edges(10, g.edges()).is_ok());
    }

    #[test]
    fn directed_index_is_a_bijection_with_total_reverse() {
        let g = generate_random_graph(60, 150, 11).unwrap();
        assert_eq!(g.num_directed(), 2 * g.m());
        for e in 0..g.num_directed() {
            let (i, j) = (g.source(e), g.target(e));
            assert_eq!(g.directed_index(i, j), Some(e));
            let r = g.reverse(e);
            assert_eq!((g.source(r), g.target(r)), (j, i));
            assert_eq!(g.reverse(r), e);
        }
        for i in 0..g.n() {
            for &j in g.neighbors(i) {
                assert!(g.neighbors(j).contains(&i));
                assert_ne!(i, j);
            }
        }
    }

    #[test]
    fn from_edges_rejects_bad_input() {
        assert!(Graph::from_edges(3, &[(0, 0)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 1), (1, 0)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 3)]).is_err());
    }

    #[test]
    fn ball_examples() {
        let b = ball(&triangle(), 0, 1).unwrap();
        assert_eq!(b.nodes, vec![0, 1, 2]);

        let p = Graph::path(4);
        let b = ball(&p, 0, 2).unwrap();
        assert_eq!(b.nodes, vec![0, 1, 2]);
        assert_eq!(b.boundary, vec![2]);

        let g = generate_random_graph(50, 80, 2).unwrap();
        for c in [0, 17, 49] {
            let b = ball(&g, c, 0).unwrap();
            assert_eq!(b.nodes, vec![c]);
        }
        assert!(ball(&g, 50, 1).is_err());
    }

    #[test]
    fn tree_region_examples() {
        assert!(!is_tree_region(&triangle(), &[0, 1, 2]));
        let p = Graph::path(6);
        assert!(is_tree_region(&p, &[1, 2, 3, 4]));
        assert!(is_tree_region(&p, &[3]));
        assert!(!is_tree_region(&p, &[0, 2]));
        assert!(!is_tree_region(&Graph::empty(2), &[0, 1]));
    }

    #[test]
    fn random_tree_is_a_tree() {
        for seed in 0..20 {
            let t = random_tree(30, seed);
            assert_eq!(t.m(), 29);
            assert!(is_tree_region(&t, &(0..30).collect::<Vec<_>>()));
        }
    }

    #[test]
    fn planted_coloring_is_proper() {
        let (g, c) = generate_planted_graph(500, 1150, 3, 5).unwrap();
        assert_eq!(g.m(), 1150);
        for &(u, v) in g.edges() {
            assert_ne!(c[u], c[v]);
        }
    }
}
