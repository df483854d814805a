//! Colorings, energy, exhaustive enumeration and noisy local search.

use std::collections::HashMap;

use rand::Rng as _;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seed;

/// A `q`-coloring with values in `1..=q`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Coloring {
    q: usize,
    values: Vec<u8>,
}

impl Coloring {
    pub fn new(q: usize, values: Vec<u8>) -> Result<Self> {
        check_q(q)?;
        if let Some(v) = values.iter().find(|&&v| v == 0 || v as usize > q) {
            return Err(Error::InvalidArgument(format!(
                "color {v} outside 1..={q}"
            )));
        }
        Ok(Coloring { q, values })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> u8 {
        self.values[i]
    }

    pub fn set(&mut self, i: usize, c: u8) {
        debug_assert!(c >= 1 && c as usize <= self.q);
        self.values[i] = c;
    }
}

pub(crate) fn check_q(q: usize) -> Result<()> {
    if !(2..=crate::MAX_COLORS).contains(&q) {
        return Err(Error::InvalidParameter(format!(
            "q = {q} outside 2..={}",
            crate::MAX_COLORS
        )));
    }
    Ok(())
}

fn check_size(g: &Graph, len: usize) -> Result<()> {
    if len != g.n() {
        return Err(Error::InvalidArgument(format!(
            "assignment has {len} entries, graph has {} nodes",
            g.n()
        )));
    }
    Ok(())
}

/// Number of monochromatic edges, each edge counted once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Energy {
    pub violated_edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyEstimate {
    pub count: u128,
    /// `ln(count) / n`; absent when there is no legal coloring.
    pub s: Option<f64>,
}

impl EntropyEstimate {
    fn from_count(count: u128, n: usize) -> Self {
        let s = (count > 0 && n > 0).then(|| (count as f64).ln() / n as f64);
        EntropyEstimate { count, s }
    }
}

pub fn is_legal(g: &Graph, c: &Coloring) -> Result<bool> {
    check_size(g, c.len())?;
    Ok(g.edges().iter().all(|&(u, v)| c.get(u) != c.get(v)))
}

pub fn energy(g: &Graph, c: &Coloring) -> Result<Energy> {
    check_size(g, c.len())?;
    let violated_edges = g
        .edges()
        .iter()
        .filter(|&&(u, v)| c.get(u) == c.get(v))
        .count();
    Ok(Energy { violated_edges })
}

/// Result of exhaustive enumeration.
#[derive(Debug, Clone)]
pub struct Enumeration {
    pub entropy: EntropyEstimate,
    /// Present iff `count <= cap`.
    pub colorings: Option<Vec<Coloring>>,
}

/// Default number of search nodes allowed to exhaustive enumeration.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 200_000_000;

/// Counts legal colorings by backtracking over nodes in order of decreasing
/// degree. The list is kept while the count stays within `cap`.
pub fn enumerate_legal_colorings(
    g: &Graph,
    q: usize,
    cap: usize,
    budget: u64,
) -> Result<Enumeration> {
    let mut colorings = Vec::new();
    let mut keep = true;
    let count = for_each_legal_coloring(g, q, budget, |values| {
        if keep {
            if colorings.len() < cap {
                colorings.push(Coloring {
                    q,
                    values: values.to_vec(),
                });
            } else {
                keep = false;
                colorings.clear();
            }
        }
    })?;
    Ok(Enumeration {
        entropy: EntropyEstimate::from_count(count, g.n()),
        colorings: keep.then_some(colorings),
    })
}

/// Visits every legal coloring (as raw values in `1..=q`) and returns their
/// number. Isolated nodes are enumerated like any other node.
pub fn for_each_legal_coloring<F: FnMut(&[u8])>(
    g: &Graph,
    q: usize,
    budget: u64,
    mut visit: F,
) -> Result<u128> {
    check_q(q)?;
    let n = g.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(g.degree(i)), i));
    let mut position = vec![0usize; n];
    for (p, &v) in order.iter().enumerate() {
        position[v] = p;
    }
    // Neighbors colored before each node in the search order.
    let earlier: Vec<Vec<usize>> = order
        .iter()
        .map(|&v| {
            g.neighbors(v)
                .iter()
                .copied()
                .filter(|&u| position[u] < position[v])
                .collect()
        })
        .collect();

    let mut values = vec![0u8; n];
    let mut count: u128 = 0;
    let mut steps: u64 = 0;
    if n == 0 {
        visit(&values);
        return Ok(1);
    }
    // Iterative DFS: `depth` indexes `order`, values[order[depth]] is the
    // color currently tried there (0 = not yet started).
    let mut depth = 0usize;
    loop {
        let v = order[depth];
        let mut next = values[v] as usize + 1;
        while next <= q && earlier[depth].iter().any(|&u| values[u] as usize == next) {
            next += 1;
        }
        if next > q {
            values[v] = 0;
            if depth == 0 {
                break;
            }
            depth -= 1;
            continue;
        }
        steps += 1;
        if steps > budget {
            return Err(Error::ResourceLimit(format!(
                "coloring enumeration exceeded {budget} search nodes"
            )));
        }
        values[v] = next as u8;
        if depth + 1 == n {
            count += 1;
            visit(&values);
        } else {
            depth += 1;
        }
    }
    Ok(count)
}

/// Connected components of the legal colorings under single-node recolor
/// moves. Returns the component sizes, largest first.
pub fn coloring_cluster_sizes(g: &Graph, q: usize, budget: u64) -> Result<Vec<usize>> {
    let mut all: Vec<Vec<u8>> = Vec::new();
    for_each_legal_coloring(g, q, budget, |v| all.push(v.to_vec()))?;
    let index: HashMap<&[u8], usize> = all
        .iter()
        .enumerate()
        .map(|(k, v)| (v.as_slice(), k))
        .collect();
    let mut parent: Vec<usize> = (0..all.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut scratch = Vec::new();
    for (k, values) in all.iter().enumerate() {
        for i in 0..values.len() {
            for c in 1..=q as u8 {
                if c <= values[i] {
                    // each move is seen from both ends; keep one direction
                    continue;
                }
                scratch.clear();
                scratch.extend_from_slice(values);
                scratch[i] = c;
                if let Some(&other) = index.get(scratch.as_slice()) {
                    let (a, b) = (find(&mut parent, k), find(&mut parent, other));
                    if a != b {
                        parent[a] = b;
                    }
                }
            }
        }
    }
    let mut sizes: HashMap<usize, usize> = HashMap::new();
    for k in 0..all.len() {
        *sizes.entry(find(&mut parent, k)).or_default() += 1;
    }
    let mut sizes: Vec<usize> = sizes.into_values().collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    Ok(sizes)
}

/// Noise probability used when none is given.
pub const DEFAULT_NOISE: f64 = 0.3;

/// Noisy greedy recoloring of violated edges.
///
/// Starts from a uniformly random coloring. Each step picks a violated edge
/// uniformly; with probability `noise` one endpoint (uniform) takes a
/// uniformly random other color, otherwise the endpoint whose best
/// recoloring leaves it with fewer conflicts is moved to that color (ties
/// uniform). Returns `None` when `max_steps` run out.
pub fn find_legal_coloring(
    g: &Graph,
    q: usize,
    seed: u64,
    max_steps: u64,
    noise: f64,
) -> Result<Option<Coloring>> {
    check_q(q)?;
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::InvalidParameter(format!("noise = {noise} outside [0, 1]")));
    }
    let mut rng = seed::rng(seed);
    let n = g.n();
    let stride = q + 1;
    let mut color: Vec<u8> = (0..n).map(|_| rng.random_range(1..=q as u8)).collect();
    // counts[v * stride + c] = neighbors of v currently colored c
    let mut counts = vec![0u32; n * stride];
    for &(u, v) in g.edges() {
        counts[u * stride + color[v] as usize] += 1;
        counts[v * stride + color[u] as usize] += 1;
    }
    let mut violated: Vec<usize> = Vec::new();
    let mut slot = vec![usize::MAX; g.m()];
    // undirected edge id lookup per directed edge
    let mut edge_of = vec![0usize; g.num_directed()];
    for (k, &(u, v)) in g.edges().iter().enumerate() {
        edge_of[g.directed_index(u, v).unwrap()] = k;
        edge_of[g.directed_index(v, u).unwrap()] = k;
        if color[u] == color[v] {
            slot[k] = violated.len();
            violated.push(k);
        }
    }

    let mut best_colors = Vec::with_capacity(q);
    let mut steps = 0u64;
    while !violated.is_empty() {
        if steps >= max_steps {
            return Ok(None);
        }
        steps += 1;
        let (a, b) = g.edges()[violated[rng.random_range(0..violated.len())]];
        let (node, new_color) = if rng.random::<f64>() < noise {
            let node = if rng.random::<bool>() { a } else { b };
            let mut c = rng.random_range(1..q as u8);
            if c >= color[node] {
                c += 1;
            }
            (node, c)
        } else {
            let mut pick = |v: usize| {
                let row = &counts[v * stride..(v + 1) * stride];
                let mut best = u32::MAX;
                best_colors.clear();
                for (c, &count) in row.iter().enumerate().skip(1) {
                    if c == color[v] as usize {
                        continue;
                    }
                    match count.cmp(&best) {
                        std::cmp::Ordering::Less => {
                            best = count;
                            best_colors.clear();
                            best_colors.push(c as u8);
                        }
                        std::cmp::Ordering::Equal => best_colors.push(c as u8),
                        std::cmp::Ordering::Greater => {}
                    }
                }
                (best, best_colors[rng.random_range(0..best_colors.len())])
            };
            let (ca, xa) = pick(a);
            let (cb, xb) = pick(b);
            if ca < cb || (ca == cb && rng.random::<bool>()) {
                (a, xa)
            } else {
                (b, xb)
            }
        };

        let old = color[node];
        color[node] = new_color;
        for e in g.out_edges(node) {
            let u = g.target(e);
            counts[u * stride + old as usize] -= 1;
            counts[u * stride + new_color as usize] += 1;
            let k = edge_of[e];
            if color[u] == old {
                let s = slot[k];
                let last = *violated.last().unwrap();
                violated.swap_remove(s);
                if last != k {
                    slot[last] = s;
                }
                slot[k] = usize::MAX;
            } else if color[u] == new_color {
                slot[k] = violated.len();
                violated.push(k);
            }
        }
    }
    Ok(Some(Coloring { q, values: color }))
}
