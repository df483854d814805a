//! Node whitening, directional whitening and their local equations.
//!
//! White is encoded as `0`; colors are `1..=q`.
//!
//! A directional assignment stores one value per directed edge: the entry
//! on `i -> k` holds `w(i|k)`, the value node `i` takes when the edge to
//! `k` is ignored. Its local equation reads the messages arriving at `i`
//! from every other neighbour, `{ w(j|i) : j in A(i), j != k }`:
//!
//! * exactly `q - 1` distinct non-white colors present: `w(i|k)` is the
//!   missing color;
//! * otherwise `w(i|k)` is white.
//!
//! Extremal directional whitenings are exactly the legal fixed points of
//! this map.

use std::collections::hash_map::DefaultHasher;
use std::collections::{HashMap, VecDeque};
use std::hash::{Hash, Hasher};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::coloring::{check_q, is_legal, Coloring};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seed;

pub const WHITE: u8 = 0;

/// Per-node values in `0..=q`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Whitening {
    q: usize,
    values: Vec<u8>,
}

impl Whitening {
    pub fn new(q: usize, values: Vec<u8>) -> Result<Self> {
        check_q(q)?;
        if let Some(v) = values.iter().find(|&&v| v as usize > q) {
            return Err(Error::InvalidArgument(format!("value {v} outside 0..={q}")));
        }
        Ok(Whitening { q, values })
    }

    pub fn all_white(q: usize, n: usize) -> Self {
        Whitening {
            q,
            values: vec![WHITE; n],
        }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn is_all_white(&self) -> bool {
        self.values.iter().all(|&v| v == WHITE)
    }

    pub fn fingerprint(&self) -> Fingerprint {
        Fingerprint(self.values.clone())
    }
}

/// Per-directed-edge values in `0..=q`, indexed by directed edge id.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DirectionalAssignment {
    q: usize,
    values: Vec<u8>,
}

impl DirectionalAssignment {
    pub fn new(q: usize, values: Vec<u8>) -> Result<Self> {
        check_q(q)?;
        if let Some(v) = values.iter().find(|&&v| v as usize > q) {
            return Err(Error::InvalidArgument(format!("value {v} outside 0..={q}")));
        }
        Ok(DirectionalAssignment { q, values })
    }

    pub fn all_white(g: &Graph, q: usize) -> Self {
        DirectionalAssignment {
            q,
            values: vec![WHITE; g.num_directed()],
        }
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

    pub fn get(&self, e: usize) -> u8 {
        self.values[e]
    }

    pub fn set(&mut self, e: usize, v: u8) {
        debug_assert!(v as usize <= self.q);
        self.values[e] = v;
    }

    pub fn is_all_white(&self) -> bool {
        self.values.iter().all(|&v| v == WHITE)
    }

    pub fn fingerprint(&self) -> Fingerprint {
        fingerprint(self)
    }
}

/// Exact canonical digest of a directional assignment: its values in
/// directed-edge order. Equality is exact; [`Fingerprint::hex`] gives a
/// short SHA-256 rendering for display.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint(Vec<u8>);

impl Fingerprint {
    pub fn bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn hex(&self) -> String {
        let digest = Sha256::digest(&self.0);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn fingerprint(d: &DirectionalAssignment) -> Fingerprint {
    Fingerprint(d.values.clone())
}

fn check_len(expected: usize, got: usize, what: &str) -> Result<()> {
    if expected != got {
        return Err(Error::InvalidArgument(format!(
            "{what} has {got} entries, expected {expected}"
        )));
    }
    Ok(())
}

fn full_mask(q: usize) -> u64 {
    ((1u64 << q) - 1) << 1
}

/// Non-white colors among the neighbours of `i`, as a bit mask (bit `c`).
fn neighbor_mask(g: &Graph, values: &[u8], i: usize) -> u64 {
    g.neighbors(i)
        .iter()
        .filter(|&&j| values[j] != WHITE)
        .fold(0, |m, &j| m | 1u64 << values[j])
}

pub fn is_legal_whitening(g: &Graph, w: &Whitening) -> Result<bool> {
    check_len(g.n(), w.values.len(), "whitening")?;
    Ok(g
        .edges()
        .iter()
        .all(|&(u, v)| w.values[u] == WHITE || w.values[u] != w.values[v]))
}

/// Node whitening of a legal coloring with a FIFO work queue.
pub fn whiten(g: &Graph, c: &Coloring) -> Result<Whitening> {
    whiten_with_order(g, c, None)
}

/// Node whitening; with `Some(seed)` pending nodes are processed in a
/// random order drawn from the seed.
pub fn whiten_with_order(g: &Graph, c: &Coloring, order_seed: Option<u64>) -> Result<Whitening> {
    if !is_legal(g, c)? {
        return Err(Error::InvalidArgument("whiten needs a legal coloring".into()));
    }
    let q = c.q();
    let mut values = c.values().to_vec();
    let mut queue = WorkQueue::new(g.n(), order_seed);
    while let Some(i) = queue.pop() {
        if values[i] == WHITE {
            continue;
        }
        if (neighbor_mask(g, &values, i).count_ones() as usize) < q - 1 {
            values[i] = WHITE;
            for &j in g.neighbors(i) {
                if values[j] != WHITE {
                    queue.push(j);
                }
            }
        }
    }
    Ok(Whitening { q, values })
}

pub fn is_extremal_whitening(g: &Graph, w: &Whitening) -> Result<bool> {
    if !is_legal_whitening(g, w)? {
        return Ok(false);
    }
    let q = w.q;
    Ok((0..g.n()).all(|i| {
        let mask = neighbor_mask(g, &w.values, i);
        let distinct = mask.count_ones() as usize;
        if w.values[i] == WHITE {
            distinct < q - 1
        } else {
            distinct == q - 1 && mask & (1u64 << w.values[i]) == 0
        }
    }))
}

pub fn directional_from_coloring(g: &Graph, c: &Coloring) -> Result<DirectionalAssignment> {
    if !is_legal(g, c)? {
        return Err(Error::InvalidArgument(
            "directional coloring needs a legal coloring".into(),
        ));
    }
    Ok(directional_copy(g, c))
}

/// `w(i|k) = c(i)` for every directed edge, without a legality check.
pub fn directional_copy(g: &Graph, c: &Coloring) -> DirectionalAssignment {
    DirectionalAssignment {
        q: c.q(),
        values: (0..g.num_directed()).map(|e| c.get(g.source(e))).collect(),
    }
}

/// Non-white colors carried into `i = source(e)` by every neighbour except
/// `target(e)`.
fn incoming_mask(g: &Graph, d: &[u8], e: usize) -> u64 {
    let i = g.source(e);
    let k = g.target(e);
    let mut mask = 0u64;
    for f in g.out_edges(i) {
        if g.target(f) == k {
            continue;
        }
        let v = d[g.reverse(f)];
        if v != WHITE {
            mask |= 1u64 << v;
        }
    }
    mask
}

/// Right-hand side of the local equation for directed edge `e`.
pub fn local_update(g: &Graph, d: &DirectionalAssignment, e: usize) -> u8 {
    update_value(g, &d.values, d.q, e)
}

fn update_value(g: &Graph, d: &[u8], q: usize, e: usize) -> u8 {
    let mask = incoming_mask(g, d, e);
    if mask.count_ones() as usize == q - 1 {
        (full_mask(q) & !mask).trailing_zeros() as u8
    } else {
        WHITE
    }
}

/// Number of directed edges whose value differs from its local update.
pub fn local_equation_violations(g: &Graph, d: &DirectionalAssignment) -> Result<usize> {
    check_len(g.num_directed(), d.len(), "directional assignment")?;
    Ok((0..d.len())
        .filter(|&e| update_value(g, &d.values, d.q, e) != d.values[e])
        .count())
}

/// Legality of a directional whitening: for every edge `{i, j}`, every
/// `k in A(i) \ {j}` and `m in A(j) \ {i}`, the product
/// `w(i|k) w(j|i) [w(i|k) = w(j|m)]` vanishes.
pub fn is_legal_directional(g: &Graph, d: &DirectionalAssignment) -> Result<bool> {
    check_len(g.num_directed(), d.len(), "directional assignment")?;
    let q = d.q;
    let stride = q + 1;
    // out_counts[j][c] = #{m : w(j|m) = c}
    let mut out_counts = vec![0u32; g.n() * stride];
    for e in 0..d.len() {
        out_counts[g.source(e) * stride + d.values[e] as usize] += 1;
    }
    for i in 0..g.n() {
        for e_ik in g.out_edges(i) {
            let a = d.values[e_ik];
            if a == WHITE {
                continue;
            }
            let k = g.target(e_ik);
            for e_ij in g.out_edges(i) {
                let j = g.target(e_ij);
                if j == k {
                    continue;
                }
                let e_ji = g.reverse(e_ij);
                if d.values[e_ji] == WHITE {
                    continue;
                }
                // values w(j|m) with m != i equal to a
                let same = out_counts[j * stride + a as usize] - u32::from(d.values[e_ji] == a);
                if same > 0 {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

pub fn is_extremal_directional(g: &Graph, d: &DirectionalAssignment) -> Result<bool> {
    Ok(is_legal_directional(g, d)? && local_equation_violations(g, d)? == 0)
}

/// True iff, at every node, all non-white outgoing values agree.
pub fn node_color_consistency(g: &Graph, d: &DirectionalAssignment) -> Result<bool> {
    check_len(g.num_directed(), d.len(), "directional assignment")?;
    Ok((0..g.n()).all(|i| {
        let mut seen = WHITE;
        for e in g.out_edges(i) {
            let v = d.values[e];
            if v == WHITE {
                continue;
            }
            if seen == WHITE {
                seen = v;
            } else if seen != v {
                return false;
            }
        }
        true
    }))
}

/// Directional whitening with a FIFO work queue.
pub fn whiten_directional(g: &Graph, d: &DirectionalAssignment) -> Result<DirectionalAssignment> {
    whiten_directional_with_order(g, d, None)
}

/// Applies the local update until no entry changes. Entries whose incoming
/// colors do not force them become white; forced entries take the missing
/// color. On assignments copied from a legal coloring the forced color is
/// always the current one, so only whitening events occur.
pub fn whiten_directional_with_order(
    g: &Graph,
    d: &DirectionalAssignment,
    order_seed: Option<u64>,
) -> Result<DirectionalAssignment> {
    if !is_legal_directional(g, d)? {
        return Err(Error::InvalidArgument(
            "whiten_directional needs a legal directional assignment".into(),
        ));
    }
    let q = d.q;
    let mut values = d.values.clone();
    let cap = 4 * (q + 1) * values.len() + 16;
    let mut changes = 0usize;
    let mut queue = WorkQueue::new(values.len(), order_seed);
    while let Some(e) = queue.pop() {
        let new = update_value(g, &values, q, e);
        if new == values[e] {
            continue;
        }
        values[e] = new;
        changes += 1;
        if changes > cap {
            return Err(Error::NoConvergence(changes));
        }
        // e = (i -> k) feeds every (k -> m) with m != i
        let i = g.source(e);
        let k = g.target(e);
        for f in g.out_edges(k) {
            if g.target(f) != i {
                queue.push(f);
            }
        }
    }
    Ok(DirectionalAssignment { q, values })
}

/// Pending set used by the whitening procedures: FIFO without a seed,
/// uniformly random extraction with one.
struct WorkQueue {
    fifo: VecDeque<usize>,
    pool: Vec<usize>,
    queued: Vec<bool>,
    rng: Option<seed::Rng>,
}

impl WorkQueue {
    fn new(len: usize, order_seed: Option<u64>) -> Self {
        let mut rng = order_seed.map(seed::rng);
        let (fifo, pool) = match rng.as_mut() {
            None => ((0..len).collect(), Vec::new()),
            Some(r) => {
                let mut pool: Vec<usize> = (0..len).collect();
                pool.shuffle(r);
                (VecDeque::new(), pool)
            }
        };
        WorkQueue {
            fifo,
            pool,
            queued: vec![true; len],
            rng,
        }
    }

    fn push(&mut self, x: usize) {
        if !self.queued[x] {
            self.queued[x] = true;
            match self.rng {
                None => self.fifo.push_back(x),
                Some(_) => self.pool.push(x),
            }
        }
    }

    fn pop(&mut self) -> Option<usize> {
        let x = match self.rng.as_mut() {
            None => self.fifo.pop_front()?,
            Some(r) => {
                if self.pool.is_empty() {
                    return None;
                }
                let k = r.random_range(0..self.pool.len());
                self.pool.swap_remove(k)
            }
        };
        self.queued[x] = false;
        Some(x)
    }
}

/// Outcome of [`naive_directional_iteration`].
#[derive(Debug, Clone, Serialize)]
pub struct NaiveIteration {
    #[serde(skip)]
    pub assignment: DirectionalAssignment,
    pub converged: bool,
    pub cycle_detected: bool,
    pub sweeps: usize,
    /// Period of the detected cycle, in sweeps.
    pub cycle_length: Option<usize>,
}

/// Iterates the forced-recolor update from `w(i|k) = c0(i)`, with no
/// legality requirement on `c0`. Every sweep applies the update in place
/// along one fixed random permutation of the directed edges drawn from
/// `seed`, so the sweep is a deterministic map and a repeated state is a
/// genuine cycle.
pub fn naive_directional_iteration(
    g: &Graph,
    c0: &Coloring,
    max_sweeps: usize,
    seed: u64,
) -> Result<NaiveIteration> {
    if c0.len() != g.n() {
        return Err(Error::InvalidArgument("coloring size mismatch".into()));
    }
    let start = directional_copy(g, c0);
    Ok(iterate_local_equations(g, start, max_sweeps, seed))
}

/// Sweep iteration of the local update from an arbitrary start.
pub fn iterate_local_equations(
    g: &Graph,
    start: DirectionalAssignment,
    max_sweeps: usize,
    seed: u64,
) -> NaiveIteration {
    let q = start.q;
    let mut values = start.values;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.shuffle(&mut seed::rng(seed));

    let state_hash = |v: &[u8]| {
        let mut h = DefaultHasher::new();
        v.hash(&mut h);
        h.finish()
    };
    let mut seen: HashMap<u64, usize> = HashMap::from([(state_hash(&values), 0)]);
    let mut result = NaiveIteration {
        assignment: DirectionalAssignment { q, values: Vec::new() },
        converged: false,
        cycle_detected: false,
        sweeps: 0,
        cycle_length: None,
    };
    for sweep in 1..=max_sweeps {
        let mut changed = false;
        for &e in &order {
            let new = update_value(g, &values, q, e);
            if new != values[e] {
                values[e] = new;
                changed = true;
            }
        }
        result.sweeps = sweep;
        if !changed {
            result.converged = true;
            break;
        }
        if let Some(&previous) = seen.get(&state_hash(&values)) {
            result.cycle_detected = true;
            result.cycle_length = Some(sweep - previous);
            break;
        }
        seen.insert(state_hash(&values), sweep);
    }
    result.assignment = DirectionalAssignment { q, values };
    result
}

/// Exhaustive search for fixed points of the local equations over every
/// assignment with values in `1..=q` (hard messages) or `0..=q`. Fails with
/// a resource-limit error when the space exceeds `budget` assignments.
pub fn enumerate_fixed_points(
    g: &Graph,
    q: usize,
    include_white: bool,
    budget: u64,
) -> Result<Vec<DirectionalAssignment>> {
    check_q(q)?;
    let len = g.num_directed();
    let lo: u8 = if include_white { 0 } else { 1 };
    let base = q as u64 + 1 - lo as u64;
    let space = (0..len).try_fold(1u64, |acc, _| acc.checked_mul(base));
    match space {
        Some(s) if s <= budget => {}
        _ => {
            return Err(Error::ResourceLimit(format!(
                "{base}^{len} assignments exceed the budget of {budget}"
            )))
        }
    }
    let mut values = vec![lo; len];
    let mut found = Vec::new();
    loop {
        if (0..len).all(|e| update_value(g, &values, q, e) == values[e]) {
            found.push(DirectionalAssignment {
                q,
                values: values.clone(),
            });
        }
        // odometer
        let mut p = 0;
        loop {
            if p == len {
                return Ok(found);
            }
            if (values[p] as usize) < q {
                values[p] += 1;
                break;
            }
            values[p] = lo;
            p += 1;
        }
    }
}

/// The odd-ring assignment that satisfies all but one local equation: the
/// clockwise messages `i -> i+1` alternate `1, 2, 1, ...` starting at node
/// 0, counter-clockwise messages are white.
pub fn staggered_ring_assignment(n: usize) -> Result<(Graph, DirectionalAssignment)> {
    let g = Graph::ring(n)?;
    let mut d = DirectionalAssignment::all_white(&g, 2);
    for i in 0..n {
        let e = g.directed_index(i, (i + 1) % n).expect("ring edge");
        d.set(e, if i % 2 == 0 { 1 } else { 2 });
    }
    Ok((g, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coloring::{enumerate_legal_colorings, find_legal_coloring};
    use crate::graph::{generate_random_graph, random_tree};

    fn col(q: usize, v: &[u8]) -> Coloring {
        Coloring::new(q, v.to_vec()).unwrap()
    }

    fn wh(q: usize, v: &[u8]) -> Whitening {
        Whitening::new(q, v.to_vec()).unwrap()
    }

    /// Literal rule application: whiten any node that is not blocked, one
    /// node at a time in index order, until nothing changes.
    fn whiten_by_hand(g: &Graph, c: &Coloring) -> Vec<u8> {
        let q = c.q();
        let mut w = c.values().to_vec();
        loop {
            let mut changed = false;
            for i in 0..g.n() {
                if w[i] == 0 {
                    continue;
                }
                let mut colors: Vec<u8> = g
                    .neighbors(i)
                    .iter()
                    .map(|&j| w[j])
                    .filter(|&x| x != 0)
                    .collect();
                colors.sort_unstable();
                colors.dedup();
                if colors.len() < q - 1 {
                    w[i] = 0;
                    changed = true;
                }
            }
            if !changed {
                return w;
            }
        }
    }

    #[test]
    fn whitening_legality_examples() {
        let g = Graph::path(2);
        assert!(is_legal_whitening(&Graph::complete(3), &Whitening::all_white(3, 3)).unwrap());
        assert!(!is_legal_whitening(&g, &wh(3, &[1, 1])).unwrap());
        assert!(is_legal_whitening(&g, &wh(3, &[0, 1])).unwrap());
    }

    #[test]
    fn whiten_examples() {
        let t = Graph::complete(3);
        let c = col(3, &[1, 2, 3]);
        assert_eq!(whiten(&t, &c).unwrap().values(), &[1, 2, 3]);
        assert_eq!(whiten_by_hand(&t, &c), vec![1, 2, 3]);

        let p = Graph::path(3);
        let c = col(2, &[1, 2, 1]);
        assert_eq!(whiten(&p, &c).unwrap().values(), &[1, 2, 1]);
        assert_eq!(whiten_by_hand(&p, &c), vec![1, 2, 1]);

        assert!(whiten(&p, &col(2, &[1, 1, 2])).is_err());
    }

    #[test]
    fn trees_whiten_to_white_for_three_colors() {
        for seed in 0..40 {
            let t = random_tree(2 + seed as usize % 9, seed);
            let e = enumerate_legal_colorings(&t, 3, 100_000, u64::MAX).unwrap();
            for c in e.colorings.unwrap() {
                assert_eq!(whiten_by_hand(&t, &c), vec![0; t.n()]);
                let w = whiten(&t, &c).unwrap();
                assert!(w.is_all_white());
                assert!(is_extremal_whitening(&t, &w).unwrap());
            }
        }
    }

    #[test]
    fn extremal_whitening_examples() {
        let t = Graph::complete(3);
        assert!(is_extremal_whitening(&random_tree(8, 1), &Whitening::all_white(3, 8)).unwrap());
        assert!(is_extremal_whitening(&t, &wh(3, &[1, 2, 3])).unwrap());
        // node 2 is white but sees {1, 2}, which has q - 1 colors
        assert!(!is_extremal_whitening(&t, &wh(3, &[1, 2, 0])).unwrap());
    }

    #[test]
    fn whiten_agrees_with_hand_rule_on_random_graphs() {
        for seed in 0..50 {
            let g = generate_random_graph(40, 80, seed).unwrap();
            let Some(c) = find_legal_coloring(&g, 3, seed, 100_000, 0.3).unwrap() else {
                continue;
            };
            let w = whiten(&g, &c).unwrap();
            assert_eq!(w.values(), whiten_by_hand(&g, &c).as_slice());
            assert!(is_extremal_whitening(&g, &w).unwrap());
        }
    }

    #[test]
    fn directional_from_coloring_examples() {
        let t = Graph::complete(3);
        let d = directional_from_coloring(&t, &col(3, &[1, 2, 3])).unwrap();
        assert_eq!(d.get(t.directed_index(0, 1).unwrap()), 1);
        assert_eq!(d.get(t.directed_index(0, 2).unwrap()), 1);
        assert_eq!(d.get(t.directed_index(2, 1).unwrap()), 3);
        assert!(is_legal_directional(&t, &d).unwrap());

        let e = Graph::path(2);
        let d = directional_from_coloring(&e, &col(2, &[1, 2])).unwrap();
        assert_eq!(d.get(e.directed_index(0, 1).unwrap()), 1);
        assert_eq!(d.get(e.directed_index(1, 0).unwrap()), 2);

        let d = directional_from_coloring(&Graph::empty(3), &col(2, &[1, 1, 1])).unwrap();
        assert!(d.is_empty());

        assert!(directional_from_coloring(&e, &col(2, &[1, 1])).is_err());
    }

    #[test]
    fn directional_legality_examples() {
        let g = generate_random_graph(30, 50, 4).unwrap();
        assert!(is_legal_directional(&g, &DirectionalAssignment::all_white(&g, 3)).unwrap());
        // path 0-1-2: no constraint ever applies on the two end edges
        let p = Graph::path(3);
        let d = DirectionalAssignment::new(2, vec![1; 4]).unwrap();
        assert!(is_legal_directional(&p, &d).unwrap());
        // path 0-1-2-3 all ones: edge {1,2}, k = 0, m = 3 clashes
        let p4 = Graph::path(4);
        let d = DirectionalAssignment::new(2, vec![1; 6]).unwrap();
        assert!(!is_legal_directional(&p4, &d).unwrap());
        // same clash is waived when w(2|1) is white
        let mut d = d;
        d.set(p4.directed_index(2, 1).unwrap(), 0);
        d.set(p4.directed_index(1, 2).unwrap(), 0);
        assert!(is_legal_directional(&p4, &d).unwrap());
    }

    #[test]
    fn directional_whitening_examples() {
        let t = Graph::complete(3);
        let d = directional_from_coloring(&t, &col(3, &[1, 2, 3])).unwrap();
        let w = whiten_directional(&t, &d).unwrap();
        assert!(w.is_all_white());
        // contrast: node whitening keeps the triangle colored
        assert!(!whiten(&t, &col(3, &[1, 2, 3])).unwrap().is_all_white());

        let empty = Graph::empty(4);
        let d = directional_from_coloring(&empty, &col(3, &[1, 2, 3, 1])).unwrap();
        let w = whiten_directional(&empty, &d).unwrap();
        assert!(w.is_empty());
        assert!(is_extremal_directional(&empty, &w).unwrap());
    }

    #[test]
    fn trees_whiten_directionally_to_white() {
        for seed in 0..40 {
            let t = random_tree(2 + seed as usize % 9, seed);
            let e = enumerate_legal_colorings(&t, 3, 100_000, u64::MAX).unwrap();
            for c in e.colorings.unwrap() {
                let d = directional_from_coloring(&t, &c).unwrap();
                let w = whiten_directional(&t, &d).unwrap();
                assert!(w.is_all_white());
                assert!(whiten(&t, &c).unwrap().is_all_white());
            }
        }
    }

    #[test]
    fn extremality_checker_examples() {
        let g = generate_random_graph(200, 200, 8).unwrap();
        assert!(is_extremal_directional(&g, &DirectionalAssignment::all_white(&g, 3)).unwrap());
        // K4 with q = 3 from (1,2,3,1): w(0|3) sees {2, 3} and is forced to 1
        let k4 = Graph::complete(4);
        let mut d = DirectionalAssignment::all_white(&k4, 3);
        for e in 0..d.len() {
            let i = k4.source(e);
            d.set(e, [1, 2, 3, 1][i]);
        }
        let e03 = k4.directed_index(0, 3).unwrap();
        assert_eq!(local_update(&k4, &d, e03), 1);
        // break the forcing at one edge by whitening it
        let mut broken = d.clone();
        broken.set(e03, 0);
        assert!(local_equation_violations(&k4, &broken).unwrap() >= 1);
        assert!(!is_extremal_directional(&k4, &broken).unwrap());
    }

    #[test]
    fn tetrahedron_has_no_coloring_like_fixed_point() {
        let k4 = Graph::complete(4);
        // the hard solutions are the six proper edge colorings, w(i|k) = w(k|i);
        // none of them assigns a node a single color
        let hard = enumerate_fixed_points(&k4, 3, false, u64::MAX).unwrap();
        assert_eq!(hard.len(), 6);
        for d in &hard {
            assert!(!node_color_consistency(&k4, d).unwrap());
            for e in 0..d.len() {
                assert_eq!(d.get(e), d.get(k4.reverse(e)));
            }
        }
        // with white allowed the iteration from a coloring never settles on
        // a hard assignment
        for code in 0..81u32 {
            let values: Vec<u8> = (0..4).map(|i| (code / 3u32.pow(i) % 3) as u8 + 1).collect();
            let c = Coloring::new(3, values).unwrap();
            for seed in 0..4 {
                let r = naive_directional_iteration(&k4, &c, 200, seed).unwrap();
                assert!(!r.converged || r.assignment.values().contains(&0));
            }
        }
    }

    #[test]
    fn node_color_consistency_examples() {
        let g = Graph::complete(3);
        assert!(node_color_consistency(&g, &DirectionalAssignment::all_white(&g, 3)).unwrap());
        let mut d = DirectionalAssignment::all_white(&g, 3);
        d.set(g.directed_index(0, 1).unwrap(), 1);
        d.set(g.directed_index(0, 2).unwrap(), 2);
        assert!(!node_color_consistency(&g, &d).unwrap());
    }

    #[test]
    fn whitening_outputs_are_extremal_and_consistent() {
        let mut tested = 0;
        for seed in 0..300u64 {
            let n = 30 + (seed as usize % 50);
            let (g, planted) =
                crate::graph::generate_planted_graph(n, (2.3 * n as f64) as usize, 3, seed)
                    .unwrap();
            let c = Coloring::new(3, planted).unwrap();
            let d = directional_from_coloring(&g, &c).unwrap();
            let w = whiten_directional(&g, &d).unwrap();
            assert!(is_extremal_directional(&g, &w).unwrap());
            assert!(node_color_consistency(&g, &w).unwrap());
            for e in 0..w.len() {
                assert!(w.get(e) == 0 || w.get(e) == d.get(e));
            }
            tested += 1;
        }
        assert_eq!(tested, 300);
    }

    #[test]
    fn fingerprint_examples() {
        let g = generate_random_graph(20, 30, 1).unwrap();
        let c = find_legal_coloring(&g, 3, 1, 100_000, 0.3).unwrap().unwrap();
        let d = directional_from_coloring(&g, &c).unwrap();
        assert_eq!(fingerprint(&d), fingerprint(&d.clone()));
        let white = DirectionalAssignment::all_white(&g, 3);
        assert_ne!(fingerprint(&white), fingerprint(&d));
        assert_eq!(fingerprint(&white).hex().len(), 64);
    }

    #[test]
    fn odd_rings_oscillate() {
        let ring = Graph::ring(3).unwrap();
        for seed in 0..10 {
            let r = naive_directional_iteration(&ring, &col(2, &[1, 2, 1]), 100, seed).unwrap();
            assert!(!r.converged);
            assert!(r.cycle_detected);
        }
    }

    #[test]
    fn trees_converge_under_naive_iteration() {
        for seed in 0..30 {
            let t = random_tree(50, seed);
            let c = find_legal_coloring(&t, 3, seed, 10_000, 0.3).unwrap().unwrap();
            let r = naive_directional_iteration(&t, &c, 200, seed).unwrap();
            assert!(r.converged);
            assert!(r.assignment.is_all_white());
        }
    }

    #[test]
    fn staggered_ring_breaks_exactly_one_equation() {
        for n in [3, 5, 7, 9] {
            let (g, d) = staggered_ring_assignment(n).unwrap();
            assert_eq!(local_equation_violations(&g, &d).unwrap(), 1);
        }
    }

    #[test]
    fn hard_fixed_points_absent_on_odd_rings() {
        for n in [3, 5] {
            let g = Graph::ring(n).unwrap();
            assert!(enumerate_fixed_points(&g, 2, false, 1 << 20).unwrap().is_empty());
            let with_white = enumerate_fixed_points(&g, 2, true, 1 << 20).unwrap();
            assert_eq!(with_white.len(), 1);
            assert!(with_white[0].is_all_white());
        }
        // even rings do have hard fixed points
        let g = Graph::ring(4).unwrap();
        assert!(!enumerate_fixed_points(&g, 2, false, 1 << 20).unwrap().is_empty());
        assert!(matches!(
            enumerate_fixed_points(&Graph::ring(40).unwrap(), 2, false, 1 << 20),
            Err(Error::ResourceLimit(_))
        ));
    }
}
