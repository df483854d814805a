//! Uncolorable-phase machinery: k-stable configurations, ball-restricted
//! energy shifts, cavity fields, the three-node factorization test and the
//! zero-temperature min-sum update with its quasi-solution residual.
//!
//! Energy shifts are exact minima over every recoloring of a region, found
//! by depth-first branch and bound. They are the brute-force oracle against
//! which the min-sum tables are checked.

use std::collections::hash_map::DefaultHasher;
use std::collections::{HashMap, HashSet};
use std::hash::{Hash, Hasher};

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::coloring::{check_q, energy, Coloring, Energy};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seed;
use crate::whitening::{DirectionalAssignment, WHITE};

/// Default number of search nodes per region minimisation.
pub const DEFAULT_REGION_BUDGET: u64 = 50_000_000;

/// Minimum of `H - H*` over the recolorings of `region`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMinimum {
    pub shift: i64,
    /// Colors of the region nodes (same order as the region) in the
    /// lexicographically first optimal configuration.
    pub colors: Vec<u8>,
}

/// Exact minimum of `H - H*` over configurations that agree with
/// `reference` outside `region` and with `pins` on the pinned nodes. Only
/// edges touching the region matter; `forbidden` removes one edge from `H`
/// and `H*` alike.
///
/// Region nodes are searched in the given order. With `first_improvement`
/// the search stops at the first configuration strictly below the
/// reference.
pub fn region_minimum(
    g: &Graph,
    reference: &Coloring,
    region: &[usize],
    pins: &[(usize, u8)],
    forbidden: Option<(usize, usize)>,
    budget: u64,
    first_improvement: bool,
) -> Result<RegionMinimum> {
    let q = reference.q();
    let star = reference.values();
    if star.len() != g.n() {
        return Err(Error::InvalidArgument("reference size mismatch".into()));
    }
    let mut position: HashMap<usize, usize> = HashMap::with_capacity(region.len());
    for (p, &v) in region.iter().enumerate() {
        if v >= g.n() {
            return Err(Error::InvalidArgument(format!("node {v} out of range")));
        }
        if position.insert(v, p).is_some() {
            return Err(Error::InvalidArgument(format!("node {v} repeated in region")));
        }
    }
    let mut pinned: Vec<Option<u8>> = vec![None; region.len()];
    for &(v, c) in pins {
        let Some(&p) = position.get(&v) else {
            return Err(Error::InvalidArgument(format!("pinned node {v} outside region")));
        };
        if c == 0 || c as usize > q {
            return Err(Error::InvalidArgument(format!("pinned color {c} outside 1..={q}")));
        }
        match pinned[p] {
            Some(prev) if prev != c => {
                return Err(Error::InvalidArgument(format!(
                    "node {v} pinned to both {prev} and {c}"
                )))
            }
            _ => pinned[p] = Some(c),
        }
    }
    let skip = |u: usize, v: usize| forbidden.is_some_and(|(a, b)| (a, b) == (u, v) || (b, a) == (u, v));

    // Baseline H* over edges touching the region.
    let mut baseline = 0i64;
    for (p, &u) in region.iter().enumerate() {
        for &v in g.neighbors(u) {
            if skip(u, v) {
                continue;
            }
            let counted_once = match position.get(&v) {
                Some(&pv) => pv > p,
                None => true,
            };
            if counted_once && star[u] == star[v] {
                baseline += 1;
            }
        }
    }

    // Free nodes in region order; pinned nodes act as fixed.
    let free: Vec<usize> = (0..region.len()).filter(|&p| pinned[p].is_none()).collect();
    let mut free_index = vec![usize::MAX; region.len()];
    for (f, &p) in free.iter().enumerate() {
        free_index[p] = f;
    }
    let fixed_color = |v: usize| -> Option<u8> {
        match position.get(&v) {
            None => Some(star[v]),
            Some(&pv) => pinned[pv],
        }
    };
    // Cost among fixed endpoints (pinned-pinned and pinned-outside).
    let mut constant = 0i64;
    for (p, &u) in region.iter().enumerate() {
        let Some(cu) = pinned[p] else { continue };
        for &v in g.neighbors(u) {
            if skip(u, v) {
                continue;
            }
            let once = match position.get(&v) {
                Some(&pv) => pinned[pv].is_some() && pv > p,
                None => true,
            };
            if once && fixed_color(v) == Some(cu) {
                constant += 1;
            }
        }
    }
    // For each free node: colors of fixed neighbours, and earlier free ones.
    enum Link {
        Fixed(u8),
        Free(usize),
    }
    let links: Vec<Vec<Link>> = free
        .iter()
        .enumerate()
        .map(|(f, &p)| {
            let u = region[p];
            g.neighbors(u)
                .iter()
                .filter(|&&v| !skip(u, v))
                .filter_map(|&v| match fixed_color(v) {
                    Some(c) => Some(Link::Fixed(c)),
                    None => {
                        let fv = free_index[position[&v]];
                        (fv < f).then_some(Link::Free(fv))
                    }
                })
                .collect()
        })
        .collect();
    let cost_of = |f: usize, c: u8, assign: &[u8]| -> i64 {
        links[f]
            .iter()
            .filter(|l| match l {
                Link::Fixed(x) => *x == c,
                Link::Free(j) => assign[*j] == c,
            })
            .count() as i64
    };

    // Upper bound: the reference colors on the free nodes.
    let mut assign: Vec<u8> = free.iter().map(|&p| star[region[p]]).collect();
    let mut best_cost = constant
        + (0..free.len())
            .map(|f| cost_of(f, assign[f], &assign))
            .sum::<i64>();
    let mut best_assign = assign.clone();

    let nf = free.len();
    if nf > 0 && !(first_improvement && best_cost < baseline) {
        let mut partial = vec![0i64; nf + 1];
        partial[0] = constant;
        assign.iter_mut().for_each(|c| *c = 0);
        let mut depth = 0usize;
        let mut steps = 0u64;
        'search: loop {
            let mut c = assign[depth] + 1;
            let mut placed = false;
            while c as usize <= q {
                let cost = partial[depth] + cost_of(depth, c, &assign);
                if cost < best_cost {
                    steps += 1;
                    if steps > budget {
                        return Err(Error::ResourceLimit(format!(
                            "region minimisation exceeded {budget} search nodes"
                        )));
                    }
                    assign[depth] = c;
                    partial[depth + 1] = cost;
                    placed = true;
                    break;
                }
                c += 1;
            }
            if !placed {
                assign[depth] = 0;
                if depth == 0 {
                    break;
                }
                depth -= 1;
                continue;
            }
            if depth + 1 == nf {
                best_cost = partial[nf];
                best_assign.copy_from_slice(&assign);
                if first_improvement && best_cost < baseline {
                    break 'search;
                }
                // stay at this depth; larger colors can only tie or worsen
                // the same prefix, so the loop continues with c + 1
            } else {
                depth += 1;
            }
        }
    }

    let mut colors = Vec::with_capacity(region.len());
    for p in 0..region.len() {
        colors.push(match pinned[p] {
            Some(c) => c,
            None => best_assign[free_index[p]],
        });
    }
    Ok(RegionMinimum {
        shift: best_cost - baseline,
        colors,
    })
}

fn region_order(g: &Graph, center: usize, radius: usize) -> Vec<usize> {
    g.bfs_within(center, radius).into_iter().map(|(v, _)| v).collect()
}

fn check_reference(g: &Graph, c: &Coloring) -> Result<()> {
    if c.len() != g.n() {
        return Err(Error::InvalidArgument(format!(
            "coloring has {} entries, graph has {} nodes",
            c.len(),
            g.n()
        )));
    }
    Ok(())
}

/// True iff no recoloring of any radius-`k` ball strictly lowers `H`.
pub fn is_k_stable(g: &Graph, c: &Coloring, k: usize, budget: u64) -> Result<bool> {
    check_reference(g, c)?;
    for i in 0..g.n() {
        let region = region_order(g, i, k);
        if region_minimum(g, c, &region, &[], None, budget, true)?.shift < 0 {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Serialize)]
pub struct KStableConfig {
    #[serde(skip)]
    pub coloring: Coloring,
    pub k: usize,
    pub energy: Energy,
    /// A full sweep found no improving move and no ball exceeded its budget.
    pub certified: bool,
    pub sweeps: usize,
    pub moves: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct DescentBudget {
    pub max_sweeps: usize,
    pub region_budget: u64,
}

impl Default for DescentBudget {
    fn default() -> Self {
        DescentBudget {
            max_sweeps: 1000,
            region_budget: DEFAULT_REGION_BUDGET,
        }
    }
}

/// Greedy descent over ball recolorings. Each sweep visits the nodes in a
/// fresh random order; at each node the optimal recoloring of its radius-`k`
/// ball is applied when it strictly lowers `H` (ties broken towards the
/// lexicographically smallest recoloring in BFS order).
pub fn k_stable_descent(
    g: &Graph,
    q: usize,
    c0: &Coloring,
    k: usize,
    seed: u64,
    budget: DescentBudget,
) -> Result<KStableConfig> {
    check_q(q)?;
    check_reference(g, c0)?;
    if c0.q() != q {
        return Err(Error::InvalidArgument("coloring q mismatch".into()));
    }
    let mut rng = seed::rng(seed);
    let mut c = c0.clone();
    let mut order: Vec<usize> = (0..g.n()).collect();
    let mut moves = 0usize;
    let mut sweeps = 0usize;
    let mut certified = false;
    while sweeps < budget.max_sweeps {
        sweeps += 1;
        order.shuffle(&mut rng);
        let mut improved = false;
        let mut complete = true;
        for &i in &order {
            let region = region_order(g, i, k);
            match region_minimum(g, &c, &region, &[], None, budget.region_budget, false) {
                Ok(best) if best.shift < 0 => {
                    for (p, &v) in region.iter().enumerate() {
                        c.set(v, best.colors[p]);
                    }
                    moves += 1;
                    improved = true;
                }
                Ok(_) => {}
                Err(Error::ResourceLimit(_)) => complete = false,
                Err(e) => return Err(e),
            }
        }
        if !improved {
            certified = complete;
            break;
        }
    }
    let energy = energy(g, &c)?;
    Ok(KStableConfig {
        coloring: c,
        k,
        energy,
        certified,
        sweeps,
        moves,
    })
}

/// `Δ_b(c; i)`: minimum of `H - H*` with node `i` pinned to `color` and
/// only the radius-`b` ball around `i` free. With `forbidden_edge` the edge
/// is dropped from the energy (the cavity variant).
pub fn node_delta(
    g: &Graph,
    reference: &Coloring,
    i: usize,
    color: u8,
    b: usize,
    forbidden_edge: Option<(usize, usize)>,
    budget: u64,
) -> Result<i64> {
    check_reference(g, reference)?;
    if i >= g.n() {
        return Err(Error::InvalidArgument(format!("node {i} out of range")));
    }
    let region = region_order(g, i, b);
    Ok(region_minimum(g, reference, &region, &[(i, color)], forbidden_edge, budget, false)?.shift)
}

/// Per-node, per-color energy shifts for radius `b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeDeltaTable {
    pub q: usize,
    pub b: usize,
    /// `values[i * q + (c - 1)]`
    pub values: Vec<i64>,
}

impl NodeDeltaTable {
    pub fn compute(g: &Graph, reference: &Coloring, b: usize, budget: u64) -> Result<Self> {
        let q = reference.q();
        let mut values = Vec::with_capacity(g.n() * q);
        for i in 0..g.n() {
            for c in 1..=q as u8 {
                values.push(node_delta(g, reference, i, c, b, None, budget)?);
            }
        }
        Ok(NodeDeltaTable { q, b, values })
    }

    pub fn get(&self, i: usize, c: u8) -> i64 {
        self.values[i * self.q + c as usize - 1]
    }
}

/// Effective cavity field for two colors: `Δ_b(c; i) = h_b(i) (c - c*(i))`.
pub fn cavity_field(g: &Graph, reference: &Coloring, i: usize, b: usize, budget: u64) -> Result<i64> {
    if reference.q() != 2 {
        return Err(Error::Unsupported(format!(
            "cavity field defined for q = 2, got q = {}",
            reference.q()
        )));
    }
    check_reference(g, reference)?;
    if i >= g.n() {
        return Err(Error::InvalidArgument(format!("node {i} out of range")));
    }
    let own = reference.get(i);
    let other = 3 - own;
    let delta = node_delta(g, reference, i, other, b, None, budget)?;
    // other - own is +1 or -1
    Ok(if other > own { delta } else { -delta })
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct FactorizationCheck {
    pub holds: bool,
    pub lhs: i64,
    pub rhs: i64,
    /// The three balls are pairwise disjoint and no edge joins two of them.
    pub separated: bool,
}

/// Compares the joint shift with three pinned nodes (over the union of
/// their balls) against the sum of the three single-node shifts.
pub fn factorization_check(
    g: &Graph,
    reference: &Coloring,
    nodes: [usize; 3],
    colors: [u8; 3],
    b: usize,
    budget: u64,
) -> Result<FactorizationCheck> {
    check_reference(g, reference)?;
    if let Some(&v) = nodes.iter().find(|&&v| v >= g.n()) {
        return Err(Error::InvalidArgument(format!("node {v} out of range")));
    }
    let balls: Vec<Vec<usize>> = nodes.iter().map(|&v| region_order(g, v, b)).collect();
    let mut seen = HashSet::new();
    let mut union = Vec::new();
    for ball in &balls {
        for &v in ball {
            if seen.insert(v) {
                union.push(v);
            }
        }
    }
    let pins: Vec<(usize, u8)> = nodes.iter().copied().zip(colors).collect();
    let lhs = region_minimum(g, reference, &union, &pins, None, budget, false)?.shift;
    let mut rhs = 0;
    for k in 0..3 {
        rhs += node_delta(g, reference, nodes[k], colors[k], b, None, budget)?;
    }
    let sets: Vec<HashSet<usize>> = balls.iter().map(|b| b.iter().copied().collect()).collect();
    let mut separated = true;
    for a in 0..3 {
        for c in a + 1..3 {
            let touching = sets[a].iter().any(|&u| {
                sets[c].contains(&u) || g.neighbors(u).iter().any(|v| sets[c].contains(v))
            });
            separated &= !touching;
        }
    }
    Ok(FactorizationCheck {
        holds: lhs == rhs,
        lhs,
        rhs,
        separated,
    })
}

/// Cavity energy shifts `Δ(c; i -> j)` per directed edge and color,
/// normalised so that every row has minimum 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CavityDeltaTable {
    q: usize,
    /// `values[e * q + (c - 1)]`
    values: Vec<u32>,
}

impl CavityDeltaTable {
    pub fn zeros(g: &Graph, q: usize) -> Result<Self> {
        check_q(q)?;
        Ok(CavityDeltaTable {
            q,
            values: vec![0; g.num_directed() * q],
        })
    }

    /// Rows that pin each sender to its reference color: 0 there, `q`
    /// elsewhere. Any value of at least 1 acts as an infinite penalty under
    /// the min-sum update.
    pub fn frozen(g: &Graph, reference: &Coloring) -> Result<Self> {
        check_reference(g, reference)?;
        let q = reference.q();
        let mut values = vec![q as u32; g.num_directed() * q];
        for e in 0..g.num_directed() {
            values[e * q + reference.get(g.source(e)) as usize - 1] = 0;
        }
        Ok(CavityDeltaTable { q, values })
    }

    /// Hard messages from a directional assignment: white rows are all
    /// zero, a color `c` row is 0 at `c` and 1 elsewhere.
    pub fn from_directional(g: &Graph, d: &DirectionalAssignment) -> Result<Self> {
        if d.len() != g.num_directed() {
            return Err(Error::InvalidArgument("assignment size mismatch".into()));
        }
        let q = d.q();
        let mut values = vec![0u32; d.len() * q];
        for e in 0..d.len() {
            let v = d.get(e);
            if v != WHITE {
                for c in 1..=q {
                    values[e * q + c - 1] = u32::from(c != v as usize);
                }
            }
        }
        Ok(CavityDeltaTable { q, values })
    }

    /// Seeds every row from the exhaustive cavity shifts
    /// `node_delta(c*, i, c, b, forbidden = {i, j})`, normalised.
    pub fn from_configuration(g: &Graph, reference: &Coloring, b: usize, budget: u64) -> Result<Self> {
        check_reference(g, reference)?;
        let q = reference.q();
        let mut values = Vec::with_capacity(g.num_directed() * q);
        let mut row = vec![0i64; q];
        for e in 0..g.num_directed() {
            let (i, j) = (g.source(e), g.target(e));
            for c in 1..=q {
                row[c - 1] = node_delta(g, reference, i, c as u8, b, Some((i, j)), budget)?;
            }
            let min = *row.iter().min().unwrap();
            values.extend(row.iter().map(|&x| (x - min) as u32));
        }
        Ok(CavityDeltaTable { q, values })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn row(&self, e: usize) -> &[u32] {
        &self.values[e * self.q..(e + 1) * self.q]
    }

    pub fn get(&self, e: usize, c: u8) -> u32 {
        self.values[e * self.q + c as usize - 1]
    }

    pub fn num_rows(&self) -> usize {
        self.values.len() / self.q
    }

    /// Rows with exactly one zero entry (a forced color).
    pub fn hard_rows(&self) -> usize {
        (0..self.num_rows())
            .filter(|&e| self.row(e).iter().filter(|&&x| x == 0).count() == 1)
            .count()
    }
}

/// `min_{c'} [m(c') + [c' = c]]` for every `c`, for a row with minimum 0.
fn relay(row: &[u32], out: &mut [u32]) {
    let (mut m1, mut m2, mut arg) = (u32::MAX, u32::MAX, usize::MAX);
    for (c, &x) in row.iter().enumerate() {
        if x < m1 {
            m2 = m1;
            m1 = x;
            arg = c;
        } else if x < m2 {
            m2 = x;
        }
    }
    for (c, o) in out.iter_mut().enumerate() {
        let others = if c == arg { m2 } else { m1 };
        *o = (row[c].saturating_add(1)).min(others);
    }
}

/// One synchronous application of the min-sum update
/// `Δ'(c; i -> j) = Σ_{k in A(i) \ {j}} min_{c'} [Δ(c'; k -> i) + [c' = c]]`,
/// followed by per-row normalisation to minimum 0.
pub fn min_sum_update(g: &Graph, table: &CavityDeltaTable) -> CavityDeltaTable {
    let q = table.q;
    let mut values = vec![0u32; table.values.len()];
    let mut total = vec![0u32; q];
    let mut relays = vec![0u32; g.num_directed() * q];
    for e in 0..g.num_directed() {
        relay(table.row(e), &mut relays[e * q..(e + 1) * q]);
    }
    for i in 0..g.n() {
        total.iter_mut().for_each(|t| *t = 0);
        for e in g.out_edges(i) {
            let incoming = g.reverse(e);
            for c in 0..q {
                total[c] += relays[incoming * q + c];
            }
        }
        for e in g.out_edges(i) {
            let incoming = g.reverse(e);
            let out = &mut values[e * q..(e + 1) * q];
            for c in 0..q {
                out[c] = total[c] - relays[incoming * q + c];
            }
            let min = *out.iter().min().unwrap();
            out.iter_mut().for_each(|x| *x -= min);
        }
    }
    CavityDeltaTable { q, values }
}

/// Node-level shifts `Σ_{k in A(i)} min_{c'} [Δ(c'; k -> i) + [c' = c]]`,
/// normalised per node. Isolated nodes get all zeros.
pub fn node_beliefs(g: &Graph, table: &CavityDeltaTable) -> Vec<Vec<u32>> {
    let q = table.q;
    let mut scratch = vec![0u32; q];
    (0..g.n())
        .map(|i| {
            let mut total = vec![0u32; q];
            for e in g.out_edges(i) {
                relay(table.row(g.reverse(e)), &mut scratch);
                for c in 0..q {
                    total[c] += scratch[c];
                }
            }
            let min = total.iter().copied().min().unwrap_or(0);
            total.iter_mut().for_each(|x| *x -= min);
            total
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct ResidualReport {
    pub violated_edges: usize,
    pub total_l1: u64,
    pub per_node: f64,
}

/// L1 distance between a table and one application of the update.
pub fn quasi_residual(g: &Graph, table: &CavityDeltaTable) -> ResidualReport {
    residual_between(g, table, &min_sum_update(g, table))
}

fn residual_between(g: &Graph, table: &CavityDeltaTable, next: &CavityDeltaTable) -> ResidualReport {
    let q = table.q;
    let mut violated_edges = 0;
    let mut total_l1 = 0u64;
    for e in 0..table.num_rows() {
        let diff: u64 = table.values[e * q..(e + 1) * q]
            .iter()
            .zip(&next.values[e * q..(e + 1) * q])
            .map(|(&a, &b)| u64::from(a.abs_diff(b)))
            .sum();
        if diff > 0 {
            violated_edges += 1;
            total_l1 += diff;
        }
    }
    ResidualReport {
        violated_edges,
        total_l1,
        per_node: if g.n() == 0 { 0.0 } else { total_l1 as f64 / g.n() as f64 },
    }
}

#[derive(Debug, Clone)]
pub struct MinSumRun {
    pub table: CavityDeltaTable,
    /// Residual of the table entering each sweep; the last entry belongs to
    /// the returned table.
    pub history: Vec<ResidualReport>,
    pub stationary: bool,
    /// Sweep at which a previously seen table reappeared, and its period.
    pub cycle: Option<(usize, usize)>,
}

/// Synchronous min-sum iteration. Stops early only when a sweep changes
/// nothing; repeated tables are recorded as a cycle.
pub fn min_sum_run(g: &Graph, start: CavityDeltaTable, max_sweeps: usize) -> MinSumRun {
    let mut table = start;
    let mut history = Vec::with_capacity(max_sweeps + 1);
    let mut seen: HashMap<u64, usize> = HashMap::new();
    let mut cycle = None;
    let mut stationary = false;
    for sweep in 0..=max_sweeps {
        let next = min_sum_update(g, &table);
        let report = residual_between(g, &table, &next);
        history.push(report);
        if report.violated_edges == 0 {
            stationary = true;
            break;
        }
        if cycle.is_none() {
            let mut h = DefaultHasher::new();
            table.hash(&mut h);
            if let Some(prev) = seen.insert(h.finish(), sweep) {
                cycle = Some((sweep, sweep - prev));
            }
        }
        if sweep == max_sweeps {
            break;
        }
        table = next;
    }
    MinSumRun {
        table,
        history,
        stationary,
        cycle,
    }
}
