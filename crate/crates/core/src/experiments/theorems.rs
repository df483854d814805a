//! Campaigns on the uniqueness and locality of extremal whitenings.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{
    alternative_coloring, check_alpha, check_positive, check_q, default_noise, default_steps_per_node, edge_count,
    invalid, run_jobs, solve, Alternative, Provenance, Report,
};
use crate::coloring::{is_legal, Coloring};
use crate::error::Result;
use crate::graph::{ball, generate_planted_graph, generate_random_graph, is_tree_region, Graph};
use crate::seed::{self, purpose};
use crate::stats::{wilson_interval, Z95};
use crate::whitening::{
    directional_from_coloring, node_color_consistency, whiten, whiten_directional,
    whiten_directional_with_order, whiten_with_order, Fingerprint,
};

fn default_radius() -> usize {
    2
}

fn default_search_budget() -> u64 {
    1_000_000
}

fn default_attempt_factor() -> usize {
    20
}

fn directional_fingerprint(g: &Graph, c: &Coloring) -> Result<Fingerprint> {
    Ok(whiten_directional(g, &directional_from_coloring(g, c)?)?.fingerprint())
}

/// Colorings that differ only inside a tree region.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremBSpec {
    pub n: usize,
    pub alpha: f64,
    pub q: usize,
    pub pairs: usize,
    /// Radius of the tree ball; the perturbed nodes lie at distance
    /// `< radius` from its center.
    #[serde(default = "default_radius")]
    pub radius: usize,
    #[serde(default)]
    pub seed: u64,
    /// Attempts allowed per requested pair.
    #[serde(default = "default_attempt_factor")]
    pub attempt_factor: usize,
    #[serde(default = "default_search_budget")]
    pub search_budget: u64,
    #[serde(default = "default_steps_per_node")]
    pub solver_steps_per_node: u64,
    #[serde(default = "default_noise")]
    pub noise: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct TheoremBSummary {
    pub pairs_tested: usize,
    pub coincidences: usize,
    pub attempts: usize,
    pub skipped_uncolored: usize,
    pub skipped_not_tree: usize,
    pub skipped_frozen: usize,
    pub skipped_budget: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct PairRecord {
    pub attempt: usize,
    pub center: usize,
    pub region_size: usize,
    pub changed_nodes: usize,
    pub coincide: bool,
}

enum PairOutcome {
    Tested(PairRecord),
    Uncolored,
    NotTree,
    Frozen,
    Budget,
}

fn theorem_b_attempt(spec: &TheoremBSpec, m: usize, k: usize) -> Result<PairOutcome> {
    let path = |p: u64| seed::derive(spec.seed, &[p, k as u64]);
    let g = generate_random_graph(spec.n, m, path(purpose::GRAPH))?;
    let Some(c) = solve(&g, spec.q, path(purpose::COLORING), spec.solver_steps_per_node, spec.noise)? else {
        return Ok(PairOutcome::Uncolored);
    };
    let mut rng = seed::rng(path(purpose::PERTURB));
    let center = rng.random_range(0..spec.n);
    let region = ball(&g, center, spec.radius)?;
    if !is_tree_region(&g, &region.nodes) {
        return Ok(PairOutcome::NotTree);
    }
    let interior: Vec<usize> = g
        .bfs_within(center, spec.radius - 1)
        .into_iter()
        .map(|(v, _)| v)
        .collect();
    let other = match alternative_coloring(&g, &c, &interior, &mut rng, spec.search_budget) {
        Alternative::Found(o) => o,
        Alternative::Frozen => return Ok(PairOutcome::Frozen),
        Alternative::BudgetExceeded => return Ok(PairOutcome::Budget),
    };
    debug_assert!(is_legal(&g, &other)?);
    let coincide = directional_fingerprint(&g, &c)? == directional_fingerprint(&g, &other)?;
    Ok(PairOutcome::Tested(PairRecord {
        attempt: k,
        center,
        region_size: interior.len(),
        changed_nodes: (0..spec.n).filter(|&v| c.get(v) != other.get(v)).count(),
        coincide,
    }))
}

/// Runs attempts in index order (batched on the pool) until `pairs`
/// valid pairs are collected or the attempt allowance runs out.
pub fn cmd_theorem_b(spec: &TheoremBSpec) -> Result<Report<TheoremBSummary, PairRecord>> {
    check_q(spec.q)?;
    check_alpha(spec.alpha)?;
    check_positive("n", spec.n)?;
    check_positive("pairs", spec.pairs)?;
    check_positive("radius", spec.radius)?;
    check_positive("attempt_factor", spec.attempt_factor)?;
    let m = edge_count(spec.n, spec.alpha)?;
    let max_attempts = spec.pairs * spec.attempt_factor;
    let mut summary = TheoremBSummary {
        pairs_tested: 0,
        coincidences: 0,
        attempts: 0,
        skipped_uncolored: 0,
        skipped_not_tree: 0,
        skipped_frozen: 0,
        skipped_budget: 0,
    };
    let mut rows = Vec::new();
    'outer: while summary.attempts < max_attempts {
        let start = summary.attempts;
        let batch = (spec.pairs - rows.len()).max(8).min(max_attempts - start);
        let outcomes = run_jobs(batch, |j| theorem_b_attempt(spec, m, start + j))?;
        for outcome in outcomes {
            summary.attempts += 1;
            match outcome {
                PairOutcome::Tested(r) => {
                    summary.pairs_tested += 1;
                    summary.coincidences += usize::from(r.coincide);
                    rows.push(r);
                    if rows.len() == spec.pairs {
                        break 'outer;
                    }
                }
                PairOutcome::Uncolored => summary.skipped_uncolored += 1,
                PairOutcome::NotTree => summary.skipped_not_tree += 1,
                PairOutcome::Frozen => summary.skipped_frozen += 1,
                PairOutcome::Budget => summary.skipped_budget += 1,
            }
        }
    }
    Ok(Report {
        provenance: Provenance::new("theorem-b", spec.seed, spec),
        summary,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColoringSource {
    /// The hidden coloring of a planted instance.
    Planted,
    /// Local search on a uniform instance.
    Solver,
}

/// Colorings that differ only within distance `l` of a random node.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremCSpec {
    pub ns: Vec<usize>,
    pub alpha: f64,
    pub q: usize,
    pub l: usize,
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "planted")]
    pub colorings: ColoringSource,
    #[serde(default = "default_attempt_factor")]
    pub attempt_factor: usize,
    #[serde(default = "default_search_budget")]
    pub search_budget: u64,
    #[serde(default = "default_steps_per_node")]
    pub solver_steps_per_node: u64,
    #[serde(default = "default_noise")]
    pub noise: f64,
}

fn planted() -> ColoringSource {
    ColoringSource::Planted
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TheoremCRecord {
    pub n: usize,
    pub samples: usize,
    pub differing: usize,
    pub q_estimate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    /// Fraction of tested samples whose radius `l + 1` ball is a tree.
    pub tree_fraction: f64,
    pub attempts: usize,
    pub skipped: usize,
}

struct SampleOutcome {
    tested: bool,
    differ: bool,
    tree: bool,
}

fn theorem_c_sample(spec: &TheoremCSpec, point: usize, n: usize, k: usize) -> Result<SampleOutcome> {
    let path = |p: u64| seed::derive(spec.seed, &[p, point as u64, k as u64]);
    let m = edge_count(n, spec.alpha)?;
    let skipped = SampleOutcome { tested: false, differ: false, tree: false };
    let (g, c) = match spec.colorings {
        ColoringSource::Planted => {
            let (g, hidden) = generate_planted_graph(n, m, spec.q, path(purpose::GRAPH))?;
            let c = Coloring::new(spec.q, hidden)?;
            (g, c)
        }
        ColoringSource::Solver => {
            let g = generate_random_graph(n, m, path(purpose::GRAPH))?;
            match solve(&g, spec.q, path(purpose::COLORING), spec.solver_steps_per_node, spec.noise)? {
                Some(c) => (g, c),
                None => return Ok(skipped),
            }
        }
    };
    let mut rng = seed::rng(path(purpose::PERTURB));
    let center = rng.random_range(0..n);
    let region: Vec<usize> = g.bfs_within(center, spec.l).into_iter().map(|(v, _)| v).collect();
    let other = match alternative_coloring(&g, &c, &region, &mut rng, spec.search_budget) {
        Alternative::Found(o) => o,
        _ => return Ok(skipped),
    };
    let differ = directional_fingerprint(&g, &c)? != directional_fingerprint(&g, &other)?;
    let tree = is_tree_region(&g, &ball(&g, center, spec.l + 1)?.nodes);
    Ok(SampleOutcome { tested: true, differ, tree })
}

pub fn cmd_theorem_c(spec: &TheoremCSpec) -> Result<Report<(), TheoremCRecord>> {
    check_q(spec.q)?;
    check_alpha(spec.alpha)?;
    check_positive("samples", spec.samples)?;
    check_positive("attempt_factor", spec.attempt_factor)?;
    if spec.ns.is_empty() {
        return Err(invalid("ns must not be empty"));
    }
    for &n in &spec.ns {
        check_positive("n", n)?;
        edge_count(n, spec.alpha)?;
    }
    let mut rows = Vec::new();
    for (point, &n) in spec.ns.iter().enumerate() {
        let max_attempts = spec.samples * spec.attempt_factor;
        let (mut attempts, mut tested, mut differing, mut trees) = (0, 0, 0, 0);
        while tested < spec.samples && attempts < max_attempts {
            let start = attempts;
            let batch = (spec.samples - tested).max(8).min(max_attempts - start);
            let outcomes = run_jobs(batch, |j| theorem_c_sample(spec, point, n, start + j))?;
            for o in outcomes {
                attempts += 1;
                if o.tested {
                    tested += 1;
                    differing += usize::from(o.differ);
                    trees += usize::from(o.tree);
                    if tested == spec.samples {
                        break;
                    }
                }
            }
        }
        let (lo, hi) = wilson_interval(differing as u64, tested as u64, Z95);
        rows.push(TheoremCRecord {
            n,
            samples: tested,
            differing,
            q_estimate: if tested == 0 { 0.0 } else { differing as f64 / tested as f64 },
            wilson_low: lo,
            wilson_high: hi,
            tree_fraction: if tested == 0 { 0.0 } else { trees as f64 / tested as f64 },
            attempts,
            skipped: attempts - tested,
        });
    }
    Ok(Report {
        provenance: Provenance::new("theorem-c", spec.seed, spec),
        summary: (),
        rows,
    })
}

/// Order independence of both whitening procedures.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniquenessSpec {
    pub instances: usize,
    pub orders: usize,
    #[serde(default = "default_n_min")]
    pub n_min: usize,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_q")]
    pub q: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_n_min() -> usize {
    100
}

fn default_n_max() -> usize {
    300
}

fn default_q() -> usize {
    3
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct UniquenessSummary {
    pub instances: usize,
    pub orders: usize,
    pub node_mismatches: usize,
    pub directional_mismatches: usize,
    pub consistency_failures: usize,
    /// Instances whose extremal directional whitening is not all white.
    pub nontrivial_instances: usize,
    pub mean_nonwhite_fraction: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct UniquenessRecord {
    pub instance: usize,
    pub n: usize,
    pub alpha: f64,
    pub planted: bool,
    pub node_mismatches: usize,
    pub directional_mismatches: usize,
    pub consistency_failures: usize,
    pub nonwhite_fraction: f64,
}

/// Even instances: uniform graphs at `alpha` in `[1.6, 2.2]` colored by
/// local search (resampled until colorable). Odd instances: planted graphs
/// at `alpha` in `[2.3, 2.6]`, which carry frozen, non-white whitenings.
fn uniqueness_instance(spec: &UniquenessSpec, k: usize) -> Result<UniquenessRecord> {
    let mut rng = seed::rng(seed::derive(spec.seed, &[purpose::GRAPH, k as u64]));
    let n = rng.random_range(spec.n_min..=spec.n_max);
    let planted = k % 2 == 1;
    let (alpha, g, c) = if planted {
        let alpha = rng.random_range(2.3..=2.6);
        let (g, hidden) = generate_planted_graph(n, edge_count(n, alpha)?, spec.q, rng.random())?;
        (alpha, g, Coloring::new(spec.q, hidden)?)
    } else {
        let alpha = rng.random_range(1.6..=2.2);
        let m = edge_count(n, alpha)?;
        let mut found = None;
        for _ in 0..50 {
            let g = generate_random_graph(n, m, rng.random())?;
            if let Some(c) = solve(&g, spec.q, rng.random(), default_steps_per_node(), default_noise())? {
                found = Some((g, c));
                break;
            }
        }
        let (g, c) = found.ok_or_else(|| invalid(format!("no colorable instance at n = {n}, alpha = {alpha}")))?;
        (alpha, g, c)
    };
    let node_ref = whiten(&g, &c)?;
    let start = directional_from_coloring(&g, &c)?;
    let dir_ref = whiten_directional(&g, &start)?;
    let mut record = UniquenessRecord {
        instance: k,
        n,
        alpha,
        planted,
        node_mismatches: 0,
        directional_mismatches: 0,
        consistency_failures: usize::from(!node_color_consistency(&g, &dir_ref)?),
        nonwhite_fraction: dir_ref.values().iter().filter(|&&v| v != 0).count() as f64
            / dir_ref.len().max(1) as f64,
    };
    for o in 0..spec.orders {
        let order_seed = seed::derive(spec.seed, &[purpose::ORDER, k as u64, o as u64]);
        record.node_mismatches += usize::from(whiten_with_order(&g, &c, Some(order_seed))? != node_ref);
        let d = whiten_directional_with_order(&g, &start, Some(order_seed))?;
        record.directional_mismatches += usize::from(d != dir_ref);
        record.consistency_failures += usize::from(!node_color_consistency(&g, &d)?);
    }
    Ok(record)
}

pub fn cmd_uniqueness(spec: &UniquenessSpec) -> Result<Report<UniquenessSummary, UniquenessRecord>> {
    check_q(spec.q)?;
    check_positive("instances", spec.instances)?;
    check_positive("orders", spec.orders)?;
    if spec.n_min < 2 || spec.n_max < spec.n_min {
        return Err(invalid("need 2 <= n_min <= n_max"));
    }
    let rows = run_jobs(spec.instances, |k| uniqueness_instance(spec, k))?;
    let summary = UniquenessSummary {
        instances: rows.len(),
        orders: spec.orders,
        node_mismatches: rows.iter().map(|r| r.node_mismatches).sum(),
        directional_mismatches: rows.iter().map(|r| r.directional_mismatches).sum(),
        consistency_failures: rows.iter().map(|r| r.consistency_failures).sum(),
        nontrivial_instances: rows.iter().filter(|r| r.nonwhite_fraction > 0.0).count(),
        mean_nonwhite_fraction: rows.iter().map(|r| r.nonwhite_fraction).sum::<f64>() / rows.len() as f64,
    };
    Ok(Report {
        provenance: Provenance::new("uniqueness", spec.seed, spec),
        summary,
        rows,
    })
}
