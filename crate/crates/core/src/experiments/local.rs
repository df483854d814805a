//! Local-equation campaigns: odd rings, min-sum residuals, factorization.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{
    check_alpha, check_positive, check_q, default_noise, default_steps_per_node, edge_count, invalid, run_jobs,
    solve, Provenance, Report,
};
use crate::coloring::Coloring;
use crate::error::{Error, Result};
use crate::graph::{generate_random_graph, Graph};
use crate::local_minima::{
    factorization_check, k_stable_descent, min_sum_run, CavityDeltaTable, DescentBudget, ResidualReport,
    DEFAULT_REGION_BUDGET,
};
use crate::seed::{self, purpose};
use crate::stats::mean_stderr;
use crate::whitening::{
    enumerate_fixed_points, local_equation_violations, naive_directional_iteration, staggered_ring_assignment,
};

fn default_max_sweeps() -> usize {
    1000
}

fn default_enumeration_budget() -> u64 {
    10_000_000
}

/// Odd rings with two colors.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingDemoSpec {
    pub ns: Vec<usize>,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
    #[serde(default)]
    pub seed: u64,
    /// Largest assignment space enumerated for the fixed-point census.
    #[serde(default = "default_enumeration_budget")]
    pub enumeration_budget: u64,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct RingDemoRecord {
    pub n: usize,
    /// Fixed points with every value in `{1, 2}`.
    pub hard_fixed_points: usize,
    /// Fixed points with white allowed; empty when the space exceeds the
    /// budget.
    pub fixed_points_with_white: Option<usize>,
    pub only_all_white: Option<bool>,
    pub naive_converged: bool,
    pub naive_cycle_detected: bool,
    pub naive_cycle_length: Option<usize>,
    pub staggered_violations: usize,
}

pub fn cmd_ring_demo(spec: &RingDemoSpec) -> Result<Report<(), RingDemoRecord>> {
    if spec.ns.is_empty() {
        return Err(invalid("ns must not be empty"));
    }
    for &n in &spec.ns {
        if n < 3 || n % 2 == 0 {
            return Err(invalid(format!("ring demo needs odd n >= 3, got {n} (even rings are 2-colorable)")));
        }
    }
    check_positive("max_sweeps", spec.max_sweeps)?;
    let rows = spec
        .ns
        .iter()
        .map(|&n| {
            let g = Graph::ring(n)?;
            let hard = enumerate_fixed_points(&g, 2, false, spec.enumeration_budget)?;
            let with_white = match enumerate_fixed_points(&g, 2, true, spec.enumeration_budget) {
                Ok(f) => Some(f),
                Err(Error::ResourceLimit(_)) => None,
                Err(e) => return Err(e),
            };
            // the alternating coloring with its single unavoidable conflict
            let c0 = Coloring::new(2, (0..n).map(|i| (i % 2) as u8 + 1).collect())?;
            let naive = naive_directional_iteration(&g, &c0, spec.max_sweeps, seed::derive(spec.seed, &[n as u64]))?;
            let (ring, staggered) = staggered_ring_assignment(n)?;
            Ok(RingDemoRecord {
                n,
                hard_fixed_points: hard.len(),
                fixed_points_with_white: with_white.as_ref().map(Vec::len),
                only_all_white: with_white.as_ref().map(|f| f.len() == 1 && f[0].is_all_white()),
                naive_converged: naive.converged,
                naive_cycle_detected: naive.cycle_detected,
                naive_cycle_length: naive.cycle_length,
                staggered_violations: local_equation_violations(&ring, &staggered)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Report {
        provenance: Provenance::new("ring-demo", spec.seed, spec),
        summary: (),
        rows,
    })
}

fn default_k() -> usize {
    1
}

fn default_b() -> usize {
    1
}

/// Min-sum from a configuration-seeded table on one random instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuasiSpec {
    pub n: usize,
    pub q: usize,
    pub alpha: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_b")]
    pub b: usize,
    pub sweeps: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct QuasiSummary {
    pub stationary: bool,
    pub cycle_start: Option<usize>,
    pub cycle_period: Option<usize>,
    pub reference_energy: usize,
    pub reference_certified: bool,
    pub final_per_node: f64,
    pub min_per_node: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ResidualRow {
    pub sweep: usize,
    pub violated_edges: usize,
    pub total_l1: u64,
    pub per_node: f64,
}

struct QuasiOutcome {
    history: Vec<ResidualReport>,
    stationary: bool,
    cycle: Option<(usize, usize)>,
    energy: usize,
    certified: bool,
}

/// Random coloring, `k`-stable descent, table seeded from the result with
/// radius-`b` cavity shifts, then `sweeps` synchronous min-sum sweeps.
fn quasi_instance(spec: &QuasiSpec, path: &[u64]) -> Result<QuasiOutcome> {
    let QuasiSpec { n, q, alpha, k, b, sweeps, seed: master } = *spec;
    let sub = |p: u64| {
        let mut full = vec![p];
        full.extend_from_slice(path);
        seed::derive(master, &full)
    };
    let g = generate_random_graph(n, edge_count(n, alpha)?, sub(purpose::GRAPH))?;
    let mut rng = seed::rng(sub(purpose::COLORING));
    let c0 = Coloring::new(q, (0..n).map(|_| rng.random_range(1..=q as u8)).collect())?;
    let stable = k_stable_descent(&g, q, &c0, k, sub(purpose::DESCENT), DescentBudget::default())?;
    let table = CavityDeltaTable::from_configuration(&g, &stable.coloring, b, DEFAULT_REGION_BUDGET)?;
    let run = min_sum_run(&g, table, sweeps);
    Ok(QuasiOutcome {
        history: run.history,
        stationary: run.stationary,
        cycle: run.cycle,
        energy: stable.energy.violated_edges,
        certified: stable.certified,
    })
}

fn check_quasi(q: usize, alpha: f64, sweeps: usize) -> Result<()> {
    check_q(q)?;
    check_alpha(alpha)?;
    check_positive("sweeps", sweeps)
}

pub fn cmd_quasi(spec: &QuasiSpec) -> Result<Report<QuasiSummary, ResidualRow>> {
    check_quasi(spec.q, spec.alpha, spec.sweeps)?;
    check_positive("n", spec.n)?;
    let o = quasi_instance(spec, &[])?;
    let rows: Vec<ResidualRow> = o
        .history
        .iter()
        .enumerate()
        .map(|(sweep, r)| ResidualRow {
            sweep,
            violated_edges: r.violated_edges,
            total_l1: r.total_l1,
            per_node: r.per_node,
        })
        .collect();
    let summary = QuasiSummary {
        stationary: o.stationary,
        cycle_start: o.cycle.map(|c| c.0),
        cycle_period: o.cycle.map(|c| c.1),
        reference_energy: o.energy,
        reference_certified: o.certified,
        final_per_node: rows.last().map_or(0.0, |r| r.per_node),
        min_per_node: rows.iter().map(|r| r.per_node).fold(f64::INFINITY, f64::min),
    };
    Ok(Report {
        provenance: Provenance::new("quasi", spec.seed, spec),
        summary,
        rows,
    })
}

/// Final min-sum residual per node as a function of the size.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuasiScalingSpec {
    pub ns: Vec<usize>,
    pub q: usize,
    pub alpha: f64,
    pub samples: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_b")]
    pub b: usize,
    pub sweeps: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct QuasiScalingRecord {
    pub n: usize,
    pub instances: usize,
    /// Residual per node of the table left at the sweep cap.
    pub per_node_mean: f64,
    pub per_node_stderr: f64,
    /// Smallest residual per node seen along each run.
    pub min_per_node_mean: f64,
    pub min_per_node_stderr: f64,
    pub initial_per_node_mean: f64,
    pub stationary_fraction: f64,
    pub cycle_fraction: f64,
    pub energy_per_node_mean: f64,
}

pub fn cmd_quasi_scaling(spec: &QuasiScalingSpec) -> Result<Report<(), QuasiScalingRecord>> {
    check_quasi(spec.q, spec.alpha, spec.sweeps)?;
    check_positive("samples", spec.samples)?;
    if spec.ns.is_empty() {
        return Err(invalid("ns must not be empty"));
    }
    for &n in &spec.ns {
        check_positive("n", n)?;
        edge_count(n, spec.alpha)?;
    }
    let outcomes = run_jobs(spec.ns.len() * spec.samples, |j| {
        let (point, k) = (j / spec.samples, j % spec.samples);
        let one = QuasiSpec {
            n: spec.ns[point],
            q: spec.q,
            alpha: spec.alpha,
            k: spec.k,
            b: spec.b,
            sweeps: spec.sweeps,
            seed: spec.seed,
        };
        quasi_instance(&one, &[point as u64, k as u64])
    })?;
    let rows = outcomes
        .chunks(spec.samples)
        .zip(&spec.ns)
        .map(|(chunk, &n)| {
            let last: Vec<f64> = chunk.iter().map(|o| o.history.last().unwrap().per_node).collect();
            let best: Vec<f64> = chunk
                .iter()
                .map(|o| o.history.iter().map(|r| r.per_node).fold(f64::INFINITY, f64::min))
                .collect();
            let initial: Vec<f64> = chunk.iter().map(|o| o.history[0].per_node).collect();
            let energy: Vec<f64> = chunk.iter().map(|o| o.energy as f64 / n as f64).collect();
            let count = chunk.len() as f64;
            let (l, b) = (mean_stderr(&last), mean_stderr(&best));
            QuasiScalingRecord {
                n,
                instances: chunk.len(),
                per_node_mean: l.mean,
                per_node_stderr: l.stderr,
                min_per_node_mean: b.mean,
                min_per_node_stderr: b.stderr,
                initial_per_node_mean: mean_stderr(&initial).mean,
                stationary_fraction: chunk.iter().filter(|o| o.stationary).count() as f64 / count,
                cycle_fraction: chunk.iter().filter(|o| o.cycle.is_some()).count() as f64 / count,
                energy_per_node_mean: mean_stderr(&energy).mean,
            }
        })
        .collect();
    Ok(Report {
        provenance: Provenance::new("quasi-scaling", spec.seed, spec),
        summary: (),
        rows,
    })
}

/// Three-node decomposition of the pinned energy shift.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorizationSpec {
    pub ns: Vec<usize>,
    pub alpha: f64,
    pub q: usize,
    #[serde(default = "default_b")]
    pub b: usize,
    pub triples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_steps_per_node")]
    pub solver_steps_per_node: u64,
    #[serde(default = "default_noise")]
    pub noise: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FactorizationRecord {
    pub n: usize,
    pub triples: usize,
    pub failures: usize,
    pub failure_rate: f64,
    pub failure_stderr: f64,
    pub separated_fraction: f64,
    /// Failures among separated triples (always zero when exact).
    pub separated_failures: usize,
    /// Triples whose reference came from descent because local search
    /// found no legal coloring.
    pub descent_references: usize,
}

struct TripleOutcome {
    holds: bool,
    separated: bool,
    descent: bool,
}

/// Each triple gets its own graph. The reference is a legal coloring when
/// local search finds one, otherwise a 1-stable configuration.
fn factorization_triple(spec: &FactorizationSpec, point: usize, n: usize, k: usize) -> Result<TripleOutcome> {
    let path = |p: u64| seed::derive(spec.seed, &[p, point as u64, k as u64]);
    let g = generate_random_graph(n, edge_count(n, spec.alpha)?, path(purpose::GRAPH))?;
    let (reference, descent) =
        match solve(&g, spec.q, path(purpose::COLORING), spec.solver_steps_per_node, spec.noise)? {
            Some(c) => (c, false),
            None => {
                let mut rng = seed::rng(path(purpose::DESCENT));
                let c0 = Coloring::new(spec.q, (0..n).map(|_| rng.random_range(1..=spec.q as u8)).collect())?;
                let s = k_stable_descent(&g, spec.q, &c0, 1, rng.random(), DescentBudget::default())?;
                (s.coloring, true)
            }
        };
    let mut rng = seed::rng(path(purpose::TRIPLE));
    let mut nodes = [0usize; 3];
    loop {
        for v in nodes.iter_mut() {
            *v = rng.random_range(0..n);
        }
        if nodes[0] != nodes[1] && nodes[1] != nodes[2] && nodes[0] != nodes[2] {
            break;
        }
    }
    let colors = [0; 3].map(|_: u8| rng.random_range(1..=spec.q as u8));
    let check = factorization_check(&g, &reference, nodes, colors, spec.b, DEFAULT_REGION_BUDGET)?;
    Ok(TripleOutcome {
        holds: check.holds,
        separated: check.separated,
        descent,
    })
}

pub fn cmd_factorization(spec: &FactorizationSpec) -> Result<Report<(), FactorizationRecord>> {
    check_q(spec.q)?;
    check_alpha(spec.alpha)?;
    check_positive("triples", spec.triples)?;
    if spec.ns.is_empty() {
        return Err(invalid("ns must not be empty"));
    }
    for &n in &spec.ns {
        if n < 3 {
            return Err(invalid("factorization needs n >= 3"));
        }
        edge_count(n, spec.alpha)?;
    }
    let outcomes = run_jobs(spec.ns.len() * spec.triples, |j| {
        let (point, k) = (j / spec.triples, j % spec.triples);
        factorization_triple(spec, point, spec.ns[point], k)
    })?;
    let rows = outcomes
        .chunks(spec.triples)
        .zip(&spec.ns)
        .map(|(chunk, &n)| {
            let fails: Vec<f64> = chunk.iter().map(|o| f64::from(u8::from(!o.holds))).collect();
            let s = mean_stderr(&fails);
            FactorizationRecord {
                n,
                triples: chunk.len(),
                failures: chunk.iter().filter(|o| !o.holds).count(),
                failure_rate: s.mean,
                failure_stderr: s.stderr,
                separated_fraction: chunk.iter().filter(|o| o.separated).count() as f64 / chunk.len() as f64,
                separated_failures: chunk.iter().filter(|o| o.separated && !o.holds).count(),
                descent_references: chunk.iter().filter(|o| o.descent).count(),
            }
        })
        .collect();
    Ok(Report {
        provenance: Provenance::new("factorization", spec.seed, spec),
        summary: (),
        rows,
    })
}
