//! Reproducible experiment campaigns.
//!
//! Every campaign is described by an [`ExperimentSpec`]. All randomness is
//! derived from the spec's master seed through [`crate::seed::derive`]
//! with `(purpose, point, instance)` paths, instances run on a worker pool,
//! and results are folded in instance order. The output therefore depends
//! only on the spec, never on the number of workers.
//!
//! Outputs are [`Report`]s: a provenance block (schema version, artifact
//! version, seed, spec echo), a summary and a list of rows. They render as
//! JSON, or as CSV with the provenance and summary in `#` comment lines.

use std::sync::OnceLock;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::coloring::{find_legal_coloring, Coloring};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seed;

mod counting;
mod local;
mod sweep;
mod theorems;

pub use counting::{cmd_count, cmd_sp_single, CountRecord, CountSpec, Ensemble, SpSingleReport, SpSingleSpec};
pub use local::{
    cmd_factorization, cmd_quasi, cmd_quasi_scaling, cmd_ring_demo, FactorizationRecord, FactorizationSpec,
    QuasiScalingRecord, QuasiScalingSpec, QuasiSpec, QuasiSummary, ResidualRow, RingDemoRecord, RingDemoSpec,
};
pub use sweep::{alpha_grid, cmd_sweep, SweepRecord, SweepSpec};
pub use theorems::{
    cmd_theorem_b, cmd_theorem_c, cmd_uniqueness, ColoringSource, PairRecord, TheoremBSpec, TheoremBSummary, TheoremCRecord, TheoremCSpec,
    UniquenessRecord, UniquenessSpec, UniquenessSummary,
};
pub use sweep::SpSettings;

/// Version of the CSV column sets and JSON keys.
pub const SCHEMA_VERSION: u32 = 1;
/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "WHITENER_WORKERS";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentSpec {
    Sweep(SweepSpec),
    TheoremB(TheoremBSpec),
    TheoremC(TheoremCSpec),
    Count(CountSpec),
    RingDemo(RingDemoSpec),
    Quasi(QuasiSpec),
    QuasiScaling(QuasiScalingSpec),
    SpSingle(SpSingleSpec),
    Uniqueness(UniquenessSpec),
    Factorization(FactorizationSpec),
}

impl ExperimentSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentSpec::Sweep(_) => "sweep",
            ExperimentSpec::TheoremB(_) => "theorem-b",
            ExperimentSpec::TheoremC(_) => "theorem-c",
            ExperimentSpec::Count(_) => "count",
            ExperimentSpec::RingDemo(_) => "ring-demo",
            ExperimentSpec::Quasi(_) => "quasi",
            ExperimentSpec::QuasiScaling(_) => "quasi-scaling",
            ExperimentSpec::SpSingle(_) => "sp-single",
            ExperimentSpec::Uniqueness(_) => "uniqueness",
            ExperimentSpec::Factorization(_) => "factorization",
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    /// Runs the campaign and returns its rendered-on-demand report.
    pub fn run(&self) -> Result<Box<dyn Render>> {
        Ok(match self {
            ExperimentSpec::Sweep(s) => Box::new(cmd_sweep(s)?),
            ExperimentSpec::TheoremB(s) => Box::new(cmd_theorem_b(s)?),
            ExperimentSpec::TheoremC(s) => Box::new(cmd_theorem_c(s)?),
            ExperimentSpec::Count(s) => Box::new(cmd_count(s)?),
            ExperimentSpec::RingDemo(s) => Box::new(cmd_ring_demo(s)?),
            ExperimentSpec::Quasi(s) => Box::new(cmd_quasi(s)?),
            ExperimentSpec::QuasiScaling(s) => Box::new(cmd_quasi_scaling(s)?),
            ExperimentSpec::SpSingle(s) => Box::new(cmd_sp_single(s)?),
            ExperimentSpec::Uniqueness(s) => Box::new(cmd_uniqueness(s)?),
            ExperimentSpec::Factorization(s) => Box::new(cmd_factorization(s)?),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub schema_version: u32,
    pub artifact_version: String,
    pub kind: String,
    pub seed: u64,
    pub spec: serde_json::Value,
}

impl Provenance {
    pub(crate) fn new<S: Serialize>(kind: &str, seed: u64, spec: &S) -> Self {
        Provenance {
            schema_version: SCHEMA_VERSION,
            artifact_version: crate::ARTIFACT_VERSION.to_string(),
            kind: kind.to_string(),
            seed,
            spec: serde_json::to_value(spec).expect("specs serialize"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report<S, R> {
    pub provenance: Provenance,
    pub summary: S,
    pub rows: Vec<R>,
}

pub trait Render {
    fn to_json(&self) -> Result<String>;
    fn to_csv(&self) -> Result<String>;
}

impl<S: Serialize, R: Serialize> Render for Report<S, R> {
    fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| Error::Io(e.to_string()))
    }

    fn to_csv(&self) -> Result<String> {
        let p = &self.provenance;
        let mut out = String::new();
        out.push_str(&format!("# schema_version: {}\n", p.schema_version));
        out.push_str(&format!("# artifact_version: {}\n", p.artifact_version));
        out.push_str(&format!("# kind: {}\n", p.kind));
        out.push_str(&format!("# seed: {}\n", p.seed));
        out.push_str(&format!("# spec: {}\n", p.spec));
        out.push_str(&format!("# summary: {}\n", serde_json::to_string(&self.summary).map_err(|e| Error::Io(e.to_string()))?));
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
        }
        let body = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
        Ok(out)
    }
}

/// Worker count from [`WORKERS_ENV`], else the available parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(worker_count())
            .thread_name(|i| format!("whitener-worker-{i}"))
            .build()
            .expect("worker pool")
    })
}

/// Runs `job(0..count)` on the worker pool; results come back in index
/// order. The first error in index order wins.
pub(crate) fn run_jobs<T, F>(count: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    pool().install(|| (0..count).into_par_iter().map(&job).collect::<Vec<_>>())
        .into_iter()
        .collect()
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidSpec(msg.into())
}

pub(crate) fn check_positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(invalid(format!("{name} must be >= 1")))
    } else {
        Ok(())
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("alpha = {alpha} must be finite and >= 0")))
    }
}

pub(crate) fn check_q(q: usize) -> Result<()> {
    crate::coloring::check_q(q).map_err(|e| invalid(e.to_string()))
}

/// `M = round(alpha N)`, rejected when it exceeds the simple-graph limit.
pub(crate) fn edge_count(n: usize, alpha: f64) -> Result<usize> {
    let m = (alpha * n as f64).round() as usize;
    let max = n * n.saturating_sub(1) / 2;
    if m > max {
        return Err(invalid(format!("alpha = {alpha} needs {m} edges, more than n(n-1)/2 = {max}")));
    }
    Ok(m)
}

pub(crate) fn default_noise() -> f64 {
    crate::coloring::DEFAULT_NOISE
}

pub(crate) fn default_steps_per_node() -> u64 {
    5000
}

pub(crate) fn solve(g: &Graph, q: usize, seed: u64, steps_per_node: u64, noise: f64) -> Result<Option<Coloring>> {
    let steps = steps_per_node.saturating_mul(g.n().max(1) as u64);
    find_legal_coloring(g, q, seed, steps, noise)
}

/// Result of searching for a second legal coloring that differs from `c`
/// only on `region`.
pub(crate) enum Alternative {
    Found(Coloring),
    /// Every legal recoloring of the region equals `c` there.
    Frozen,
    BudgetExceeded,
}

/// Depth-first search over recolorings of `region` (everything else fixed)
/// with colors tried in a random order at every node; returns the first
/// legal recoloring that differs from `c`.
pub(crate) fn alternative_coloring(
    g: &Graph,
    c: &Coloring,
    region: &[usize],
    rng: &mut seed::Rng,
    budget: u64,
) -> Alternative {
    let q = c.q();
    let mut position = vec![usize::MAX; g.n()];
    for (p, &v) in region.iter().enumerate() {
        position[v] = p;
    }
    let mut values = c.values().to_vec();
    let mut orders: Vec<Vec<u8>> = Vec::with_capacity(region.len());
    let mut cursor = vec![0usize; region.len()];
    let mut visited = 0u64;
    let mut depth = 0usize;
    let fresh_order = |rng: &mut seed::Rng| {
        let mut o: Vec<u8> = (1..=q as u8).collect();
        o.shuffle(rng);
        o
    };
    if region.is_empty() {
        return Alternative::Frozen;
    }
    orders.push(fresh_order(rng));
    loop {
        let v = region[depth];
        let mut placed = false;
        while cursor[depth] < q {
            let color = orders[depth][cursor[depth]];
            cursor[depth] += 1;
            visited += 1;
            if visited > budget {
                return Alternative::BudgetExceeded;
            }
            let clash = g.neighbors(v).iter().any(|&u| {
                let p = position[u];
                (p == usize::MAX || p < depth) && values[u] == color
            });
            if !clash {
                values[v] = color;
                placed = true;
                break;
            }
        }
        if placed {
            if depth + 1 == region.len() {
                if region.iter().any(|&u| values[u] != c.get(u)) {
                    return Alternative::Found(Coloring::new(q, values).expect("colors in range"));
                }
                continue;
            }
            depth += 1;
            cursor[depth] = 0;
            if orders.len() <= depth {
                orders.push(fresh_order(rng));
            } else {
                orders[depth] = fresh_order(rng);
            }
        } else {
            values[v] = c.get(v);
            if depth == 0 {
                return Alternative::Frozen;
            }
            depth -= 1;
        }
    }
}
