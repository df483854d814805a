//! Phase sweep over the edge density.

use serde::{Deserialize, Serialize};

use super::{
    check_alpha, check_positive, check_q, default_noise, default_steps_per_node, edge_count, invalid, run_jobs,
    solve, Provenance, Report,
};
use crate::error::{Error, Result};
use crate::graph::generate_random_graph;
use crate::seed::{self, purpose};
use crate::stats::mean_stderr;
use crate::survey::{complexity, node_partition, sp_run, SpParams, SurveyField};
use crate::whitening::{directional_from_coloring, whiten_directional};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub q: usize,
    pub n: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_step: f64,
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_steps_per_node")]
    pub solver_steps_per_node: u64,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default)]
    pub sp: SpSettings,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpSettings {
    pub damping: f64,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for SpSettings {
    fn default() -> Self {
        let p = SpParams::default();
        SpSettings {
            damping: p.damping,
            tol: p.tol,
            max_sweeps: p.max_sweeps,
        }
    }
}

impl SpSettings {
    pub(crate) fn params(&self, seed: u64) -> SpParams {
        SpParams {
            damping: self.damping,
            tol: self.tol,
            max_sweeps: self.max_sweeps,
            seed,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.damping) {
            return Err(invalid(format!("damping {} outside [0, 1)", self.damping)));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(invalid("tol must be positive"));
        }
        check_positive("sp.max_sweeps", self.max_sweeps)
    }
}

/// One row per density.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SweepRecord {
    pub alpha: f64,
    pub m: usize,
    pub instances: usize,
    pub coloring_success_fraction: f64,
    /// Over instances where a coloring was found; empty when none was.
    pub fraction_all_white: Option<f64>,
    pub sp_converged_fraction: f64,
    /// Instances whose run converged to a fixed point with a non-white
    /// survey somewhere.
    pub sp_nontrivial_fraction: f64,
    pub contradiction_fraction: f64,
    /// Over converged, contradiction-free runs.
    pub sigma_mean: Option<f64>,
    pub sigma_stderr: Option<f64>,
    /// Same, restricted to non-trivial fixed points.
    pub sigma_nontrivial_mean: Option<f64>,
    pub sigma_nontrivial_stderr: Option<f64>,
    pub nontrivial_edge_fraction_mean: Option<f64>,
    /// Largest `(max - min) / mean` of `Z_j(i) Z(i, j)` over `j`, over all
    /// nodes of all converged runs.
    pub max_relative_spread: Option<f64>,
}

/// Points `alpha_min, alpha_min + step, ...` up to `alpha_max`, rounded to
/// nine decimals.
pub fn alpha_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    check_alpha(min)?;
    check_alpha(max)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid("alpha_step must be positive"));
    }
    if max < min {
        return Err(invalid(format!("empty alpha range [{min}, {max}]")));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|k| ((min + k as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

struct InstanceOutcome {
    colored: bool,
    all_white: bool,
    converged: bool,
    contradiction: bool,
    nontrivial: bool,
    sigma: Option<f64>,
    edge_fraction: f64,
    spread: f64,
}

fn run_instance(spec: &SweepSpec, point: usize, m: usize, k: usize) -> Result<InstanceOutcome> {
    let path = |p: u64| seed::derive(spec.seed, &[p, point as u64, k as u64]);
    let g = generate_random_graph(spec.n, m, path(purpose::GRAPH))?;
    let coloring = solve(&g, spec.q, path(purpose::COLORING), spec.solver_steps_per_node, spec.noise)?;
    let all_white = match &coloring {
        Some(c) => whiten_directional(&g, &directional_from_coloring(&g, c)?)?.is_all_white(),
        None => false,
    };
    let field = SurveyField::random(&g, spec.q, path(purpose::SURVEY))?;
    let mut out = InstanceOutcome {
        colored: coloring.is_some(),
        all_white,
        converged: false,
        contradiction: false,
        nontrivial: false,
        sigma: None,
        edge_fraction: 0.0,
        spread: 0.0,
    };
    let state = match sp_run(&g, field, &spec.sp.params(path(purpose::ORDER))) {
        Ok(s) => s,
        Err(Error::Contradiction { .. }) => {
            out.contradiction = true;
            return Ok(out);
        }
        Err(e) => return Err(e),
    };
    out.converged = state.converged;
    if !state.converged {
        return Ok(out);
    }
    let report = complexity(&g, &state.field)?;
    out.contradiction = report.contradiction;
    out.sigma = report.sigma;
    out.edge_fraction = state.field.nontrivial_fraction();
    out.nontrivial = out.edge_fraction > 0.0;
    for i in 0..g.n() {
        let p = node_partition(&g, &state.field, i)?;
        if p.z > 0.0 {
            out.spread = out.spread.max(p.spread / p.z);
        }
    }
    Ok(out)
}

pub fn cmd_sweep(spec: &SweepSpec) -> Result<Report<(), SweepRecord>> {
    check_q(spec.q)?;
    check_positive("n", spec.n)?;
    check_positive("samples", spec.samples)?;
    spec.sp.validate()?;
    if !(0.0..=1.0).contains(&spec.noise) {
        return Err(invalid("noise outside [0, 1]"));
    }
    let alphas = alpha_grid(spec.alpha_min, spec.alpha_max, spec.alpha_step)?;
    let ms = alphas
        .iter()
        .map(|&a| edge_count(spec.n, a))
        .collect::<Result<Vec<_>>>()?;
    let jobs = alphas.len() * spec.samples;
    let outcomes = run_jobs(jobs, |j| {
        let (point, k) = (j / spec.samples, j % spec.samples);
        run_instance(spec, point, ms[point], k)
    })?;
    let rows = outcomes
        .chunks(spec.samples)
        .zip(alphas.iter().zip(&ms))
        .map(|(chunk, (&alpha, &m))| aggregate(alpha, m, chunk))
        .collect();
    Ok(Report {
        provenance: Provenance::new("sweep", spec.seed, spec),
        summary: (),
        rows,
    })
}

fn aggregate(alpha: f64, m: usize, chunk: &[InstanceOutcome]) -> SweepRecord {
    let count = chunk.len() as f64;
    let frac = |f: &dyn Fn(&InstanceOutcome) -> bool| chunk.iter().filter(|o| f(o)).count() as f64 / count;
    let colored = chunk.iter().filter(|o| o.colored).count();
    let fraction_all_white =
        (colored > 0).then(|| chunk.iter().filter(|o| o.colored && o.all_white).count() as f64 / colored as f64);
    let sigmas: Vec<f64> = chunk.iter().filter_map(|o| o.sigma).collect();
    let nontrivial_sigmas: Vec<f64> = chunk.iter().filter(|o| o.nontrivial).filter_map(|o| o.sigma).collect();
    let converged: Vec<&InstanceOutcome> = chunk.iter().filter(|o| o.converged).collect();
    let summary = |xs: &[f64]| {
        if xs.is_empty() {
            (None, None)
        } else {
            let s = mean_stderr(xs);
            (Some(s.mean), Some(s.stderr))
        }
    };
    let (sigma_mean, sigma_stderr) = summary(&sigmas);
    let (sigma_nontrivial_mean, sigma_nontrivial_stderr) = summary(&nontrivial_sigmas);
    let edge_fractions: Vec<f64> = converged.iter().map(|o| o.edge_fraction).collect();
    SweepRecord {
        alpha,
        m,
        instances: chunk.len(),
        coloring_success_fraction: frac(&|o| o.colored),
        fraction_all_white,
        sp_converged_fraction: frac(&|o| o.converged),
        sp_nontrivial_fraction: frac(&|o| o.converged && o.nontrivial),
        contradiction_fraction: frac(&|o| o.contradiction),
        sigma_mean,
        sigma_stderr,
        sigma_nontrivial_mean,
        sigma_nontrivial_stderr,
        nontrivial_edge_fraction_mean: summary(&edge_fractions).0,
        max_relative_spread: (!converged.is_empty())
            .then(|| converged.iter().map(|o| o.spread).fold(0.0, f64::max)),
    }
}
