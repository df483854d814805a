//! Whitening counts against the survey complexity, and single SP runs.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::sweep::SpSettings;
use super::{
    check_alpha, check_positive, check_q, default_noise, default_steps_per_node, edge_count, invalid, run_jobs,
    solve, Provenance, Report,
};
use crate::coloring::DEFAULT_ENUMERATION_BUDGET;
use crate::error::{Error, Result};
use crate::graph::{generate_random_graph, random_tree, Graph};
use crate::seed::{self, purpose};
use crate::stats::mean_stderr;
use crate::survey::{
    complexity, count_whitenings_exhaustive, node_partition, node_survey_field, sp_run, SpInit, SurveyField,
};
use crate::whitening::{directional_from_coloring, whiten_directional, DirectionalAssignment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ensemble {
    /// Uniform `G(N, M)` with `M = round(alpha N)`.
    Random,
    /// Uniform random recursive trees; `alpha` is ignored.
    Tree,
}

fn random_ensemble() -> Ensemble {
    Ensemble::Random
}

fn default_budget() -> u64 {
    DEFAULT_ENUMERATION_BUDGET
}

fn default_sampled_colorings() -> usize {
    0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountSpec {
    pub n: usize,
    pub alphas: Vec<f64>,
    pub q: usize,
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "random_ensemble")]
    pub ensemble: Ensemble,
    /// Node budget of the exhaustive coloring enumeration per instance.
    #[serde(default = "default_budget")]
    pub enumeration_budget: u64,
    /// Local-search colorings per instance for the sampled lower bound.
    #[serde(default = "default_sampled_colorings")]
    pub sampled_colorings: usize,
    #[serde(default = "default_steps_per_node")]
    pub solver_steps_per_node: u64,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default)]
    pub sp: SpSettings,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CountRecord {
    pub n: usize,
    pub alpha: f64,
    pub instances: usize,
    /// Instances whose enumeration finished within budget.
    pub exhaustive_instances: usize,
    pub budget_exhausted: usize,
    pub colorable_fraction: Option<f64>,
    pub mean_distinct: Option<f64>,
    /// `ln(distinct) / n` over instances with at least one whitening.
    pub mean_ln_count_per_n: Option<f64>,
    pub mean_sampled_distinct: Option<f64>,
    pub sigma_mean: Option<f64>,
    pub sigma_stderr: Option<f64>,
    pub sp_converged_fraction: f64,
    pub contradiction_fraction: f64,
}

struct CountOutcome {
    distinct: Option<usize>,
    sampled: Option<usize>,
    sigma: Option<f64>,
    converged: bool,
    contradiction: bool,
}

fn count_instance(spec: &CountSpec, point: usize, alpha: f64, k: usize) -> Result<CountOutcome> {
    let path = |p: u64| seed::derive(spec.seed, &[p, point as u64, k as u64]);
    let g = match spec.ensemble {
        Ensemble::Random => generate_random_graph(spec.n, edge_count(spec.n, alpha)?, path(purpose::GRAPH))?,
        Ensemble::Tree => random_tree(spec.n, path(purpose::GRAPH)),
    };
    let distinct = match count_whitenings_exhaustive(&g, spec.q, spec.enumeration_budget) {
        Ok(c) => Some(c.distinct),
        Err(Error::ResourceLimit(_)) => None,
        Err(e) => return Err(e),
    };
    let sampled = if spec.sampled_colorings == 0 {
        None
    } else {
        let mut seen = HashSet::new();
        for s in 0..spec.sampled_colorings {
            let sub = seed::derive(path(purpose::COLORING), &[s as u64]);
            if let Some(c) = solve(&g, spec.q, sub, spec.solver_steps_per_node, spec.noise)? {
                seen.insert(whiten_directional(&g, &directional_from_coloring(&g, &c)?)?.fingerprint());
            }
        }
        Some(seen.len())
    };
    let field = SurveyField::random(&g, spec.q, path(purpose::SURVEY))?;
    let (sigma, converged, contradiction) = match sp_run(&g, field, &spec.sp.params(path(purpose::ORDER))) {
        Ok(state) if state.converged => {
            let r = complexity(&g, &state.field)?;
            (r.sigma, true, r.contradiction)
        }
        Ok(_) => (None, false, false),
        Err(Error::Contradiction { .. }) => (None, false, true),
        Err(e) => return Err(e),
    };
    Ok(CountOutcome {
        distinct,
        sampled,
        sigma,
        converged,
        contradiction,
    })
}

pub fn cmd_count(spec: &CountSpec) -> Result<Report<(), CountRecord>> {
    check_q(spec.q)?;
    check_positive("n", spec.n)?;
    check_positive("samples", spec.samples)?;
    spec.sp.validate()?;
    if spec.alphas.is_empty() {
        return Err(invalid("alphas must not be empty"));
    }
    for &a in &spec.alphas {
        check_alpha(a)?;
        if spec.ensemble == Ensemble::Random {
            edge_count(spec.n, a)?;
        }
    }
    let outcomes = run_jobs(spec.alphas.len() * spec.samples, |j| {
        let (point, k) = (j / spec.samples, j % spec.samples);
        count_instance(spec, point, spec.alphas[point], k)
    })?;
    let rows = outcomes
        .chunks(spec.samples)
        .zip(&spec.alphas)
        .map(|(chunk, &alpha)| {
            let count = chunk.len() as f64;
            let distinct: Vec<f64> = chunk.iter().filter_map(|o| o.distinct).map(|d| d as f64).collect();
            let ln_counts: Vec<f64> =
                distinct.iter().filter(|&&d| d >= 1.0).map(|d| d.ln() / spec.n as f64).collect();
            let sampled: Vec<f64> = chunk.iter().filter_map(|o| o.sampled).map(|d| d as f64).collect();
            let sigmas: Vec<f64> = chunk.iter().filter_map(|o| o.sigma).collect();
            let mean = |xs: &[f64]| (!xs.is_empty()).then(|| mean_stderr(xs).mean);
            CountRecord {
                n: spec.n,
                alpha,
                instances: chunk.len(),
                exhaustive_instances: distinct.len(),
                budget_exhausted: chunk.len() - distinct.len(),
                colorable_fraction: (!distinct.is_empty())
                    .then(|| distinct.iter().filter(|&&d| d >= 1.0).count() as f64 / distinct.len() as f64),
                mean_distinct: mean(&distinct),
                mean_ln_count_per_n: mean(&ln_counts),
                mean_sampled_distinct: mean(&sampled),
                sigma_mean: mean(&sigmas),
                sigma_stderr: (!sigmas.is_empty()).then(|| mean_stderr(&sigmas).stderr),
                sp_converged_fraction: chunk.iter().filter(|o| o.converged).count() as f64 / count,
                contradiction_fraction: chunk.iter().filter(|o| o.contradiction).count() as f64 / count,
            }
        })
        .collect();
    Ok(Report {
        provenance: Provenance::new("count", spec.seed, spec),
        summary: (),
        rows,
    })
}

fn uniform_random() -> SpInit {
    SpInit::UniformRandom
}

fn default_ensemble_size() -> usize {
    20
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpSingleSpec {
    pub n: usize,
    pub q: usize,
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "uniform_random")]
    pub init: SpInit,
    #[serde(default)]
    pub sp: SpSettings,
    /// Colorings sought for the whitening-ensemble start.
    #[serde(default = "default_ensemble_size")]
    pub ensemble_size: usize,
    #[serde(default = "default_steps_per_node")]
    pub solver_steps_per_node: u64,
    #[serde(default = "default_noise")]
    pub noise: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SpSingleReport {
    pub converged: bool,
    pub sweeps: usize,
    pub sigma: Option<f64>,
    pub contradiction: bool,
    pub nontrivial_fraction_of_edges: f64,
    pub max_change: f64,
    pub max_relative_spread: Option<f64>,
    /// `max_c |mean_i eta_c(i) - mean over c|`, a color-symmetry check.
    pub color_asymmetry: Option<f64>,
    pub mean_white: Option<f64>,
    pub ensemble_members: Option<usize>,
}

pub fn cmd_sp_single(spec: &SpSingleSpec) -> Result<Report<SpSingleReport, SpSingleReport>> {
    check_q(spec.q)?;
    check_alpha(spec.alpha)?;
    check_positive("n", spec.n)?;
    spec.sp.validate()?;
    let path = |p: u64| seed::derive(spec.seed, &[p]);
    let g = generate_random_graph(spec.n, edge_count(spec.n, spec.alpha)?, path(purpose::GRAPH))?;
    let mut members = None;
    let field = match spec.init {
        SpInit::UniformRandom => SurveyField::random(&g, spec.q, path(purpose::SURVEY))?,
        SpInit::AllWhite => SurveyField::all_white(&g, spec.q)?,
        SpInit::FromWhiteningEnsemble => {
            check_positive("ensemble_size", spec.ensemble_size)?;
            let ensemble = whitening_ensemble(&g, spec, path(purpose::COLORING))?;
            members = Some(ensemble.len());
            if ensemble.is_empty() {
                return Err(Error::ResourceLimit(format!(
                    "no legal coloring found in {} attempts for the whitening ensemble",
                    spec.ensemble_size
                )));
            }
            SurveyField::from_ensemble(&g, spec.q, &ensemble)?
        }
    };
    let result = match sp_run(&g, field, &spec.sp.params(path(purpose::ORDER))) {
        Ok(state) => {
            let mut report = SpSingleReport {
                converged: state.converged,
                sweeps: state.sweep_count,
                sigma: None,
                contradiction: false,
                nontrivial_fraction_of_edges: state.field.nontrivial_fraction(),
                max_change: state.max_change,
                max_relative_spread: None,
                color_asymmetry: None,
                mean_white: None,
                ensemble_members: members,
            };
            if state.converged {
                let c = complexity(&g, &state.field)?;
                report.sigma = c.sigma;
                report.contradiction = c.contradiction;
                let mut spread = 0.0f64;
                let mut means = vec![0.0; spec.q + 1];
                for i in 0..g.n() {
                    let p = node_partition(&g, &state.field, i)?;
                    if p.z > 0.0 {
                        spread = spread.max(p.spread / p.z);
                    }
                    if let Ok(eta) = node_survey_field(&g, &state.field, i) {
                        for (m, x) in means.iter_mut().zip(eta) {
                            *m += x;
                        }
                    }
                }
                means.iter_mut().for_each(|m| *m /= g.n() as f64);
                let colored = means[1..].iter().sum::<f64>() / spec.q as f64;
                report.max_relative_spread = Some(spread);
                report.color_asymmetry = Some(means[1..].iter().map(|m| (m - colored).abs()).fold(0.0, f64::max));
                report.mean_white = Some(means[0]);
            }
            report
        }
        Err(Error::Contradiction { .. }) => SpSingleReport {
            converged: false,
            sweeps: 0,
            sigma: None,
            contradiction: true,
            nontrivial_fraction_of_edges: 0.0,
            max_change: f64::NAN,
            max_relative_spread: None,
            color_asymmetry: None,
            mean_white: None,
            ensemble_members: members,
        },
        Err(e) => return Err(e),
    };
    Ok(Report {
        provenance: Provenance::new("sp-single", spec.seed, spec),
        summary: result.clone(),
        rows: vec![result],
    })
}

fn whitening_ensemble(g: &Graph, spec: &SpSingleSpec, master: u64) -> Result<Vec<DirectionalAssignment>> {
    let found = run_jobs(spec.ensemble_size, |s| {
        let c = solve(g, spec.q, seed::derive(master, &[s as u64]), spec.solver_steps_per_node, spec.noise)?;
        c.map(|c| whiten_directional(g, &directional_from_coloring(g, &c)?)).transpose()
    })?;
    Ok(found.into_iter().flatten().collect())
}
