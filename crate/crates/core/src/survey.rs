//! Survey propagation over directional whitenings.
//!
//! A survey on directed edge `i -> j` is a probability vector over
//! `{white, 1, ..., q}` (index 0 is white). The update draws one value from
//! each survey arriving at `i` from `A(i) \ {j}` and looks at the set of
//! colors that are *missing* among the draws:
//!
//! * `Z_j(i)` is the probability that the missing set is non-empty;
//! * `η_c` is the probability that it is exactly `{c}`, divided by `Z_j(i)`;
//! * `η_0` takes the rest.
//!
//! [`sp_update_edge`] evaluates this exactly by inclusion–exclusion over
//! color subsets; [`sp_monte_carlo_oracle`] simulates the draws literally.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::coloring::{check_q, for_each_legal_coloring, Coloring};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seed;
use crate::whitening::{directional_from_coloring, whiten_directional, DirectionalAssignment, Fingerprint};

/// Normalisations at or below this value are contradictions.
pub const CONTRADICTION_EPS: f64 = 1e-12;
/// Messages with `η_0 < 1 - NONTRIVIAL_EPS` count as non-trivial.
pub const NONTRIVIAL_EPS: f64 = 1e-6;

/// Result of one exact survey update.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyUpdate {
    /// `q + 1` probabilities, white first.
    pub probs: Vec<f64>,
    /// Probability that the missing set is non-empty.
    pub z: f64,
}

/// Sum whose result does not depend on the order of `terms`: the terms
/// are added in increasing order. Keeps color permutations exact.
fn canonical_sum(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().sum()
}

/// Inclusion–exclusion core shared by the edge and node updates.
///
/// `absent[T]` is the probability that no color of the subset `T` (bit
/// `c - 1` for color `c`) is drawn, `Π_k (1 - Σ_{c in T} η_c(k))`.
/// Returns `(P(missing = {c}) for c in 1..=q, P(missing = ∅))`.
fn missing_set_probabilities<'a, I>(incoming: I, q: usize) -> (Vec<f64>, f64)
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let subsets = 1usize << q;
    let mut absent = vec![1.0f64; subsets];
    // subset masses are accumulated in increasing-value order of the colors
    let mut mass = vec![0.0f64; subsets];
    let mut order: Vec<usize> = (0..q).collect();
    let mut to_color_set = vec![0usize; subsets];
    for eta in incoming {
        order.sort_by(|&a, &b| eta[a + 1].total_cmp(&eta[b + 1]));
        for t in 1..subsets {
            let high = usize::BITS as usize - 1 - t.leading_zeros() as usize;
            let rest = t & !(1 << high);
            mass[t] = mass[rest] + eta[order[high] + 1];
            to_color_set[t] = to_color_set[rest] | 1 << order[high];
        }
        for t in 1..subsets {
            absent[to_color_set[t]] *= (1.0 - mass[t]).max(0.0);
        }
    }
    let mut terms = Vec::with_capacity(subsets);
    let exactly: Vec<f64> = (0..q)
        .map(|c| {
            terms.clear();
            // (-1)^(|T| - 1) over subsets containing c
            terms.extend((0..subsets).filter(|t| t & (1 << c) != 0).map(|t| {
                if t.count_ones() % 2 == 1 {
                    absent[t]
                } else {
                    -absent[t]
                }
            }));
            canonical_sum(&mut terms).clamp(0.0, 1.0)
        })
        .collect();
    terms.clear();
    terms.extend((0..subsets).map(|t| if t.count_ones() % 2 == 0 { absent[t] } else { -absent[t] }));
    let empty = canonical_sum(&mut terms).clamp(0.0, 1.0);
    (exactly, empty)
}

fn normalised(exactly: Vec<f64>, z: f64) -> Vec<f64> {
    let mut probs = Vec::with_capacity(exactly.len() + 1);
    probs.push(0.0);
    probs.extend(exactly.iter().map(|&x| (x / z).clamp(0.0, 1.0)));
    let mut colored = canonical_sum(&mut probs[1..].to_vec());
    if colored > 1.0 {
        for p in probs.iter_mut().skip(1) {
            *p /= colored;
        }
        colored = canonical_sum(&mut probs[1..].to_vec());
    }
    probs[0] = (1.0 - colored).max(0.0);
    probs
}

/// Exact survey update from the incoming surveys (possibly none).
/// Errors with [`Error::Contradiction`] carrying `(0, 0)` as placeholder
/// location when `Z_j(i) <= 1e-12`; [`sp_run`] fills in the edge.
pub fn sp_update_edge(incoming: &[&[f64]], q: usize) -> Result<SurveyUpdate> {
    check_q(q)?;
    sp_update_iter(incoming.iter().copied(), q, (0, 0))
}

fn sp_update_iter<'a, I>(incoming: I, q: usize, at: (usize, usize)) -> Result<SurveyUpdate>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let (exactly, empty) = missing_set_probabilities(incoming, q);
    let z = 1.0 - empty;
    if z <= CONTRADICTION_EPS {
        return Err(Error::Contradiction { from: at.0, to: at.1, z });
    }
    Ok(SurveyUpdate {
        probs: normalised(exactly, z),
        z,
    })
}

/// Monte Carlo estimate of a survey update.
#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloEstimate {
    pub samples: u64,
    /// Draws whose missing set was non-empty.
    pub accepted: u64,
    pub z: f64,
    pub z_stderr: f64,
    /// Frequencies among accepted draws, white first; all zero if none.
    pub probs: Vec<f64>,
    pub stderr: Vec<f64>,
}

/// Literal simulation: draw one value per incoming survey, reject draws
/// that show all `q` colors, tally the missing color when exactly one is
/// missing and white otherwise.
pub fn sp_monte_carlo_oracle(
    incoming: &[&[f64]],
    q: usize,
    samples: u64,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    check_q(q)?;
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be >= 1".into()));
    }
    let mut rng = seed::rng(seed);
    let full = ((1u64 << q) - 1) << 1;
    let mut tallies = vec![0u64; q + 1];
    let mut accepted = 0u64;
    for _ in 0..samples {
        let mut seen = 0u64;
        for eta in incoming {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut drawn = q; // guards against rounding at the top end
            for (c, &p) in eta.iter().enumerate() {
                acc += p;
                if u < acc {
                    drawn = c;
                    break;
                }
            }
            if drawn != 0 {
                seen |= 1 << drawn;
            }
        }
        let missing = full & !seen;
        match missing.count_ones() {
            0 => continue,
            1 => tallies[missing.trailing_zeros() as usize] += 1,
            _ => tallies[0] += 1,
        }
        accepted += 1;
    }
    let z = accepted as f64 / samples as f64;
    let z_stderr = (z * (1.0 - z) / samples as f64).sqrt();
    let (probs, stderr) = if accepted == 0 {
        (vec![0.0; q + 1], vec![0.0; q + 1])
    } else {
        let a = accepted as f64;
        let probs: Vec<f64> = tallies.iter().map(|&t| t as f64 / a).collect();
        let stderr = probs.iter().map(|&p| (p * (1.0 - p) / a).sqrt()).collect();
        (probs, stderr)
    };
    Ok(MonteCarloEstimate {
        samples,
        accepted,
        z,
        z_stderr,
        probs,
        stderr,
    })
}

/// Surveys on every directed edge, `q + 1` entries each.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyField {
    q: usize,
    values: Vec<f64>,
}

impl SurveyField {
    pub fn all_white(g: &Graph, q: usize) -> Result<Self> {
        check_q(q)?;
        let mut values = vec![0.0; g.num_directed() * (q + 1)];
        for e in 0..g.num_directed() {
            values[e * (q + 1)] = 1.0;
        }
        Ok(SurveyField { q, values })
    }

    /// Each survey drawn from the flat Dirichlet over `q + 1` entries.
    pub fn random(g: &Graph, q: usize, seed: u64) -> Result<Self> {
        check_q(q)?;
        let mut rng = seed::rng(seed);
        let stride = q + 1;
        let mut values = vec![0.0; g.num_directed() * stride];
        for row in values.chunks_mut(stride) {
            let mut sum = 0.0;
            for x in row.iter_mut() {
                let v: f64 = Exp1.sample(&mut rng);
                *x = v;
                sum += v;
            }
            row.iter_mut().for_each(|x| *x /= sum);
        }
        Ok(SurveyField { q, values })
    }

    /// Empirical distribution of each directed value over an ensemble of
    /// directional assignments.
    pub fn from_ensemble(g: &Graph, q: usize, ensemble: &[DirectionalAssignment]) -> Result<Self> {
        check_q(q)?;
        if ensemble.is_empty() {
            return Err(Error::InvalidArgument("empty whitening ensemble".into()));
        }
        let stride = q + 1;
        let mut values = vec![0.0; g.num_directed() * stride];
        for d in ensemble {
            if d.len() != g.num_directed() || d.q() != q {
                return Err(Error::InvalidArgument("ensemble member does not match graph".into()));
            }
            for e in 0..d.len() {
                values[e * stride + d.get(e) as usize] += 1.0;
            }
        }
        let w = 1.0 / ensemble.len() as f64;
        values.iter_mut().for_each(|x| *x *= w);
        Ok(SurveyField { q, values })
    }

    pub fn from_values(g: &Graph, q: usize, values: Vec<f64>) -> Result<Self> {
        check_q(q)?;
        if values.len() != g.num_directed() * (q + 1) {
            return Err(Error::InvalidArgument("survey array size mismatch".into()));
        }
        Ok(SurveyField { q, values })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn message(&self, e: usize) -> &[f64] {
        &self.values[e * (self.q + 1)..(e + 1) * (self.q + 1)]
    }

    fn message_mut(&mut self, e: usize) -> &mut [f64] {
        let s = self.q + 1;
        &mut self.values[e * s..(e + 1) * s]
    }

    pub fn num_messages(&self) -> usize {
        self.values.len() / (self.q + 1)
    }

    /// Largest deviation from unit sum, and whether every entry is in
    /// `[0, 1]`.
    pub fn conservation(&self) -> (f64, bool) {
        let mut worst = 0.0f64;
        let mut in_range = true;
        for e in 0..self.num_messages() {
            let m = self.message(e);
            worst = worst.max((m.iter().sum::<f64>() - 1.0).abs());
            in_range &= m.iter().all(|&x| (0.0..=1.0).contains(&x));
        }
        (worst, in_range)
    }

    /// Fraction of directed edges whose survey is not (numerically) white.
    pub fn nontrivial_fraction(&self) -> f64 {
        let n = self.num_messages();
        if n == 0 {
            return 0.0;
        }
        let count = (0..n)
            .filter(|&e| self.message(e)[0] < 1.0 - NONTRIVIAL_EPS)
            .count();
        count as f64 / n as f64
    }

    /// Applies a color permutation (`perm[c - 1]` is the image of `c`).
    pub fn permute_colors(&self, perm: &[u8]) -> Self {
        let stride = self.q + 1;
        let mut values = vec![0.0; self.values.len()];
        for e in 0..self.num_messages() {
            values[e * stride] = self.values[e * stride];
            for c in 1..=self.q {
                values[e * stride + perm[c - 1] as usize] = self.values[e * stride + c];
            }
        }
        SurveyField { q: self.q, values }
    }
}

/// Exact update for directed edge `e = i -> j` from the current field.
pub fn edge_update(g: &Graph, field: &SurveyField, e: usize) -> Result<SurveyUpdate> {
    let i = g.source(e);
    let j = g.target(e);
    let incoming = g
        .out_edges(i)
        .filter(|&f| g.target(f) != j)
        .map(|f| field.message(g.reverse(f)));
    sp_update_iter(incoming, field.q, (i, j))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpInit {
    UniformRandom,
    AllWhite,
    FromWhiteningEnsemble,
}

#[derive(Debug, Clone)]
pub struct SpParams {
    pub damping: f64,
    pub tol: f64,
    pub max_sweeps: usize,
    pub seed: u64,
}

impl Default for SpParams {
    fn default() -> Self {
        SpParams {
            damping: 0.2,
            tol: 1e-9,
            max_sweeps: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpState {
    pub field: SurveyField,
    pub sweep_count: usize,
    pub max_change: f64,
    pub converged: bool,
}

/// Random-sequential survey propagation from `field`. Each sweep visits
/// the directed edges in a fresh random permutation and replaces
/// `η ← (1 - λ) G(η) + λ η`. Converged when a sweep's largest entry change
/// falls below `tol`.
pub fn sp_run(g: &Graph, field: SurveyField, params: &SpParams) -> Result<SpState> {
    if !(0.0..1.0).contains(&params.damping) {
        return Err(Error::InvalidParameter(format!(
            "damping {} outside [0, 1)",
            params.damping
        )));
    }
    if params.tol.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    if field.num_messages() != g.num_directed() {
        return Err(Error::InvalidArgument("survey field does not match graph".into()));
    }
    let mut rng = seed::rng(params.seed);
    let mut state = SpState {
        field,
        sweep_count: 0,
        max_change: f64::INFINITY,
        converged: false,
    };
    let mut order: Vec<usize> = (0..g.num_directed()).collect();
    let lambda = params.damping;
    if order.is_empty() {
        state.max_change = 0.0;
        state.converged = true;
        return Ok(state);
    }
    while state.sweep_count < params.max_sweeps {
        order.shuffle(&mut rng);
        let mut max_change = 0.0f64;
        for &e in &order {
            let update = edge_update(g, &state.field, e)?;
            let msg = state.field.message_mut(e);
            let mut sum = 0.0;
            for (m, &u) in msg.iter_mut().zip(&update.probs) {
                let new = (1.0 - lambda) * u + lambda * *m;
                max_change = max_change.max((new - *m).abs());
                *m = new;
                sum += new;
            }
            // keep the sum pinned at 1 through the white entry
            msg[0] = (msg[0] + 1.0 - sum).max(0.0);
        }
        state.sweep_count += 1;
        state.max_change = max_change;
        if max_change < params.tol {
            state.converged = true;
            break;
        }
    }
    Ok(state)
}

/// `Z(i, j) = 1 - Σ_c η_c(i -> j) η_c(j -> i)`; white is compatible with
/// everything.
pub fn edge_partition(g: &Graph, field: &SurveyField, i: usize, j: usize) -> Result<f64> {
    let e = g
        .directed_index(i, j)
        .ok_or_else(|| Error::InvalidArgument(format!("no edge {{{i}, {j}}}")))?;
    Ok(edge_partition_at(g, field, e))
}

fn edge_partition_at(g: &Graph, field: &SurveyField, e: usize) -> f64 {
    let a = field.message(e);
    let b = field.message(g.reverse(e));
    1.0 - (1..=field.q).map(|c| a[c] * b[c]).sum::<f64>()
}

/// `Z(i)` evaluated through every neighbour `j` as `Z_j(i) Z(i, j)`.
#[derive(Debug, Clone, Serialize)]
pub struct NodePartition {
    /// Mean over the choices of `j`; 1 for isolated nodes.
    pub z: f64,
    /// Direct value, all neighbours at once.
    pub z_direct: f64,
    pub per_choice: Vec<f64>,
    /// max - min over the choices.
    pub spread: f64,
}

pub fn node_partition(g: &Graph, field: &SurveyField, i: usize) -> Result<NodePartition> {
    if i >= g.n() {
        return Err(Error::InvalidArgument(format!("node {i} out of range")));
    }
    let q = field.q;
    let (_, empty) = missing_set_probabilities(g.out_edges(i).map(|f| field.message(g.reverse(f))), q);
    let z_direct = 1.0 - empty;
    if g.is_isolated(i) {
        return Ok(NodePartition {
            z: 1.0,
            z_direct: 1.0,
            per_choice: Vec::new(),
            spread: 0.0,
        });
    }
    let per_choice: Vec<f64> = g
        .out_edges(i)
        .map(|e| {
            let j = g.target(e);
            let (_, empty) = missing_set_probabilities(
                g.out_edges(i)
                    .filter(|&f| g.target(f) != j)
                    .map(|f| field.message(g.reverse(f))),
                q,
            );
            (1.0 - empty) * edge_partition_at(g, field, e)
        })
        .collect();
    let max = per_choice.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = per_choice.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(NodePartition {
        z: per_choice.iter().sum::<f64>() / per_choice.len() as f64,
        z_direct,
        per_choice,
        spread: max - min,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ComplexityReport {
    /// `[Σ_i ln Z(i) - Σ_edges ln Z(i, j)] / n`; `None` on contradiction.
    pub sigma: Option<f64>,
    pub z_node: Vec<f64>,
    /// Per undirected edge, in `Graph::edges` order.
    pub z_edge: Vec<f64>,
    pub contradiction: bool,
    /// Largest `Z(i)` spread over the choice of `j`.
    pub max_spread: f64,
}

/// Complexity of a survey fixed point. `Z(i)` is evaluated directly over
/// all neighbours; isolated nodes contribute `ln 1 = 0`.
pub fn complexity(g: &Graph, field: &SurveyField) -> Result<ComplexityReport> {
    if field.num_messages() != g.num_directed() {
        return Err(Error::InvalidArgument("survey field does not match graph".into()));
    }
    let mut z_node = Vec::with_capacity(g.n());
    let mut max_spread = 0.0f64;
    for i in 0..g.n() {
        let p = node_partition(g, field, i)?;
        max_spread = max_spread.max(p.spread);
        z_node.push(if g.is_isolated(i) { 1.0 } else { p.z_direct });
    }
    let z_edge: Vec<f64> = g
        .edges()
        .iter()
        .map(|&(u, v)| edge_partition_at(g, field, g.directed_index(u, v).unwrap()))
        .collect();
    let contradiction = z_node
        .iter()
        .chain(&z_edge)
        .any(|&z| z <= CONTRADICTION_EPS);
    let sigma = (!contradiction && g.n() > 0).then(|| {
        let nodes: f64 = z_node.iter().map(|z| z.ln()).sum();
        let edges: f64 = z_edge.iter().map(|z| z.ln()).sum();
        (nodes - edges) / g.n() as f64
    });
    Ok(ComplexityReport {
        sigma,
        z_node,
        z_edge,
        contradiction,
        max_spread,
    })
}

/// `η_c(i)` over all of `A(i)`; isolated nodes are pure white.
pub fn node_survey_field(g: &Graph, field: &SurveyField, i: usize) -> Result<Vec<f64>> {
    if i >= g.n() {
        return Err(Error::InvalidArgument(format!("node {i} out of range")));
    }
    Ok(sp_update_iter(g.out_edges(i).map(|f| field.message(g.reverse(f))), field.q, (i, i))?.probs)
}

/// Distinct extremal directional whitenings reached from legal colorings.
#[derive(Debug, Clone, Serialize)]
pub struct WhiteningCount {
    pub colorings: u128,
    pub distinct: usize,
    /// Colorings per whitening, largest first (the coloring-weighted view).
    pub multiplicities: Vec<u64>,
    /// Whether each distinct whitening, in `multiplicities` order, is all
    /// white.
    #[serde(skip)]
    pub whitenings: Vec<DirectionalAssignment>,
}

impl WhiteningCount {
    /// Per-node `η_c` averaged over whitenings uniformly (`by_whitening`)
    /// or over colorings uniformly. Values are `w(i|k)` read through any
    /// outgoing edge; nodes whose outgoing values are all white count as
    /// white.
    pub fn node_fractions(&self, g: &Graph, q: usize, by_whitening: bool) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; q + 1]; g.n()];
        let total: f64 = if by_whitening {
            self.whitenings.len() as f64
        } else {
            self.multiplicities.iter().sum::<u64>() as f64
        };
        if total == 0.0 {
            return out;
        }
        for (d, &mult) in self.whitenings.iter().zip(&self.multiplicities) {
            let w = if by_whitening { 1.0 } else { mult as f64 };
            for (i, row) in out.iter_mut().enumerate() {
                let v = g.out_edges(i).map(|e| d.get(e)).find(|&v| v != 0).unwrap_or(0);
                row[v as usize] += w / total;
            }
        }
        out
    }
}

/// Enumerates the legal colorings and counts the distinct fingerprints of
/// their extremal directional whitenings.
pub fn count_whitenings_exhaustive(g: &Graph, q: usize, budget: u64) -> Result<WhiteningCount> {
    check_q(q)?;
    let mut by_fp: HashMap<Fingerprint, (u64, DirectionalAssignment)> = HashMap::new();
    let mut failure = None;
    let colorings = for_each_legal_coloring(g, q, budget, |values| {
        if failure.is_some() {
            return;
        }
        let c = Coloring::new(q, values.to_vec()).expect("enumerated colors are in range");
        let result = directional_from_coloring(g, &c).and_then(|d| whiten_directional(g, &d));
        match result {
            Ok(w) => by_fp.entry(w.fingerprint()).or_insert((0, w)).0 += 1,
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let mut entries: Vec<(Fingerprint, (u64, DirectionalAssignment))> = by_fp.into_iter().collect();
    entries.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then_with(|| a.0.cmp(&b.0)));
    Ok(WhiteningCount {
        colorings,
        distinct: entries.len(),
        multiplicities: entries.iter().map(|(_, (m, _))| *m).collect(),
        whitenings: entries.into_iter().map(|(_, (_, w))| w).collect(),
    })
}
