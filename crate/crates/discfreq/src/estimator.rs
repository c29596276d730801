//! Sampling estimator: choose the decomposition granularity and sample size
//! from the target error, query the partition oracle at uniformly random
//! vertices, and report the empirical disc-type distribution together with
//! the summary graph assembled from the sampled parts.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::disc::{
    canonical_key, exact_frequency_vector, extract_disc, l1_distance, DiscError, DiscKey,
    FrequencyVector,
};
use crate::graph::{Graph, GraphError, QueryCounts, VertexId};
use crate::local_oracle::{OracleError, PartitionOracle};
use crate::partition::{ball_size_bound, Part};
use crate::rng::{indexed_rng, Stream};

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("invalid estimate parameters: {0}")]
    InvalidParams(String),
    #[error("sample size {value:.3e} overflows; pass an explicit sample-size override")]
    SampleSizeOverflow { value: f64 },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Disc(#[from] DiscError),
}

#[derive(Clone, Copy, Debug)]
pub struct EstimateParams {
    /// Target l1 error in (0, 2); values >= 2 still run but are vacuous.
    pub epsilon: f64,
    /// Disc radius.
    pub k: usize,
    pub phi_override: Option<f64>,
    pub rho_override: Option<usize>,
    pub sample_size_override: Option<usize>,
    /// Probability budget for the sampling step exceeding epsilon/2.
    pub failure_budget: f64,
}

impl EstimateParams {
    pub fn new(epsilon: f64, k: usize) -> Self {
        EstimateParams {
            epsilon,
            k,
            phi_override: None,
            rho_override: None,
            sample_size_override: None,
            failure_budget: 0.1,
        }
    }

    pub fn validate(&self) -> Result<(), EstimateError> {
        if !(self.epsilon > 0.0) {
            return Err(EstimateError::InvalidParams("epsilon must be positive".into()));
        }
        if !(self.failure_budget > 0.0 && self.failure_budget < 1.0) {
            return Err(EstimateError::InvalidParams(
                "failure_budget must lie in (0, 1)".into(),
            ));
        }
        if self.phi_override.is_some_and(|p| !(p > 0.0)) {
            return Err(EstimateError::InvalidParams("phi override must be positive".into()));
        }
        if self.rho_override == Some(0) || self.sample_size_override == Some(0) {
            return Err(EstimateError::InvalidParams("overrides must be positive".into()));
        }
        Ok(())
    }
}

/// Decomposition threshold guaranteeing the pruned-graph error stays within
/// epsilon/2: phi = epsilon / (2 B(d,k)).
pub fn choose_phi(epsilon: f64, d: usize, k: usize) -> f64 {
    assert!(epsilon > 0.0 && d >= 1);
    epsilon / (2.0 * ball_size_bound(d, k) as f64)
}

/// Smallest N with 2T exp(-2N (eps/2T)^2) <= failure_budget:
/// N = ceil((2 T^2 / eps^2) ln(2T / failure_budget)).
pub fn choose_sample_size(
    epsilon: f64,
    t_estimate: u64,
    failure_budget: f64,
    override_n: Option<usize>,
) -> Result<usize, EstimateError> {
    if let Some(n) = override_n {
        return Ok(n);
    }
    assert!(epsilon > 0.0 && t_estimate >= 1);
    let t = t_estimate as f64;
    let value = (2.0 * t * t / (epsilon * epsilon)) * (2.0 * t / failure_budget).ln();
    if !value.is_finite() || value > (1u64 << 48) as f64 {
        return Err(EstimateError::SampleSizeOverflow { value });
    }
    Ok((value.ceil() as usize).max(1))
}

/// Disjoint union of the sampled parts, one copy per sample.
#[derive(Debug)]
pub struct SummaryGraph {
    graph: Graph,
    provenance: Vec<ComponentProvenance>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComponentProvenance {
    pub sample_index: usize,
    pub anchor: VertexId,
    pub members: Vec<VertexId>,
}

impl SummaryGraph {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn provenance(&self) -> &[ComponentProvenance] {
        &self.provenance
    }

    pub fn component_count(&self) -> usize {
        self.provenance.len()
    }

    pub fn size(&self) -> usize {
        self.graph.vertex_count()
    }
}

/// Induced subgraph on a part's members, with the original id of each local
/// vertex. Uses unmetered adjacency: the edges inside a returned part were
/// already discovered (and paid for) by the search that produced it.
fn part_subgraph(g: &Graph, part: &Part) -> Graph {
    let members = part.members();
    let mut adj: Vec<Vec<VertexId>> = vec![Vec::new(); members.len()];
    for (i, &u) in members.iter().enumerate() {
        for &w in g.adjacency_unmetered(u) {
            if let Ok(j) = members.binary_search(&w) {
                adj[i].push(VertexId::new(j));
            }
        }
    }
    Graph::from_adjacency(g.degree_bound(), adj).expect("part subgraph inherits validity")
}

/// Canonical key of the radius-k disc of `v` measured inside its part.
pub fn disc_key_in_part(g: &Graph, part: &Part, v: VertexId, k: usize) -> Result<DiscKey, DiscError> {
    let local = part
        .members()
        .binary_search(&v)
        .expect("sampled vertex belongs to its part");
    let sub = part_subgraph(g, part);
    canonical_key(&extract_disc(&sub, VertexId::new(local), k))
}

/// H = P_1 ∪ ... ∪ P_N with one copy per sample, so f_H is the
/// sample-weighted average of part-internal disc distributions.
pub fn build_summary(parts: &[Part], g: &Graph) -> SummaryGraph {
    let mut adj: Vec<Vec<VertexId>> = Vec::new();
    let mut provenance = Vec::with_capacity(parts.len());
    for (sample_index, part) in parts.iter().enumerate() {
        let offset = adj.len();
        let sub = part_subgraph(g, part);
        for v in sub.vertices() {
            adj.push(
                sub.adjacency_unmetered(v)
                    .iter()
                    .map(|w| VertexId::new(w.index() + offset))
                    .collect(),
            );
        }
        provenance.push(ComponentProvenance {
            sample_index,
            anchor: part.anchor,
            members: part.members().to_vec(),
        });
    }
    let graph = Graph::from_adjacency(g.degree_bound(), adj).expect("union of valid subgraphs");
    SummaryGraph { graph, provenance }
}

pub fn summary_frequency_vector(h: &SummaryGraph, k: usize) -> Result<FrequencyVector, DiscError> {
    exact_frequency_vector(h.graph(), k)
}

#[derive(Debug, Serialize)]
pub struct EstimateReport {
    pub epsilon: f64,
    pub k: usize,
    pub phi: f64,
    pub rho: usize,
    pub n_samples: usize,
    /// Empirical type count from the pilot; absent under a sample-size override.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pilot_type_count: Option<usize>,
    pub vacuous: bool,
    pub empirical_vector: FrequencyVector,
    pub summary_size: usize,
    pub component_count: usize,
    #[serde(skip)]
    pub summary: SummaryGraph,
    pub counters: QueryCounts,
    pub wall_time_ms: u128,
    pub seed: u64,
}

const PILOT_SAMPLES: usize = 200;

/// Algorithm: sample v_1..v_N uniformly, fetch each part from the oracle,
/// key the disc of v_i inside P_i, and normalize by N. The sample size
/// comes from a 200-query pilot estimating the reachable type count unless
/// overridden. `phi_used`/`rho_used` describe the oracle's configuration
/// and are echoed in the report.
pub fn estimate(
    g: &Graph,
    params: &EstimateParams,
    oracle: &impl PartitionOracle,
    phi_used: f64,
    rho_used: usize,
    seed: u64,
) -> Result<EstimateReport, EstimateError> {
    params.validate()?;
    if g.vertex_count() == 0 {
        return Err(EstimateError::Graph(GraphError::EmptyGraph));
    }
    let start = Instant::now();
    let before = g.counter().snapshot();

    let mut pilot_type_count = None;
    let n_samples = match params.sample_size_override {
        Some(n) => n,
        None => {
            let mut seen = std::collections::BTreeSet::new();
            for i in 0..PILOT_SAMPLES {
                let mut rng = indexed_rng(seed, Stream::Pilot, i);
                let v = g.sample_vertex(&mut rng)?;
                let part = oracle.query(v)?;
                seen.insert(disc_key_in_part(g, &part, v, params.k)?);
            }
            pilot_type_count = Some(seen.len());
            choose_sample_size(
                params.epsilon,
                seen.len() as u64,
                params.failure_budget,
                None,
            )?
        }
    };

    let mut counts: BTreeMap<DiscKey, u64> = BTreeMap::new();
    let mut parts = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let mut rng = indexed_rng(seed, Stream::Sample, i);
        let v = g.sample_vertex(&mut rng)?;
        let part = oracle.query(v)?;
        *counts.entry(disc_key_in_part(g, &part, v, params.k)?).or_insert(0) += 1;
        parts.push(part);
    }
    let empirical_vector = FrequencyVector::from_counts(counts);
    let summary = build_summary(&parts, g);

    Ok(EstimateReport {
        epsilon: params.epsilon,
        k: params.k,
        phi: phi_used,
        rho: rho_used,
        n_samples,
        pilot_type_count,
        vacuous: params.epsilon >= 2.0,
        summary_size: summary.size(),
        component_count: summary.component_count(),
        empirical_vector,
        summary,
        counters: g.counter().snapshot().since(before),
        wall_time_ms: start.elapsed().as_millis(),
        seed,
    })
}

#[derive(Debug, Serialize)]
pub struct Evaluation {
    pub epsilon: f64,
    pub exact_type_count: usize,
    pub l1_empirical_vs_exact: f64,
    pub l1_summary_vs_exact: f64,
    pub passed: bool,
    pub vacuous: bool,
}

/// Compares the estimate against the exact frequency vector of `g`; only
/// meaningful at desk scale where the exact computation is feasible.
pub fn evaluate(g: &Graph, report: &EstimateReport, k: usize) -> Result<Evaluation, EstimateError> {
    let exact = exact_frequency_vector(g, k)?;
    let f_h = summary_frequency_vector(&report.summary, k)?;
    let l1_empirical = l1_distance(&report.empirical_vector, &exact);
    Ok(Evaluation {
        epsilon: report.epsilon,
        exact_type_count: exact.type_count(),
        l1_empirical_vs_exact: l1_empirical,
        l1_summary_vs_exact: l1_distance(&f_h, &exact),
        passed: l1_empirical <= report.epsilon,
        vacuous: report.vacuous,
    })
}
