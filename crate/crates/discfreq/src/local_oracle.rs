//! Local simulation of the global greedy decomposition.
//!
//! The global pass processes vertices in rank-key order. Locally, whether a
//! vertex `w` is still active when anchor `a` (rank `t`) runs its search
//! depends only on anchors of rank below `t` inside `ball(w, rho)` — a part
//! is connected with at most `rho` vertices, so no farther anchor can have
//! claimed `w`. The session resolves exactly those anchors, memoizes the
//! outcome, and replays each search with the same `(seed, anchor, attempt)`
//! generator the global pass uses, so answers agree with the global
//! decomposition exactly and are independent of query order.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::Serialize;
use thiserror::Error;

use crate::graph::{Graph, VertexId};
use crate::partition::{
    ball_size_bound, cut_report, run_search, CutReport, Part, Partition, PartitionParams,
};
use crate::rng::{indexed_rng, rank_key, Stream};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("local simulation budget exhausted: resolved {touched} anchors (cap {cap})")]
    BudgetExhausted { touched: usize, cap: usize },
}

/// Anything that can answer "which part contains v".
pub trait PartitionOracle {
    fn query(&self, v: VertexId) -> Result<Part, OracleError>;
}

#[derive(Clone, Copy, Debug)]
pub struct OracleConfig {
    pub params: PartitionParams,
    pub seed: u64,
    /// Per-query cap on the number of anchor searches resolved.
    pub work_cap: usize,
    /// Search attempts per anchor; must match the global run being simulated.
    pub retries: usize,
}

impl OracleConfig {
    pub fn new(params: PartitionParams, seed: u64, degree_bound: usize) -> Self {
        OracleConfig {
            params,
            seed,
            work_cap: default_work_cap(params.rho, degree_bound),
            retries: 1,
        }
    }
}

fn ceil_log2(x: usize) -> usize {
    match x {
        0 | 1 => 0,
        _ => (usize::BITS - (x - 1).leading_zeros()) as usize,
    }
}

/// Default per-query work cap: generous enough that exhausting it signals a
/// bug or an adversarial instance rather than routine load.
pub fn default_work_cap(rho: usize, degree_bound: usize) -> usize {
    let d = degree_bound.max(1);
    let ball = ball_size_bound(d, ceil_log2(rho)).min(usize::MAX as u64) as usize;
    10usize
        .saturating_mul(rho)
        .saturating_mul(ball)
        .saturating_mul(d)
}

/// Outcome of resolving one anchor.
enum Resolution {
    /// The anchor was already claimed by a lower-rank part when its turn came.
    Captured,
    /// The anchor ran its search; this is the part it created (possibly a
    /// singleton fallback).
    Created(Arc<Part>),
}

/// Raised inside a replayed search when the activity of some vertex hinges
/// on an anchor that is not resolved yet.
struct MissingDep(VertexId);

enum Activity {
    Active,
    Inactive,
    Missing(VertexId),
}

/// One simulation session. Memoized resolutions are shared across queries,
/// so repeated or overlapping queries get cheaper; a fresh session gives
/// cost figures for an isolated query.
pub struct OracleSession<'g> {
    g: &'g Graph,
    config: OracleConfig,
    memo: Mutex<HashMap<u32, Arc<ResolutionSlot>>>,
    candidates: Mutex<HashMap<u32, Arc<Vec<VertexId>>>>,
}

struct ResolutionSlot(Resolution);

impl<'g> OracleSession<'g> {
    pub fn new(g: &'g Graph, config: OracleConfig) -> Self {
        OracleSession {
            g,
            config,
            memo: Mutex::new(HashMap::new()),
            candidates: Mutex::new(HashMap::new()),
        }
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    /// Anchors that could possibly own `v`, in increasing rank order.
    fn candidates(&self, v: VertexId) -> Arc<Vec<VertexId>> {
        if let Some(c) = self.candidates.lock().unwrap().get(&v.raw()) {
            return Arc::clone(c);
        }
        let mut ball = self.g.ball(v, self.config.params.rho);
        ball.sort_by_key(|&u| rank_key(self.config.seed, u));
        let arc = Arc::new(ball);
        self.candidates
            .lock()
            .unwrap()
            .entry(v.raw())
            .or_insert_with(|| Arc::clone(&arc));
        arc
    }

    /// Is `w` still active when the anchor with rank key `t` takes its turn?
    fn activity_at(&self, w: VertexId, t: crate::rng::RankKey) -> Activity {
        let cands = self.candidates(w);
        let memo = self.memo.lock().unwrap();
        for &a in cands.iter() {
            if rank_key(self.config.seed, a) >= t {
                break;
            }
            match memo.get(&a.raw()) {
                None => return Activity::Missing(a),
                Some(slot) => match &slot.0 {
                    Resolution::Captured => {}
                    Resolution::Created(p) => {
                        if p.contains(w) {
                            return Activity::Inactive;
                        }
                    }
                },
            }
        }
        Activity::Active
    }

    /// Attempts to resolve `a` assuming nothing about unresolved anchors;
    /// fails with the first unresolved dependency encountered.
    fn try_resolve(&self, a: VertexId) -> Result<Resolution, VertexId> {
        let t = rank_key(self.config.seed, a);
        match self.activity_at(a, t) {
            Activity::Missing(dep) => return Err(dep),
            Activity::Inactive => return Ok(Resolution::Captured),
            Activity::Active => {}
        }
        let searched = run_search(
            self.g,
            a,
            &self.config.params,
            self.config.retries,
            self.config.seed,
            &mut |w| match self.activity_at(w, t) {
                Activity::Active => Ok(true),
                Activity::Inactive => Ok(false),
                Activity::Missing(dep) => Err(MissingDep(dep)),
            },
        );
        match searched {
            Err(MissingDep(dep)) => Err(dep),
            Ok(found) => Ok(Resolution::Created(Arc::new(
                found.unwrap_or_else(|| Part::singleton(a)),
            ))),
        }
    }

    /// Resolves `a` and, transitively, every lower-rank anchor its outcome
    /// depends on. Iterative: dependencies go on an explicit stack, and a
    /// pushed dependency always has strictly lower rank than the entry it
    /// blocks, so the stack cannot cycle.
    fn ensure_resolved(&self, a: VertexId, touched: &mut usize) -> Result<(), OracleError> {
        let mut stack = vec![a];
        while let Some(&top) = stack.last() {
            if self.memo.lock().unwrap().contains_key(&top.raw()) {
                stack.pop();
                continue;
            }
            match self.try_resolve(top) {
                Ok(res) => {
                    *touched += 1;
                    if *touched > self.config.work_cap {
                        return Err(OracleError::BudgetExhausted {
                            touched: *touched,
                            cap: self.config.work_cap,
                        });
                    }
                    self.memo
                        .lock()
                        .unwrap()
                        .insert(top.raw(), Arc::new(ResolutionSlot(res)));
                    stack.pop();
                }
                Err(dep) => {
                    debug_assert!(
                        rank_key(self.config.seed, dep) < rank_key(self.config.seed, top),
                        "dependency rank must decrease"
                    );
                    stack.push(dep);
                }
            }
        }
        Ok(())
    }

    /// The part of the simulated global decomposition that contains `v`.
    pub fn query(&self, v: VertexId) -> Result<Part, OracleError> {
        let mut touched = 0usize;
        let cands = self.candidates(v);
        for &a in cands.iter() {
            self.ensure_resolved(a, &mut touched)?;
            let memo = self.memo.lock().unwrap();
            if let Resolution::Created(p) = &memo[&a.raw()].0 {
                if p.contains(v) {
                    return Ok((**p).clone());
                }
            }
        }
        unreachable!("vertex {v} not claimed by any candidate anchor, including itself");
    }

    /// Queries every vertex and assembles the full decomposition, with parts
    /// in anchor rank order — the same order the global pass emits them.
    pub fn materialize(&self) -> Result<(Partition, CutReport), OracleError> {
        let mut by_rank: std::collections::BTreeMap<crate::rng::RankKey, Part> =
            std::collections::BTreeMap::new();
        for v in self.g.vertices() {
            let part = self.query(v)?;
            by_rank.entry(rank_key(self.config.seed, part.anchor)).or_insert(part);
        }
        let partition = Partition::new(self.g.vertex_count(), by_rank.into_values().collect());
        let cut = cut_report(self.g, &partition);
        Ok((partition, cut))
    }
}

impl PartitionOracle for OracleSession<'_> {
    fn query(&self, v: VertexId) -> Result<Part, OracleError> {
        OracleSession::query(self, v)
    }
}

/// Oracle view of an already-materialized global decomposition; answers are
/// lookups, never errors. Used as the ground-truth twin in tests.
pub struct GlobalPartitionOracle {
    parts: Vec<Arc<Part>>,
    part_of: Vec<Option<usize>>,
}

impl GlobalPartitionOracle {
    pub fn new(partition: &Partition) -> Self {
        GlobalPartitionOracle {
            parts: partition.parts().iter().cloned().map(Arc::new).collect(),
            part_of: partition.part_of(),
        }
    }
}

impl PartitionOracle for GlobalPartitionOracle {
    fn query(&self, v: VertexId) -> Result<Part, OracleError> {
        let i = self.part_of[v.index()].expect("partition must cover every vertex");
        Ok((*self.parts[i]).clone())
    }
}

/// Neighbour-query cost of isolated oracle queries: each sampled query runs
/// in a fresh session so no memoized work is shared.
#[derive(Clone, Debug, Serialize)]
pub struct CostProfile {
    pub per_query: Vec<u64>,
    pub min: u64,
    pub median: u64,
    pub max: u64,
    pub mean: f64,
}

pub fn query_cost_profile(
    g: &Graph,
    config: OracleConfig,
    queries: usize,
    profile_seed: u64,
) -> Result<CostProfile, OracleError> {
    assert!(queries > 0, "profile needs at least one query");
    let mut per_query = Vec::with_capacity(queries);
    for i in 0..queries {
        let mut rng = indexed_rng(profile_seed, Stream::Profile, i);
        let v = g.sample_vertex(&mut rng).expect("profiling an empty graph");
        let session = OracleSession::new(g, config);
        let before = g.counter().snapshot();
        session.query(v)?;
        per_query.push(g.counter().snapshot().since(before).neighbour_queries);
    }
    let mut sorted = per_query.clone();
    sorted.sort_unstable();
    Ok(CostProfile {
        min: sorted[0],
        median: sorted[sorted.len() / 2],
        max: *sorted.last().unwrap(),
        mean: sorted.iter().sum::<u64>() as f64 / sorted.len() as f64,
        per_query,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate;
    use crate::partition::global_partition;

    fn config(phi: f64, rho: usize, seed: u64, g: &Graph) -> OracleConfig {
        OracleConfig::new(PartitionParams::new(phi, rho).unwrap(), seed, g.degree_bound())
    }

    #[test]
    fn local_matches_global_exactly() {
        let cases: Vec<(Graph, f64, usize)> = vec![
            (generate::cycle(40, 2).unwrap(), 0.25, 4),
            (generate::path(33, 2).unwrap(), 0.25, 4),
            (generate::grid(10, 10, 4).unwrap(), 0.5, 16),
            (generate::disjoint_triangles(7, 2).unwrap(), 0.1, 3),
            (generate::binary_tree(31, 3).unwrap(), 0.5, 4),
        ];
        for (g, phi, rho) in &cases {
            for seed in [0u64, 1, 2] {
                let cfg = config(*phi, *rho, seed, g);
                let global = global_partition(g, &cfg.params, seed, cfg.retries);
                let session = OracleSession::new(g, cfg);
                let (local, cut) = session.materialize().unwrap();
                assert_eq!(local, global.partition, "seed {seed} mismatch");
                assert_eq!(cut.cut_edge_count, global.cut.cut_edge_count);
            }
        }
    }

    #[test]
    fn per_vertex_answers_match_global_ownership() {
        let g = generate::grid(8, 8, 4).unwrap();
        let cfg = config(0.5, 16, 9, &g);
        let global = global_partition(&g, &cfg.params, 9, 1);
        let truth = GlobalPartitionOracle::new(&global.partition);
        let session = OracleSession::new(&g, cfg);
        for v in g.vertices() {
            assert_eq!(session.query(v).unwrap(), truth.query(v).unwrap());
        }
    }

    #[test]
    fn answers_do_not_depend_on_query_order() {
        let g = generate::grid(9, 7, 4).unwrap();
        let cfg = config(0.5, 16, 4, &g);
        let forward = OracleSession::new(&g, cfg);
        let backward = OracleSession::new(&g, cfg);
        let order: Vec<VertexId> = g.vertices().collect();
        let fwd: Vec<Part> = order.iter().map(|&v| forward.query(v).unwrap()).collect();
        let mut rev: Vec<Part> = order
            .iter()
            .rev()
            .map(|&v| backward.query(v).unwrap())
            .collect();
        rev.reverse();
        assert_eq!(fwd, rev);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let g = generate::grid(16, 16, 4).unwrap();
        let mut cfg = config(0.5, 16, 1, &g);
        cfg.work_cap = 3;
        let session = OracleSession::new(&g, cfg);
        let err = session.query(VertexId::new(120)).unwrap_err();
        assert!(matches!(err, OracleError::BudgetExhausted { cap: 3, .. }));
    }

    #[test]
    fn triangles_partition_has_no_cut() {
        let g = generate::disjoint_triangles(10, 2).unwrap();
        let cfg = config(0.1, 3, 5, &g);
        let session = OracleSession::new(&g, cfg);
        let (partition, cut) = session.materialize().unwrap();
        assert_eq!(partition.parts().len(), 10);
        assert_eq!(cut.cut_edge_count, 0);
    }

    #[test]
    fn cost_profile_orders_statistics() {
        let g = generate::grid(12, 12, 4).unwrap();
        let cfg = config(0.5, 16, 2, &g);
        let profile = query_cost_profile(&g, cfg, 8, 42).unwrap();
        assert_eq!(profile.per_query.len(), 8);
        assert!(profile.min <= profile.median && profile.median <= profile.max);
        assert!(profile.mean >= profile.min as f64 && profile.mean <= profile.max as f64);
        assert!(profile.min > 0);
    }

    #[test]
    fn default_work_cap_formula() {
        // rho = 16: ceil(log2) = 4, ball bound B(4, 4) = 2 * 341 = 682
        assert_eq!(default_work_cap(16, 4), 10 * 16 * 682 * 4);
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(5), 3);
    }
}
