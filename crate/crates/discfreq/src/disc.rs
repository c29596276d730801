//! Rooted radius-k discs, exact canonical keys for their isomorphism
//! classes, and sparse frequency vectors over those keys.
//!
//! Canonicalization is exact: colour refinement seeded by
//! (distance-from-root, degree) narrows the candidate orderings, then a
//! branch-and-bound search over the remaining within-cell permutations
//! selects the lexicographically minimal adjacency encoding. Two discs get
//! equal keys iff a root-preserving isomorphism exists between them. Discs
//! at desk scale are tiny, so exactness is affordable.

use std::collections::BTreeMap;
use std::fmt;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::graph::{Graph, VertexId};

/// Discs above this vertex count refuse exact canonicalization.
pub const DEFAULT_CANON_CAP: usize = 10_000;

#[derive(Debug, Error)]
pub enum DiscError {
    #[error("disc has {vertices} vertices, exceeding the canonicalization cap {cap}")]
    TooLarge { vertices: usize, cap: usize },
    #[error("rooted graph is not connected: vertex {0} unreachable from the root")]
    Disconnected(usize),
    #[error("invalid rooted adjacency: {0}")]
    Invalid(String),
}

/// A connected rooted graph; the root is local index 0 and every vertex
/// carries its hop distance from the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootedDisc {
    adj: Vec<Vec<usize>>,
    dist: Vec<usize>,
}

impl RootedDisc {
    /// Builds a disc from local adjacency lists rooted at index 0,
    /// computing distances by BFS. Errors if the graph is disconnected or
    /// the lists are not symmetric/loop-free/duplicate-free.
    pub fn from_rooted_adjacency(mut adj: Vec<Vec<usize>>) -> Result<Self, DiscError> {
        let n = adj.len();
        if n == 0 {
            return Err(DiscError::Invalid("disc must have at least the root".into()));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        for (u, list) in adj.iter().enumerate() {
            for (pos, &v) in list.iter().enumerate() {
                if v >= n {
                    return Err(DiscError::Invalid(format!("neighbour {v} out of range")));
                }
                if v == u {
                    return Err(DiscError::Invalid(format!("self-loop at {u}")));
                }
                if pos > 0 && list[pos - 1] == v {
                    return Err(DiscError::Invalid(format!("duplicate edge {u}-{v}")));
                }
                if adj[v].binary_search(&u).is_err() {
                    return Err(DiscError::Invalid(format!("asymmetric edge {u}-{v}")));
                }
            }
        }
        let mut dist = vec![usize::MAX; n];
        dist[0] = 0;
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        if let Some(u) = dist.iter().position(|&d| d == usize::MAX) {
            return Err(DiscError::Disconnected(u));
        }
        Ok(RootedDisc { adj, dist })
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adj
    }

    pub fn distance_from_root(&self, local: usize) -> usize {
        self.dist[local]
    }

    pub fn radius(&self) -> usize {
        self.dist.iter().copied().max().unwrap_or(0)
    }
}

/// Extracts the radius-`k` disc of `v`: the induced subgraph on `ball(v, k)`
/// with the root relabelled to 0 and the rest in (distance, original-id)
/// order. Charges neighbour queries for the BFS and the induction pass.
pub fn extract_disc(g: &Graph, v: VertexId, k: usize) -> RootedDisc {
    let mut members = g.ball_with_distances(v, k);
    members.sort_by_key(|&(u, d)| (d, u));
    let local: BTreeMap<VertexId, usize> =
        members.iter().enumerate().map(|(i, &(u, _))| (u, i)).collect();
    let mut adj = vec![Vec::new(); members.len()];
    for (i, &(u, _)) in members.iter().enumerate() {
        for &w in g.neighbours(u) {
            if let Some(&j) = local.get(&w) {
                adj[i].push(j);
            }
        }
        adj[i].sort_unstable();
    }
    let dist = members.iter().map(|&(_, d)| d).collect();
    RootedDisc { adj, dist }
}

/// Canonical identifier of a rooted-isomorphism class: the vertex count
/// followed by the bit-packed minimal upper-triangular adjacency encoding.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DiscKey(Vec<u8>);

impl DiscKey {
    pub fn bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for DiscKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DiscKey({})", self.hex())
    }
}

pub fn canonical_key(disc: &RootedDisc) -> Result<DiscKey, DiscError> {
    canonical_key_capped(disc, DEFAULT_CANON_CAP)
}

pub fn canonical_key_capped(disc: &RootedDisc, cap: usize) -> Result<DiscKey, DiscError> {
    let n = disc.vertex_count();
    if n > cap {
        return Err(DiscError::TooLarge { vertices: n, cap });
    }
    let colours = refine_colours(disc);

    // Cells in canonical colour order. The root has the unique distance-0
    // colour, which sorts first, so it is always fixed at position 0.
    let mut cells: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (v, &c) in colours.iter().enumerate() {
        cells.entry(c).or_default().push(v);
    }
    let cells: Vec<Vec<usize>> = cells.into_values().collect();
    debug_assert_eq!(cells[0], vec![0]);

    let mut search = MinEncodingSearch {
        adj: &disc.adj,
        pos_cell: cells
            .iter()
            .enumerate()
            .flat_map(|(ci, cell)| std::iter::repeat(ci).take(cell.len()))
            .collect(),
        cells,
        order: Vec::with_capacity(n),
        used: vec![false; n],
        bits: Vec::with_capacity(n * (n.saturating_sub(1)) / 2),
        best: None,
    };
    search.dfs(true);
    let best = search.best.unwrap_or_default();

    let mut bytes = Vec::with_capacity(4 + best.len().div_ceil(8));
    bytes.extend_from_slice(&(n as u32).to_be_bytes());
    for chunk in best.chunks(8) {
        let mut b = 0u8;
        for (i, &bit) in chunk.iter().enumerate() {
            if bit {
                b |= 1 << (7 - i);
            }
        }
        bytes.push(b);
    }
    Ok(DiscKey(bytes))
}

/// Iterated colour refinement. Initial colour is (distance, degree); each
/// round appends the sorted multiset of neighbour colours. Colour ids are
/// assigned by sorting signatures, so they are label-independent.
fn refine_colours(disc: &RootedDisc) -> Vec<usize> {
    let n = disc.vertex_count();
    let init: Vec<(usize, usize)> = (0..n).map(|v| (disc.dist[v], disc.adj[v].len())).collect();
    let mut colours = canonical_ids(&init);
    loop {
        let sigs: Vec<(usize, Vec<usize>)> = (0..n)
            .map(|v| {
                let mut nb: Vec<usize> = disc.adj[v].iter().map(|&u| colours[u]).collect();
                nb.sort_unstable();
                (colours[v], nb)
            })
            .collect();
        let next = canonical_ids(&sigs);
        // refinement is monotone: an unchanged class count means a fixpoint
        if count_distinct(&next) == count_distinct(&colours) {
            return colours;
        }
        colours = next;
    }
}

fn canonical_ids<T: Ord + Clone>(sigs: &[T]) -> Vec<usize> {
    let mut sorted: Vec<T> = sigs.to_vec();
    sorted.sort();
    sorted.dedup();
    sigs.iter()
        .map(|s| sorted.binary_search(s).expect("signature present"))
        .collect()
}

fn count_distinct(colours: &[usize]) -> usize {
    let mut c = colours.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

/// Branch-and-bound over orderings that list each refinement cell as a
/// block, tracking the lexicographically minimal column-wise
/// upper-triangular adjacency bitstring.
struct MinEncodingSearch<'a> {
    adj: &'a [Vec<usize>],
    cells: Vec<Vec<usize>>,
    pos_cell: Vec<usize>,
    order: Vec<usize>,
    used: Vec<bool>,
    bits: Vec<bool>,
    best: Option<Vec<bool>>,
}

impl MinEncodingSearch<'_> {
    /// `tied` means the current prefix equals the best prefix bit-for-bit;
    /// prefixes already strictly below best skip further comparison, and
    /// strictly greater prefixes were pruned at the branch.
    fn dfs(&mut self, tied: bool) {
        let pos = self.order.len();
        if pos == self.pos_cell.len() {
            if self.best.is_none() || !tied {
                self.best = Some(self.bits.clone());
            }
            return;
        }
        let cell = self.pos_cell[pos];
        for idx in 0..self.cells[cell].len() {
            let v = self.cells[cell][idx];
            if self.used[v] {
                continue;
            }
            let new_bits: Vec<bool> =
                self.order.iter().map(|&u| self.adj[v].binary_search(&u).is_ok()).collect();
            let mut child_tied = tied;
            if let Some(best) = &self.best {
                if tied {
                    let slot = &best[self.bits.len()..self.bits.len() + new_bits.len()];
                    match new_bits.as_slice().cmp(slot) {
                        std::cmp::Ordering::Greater => continue,
                        std::cmp::Ordering::Less => child_tied = false,
                        std::cmp::Ordering::Equal => {}
                    }
                }
            }
            self.used[v] = true;
            self.order.push(v);
            let len_before = self.bits.len();
            self.bits.extend_from_slice(&new_bits);
            self.dfs(child_tied);
            self.bits.truncate(len_before);
            self.order.pop();
            self.used[v] = false;
        }
    }
}

/// Sparse normalized distribution over disc keys; absent keys mean zero.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyVector {
    entries: BTreeMap<DiscKey, f64>,
}

impl FrequencyVector {
    /// Normalizes integer tallies; zero-count keys are dropped.
    pub fn from_counts(counts: BTreeMap<DiscKey, u64>) -> Self {
        let total: u64 = counts.values().sum();
        assert!(total > 0, "frequency vector needs at least one tally");
        let entries = counts
            .into_iter()
            .filter(|&(_, c)| c > 0)
            .map(|(k, c)| (k, c as f64 / total as f64))
            .collect();
        FrequencyVector { entries }
    }

    pub fn entries(&self) -> &BTreeMap<DiscKey, f64> {
        &self.entries
    }

    pub fn fraction(&self, key: &DiscKey) -> f64 {
        self.entries.get(key).copied().unwrap_or(0.0)
    }

    /// Number of distinct disc types observed (the empirical T).
    pub fn type_count(&self) -> usize {
        self.entries.len()
    }

    pub fn sum(&self) -> f64 {
        self.entries.values().sum()
    }
}

impl Serialize for FrequencyVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.entries.len()))?;
        for (k, v) in &self.entries {
            map.serialize_entry(&k.hex(), v)?;
        }
        map.end()
    }
}

/// Sum of absolute differences over the union of keys; in [0, 2] for
/// normalized vectors.
pub fn l1_distance(f: &FrequencyVector, h: &FrequencyVector) -> f64 {
    let mut total = 0.0;
    for (k, &p) in f.entries() {
        total += (p - h.fraction(k)).abs();
    }
    for (k, &q) in h.entries() {
        if !f.entries.contains_key(k) {
            total += q;
        }
    }
    total
}

/// Ground-truth oracle: the disc-type distribution over every vertex of
/// `g`. Costs Theta(n * d^k); intended for desk-scale verification.
pub fn exact_frequency_vector(g: &Graph, k: usize) -> Result<FrequencyVector, DiscError> {
    let mut counts: BTreeMap<DiscKey, u64> = BTreeMap::new();
    for v in g.vertices() {
        let key = canonical_key(&extract_disc(g, v, k))?;
        *counts.entry(key).or_insert(0) += 1;
    }
    Ok(FrequencyVector::from_counts(counts))
}

/// A-priori ceiling on the number of disc-isomorphism types for degree
/// bound `d` and radius `k`: 2^(b(b-1)/2) over the maximal disc size
/// b = 1 + d + ... + d^k. Returns `None` when the bound overflows u128 and
/// callers should fall back to the empirical count.
pub fn apriori_type_bound(d: usize, k: usize) -> Option<u128> {
    let mut b: u128 = 0;
    let mut term: u128 = 1;
    for _ in 0..=k {
        b = b.checked_add(term)?;
        term = term.checked_mul(d as u128)?;
    }
    let pairs = b.checked_mul(b - 1)? / 2;
    if pairs >= 127 {
        return None;
    }
    Some(1u128 << pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn key_of(adj: Vec<Vec<usize>>) -> DiscKey {
        canonical_key(&RootedDisc::from_rooted_adjacency(adj).unwrap()).unwrap()
    }

    #[test]
    fn zero_radius_disc_is_single_vertex() {
        let g = generate::grid(3, 3, 4).unwrap();
        for v in g.vertices() {
            let d = extract_disc(&g, v, 0);
            assert_eq!(d.vertex_count(), 1);
        }
    }

    #[test]
    fn cycle_and_path_discs() {
        let c8 = generate::cycle(8, 2).unwrap();
        let d = extract_disc(&c8, VertexId::new(0), 1);
        assert_eq!(d.vertex_count(), 3);
        assert_eq!(d.distance_from_root(0), 0);

        let p5 = generate::path(5, 2).unwrap();
        let endpoint = extract_disc(&p5, VertexId::new(0), 1);
        assert_eq!(endpoint.vertex_count(), 2);
    }

    #[test]
    fn disc_size_matches_ball_size() {
        let g = generate::grid(5, 4, 4).unwrap();
        for v in g.vertices() {
            for k in 0..4 {
                assert_eq!(extract_disc(&g, v, k).vertex_count(), g.ball(v, k).len());
            }
        }
    }

    #[test]
    fn isomorphic_relabelings_share_keys() {
        // C8's k=1 disc with shuffled non-root labels
        let a = key_of(vec![vec![1, 2], vec![0], vec![0]]);
        let b = key_of(vec![vec![2, 1], vec![0], vec![0]]);
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_structures_get_distinct_keys() {
        // endpoint edge vs path centre
        let edge = key_of(vec![vec![1], vec![0]]);
        let centre = key_of(vec![vec![1, 2], vec![0], vec![0]]);
        assert_ne!(edge, centre);

        // star K_{1,3} at its centre vs P4 rooted at the second vertex
        let star = key_of(vec![vec![1, 2, 3], vec![0], vec![0], vec![0]]);
        let p4 = key_of(vec![vec![1, 2], vec![0], vec![0, 3], vec![2]]);
        assert_ne!(star, p4);

        // same rooted graph, different roots: P3 at end vs centre
        let p3_end = key_of(vec![vec![1], vec![0, 2], vec![1]]);
        let p3_centre = key_of(vec![vec![1, 2], vec![0], vec![0]]);
        assert_ne!(p3_end, p3_centre);
    }

    #[test]
    fn exact_vector_on_vertex_transitive_graph() {
        let c8 = generate::cycle(8, 2).unwrap();
        let f = exact_frequency_vector(&c8, 1).unwrap();
        assert_eq!(f.type_count(), 1);
        assert!((f.sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn exact_vector_on_p5() {
        let p5 = generate::path(5, 2).unwrap();
        let f = exact_frequency_vector(&p5, 1).unwrap();
        assert_eq!(f.type_count(), 2);
        let mut fractions: Vec<f64> = f.entries().values().copied().collect();
        fractions.sort_by(f64::total_cmp);
        assert!((fractions[0] - 0.4).abs() < 1e-12);
        assert!((fractions[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn radius_zero_gives_single_type() {
        let g = generate::grid(4, 4, 4).unwrap();
        let f = exact_frequency_vector(&g, 0).unwrap();
        assert_eq!(f.type_count(), 1);
        assert_eq!(f.entries().values().next().copied().unwrap(), 1.0);
    }

    #[test]
    fn l1_distance_values() {
        let p5 = exact_frequency_vector(&generate::path(5, 2).unwrap(), 1).unwrap();
        let c8 = exact_frequency_vector(&generate::cycle(8, 2).unwrap(), 1).unwrap();
        assert_eq!(l1_distance(&p5, &p5), 0.0);
        assert!((l1_distance(&p5, &c8) - 0.8).abs() < 1e-12);
        assert!((l1_distance(&c8, &p5) - 0.8).abs() < 1e-12);

        // disjoint supports reach the total-variation maximum
        let tri = exact_frequency_vector(&generate::disjoint_triangles(2, 2).unwrap(), 1).unwrap();
        assert!((l1_distance(&c8, &tri) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn canonicalization_cap_errors() {
        let disc = RootedDisc::from_rooted_adjacency(vec![vec![1], vec![0, 2], vec![1]]).unwrap();
        assert!(matches!(
            canonical_key_capped(&disc, 2),
            Err(DiscError::TooLarge { vertices: 3, cap: 2 })
        ));
    }

    #[test]
    fn apriori_bound_values() {
        assert_eq!(apriori_type_bound(1, 0), Some(1)); // b=1, no pairs
        assert_eq!(apriori_type_bound(2, 1), Some(8)); // b=3, 3 pairs
        assert_eq!(apriori_type_bound(4, 20), None); // unusably large
    }

    /// Exhaustive oracle: disc types of radius 1 over all graphs with the
    /// given degree bound are exactly the connected rooted graphs of radius
    /// <= 1 under that bound.
    #[test]
    fn observed_type_counts_match_enumeration() {
        // d = 1: isolated root or a single pendant edge
        let g = generate::path(2, 1).unwrap();
        let mut keys = std::collections::BTreeSet::new();
        keys.insert(canonical_key(&extract_disc(&g, VertexId::new(0), 5)).unwrap());
        let isolated = crate::graph::Graph::from_adjacency(1, vec![Vec::new()]).unwrap();
        keys.insert(canonical_key(&extract_disc(&isolated, VertexId::new(0), 5)).unwrap());
        assert_eq!(keys.len(), 2);

        // d = 2, k = 1: enumerate all rooted graphs on <= 3 vertices with
        // degree <= 2 whose vertices all lie within distance 1 of the root.
        let mut types = std::collections::BTreeSet::new();
        for n in 1..=3usize {
            let pairs: Vec<(usize, usize)> =
                (0..n).flat_map(|u| ((u + 1)..n).map(move |v| (u, v))).collect();
            for mask in 0..(1u32 << pairs.len()) {
                let mut adj = vec![Vec::new(); n];
                for (i, &(u, v)) in pairs.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        adj[u].push(v);
                        adj[v].push(u);
                    }
                }
                if adj.iter().any(|l| l.len() > 2) {
                    continue;
                }
                let Ok(disc) = RootedDisc::from_rooted_adjacency(adj) else { continue };
                if disc.radius() > 1 {
                    continue;
                }
                types.insert(canonical_key(&disc).unwrap());
            }
        }
        // isolated root, pendant edge, path centre, triangle
        assert_eq!(types.len(), 4);
    }

    fn random_disc() -> impl Strategy<Value = RootedDisc> {
        (2usize..8, any::<u64>()).prop_map(|(n, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            loop {
                let mut adj = vec![Vec::new(); n];
                for u in 0..n {
                    for v in (u + 1)..n {
                        if rng.random_bool(0.5) {
                            adj[u].push(v);
                            adj[v].push(u);
                        }
                    }
                }
                if let Ok(d) = RootedDisc::from_rooted_adjacency(adj) {
                    return d;
                }
            }
        })
    }

    proptest! {
        /// Root-preserving relabelings never change the key.
        #[test]
        fn key_is_relabeling_invariant(disc in random_disc(), seed in any::<u64>()) {
            let n = disc.vertex_count();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut perm: Vec<usize> = (1..n).collect();
            perm.shuffle(&mut rng);
            let mut map = vec![0usize; n];
            for (i, &p) in perm.iter().enumerate() {
                map[i + 1] = p;
            }
            let mut adj = vec![Vec::new(); n];
            for (u, list) in disc.adjacency().iter().enumerate() {
                for &v in list {
                    adj[map[u]].push(map[v]);
                }
            }
            let relabelled = RootedDisc::from_rooted_adjacency(adj).unwrap();
            prop_assert_eq!(canonical_key(&disc).unwrap(), canonical_key(&relabelled).unwrap());
        }

        /// L1 is symmetric, zero on identity, and satisfies the triangle
        /// inequality on random triples.
        #[test]
        fn l1_metric_properties(sa in any::<u64>(), sb in any::<u64>(), sc in any::<u64>()) {
            let vec_for = |seed: u64| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let n = rng.random_range(3usize..9);
                exact_frequency_vector(&generate::path(n, 2).unwrap(), rng.random_range(0usize..3)).unwrap()
            };
            let (a, b, c) = (vec_for(sa), vec_for(sb), vec_for(sc));
            prop_assert_eq!(l1_distance(&a, &a), 0.0);
            prop_assert!((l1_distance(&a, &b) - l1_distance(&b, &a)).abs() < 1e-12);
            prop_assert!(l1_distance(&a, &c) <= l1_distance(&a, &b) + l1_distance(&b, &c) + 1e-12);
        }
    }
}
