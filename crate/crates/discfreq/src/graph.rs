//! Immutable bounded-degree graph with metered adjacency-list access.
//!
//! The graph never changes after construction; algorithms that "remove"
//! vertices carry their own activity masks. Neighbour-list reads, degree
//! reads and uniform vertex draws are counted in a [`QueryCounter`] so that
//! query-complexity claims can be asserted in tests. One neighbour query is
//! charged per full list access, matching the O(d)-per-expansion cost model.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense vertex index in `[0, n)`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(u32);

impl VertexId {
    pub fn new(index: usize) -> Self {
        VertexId(u32::try_from(index).expect("vertex index fits in u32"))
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn raw(self) -> u32 {
        self.0
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("symmetry violation: {u} lists {v} but {v} does not list {u}")]
    Symmetry { u: VertexId, v: VertexId },
    #[error("self-loop at vertex {0}")]
    SelfLoop(VertexId),
    #[error("duplicate neighbour {v} in adjacency list of {u}")]
    DuplicateNeighbour { u: VertexId, v: VertexId },
    #[error("vertex {v} has degree {degree}, exceeding the bound {d_max}")]
    DegreeBound { v: VertexId, degree: usize, d_max: usize },
    #[error("neighbour reference {v} out of range (n = {n})")]
    OutOfRange { v: usize, n: usize },
    #[error("cannot sample from an empty graph")]
    EmptyGraph,
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("no default part-size cap for family {0}; supply rho explicitly")]
    NoDefaultRho(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Monotone counters for graph accesses, shared across concurrent readers.
#[derive(Default, Debug)]
pub struct QueryCounter {
    neighbour_queries: AtomicU64,
    degree_queries: AtomicU64,
    vertex_samples: AtomicU64,
}

/// A point-in-time snapshot of a [`QueryCounter`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryCounts {
    pub neighbour_queries: u64,
    pub degree_queries: u64,
    pub vertex_samples: u64,
}

impl QueryCounter {
    #[inline]
    fn bump_neighbour(&self) {
        self.neighbour_queries.fetch_add(1, Ordering::Relaxed);
    }

    #[inline]
    fn bump_degree(&self) {
        self.degree_queries.fetch_add(1, Ordering::Relaxed);
    }

    #[inline]
    fn bump_sample(&self) {
        self.vertex_samples.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> QueryCounts {
        QueryCounts {
            neighbour_queries: self.neighbour_queries.load(Ordering::Relaxed),
            degree_queries: self.degree_queries.load(Ordering::Relaxed),
            vertex_samples: self.vertex_samples.load(Ordering::Relaxed),
        }
    }

    /// Resets all counters to zero. Only call at explicit session boundaries.
    pub fn reset(&self) {
        self.neighbour_queries.store(0, Ordering::Relaxed);
        self.degree_queries.store(0, Ordering::Relaxed);
        self.vertex_samples.store(0, Ordering::Relaxed);
    }
}

impl QueryCounts {
    /// Counts accumulated since the earlier snapshot `before`.
    pub fn since(self, before: QueryCounts) -> QueryCounts {
        QueryCounts {
            neighbour_queries: self.neighbour_queries - before.neighbour_queries,
            degree_queries: self.degree_queries - before.degree_queries,
            vertex_samples: self.vertex_samples - before.vertex_samples,
        }
    }
}

/// A set of undirected edges stored as normalized `(min, max)` pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EdgeSet(BTreeSet<(VertexId, VertexId)>);

impl EdgeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, u: VertexId, v: VertexId) {
        debug_assert_ne!(u, v, "edge set holds no self-loops");
        let e = if u < v { (u, v) } else { (v, u) };
        self.0.insert(e);
    }

    pub fn contains(&self, u: VertexId, v: VertexId) -> bool {
        let e = if u < v { (u, v) } else { (v, u) };
        self.0.contains(&e)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.0.iter().copied()
    }
}

impl FromIterator<(VertexId, VertexId)> for EdgeSet {
    fn from_iter<T: IntoIterator<Item = (VertexId, VertexId)>>(iter: T) -> Self {
        let mut s = EdgeSet::new();
        for (u, v) in iter {
            s.insert(u, v);
        }
        s
    }
}

/// Immutable undirected graph with sorted adjacency lists and a declared
/// degree bound `d_max` (actual degrees may be smaller).
#[derive(Debug)]
pub struct Graph {
    d_max: usize,
    edge_count: usize,
    adj: Vec<Vec<VertexId>>,
    counter: QueryCounter,
}

impl Graph {
    /// Validates and takes ownership of adjacency lists. Lists are sorted;
    /// symmetry, self-loops, duplicates and the degree bound are checked.
    pub fn from_adjacency(d_max: usize, mut adj: Vec<Vec<VertexId>>) -> Result<Self, GraphError> {
        let n = adj.len();
        for list in &mut adj {
            list.sort_unstable();
        }
        let mut edge_count = 0usize;
        for (i, list) in adj.iter().enumerate() {
            let u = VertexId::new(i);
            if list.len() > d_max {
                return Err(GraphError::DegreeBound { v: u, degree: list.len(), d_max });
            }
            for (pos, &v) in list.iter().enumerate() {
                if v.index() >= n {
                    return Err(GraphError::OutOfRange { v: v.index(), n });
                }
                if v == u {
                    return Err(GraphError::SelfLoop(u));
                }
                if pos > 0 && list[pos - 1] == v {
                    return Err(GraphError::DuplicateNeighbour { u, v });
                }
                if adj[v.index()].binary_search(&u).is_err() {
                    return Err(GraphError::Symmetry { u, v });
                }
                if u < v {
                    edge_count += 1;
                }
            }
        }
        Ok(Graph { d_max, edge_count, adj, counter: QueryCounter::default() })
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn degree_bound(&self) -> usize {
        self.d_max
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> {
        (0..self.adj.len()).map(VertexId::new)
    }

    /// Metered neighbour-list access: one `neighbour_queries` tick per call.
    ///
    /// Panics if `v` is out of range.
    #[inline]
    pub fn neighbours(&self, v: VertexId) -> &[VertexId] {
        self.counter.bump_neighbour();
        &self.adj[v.index()]
    }

    /// Metered degree access.
    #[inline]
    pub fn degree(&self, v: VertexId) -> usize {
        self.counter.bump_degree();
        self.adj[v.index()].len()
    }

    /// Unmetered adjacency access, for verification-side code only. The
    /// sublinear path must go through [`Graph::neighbours`].
    #[inline]
    pub fn adjacency_unmetered(&self, v: VertexId) -> &[VertexId] {
        &self.adj[v.index()]
    }

    /// Unmetered iterator over all edges as normalized pairs, `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.adj.iter().enumerate().flat_map(|(i, list)| {
            let u = VertexId::new(i);
            list.iter().copied().filter(move |&v| u < v).map(move |v| (u, v))
        })
    }

    /// Uniform vertex draw; deterministic given the generator state.
    pub fn sample_vertex(&self, rng: &mut impl Rng) -> Result<VertexId, GraphError> {
        if self.adj.is_empty() {
            return Err(GraphError::EmptyGraph);
        }
        self.counter.bump_sample();
        Ok(VertexId::new(rng.random_range(0..self.adj.len())))
    }

    /// Vertices at hop distance at most `r` from `v`, sorted by id.
    /// Charges one neighbour query per expanded vertex (distance < r).
    pub fn ball(&self, v: VertexId, r: usize) -> Vec<VertexId> {
        self.ball_with_distances(v, r).into_iter().map(|(u, _)| u).collect()
    }

    /// BFS ball together with hop distances, sorted by vertex id.
    pub fn ball_with_distances(&self, v: VertexId, r: usize) -> Vec<(VertexId, usize)> {
        assert!(v.index() < self.adj.len(), "vertex {v} out of range");
        let mut dist: BTreeMap<VertexId, usize> = BTreeMap::new();
        dist.insert(v, 0);
        let mut queue = VecDeque::from([v]);
        while let Some(u) = queue.pop_front() {
            let du = dist[&u];
            if du == r {
                continue;
            }
            for &w in self.neighbours(u) {
                if !dist.contains_key(&w) {
                    dist.insert(w, du + 1);
                    queue.push_back(w);
                }
            }
        }
        dist.into_iter().collect()
    }

    pub fn counter(&self) -> &QueryCounter {
        &self.counter
    }
}

/// Parses the graph text format: a header `n d_max m`, then one line per
/// vertex `v: u1 u2 ...`. Blank lines and `#` comments are ignored.
/// External labels may be any distinct nonnegative integers; they are
/// mapped to dense ids in ascending label order.
pub fn load_graph(reader: impl BufRead) -> Result<Graph, GraphError> {
    let parse_err = |line: usize, message: &str| GraphError::Parse { line, message: message.to_string() };

    let mut header: Option<(usize, usize, usize)> = None;
    let mut rows: Vec<(usize, usize, Vec<usize>)> = Vec::new(); // (line, label, neighbour labels)
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let text = line.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        if header.is_none() {
            let fields: Vec<&str> = text.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(parse_err(lineno, "header must be `n d_max m`"));
            }
            let nums: Result<Vec<usize>, _> = fields.iter().map(|f| f.parse()).collect();
            let nums = nums.map_err(|_| parse_err(lineno, "header fields must be nonnegative integers"))?;
            header = Some((nums[0], nums[1], nums[2]));
            continue;
        }
        let (label_text, rest) = text
            .split_once(':')
            .ok_or_else(|| parse_err(lineno, "vertex line must be `v: u1 u2 ...`"))?;
        let label: usize = label_text
            .trim()
            .parse()
            .map_err(|_| parse_err(lineno, "vertex label must be a nonnegative integer"))?;
        let nbrs: Result<Vec<usize>, _> = rest.split_whitespace().map(|f| f.parse()).collect();
        let nbrs = nbrs.map_err(|_| parse_err(lineno, "neighbour labels must be nonnegative integers"))?;
        rows.push((lineno, label, nbrs));
    }
    let (n, d_max, m) = header.ok_or_else(|| parse_err(0, "missing header"))?;
    if rows.len() != n {
        return Err(parse_err(0, &format!("expected {n} vertex lines, found {}", rows.len())));
    }

    let mut labels: Vec<usize> = rows.iter().map(|&(_, label, _)| label).collect();
    labels.sort_unstable();
    labels.dedup();
    if labels.len() != n {
        return Err(parse_err(0, "duplicate vertex labels"));
    }
    let dense: BTreeMap<usize, VertexId> =
        labels.iter().enumerate().map(|(i, &l)| (l, VertexId::new(i))).collect();

    let mut adj = vec![Vec::new(); n];
    for (lineno, label, nbrs) in rows {
        let u = dense[&label];
        let mut list = Vec::with_capacity(nbrs.len());
        for nbr in nbrs {
            let v = *dense
                .get(&nbr)
                .ok_or_else(|| parse_err(lineno, &format!("neighbour label {nbr} is not a declared vertex")))?;
            list.push(v);
        }
        adj[u.index()] = list;
    }
    let g = Graph::from_adjacency(d_max, adj)?;
    if g.edge_count() != m {
        return Err(parse_err(
            0,
            &format!("header declares {m} edges but adjacency encodes {}", g.edge_count()),
        ));
    }
    Ok(g)
}

pub fn load_graph_file(path: impl AsRef<Path>) -> Result<Graph, GraphError> {
    let file = std::fs::File::open(path)?;
    load_graph(std::io::BufReader::new(file))
}

/// Writes the canonical text form: dense labels, neighbours ascending.
pub fn save_graph(g: &Graph, mut writer: impl Write) -> std::io::Result<()> {
    writeln!(writer, "{} {} {}", g.vertex_count(), g.degree_bound(), g.edge_count())?;
    for v in g.vertices() {
        write!(writer, "{v}:")?;
        for &u in g.adjacency_unmetered(v) {
            write!(writer, " {u}")?;
        }
        writeln!(writer)?;
    }
    Ok(())
}
