//! Deterministic generators for the hyperfinite benchmark families, plus
//! the per-family part-size cap `rho(phi)` they are hyperfinite with.

use std::fmt;
use std::str::FromStr;

use crate::graph::{Graph, GraphError, VertexId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Path,
    Cycle,
    Grid,
    /// Complete graph; only valid while `n - 1` fits under the degree bound.
    CompleteCapped,
    DisjointTriangles,
    BinaryTree,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Family::Path => "path",
            Family::Cycle => "cycle",
            Family::Grid => "grid",
            Family::CompleteCapped => "complete",
            Family::DisjointTriangles => "triangles",
            Family::BinaryTree => "binary_tree",
        };
        f.write_str(name)
    }
}

impl FromStr for Family {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "path" => Ok(Family::Path),
            "cycle" => Ok(Family::Cycle),
            "grid" => Ok(Family::Grid),
            "complete" | "complete_graph_capped" => Ok(Family::CompleteCapped),
            "triangles" | "disjoint_triangles" => Ok(Family::DisjointTriangles),
            "binary_tree" | "binary-tree" => Ok(Family::BinaryTree),
            other => Err(GraphError::InvalidParams(format!("unknown family `{other}`"))),
        }
    }
}

fn build(d_max: usize, n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Graph, GraphError> {
    let mut adj: Vec<Vec<VertexId>> = vec![Vec::new(); n];
    for (u, v) in edges {
        adj[u].push(VertexId::new(v));
        adj[v].push(VertexId::new(u));
    }
    Graph::from_adjacency(d_max, adj)
}

pub fn path(n: usize, d_max: usize) -> Result<Graph, GraphError> {
    if n == 0 {
        return Err(GraphError::InvalidParams("path needs n >= 1".into()));
    }
    build(d_max, n, (1..n).map(|v| (v - 1, v)))
}

pub fn cycle(n: usize, d_max: usize) -> Result<Graph, GraphError> {
    if n < 3 {
        return Err(GraphError::InvalidParams("cycle needs n >= 3".into()));
    }
    build(d_max, n, (0..n).map(|v| (v, (v + 1) % n)))
}

/// The w x h 4-neighbour lattice, row-major vertex ids.
pub fn grid(w: usize, h: usize, d_max: usize) -> Result<Graph, GraphError> {
    if w == 0 || h == 0 {
        return Err(GraphError::InvalidParams("grid needs w >= 1 and h >= 1".into()));
    }
    let mut edges = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = y * w + x;
            if x + 1 < w {
                edges.push((v, v + 1));
            }
            if y + 1 < h {
                edges.push((v, v + w));
            }
        }
    }
    build(d_max, w * h, edges)
}

pub fn complete(n: usize, d_max: usize) -> Result<Graph, GraphError> {
    if n == 0 {
        return Err(GraphError::InvalidParams("complete needs n >= 1".into()));
    }
    if n > 0 && n - 1 > d_max {
        return Err(GraphError::InvalidParams(format!(
            "complete graph on {n} vertices has degree {} > d_max {d_max}",
            n - 1
        )));
    }
    build(d_max, n, (0..n).flat_map(|u| ((u + 1)..n).map(move |v| (u, v))))
}

/// `m` disjoint 3-cycles, 3m vertices.
pub fn disjoint_triangles(m: usize, d_max: usize) -> Result<Graph, GraphError> {
    if m == 0 {
        return Err(GraphError::InvalidParams("triangles needs m >= 1".into()));
    }
    let edges = (0..m).flat_map(|i| {
        let b = 3 * i;
        [(b, b + 1), (b + 1, b + 2), (b, b + 2)]
    });
    build(d_max, 3 * m, edges)
}

/// Complete-as-possible binary tree on `n` vertices, heap numbering.
pub fn binary_tree(n: usize, d_max: usize) -> Result<Graph, GraphError> {
    if n == 0 {
        return Err(GraphError::InvalidParams("binary_tree needs n >= 1".into()));
    }
    build(d_max, n, (1..n).map(|v| ((v - 1) / 2, v)))
}

/// Part-size cap making the family `(phi, rho)`-hyperfinite.
///
/// cycle/path: cutting every `ceil(1/phi)`-th edge removes at most `phi n`
/// edges and leaves arcs of that length. grid: `ceil(2/phi)`-sided square
/// blocks. triangles: components are already size 3 at zero cut.
pub fn default_rho(family: Family, phi: f64) -> Result<usize, GraphError> {
    if !(phi > 0.0) {
        return Err(GraphError::InvalidParams("phi must be positive".into()));
    }
    match family {
        Family::Path | Family::Cycle => Ok((1.0 / phi).ceil() as usize),
        Family::Grid => Ok((4.0 / (phi * phi)).ceil() as usize),
        Family::DisjointTriangles => Ok(3),
        Family::BinaryTree => Ok((2.0 / phi).ceil() as usize),
        Family::CompleteCapped => Err(GraphError::NoDefaultRho(family.to_string())),
    }
}
