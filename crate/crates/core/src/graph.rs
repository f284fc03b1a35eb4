//! Directed V2V communication graphs.
//!
//! An edge `(u, v)` means `v` can receive from `u`. `out_neighbors(v)` is the
//! set of vehicles `v` can send shares to and `in_neighbors(v)` those it
//! receives from.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::VehicleId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("self-loop on vehicle {0}")]
    SelfLoop(VehicleId),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(VehicleId, VehicleId),
    #[error("edge {0} -> {1} references an unknown vehicle")]
    UnknownEndpoint(VehicleId, VehicleId),
    #[error("unknown vehicle {0}")]
    UnknownVertex(VehicleId),
    #[error("duplicate vehicle {0}")]
    DuplicateVertex(VehicleId),
    #[error("ring topology needs at least 2 vehicles, got {0}")]
    RingTooSmall(usize),
    #[error("switching window must be at least 1")]
    ZeroWindow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CommGraph {
    vertices: BTreeSet<VehicleId>,
    edges: BTreeSet<(VehicleId, VehicleId)>,
    #[serde(skip)]
    out: BTreeMap<VehicleId, BTreeSet<VehicleId>>,
    #[serde(skip)]
    inc: BTreeMap<VehicleId, BTreeSet<VehicleId>>,
}

impl CommGraph {
    pub fn new(
        vertices: impl IntoIterator<Item = VehicleId>,
        edges: impl IntoIterator<Item = (VehicleId, VehicleId)>,
    ) -> Result<Self, GraphError> {
        let mut vs = BTreeSet::new();
        for v in vertices {
            if !vs.insert(v) {
                return Err(GraphError::DuplicateVertex(v));
            }
        }
        let mut graph = CommGraph {
            out: vs.iter().map(|&v| (v, BTreeSet::new())).collect(),
            inc: vs.iter().map(|&v| (v, BTreeSet::new())).collect(),
            vertices: vs,
            edges: BTreeSet::new(),
        };
        for (u, v) in edges {
            graph.insert_edge(u, v)?;
        }
        Ok(graph)
    }

    fn insert_edge(&mut self, u: VehicleId, v: VehicleId) -> Result<(), GraphError> {
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        if !self.vertices.contains(&u) || !self.vertices.contains(&v) {
            return Err(GraphError::UnknownEndpoint(u, v));
        }
        if !self.edges.insert((u, v)) {
            return Err(GraphError::DuplicateEdge(u, v));
        }
        self.out.entry(u).or_default().insert(v);
        self.inc.entry(v).or_default().insert(u);
        Ok(())
    }

    pub fn vertices(&self) -> impl ExactSizeIterator<Item = VehicleId> + '_ {
        self.vertices.iter().copied()
    }

    pub fn edges(&self) -> impl ExactSizeIterator<Item = (VehicleId, VehicleId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, v: VehicleId) -> bool {
        self.vertices.contains(&v)
    }

    pub fn has_edge(&self, u: VehicleId, v: VehicleId) -> bool {
        self.edges.contains(&(u, v))
    }

    /// Position of `v` in ascending id order; used as the matrix index.
    pub fn index_of(&self, v: VehicleId) -> Option<usize> {
        self.vertices.iter().position(|&x| x == v)
    }

    pub fn outdegree(&self, v: VehicleId) -> Result<usize, GraphError> {
        Ok(self.out_neighbors(v)?.len())
    }

    pub fn out_neighbors(&self, v: VehicleId) -> Result<&BTreeSet<VehicleId>, GraphError> {
        self.out.get(&v).ok_or(GraphError::UnknownVertex(v))
    }

    pub fn in_neighbors(&self, v: VehicleId) -> Result<&BTreeSet<VehicleId>, GraphError> {
        self.inc.get(&v).ok_or(GraphError::UnknownVertex(v))
    }

    /// A copy with one extra vertex and the given extra edges.
    pub fn extended(
        &self,
        vertex: Option<VehicleId>,
        edges: impl IntoIterator<Item = (VehicleId, VehicleId)>,
    ) -> Result<Self, GraphError> {
        let mut g = self.clone();
        if let Some(v) = vertex {
            if !g.vertices.insert(v) {
                return Err(GraphError::DuplicateVertex(v));
            }
            g.out.insert(v, BTreeSet::new());
            g.inc.insert(v, BTreeSet::new());
        }
        for (u, v) in edges {
            g.insert_edge(u, v)?;
        }
        Ok(g)
    }

    /// Subgraph induced by the vertices in `keep`.
    pub fn induced(&self, keep: &BTreeSet<VehicleId>) -> Self {
        let vertices: Vec<_> = self.vertices().filter(|v| keep.contains(v)).collect();
        let edges: Vec<_> = self
            .edges()
            .filter(|(u, v)| keep.contains(u) && keep.contains(v))
            .collect();
        CommGraph::new(vertices, edges).expect("subgraph of a valid graph is valid")
    }

    /// Renames every vertex through `rename`, which must be injective.
    pub fn relabel(&self, rename: impl Fn(VehicleId) -> VehicleId) -> Result<Self, GraphError> {
        CommGraph::new(
            self.vertices().map(&rename),
            self.edges().map(|(u, v)| (rename(u), rename(v))),
        )
    }

    fn union(&self, other: &CommGraph) -> CommGraph {
        let mut g = self.clone();
        for v in other.vertices() {
            if g.vertices.insert(v) {
                g.out.insert(v, BTreeSet::new());
                g.inc.insert(v, BTreeSet::new());
            }
        }
        for (u, v) in other.edges() {
            if !g.has_edge(u, v) {
                g.insert_edge(u, v).expect("edge of a valid graph");
            }
        }
        g
    }

    fn reachable_from(&self, start: VehicleId, forward: bool) -> BTreeSet<VehicleId> {
        let adj = if forward { &self.out } else { &self.inc };
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &w in &adj[&u] {
                if seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        seen
    }
}

pub fn outdegree(g: &CommGraph, v: VehicleId) -> Result<usize, GraphError> {
    g.outdegree(v)
}

/// Forward and backward reachability from one vertex must both cover the graph.
pub fn is_strongly_connected(g: &CommGraph) -> bool {
    let Some(start) = g.vertices().next() else {
        return true;
    };
    let n = g.vertex_count();
    g.reachable_from(start, true).len() == n && g.reachable_from(start, false).len() == n
}

/// Vehicles with no out-neighbor. Such a vehicle cannot split its table
/// without revealing it; an empty result means every vehicle can share.
pub fn validate_privacy_precondition(g: &CommGraph) -> Vec<VehicleId> {
    g.vertices().filter(|&v| g.out[&v].is_empty()).collect()
}

/// Ring over vehicles `1..=n`: `i -> i+1`, and `n -> 1`.
pub fn ring_topology(n: usize) -> Result<CommGraph, GraphError> {
    let ids: Vec<VehicleId> = (1..=n as u32).map(VehicleId).collect();
    ring_over(&ids)
}

/// Ring following the given order.
pub fn ring_over(ids: &[VehicleId]) -> Result<CommGraph, GraphError> {
    let n = ids.len();
    if n < 2 {
        return Err(GraphError::RingTooSmall(n));
    }
    let edges = (0..n).map(|i| (ids[i], ids[(i + 1) % n]));
    CommGraph::new(ids.iter().copied(), edges)
}

/// Time-varying topology: `graphs[k]` is the graph in round `k`.
#[derive(Debug, Clone, Serialize)]
pub struct GraphSequence {
    graphs: Vec<CommGraph>,
    seed: u64,
    window: usize,
}

impl GraphSequence {
    /// The same graph in every round.
    pub fn constant(g: CommGraph) -> Self {
        GraphSequence {
            graphs: vec![g],
            seed: 0,
            window: 1,
        }
    }

    pub fn from_graphs(graphs: Vec<CommGraph>, seed: u64, window: usize) -> Self {
        GraphSequence {
            graphs,
            seed,
            window,
        }
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn graphs(&self) -> &[CommGraph] {
        &self.graphs
    }

    /// Graph for round `k`; the sequence repeats cyclically past its end.
    pub fn at(&self, k: usize) -> &CommGraph {
        &self.graphs[k % self.graphs.len()]
    }

    /// True when the union of every `window` consecutive graphs (or of all of
    /// them, if fewer) is strongly connected.
    pub fn windows_strongly_connected(&self) -> bool {
        if self.graphs.is_empty() {
            return true;
        }
        let w = self.window.min(self.graphs.len());
        self.graphs.windows(w).all(|chunk| {
            let union = chunk[1..]
                .iter()
                .fold(chunk[0].clone(), |acc, g| acc.union(g));
            is_strongly_connected(&union)
        })
    }
}

const RING_EDGE_DROP: f64 = 0.25;
const MAX_REGENERATE: usize = 64;

fn random_round_graph(n: usize, rng: &mut ChaCha8Rng, allow_drops: bool) -> CommGraph {
    let mut order: Vec<VehicleId> = (1..=n as u32).map(VehicleId).collect();
    order.shuffle(rng);
    let mut edges = BTreeSet::new();
    for i in 0..n {
        let edge = (order[i], order[(i + 1) % n]);
        if !(allow_drops && n >= 3 && rng.gen_bool(RING_EDGE_DROP)) {
            edges.insert(edge);
        }
    }
    let extra = 1.0 / n as f64;
    for u in 1..=n as u32 {
        for v in 1..=n as u32 {
            if u != v && rng.gen_bool(extra) {
                edges.insert((VehicleId(u), VehicleId(v)));
            }
        }
    }
    CommGraph::new(order, edges).expect("generated edges are valid")
}

/// Switching topology over vehicles `1..=n`.
///
/// Each round is a randomly ordered ring with some ring edges dropped and a
/// few random extra edges. A round is regenerated whenever the window ending
/// at it would not be strongly connected, falling back to an intact ring.
pub fn generate_switching_sequence(
    n: usize,
    rounds: usize,
    window: usize,
    seed: u64,
) -> Result<GraphSequence, GraphError> {
    if n < 2 {
        return Err(GraphError::RingTooSmall(n));
    }
    if window == 0 {
        return Err(GraphError::ZeroWindow);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut graphs: Vec<CommGraph> = Vec::with_capacity(rounds);
    for k in 0..rounds {
        let checked = k + 1 >= window || k + 1 == rounds;
        let start = (k + 1).saturating_sub(window);
        let prefix = graphs[start..].iter().fold(None::<CommGraph>, |acc, g| {
            Some(match acc {
                Some(a) => a.union(g),
                None => g.clone(),
            })
        });
        let ok = |g: &CommGraph| match &prefix {
            Some(p) => is_strongly_connected(&p.union(g)),
            None => is_strongly_connected(g),
        };
        let mut chosen = None;
        for _ in 0..MAX_REGENERATE {
            let g = random_round_graph(n, &mut rng, true);
            if !checked || ok(&g) {
                chosen = Some(g);
                break;
            }
        }
        graphs.push(chosen.unwrap_or_else(|| random_round_graph(n, &mut rng, false)));
    }
    Ok(GraphSequence {
        graphs,
        seed,
        window,
    })
}

/// Dense row-stochastic matrix, rows and columns in ascending vertex order.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    n: usize,
    data: Vec<f64>,
}

impl StochasticMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "dimension mismatch");
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(p, v)| p * v).sum())
            .collect()
    }
}

/// Equal weight on self and every in-neighbor.
pub fn row_stochastic_from_graph(g: &CommGraph) -> StochasticMatrix {
    let ids: Vec<VehicleId> = g.vertices().collect();
    let n = ids.len();
    let mut data = vec![0.0; n * n];
    for (i, v) in ids.iter().enumerate() {
        let preds = &g.inc[v];
        let w = 1.0 / (1 + preds.len()) as f64;
        data[i * n + i] = w;
        for p in preds {
            let j = ids.binary_search(p).expect("in-neighbor is a vertex");
            data[i * n + j] = w;
        }
    }
    StochasticMatrix { n, data }
}
