//! Time-varying communication topologies and their mixing matrices.
//!
//! A run regenerates a connected undirected graph every epoch and mixes agent
//! iterates through a doubly stochastic weight matrix built from it. The
//! Metropolis–Hastings construction is used because it is doubly stochastic by
//! construction on undirected graphs, has a positive diagonal, and keeps every
//! positive entry at or above `1/m`.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationReport};
use crate::rng;
use crate::Matrix;

/// Which family of per-epoch graphs to draw from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologyKind {
    Complete,
    Ring,
    /// A uniformly random spanning tree plus each remaining edge
    /// independently with probability `extra_edge_prob`.
    RandomConnected { extra_edge_prob: f64 },
}

impl TopologyKind {
    pub fn name(&self) -> &'static str {
        match self {
            TopologyKind::Complete => "complete",
            TopologyKind::Ring => "ring",
            TopologyKind::RandomConnected { .. } => "random_connected",
        }
    }
}

/// An undirected graph on nodes `0..m` serving one iteration epoch.
///
/// Edges are stored as canonical `(low, high)` pairs with no self-loops;
/// every node is implicitly its own neighbor for averaging purposes.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    m: usize,
    epoch: u64,
    edges: BTreeSet<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Topology {
    /// Build a topology from explicit edges. Rejects self-loops and
    /// out-of-range endpoints; connectivity is not required here (validation
    /// and generation enforce it where the algorithm needs it).
    pub fn new(m: usize, epoch: u64, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument(
                "node count m must be at least 1".into(),
            ));
        }
        let mut canonical = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidArgument(format!(
                    "self-loop at node {a} is not allowed; self inclusion is implicit"
                )));
            }
            if a >= m || b >= m {
                return Err(Error::InvalidArgument(format!(
                    "edge ({a},{b}) out of range for m={m}"
                )));
            }
            canonical.insert((a.min(b), a.max(b)));
        }
        let mut adjacency = vec![Vec::new(); m];
        for &(a, b) in &canonical {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self {
            m,
            epoch,
            edges: canonical,
            adjacency,
        })
    }

    /// Deterministically generate the epoch-`epoch` topology of a family.
    /// Identical `(kind, m, epoch, seed)` always yields the identical graph.
    pub fn generate(kind: &TopologyKind, m: usize, epoch: u64, seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument(
                "node count m must be at least 1".into(),
            ));
        }
        let edges: Vec<(usize, usize)> = match kind {
            TopologyKind::Complete => (0..m)
                .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
                .collect(),
            TopologyKind::Ring => {
                if m == 1 {
                    Vec::new()
                } else if m == 2 {
                    vec![(0, 1)]
                } else {
                    (0..m).map(|i| (i, (i + 1) % m)).collect()
                }
            }
            TopologyKind::RandomConnected { extra_edge_prob } => {
                if !(0.0..=1.0).contains(extra_edge_prob) {
                    return Err(Error::InvalidArgument(format!(
                        "extra_edge_prob must lie in [0,1], got {extra_edge_prob}"
                    )));
                }
                let mut rng = rng::stream(seed, &[rng::STREAM_TOPOLOGY, epoch]);
                let mut order: Vec<usize> = (0..m).collect();
                order.shuffle(&mut rng);
                let mut edges = Vec::new();
                // Random spanning tree: attach each node to a uniformly
                // chosen earlier node, so connectivity holds by construction.
                for idx in 1..m {
                    let parent = order[rng.random_range(0..idx)];
                    edges.push((order[idx], parent));
                }
                let tree: BTreeSet<(usize, usize)> = edges
                    .iter()
                    .map(|&(a, b)| (a.min(b), a.max(b)))
                    .collect();
                for i in 0..m {
                    for j in (i + 1)..m {
                        if !tree.contains(&(i, j)) && rng.random_range(0.0..1.0) < *extra_edge_prob
                        {
                            edges.push((i, j));
                        }
                    }
                }
                edges
            }
        };
        let topo = Self::new(m, epoch, edges)?;
        debug_assert!(topo.is_connected());
        Ok(topo)
    }

    pub fn node_count(&self) -> usize {
        self.m
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    /// Neighbors of `i`, excluding `i` itself, in ascending order.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a != b && self.edges.contains(&(a.min(b), a.max(b)))
    }

    /// True iff every node is reachable from node 0.
    pub fn is_connected(&self) -> bool {
        if self.m == 1 {
            return true;
        }
        let mut seen = vec![false; self.m];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.m
    }

    /// BFS spanning tree rooted at node 0, neighbors visited in ascending
    /// index order; returns `m - 1` canonical edges in discovery order.
    pub fn spanning_tree(&self) -> Result<Vec<(usize, usize)>> {
        if !self.is_connected() {
            return Err(Error::Precondition(
                "spanning tree requires a connected topology".into(),
            ));
        }
        let mut tree = Vec::with_capacity(self.m.saturating_sub(1));
        let mut seen = vec![false; self.m];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    tree.push((u.min(v), u.max(v)));
                    queue.push_back(v);
                }
            }
        }
        Ok(tree)
    }

    /// Metropolis–Hastings weights: `1/(1 + max(deg_i, deg_j))` on edges,
    /// diagonal absorbing the remainder. Doubly stochastic with every
    /// positive entry at least `1/m`.
    pub fn metropolis_weights(&self) -> Result<WeightMatrix> {
        if !self.is_connected() {
            return Err(Error::Precondition(
                "mixing weights require a connected topology".into(),
            ));
        }
        let m = self.m;
        let mut entries = Matrix::zeros(m, m);
        for &(i, j) in &self.edges {
            let w = 1.0 / (1.0 + self.degree(i).max(self.degree(j)) as f64);
            entries[(i, j)] = w;
            entries[(j, i)] = w;
        }
        for i in 0..m {
            let off: f64 = (0..m).filter(|&j| j != i).map(|j| entries[(i, j)]).sum();
            entries[(i, i)] = 1.0 - off;
        }
        let eta = entries.iter().copied().filter(|&w| w > 0.0).fold(f64::INFINITY, f64::min);
        Ok(WeightMatrix { entries, eta })
    }
}

/// A doubly stochastic mixing matrix tied to one topology epoch.
///
/// `eta` is the computed floor of the positive entries; it is derived from
/// the realized matrix rather than configured.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    entries: Matrix,
    eta: f64,
}

/// Absolute tolerance on row and column sums.
pub const STOCHASTICITY_TOL: f64 = 1e-12;

impl WeightMatrix {
    pub fn from_entries(entries: Matrix, eta: f64) -> Self {
        Self { entries, eta }
    }

    pub fn node_count(&self) -> usize {
        self.entries.nrows()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Row `i` as a weight vector.
    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.entries.ncols()).map(|j| self.entries[(i, j)]).collect()
    }

    /// Check every structural invariant against the topology the matrix was
    /// built for. The report is empty iff the matrix is valid.
    pub fn validate(&self, topology: &Topology) -> Result<ValidationReport> {
        let m = self.entries.nrows();
        if self.entries.ncols() != m {
            return Err(Error::DimensionMismatch {
                context: "weight matrix",
                expected: m,
                actual: self.entries.ncols(),
            });
        }
        if topology.node_count() != m {
            return Err(Error::DimensionMismatch {
                context: "weight matrix vs topology",
                expected: topology.node_count(),
                actual: m,
            });
        }
        let mut report = ValidationReport::new();
        for i in 0..m {
            for j in 0..m {
                if self.entries[(i, j)] < 0.0 {
                    report.push(
                        "negative-entry",
                        format!("entry ({i},{j}) = {} is negative", self.entries[(i, j)]),
                    );
                }
            }
        }
        for i in 0..m {
            let sum: f64 = (0..m).map(|j| self.entries[(i, j)]).sum();
            if (sum - 1.0).abs() > STOCHASTICITY_TOL {
                report.push("row-sum", format!("row {i} sums to {sum}, expected 1"));
            }
        }
        for j in 0..m {
            let sum: f64 = (0..m).map(|i| self.entries[(i, j)]).sum();
            if (sum - 1.0).abs() > STOCHASTICITY_TOL {
                report.push("column-sum", format!("column {j} sums to {sum}, expected 1"));
            }
        }
        if !(self.eta > 0.0) {
            report.push("eta-floor", format!("eta = {} must be positive", self.eta));
        }
        for i in 0..m {
            if self.entries[(i, i)] <= 0.0 {
                report.push(
                    "diagonal",
                    format!("diagonal entry ({i},{i}) = {} must be positive", self.entries[(i, i)]),
                );
            }
        }
        for i in 0..m {
            for j in 0..m {
                let w = self.entries[(i, j)];
                if w > 0.0 && w < self.eta {
                    report.push(
                        "eta-floor",
                        format!("positive entry ({i},{j}) = {w} falls below eta = {}", self.eta),
                    );
                }
                let neighbor = i == j || topology.has_edge(i, j);
                if w > 0.0 && !neighbor {
                    report.push(
                        "sparsity",
                        format!("entry ({i},{j}) positive but {j} is not a neighbor of {i}"),
                    );
                }
                if w <= 0.0 && neighbor {
                    report.push(
                        "sparsity",
                        format!("entry ({i},{j}) vanishes but {j} is a neighbor of {i}"),
                    );
                }
            }
        }
        Ok(report)
    }
}
