//! Two-layer directed communication architecture.
//!
//! Agents are numbered contiguously by cluster. The global graph connects all
//! agents regardless of membership and drives the row-stochastic mixing of
//! decision estimates; each cluster graph connects only the members of one
//! cluster and drives the column-stochastic mixing of gradient trackers.

mod digraph;
mod weights;

use std::fmt;
use std::ops::Range;

use thiserror::Error;

pub use digraph::{is_strongly_connected, Digraph};
pub use weights::{
    column_stochastic_weights, left_perron, right_perron, row_stochastic_weights, WeightPair,
    WEIGHT_TOL,
};

/// Which graph of a [`ClusterTopology`] an error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphRole {
    Global,
    Cluster(usize),
    Unnamed,
}

impl fmt::Display for GraphRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphRole::Global => write!(f, "global graph"),
            GraphRole::Cluster(h) => write!(f, "cluster {h} graph"),
            GraphRole::Unnamed => write!(f, "graph"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("graph must have at least one node")]
    EmptyGraph,
    #[error("edge ({from}, {to}) out of range for {node_count} nodes")]
    NodeOutOfRange {
        from: usize,
        to: usize,
        node_count: usize,
    },
    #[error("explicit self-loop on node {0}; self-loops are implicit")]
    SelfLoop(usize),
    #[error("duplicate edge ({from}, {to})")]
    DuplicateEdge { from: usize, to: usize },
    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("{0} is not strongly connected")]
    NotStronglyConnected(GraphRole),
    #[error("power iteration for the Perron vector did not converge")]
    PerronNotConverged,
    #[error("invalid weights for {role}: {reason}")]
    InvalidWeights { role: GraphRole, reason: String },
    #[error("edge list line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl TopologyError {
    pub(crate) fn with_role(self, role: GraphRole) -> Self {
        match self {
            TopologyError::NotStronglyConnected(_) => TopologyError::NotStronglyConnected(role),
            other => other,
        }
    }
}

/// Partition of the decision vector `x ∈ R^q` into per-cluster blocks
/// `x^h ∈ R^{q_h}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionLayout {
    dims: Vec<usize>,
    offsets: Vec<usize>,
}

impl DecisionLayout {
    pub fn new(dims: Vec<usize>) -> Result<Self, TopologyError> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(TopologyError::EmptyGraph);
        }
        let mut offsets = Vec::with_capacity(dims.len() + 1);
        offsets.push(0);
        for d in &dims {
            offsets.push(offsets.last().unwrap() + d);
        }
        Ok(Self { dims, offsets })
    }

    pub fn cluster_count(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self, h: usize) -> usize {
        self.dims[h]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn block(&self, h: usize) -> Range<usize> {
        self.offsets[h]..self.offsets[h + 1]
    }
}

/// Global graph, per-cluster graphs and decision layout of a multi-cluster
/// system. Construction validates that every graph is strongly connected.
#[derive(Debug, Clone)]
pub struct ClusterTopology {
    global: Digraph,
    clusters: Vec<Digraph>,
    agent_offsets: Vec<usize>,
    cluster_of: Vec<usize>,
    layout: DecisionLayout,
}

impl ClusterTopology {
    /// `decision_dims[h]` is `q_h`. Agents of cluster `h` are the global
    /// indices `agent_range(h)`.
    pub fn new(
        global: Digraph,
        clusters: Vec<Digraph>,
        decision_dims: Vec<usize>,
    ) -> Result<Self, TopologyError> {
        if clusters.len() != decision_dims.len() {
            return Err(TopologyError::SizeMismatch {
                expected: clusters.len(),
                found: decision_dims.len(),
            });
        }
        let layout = DecisionLayout::new(decision_dims)?;
        let mut agent_offsets = vec![0];
        let mut cluster_of = Vec::new();
        for (h, g) in clusters.iter().enumerate() {
            agent_offsets.push(agent_offsets.last().unwrap() + g.node_count());
            cluster_of.extend(std::iter::repeat_n(h, g.node_count()));
        }
        let n = *agent_offsets.last().unwrap();
        if global.node_count() != n {
            return Err(TopologyError::SizeMismatch {
                expected: n,
                found: global.node_count(),
            });
        }
        if !is_strongly_connected(&global) {
            return Err(TopologyError::NotStronglyConnected(GraphRole::Global));
        }
        for (h, g) in clusters.iter().enumerate() {
            if !is_strongly_connected(g) {
                return Err(TopologyError::NotStronglyConnected(GraphRole::Cluster(h)));
            }
        }
        Ok(Self {
            global,
            clusters,
            agent_offsets,
            cluster_of,
            layout,
        })
    }

    /// Topology where each agent owns one scalar decision (`q_h = n_h`).
    pub fn with_scalar_decisions(
        global: Digraph,
        clusters: Vec<Digraph>,
    ) -> Result<Self, TopologyError> {
        let dims = clusters.iter().map(Digraph::node_count).collect();
        Self::new(global, clusters, dims)
    }

    pub fn global(&self) -> &Digraph {
        &self.global
    }

    pub fn cluster_graphs(&self) -> &[Digraph] {
        &self.clusters
    }

    pub fn layout(&self) -> &DecisionLayout {
        &self.layout
    }

    pub fn agent_count(&self) -> usize {
        self.cluster_of.len()
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn cluster_size(&self, h: usize) -> usize {
        self.clusters[h].node_count()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(Digraph::node_count).collect()
    }

    pub fn agent_range(&self, h: usize) -> Range<usize> {
        self.agent_offsets[h]..self.agent_offsets[h + 1]
    }

    pub fn cluster_of(&self, agent: usize) -> usize {
        self.cluster_of[agent]
    }
}

/// Intra-cluster edges of every cluster graph, embedded into the global
/// agent numbering.
pub fn intra_cluster_edges(clusters: &[Digraph]) -> Result<Digraph, TopologyError> {
    let n: usize = clusters.iter().map(Digraph::node_count).sum();
    let mut out = Digraph::new(n, [])?;
    let mut offset = 0;
    for g in clusters {
        out = out.union(&g.embed(offset, n)?)?;
        offset += g.node_count();
    }
    Ok(out)
}

/// Global graph made of all intra-cluster edges plus `inter`, an arbitrary
/// graph over all `n` agents.
pub fn dense_global(clusters: &[Digraph], inter: &Digraph) -> Result<Digraph, TopologyError> {
    intra_cluster_edges(clusters)?.union(inter)
}

/// Leader-follower global graph: all intra-cluster edges plus `leaders`, a
/// graph over the `H` cluster leaders. The leader of a cluster is its first
/// agent, so it is the only member carrying inter-cluster edges.
pub fn leader_follower_global(
    clusters: &[Digraph],
    leaders: &Digraph,
) -> Result<Digraph, TopologyError> {
    if leaders.node_count() != clusters.len() {
        return Err(TopologyError::SizeMismatch {
            expected: clusters.len(),
            found: leaders.node_count(),
        });
    }
    let intra = intra_cluster_edges(clusters)?;
    let mut first = vec![0];
    for g in clusters {
        first.push(first.last().unwrap() + g.node_count());
    }
    let lifted = Digraph::new(
        intra.node_count(),
        leaders.edges().map(|(a, b)| (first[a], first[b])),
    )?;
    intra.union(&lifted)
}
