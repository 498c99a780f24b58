//! Nash equilibrium seeking for multi-cluster games by distributed gradient
//! tracking over directed graphs.
//!
//! Agents are partitioned into clusters. Agents of one cluster cooperate to
//! minimize the sum of their private costs while clusters compete in a
//! noncooperative game. Every agent keeps an estimate of the full decision
//! vector, mixed over a global digraph with row-stochastic weights, and a
//! tracker of its cluster's average gradient, mixed over the cluster digraph
//! with column-stochastic weights.
//!
//! The [`certificate`] module assembles the 3×3 bound matrix whose spectral
//! radius certifies a linear convergence rate for a given step size.

pub mod certificate;
pub mod experiment;
pub mod game;
pub mod norms;
pub mod oracle;
pub mod topology;
pub mod solver;
