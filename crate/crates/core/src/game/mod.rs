//! Multi-cluster game model.
//!
//! Agent `i` of cluster `h` holds a private cost `f_i^h(x)` over the shared
//! decision vector `x ∈ R^q` and can evaluate the gradient of that cost with
//! respect to its own cluster's block `x^h`. The game mapping stacks the
//! cluster-summed block gradients `g^h(x) = Σ_{i∈h} ∇_{x^h} f_i^h(x)`.

mod cournot;
mod quadratic;

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::norms::spectral_norm;
use crate::topology::{DecisionLayout, TopologyError};

pub use cournot::{CournotCoefficients, CournotGame};
pub use quadratic::QuadraticGame;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("agent {agent}: quadratic coefficient a = {a} must be positive")]
    NonPositiveCurvature { agent: usize, a: f64 },
    #[error("price constant must be positive and finite, got {0}")]
    InvalidPrice(f64),
    #[error("game mapping is not strongly monotone (mu = {0})")]
    NotStronglyMonotone(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("agent {0}: cost matrix must be symmetric")]
    NotSymmetric(usize),
    #[error(transparent)]
    Layout(#[from] TopologyError),
}

/// Agent-to-cluster partition together with the decision layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    agent_offsets: Vec<usize>,
    cluster_of: Vec<usize>,
    layout: DecisionLayout,
}

impl Membership {
    pub fn new(cluster_sizes: &[usize], decision_dims: Vec<usize>) -> Result<Self, GameError> {
        if cluster_sizes.len() != decision_dims.len() {
            return Err(GameError::DimensionMismatch {
                expected: cluster_sizes.len(),
                found: decision_dims.len(),
            });
        }
        if cluster_sizes.contains(&0) {
            return Err(GameError::Layout(TopologyError::EmptyGraph));
        }
        let layout = DecisionLayout::new(decision_dims)?;
        let mut agent_offsets = vec![0];
        let mut cluster_of = Vec::new();
        for (h, &n) in cluster_sizes.iter().enumerate() {
            agent_offsets.push(agent_offsets.last().unwrap() + n);
            cluster_of.extend(std::iter::repeat_n(h, n));
        }
        Ok(Self {
            agent_offsets,
            cluster_of,
            layout,
        })
    }

    /// One scalar decision per agent: `q_h = n_h`.
    pub fn scalar(cluster_sizes: &[usize]) -> Result<Self, GameError> {
        Self::new(cluster_sizes, cluster_sizes.to_vec())
    }

    pub fn layout(&self) -> &DecisionLayout {
        &self.layout
    }

    pub fn agent_count(&self) -> usize {
        self.cluster_of.len()
    }

    pub fn cluster_count(&self) -> usize {
        self.agent_offsets.len() - 1
    }

    pub fn cluster_of(&self, agent: usize) -> usize {
        self.cluster_of[agent]
    }

    pub fn agents(&self, h: usize) -> Range<usize> {
        self.agent_offsets[h]..self.agent_offsets[h + 1]
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.agent_offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// A multi-cluster game as seen by the solver: per-agent costs and own-block
/// gradients.
pub trait ClusterGame: Send + Sync {
    fn membership(&self) -> &Membership;

    /// `f_i^h(x)` for the agent with global index `agent`.
    fn cost(&self, agent: usize, x: &DVector<f64>) -> f64;

    /// `∇_{x^h} f_i^h(x)`, a vector of length `q_h` where `h` is the agent's
    /// cluster.
    fn grad_block(&self, agent: usize, x: &DVector<f64>) -> DVector<f64>;

    fn layout(&self) -> &DecisionLayout {
        self.membership().layout()
    }

    fn agent_count(&self) -> usize {
        self.membership().agent_count()
    }

    fn cluster_count(&self) -> usize {
        self.membership().cluster_count()
    }
}

/// A game whose own-block gradients are affine in `x`:
/// `∇_{x^h} f_i^h(x) = J_i x + c_i` with constant `J_i ∈ R^{q_h×q}`.
pub trait AffineGame: ClusterGame {
    fn block_affine(&self, agent: usize) -> (DMatrix<f64>, DVector<f64>);
}

/// `M(x) = Bx + d` for affine games.
#[derive(Debug, Clone)]
pub struct GameMappingLinearForm {
    pub b: DMatrix<f64>,
    pub d: DVector<f64>,
}

impl GameMappingLinearForm {
    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.b * x + &self.d
    }
}

/// Cluster cost `F^h(x) = Σ_{i∈h} f_i^h(x)`.
pub fn cluster_cost<G: ClusterGame + ?Sized>(game: &G, h: usize, x: &DVector<f64>) -> f64 {
    game.membership().agents(h).map(|i| game.cost(i, x)).sum()
}

/// `g^h(x)`, the cluster-summed own-block gradient.
pub fn cluster_gradient<G: ClusterGame + ?Sized>(
    game: &G,
    h: usize,
    x: &DVector<f64>,
) -> DVector<f64> {
    let mut g = DVector::zeros(game.layout().dim(h));
    for i in game.membership().agents(h) {
        g += game.grad_block(i, x);
    }
    g
}

/// The game mapping `M(x) = [g^1(x); …; g^H(x)]`.
pub fn game_mapping<G: ClusterGame + ?Sized>(game: &G, x: &DVector<f64>) -> DVector<f64> {
    let layout = game.layout();
    let mut m = DVector::zeros(layout.total());
    for h in 0..layout.cluster_count() {
        m.rows_mut(layout.offsets()[h], layout.dim(h))
            .copy_from(&cluster_gradient(game, h, x));
    }
    m
}

pub fn linear_form<G: AffineGame + ?Sized>(game: &G) -> GameMappingLinearForm {
    let layout = game.layout();
    let q = layout.total();
    let mut b = DMatrix::zeros(q, q);
    let mut d = DVector::zeros(q);
    for h in 0..layout.cluster_count() {
        let off = layout.offsets()[h];
        let dim = layout.dim(h);
        for i in game.membership().agents(h) {
            let (j, c) = game.block_affine(i);
            let mut rows = b.rows_mut(off, dim);
            rows += &j;
            let mut tail = d.rows_mut(off, dim);
            tail += &c;
        }
    }
    GameMappingLinearForm { b, d }
}

/// Strong monotonicity constant `μ = λ_min((B + Bᵀ)/2)`. Rejects games
/// with `μ ≤ 0`.
pub fn monotonicity_constant<G: AffineGame + ?Sized>(game: &G) -> Result<f64, GameError> {
    let b = linear_form(game).b;
    let sym = (&b + b.transpose()) * 0.5;
    let mu = sym.symmetric_eigenvalues().min();
    if mu > 0.0 && mu.is_finite() {
        Ok(mu)
    } else {
        Err(GameError::NotStronglyMonotone(mu))
    }
}

/// Per-agent Lipschitz constants `L_i^h = ‖J_i‖₂`.
pub fn agent_lipschitz_constants<G: AffineGame + ?Sized>(game: &G) -> Vec<f64> {
    (0..game.agent_count())
        .map(|i| spectral_norm(&game.block_affine(i).0).expect("finite Jacobian"))
        .collect()
}

/// `L = max_i L_i^h`.
pub fn lipschitz_constant<G: AffineGame + ?Sized>(game: &G) -> f64 {
    agent_lipschitz_constants(game)
        .into_iter()
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn symmetric_cournot() -> CournotGame {
        CournotGame::uniform(&[1, 1, 1], 1.0, 0.0, 0.0, 10.0).unwrap()
    }

    #[test]
    fn mapping_vanishes_at_symmetric_equilibrium() {
        let g = symmetric_cournot();
        let x = DVector::from_element(3, 5.0 / 3.0);
        assert!(game_mapping(&g, &x).amax() < 1e-12);
    }

    #[test]
    fn linear_form_matches_direct_summation() {
        let g = CournotGame::seeded(&[4, 3, 3], 30.0, 11).unwrap();
        let lf = linear_form(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = DVector::from_fn(10, |_, _| rng.random_range(-5.0..5.0));
            assert!((lf.eval(&x) - game_mapping(&g, &x)).amax() <= 1e-12);
        }
    }

    #[test]
    fn mapping_is_affine() {
        let g = CournotGame::seeded(&[2, 3], 20.0, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y = DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
        let reference = game_mapping(&g, &(&y * 1.0)) - game_mapping(&g, &DVector::zeros(5));
        for _ in 0..20 {
            let x = DVector::from_fn(5, |_, _| rng.random_range(-5.0..5.0));
            let diff = game_mapping(&g, &(&x + &y)) - game_mapping(&g, &x);
            assert!((diff - &reference).amax() <= 1e-12);
        }
    }

    #[test]
    fn symmetric_cournot_monotonicity() {
        // B = (2a+1)I + 11ᵀ for single-agent clusters
        let mu = monotonicity_constant(&symmetric_cournot()).unwrap();
        assert!((mu - 3.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_square_constants() {
        let g = QuadraticGame::scalar_square();
        assert!((monotonicity_constant(&g).unwrap() - 2.0).abs() < 1e-12);
        assert!((lipschitz_constant(&g) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn monotonicity_inequality_on_samples() {
        let g = CournotGame::seeded(&[4, 3, 3], 30.0, 2).unwrap();
        let mu = monotonicity_constant(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let x = DVector::from_fn(10, |_, _| rng.random_range(-10.0..10.0));
            let y = DVector::from_fn(10, |_, _| rng.random_range(-10.0..10.0));
            let lhs = (game_mapping(&g, &x) - game_mapping(&g, &y)).dot(&(&x - &y));
            assert!(lhs >= mu * (&x - &y).norm_squared() * (1.0 - 1e-12));
        }
    }

    #[test]
    fn non_monotone_game_is_rejected() {
        let q = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let g = QuadraticGame::new(
            Membership::scalar(&[1]).unwrap(),
            vec![q],
            vec![DVector::zeros(1)],
            vec![0.0],
        )
        .unwrap();
        assert!(matches!(
            monotonicity_constant(&g),
            Err(GameError::NotStronglyMonotone(_))
        ));
    }

    #[test]
    fn lipschitz_bounds_gradient_differences() {
        let g = CournotGame::seeded(&[4, 3, 3], 30.0, 2).unwrap();
        let per_agent = agent_lipschitz_constants(&g);
        let l = lipschitz_constant(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for i in 0..10 {
            // Oracle: Jacobian of the block gradient by central differences.
            let x0 = DVector::from_fn(10, |_, _| rng.random_range(-1.0..1.0));
            let dim = g.grad_block(i, &x0).len();
            let mut jac = DMatrix::zeros(dim, 10);
            for k in 0..10 {
                let mut xp = x0.clone();
                let mut xm = x0.clone();
                xp[k] += 1e-3;
                xm[k] -= 1e-3;
                let col = (g.grad_block(i, &xp) - g.grad_block(i, &xm)) / 2e-3;
                jac.set_column(k, &col);
            }
            let oracle = jac.svd(false, false).singular_values.max();
            assert!((per_agent[i] - oracle).abs() <= 1e-8 * oracle);
            assert!(l >= per_agent[i]);
        }
        for _ in 0..100 {
            let x = DVector::from_fn(10, |_, _| rng.random_range(-10.0..10.0));
            let y = DVector::from_fn(10, |_, _| rng.random_range(-10.0..10.0));
            for i in 0..10 {
                let lhs = (g.grad_block(i, &x) - g.grad_block(i, &y)).norm();
                assert!(lhs <= per_agent[i] * (&x - &y).norm() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn cluster_cost_sums_member_costs() {
        let g = CournotGame::seeded(&[4, 3, 3], 30.0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x = DVector::from_fn(10, |_, _| rng.random_range(0.0..5.0));
            for h in 0..3 {
                let direct: f64 = g.membership().agents(h).map(|i| g.cost(i, &x)).sum();
                assert_eq!(cluster_cost(&g, h, &x), direct);
            }
        }
    }

    #[test]
    fn single_cluster_mapping_is_total_cost_gradient() {
        let g = CournotGame::seeded(&[4], 30.0, 3).unwrap();
        let x = DVector::from_vec(vec![0.5, 1.0, 1.5, 2.0]);
        let m = game_mapping(&g, &x);
        for k in 0..4 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += 1e-5;
            xm[k] -= 1e-5;
            let fd = (cluster_cost(&g, 0, &xp) - cluster_cost(&g, 0, &xm)) / 2e-5;
            assert!((fd - m[k]).abs() <= 1e-6 * m[k].abs().max(1.0));
        }
    }
}
