//! Cournot competition between companies owning several factories.
//!
//! Factory `i` produces `x_i` units at cost `C_i(x_i) = a_i x_i² + b_i x_i + c_i`
//! and sells at the common price `P(x) = P_c − Σ_j x_j`, so its objective is
//! `f_i(x) = C_i(x_i) − x_i P(x)`. Companies are clusters; each factory owns
//! exactly one scalar decision.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AffineGame, ClusterGame, GameError, Membership};

/// Cost coefficients of one factory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CournotCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl CournotCoefficients {
    /// Draws `a ∈ [1, 3)`, `b ∈ [1, 3)`, `c ∈ [0, 5)`.
    pub fn sample<R: Rng>(rng: &mut R) -> Self {
        Self {
            a: rng.random_range(1.0..3.0),
            b: rng.random_range(1.0..3.0),
            c: rng.random_range(0.0..5.0),
        }
    }

    /// `count` coefficient sets from a named seed.
    pub fn seeded(count: usize, seed: u64) -> Vec<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| Self::sample(&mut rng)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct CournotGame {
    membership: Membership,
    coefficients: Vec<CournotCoefficients>,
    price_constant: f64,
}

impl CournotGame {
    pub fn new(
        cluster_sizes: &[usize],
        coefficients: Vec<CournotCoefficients>,
        price_constant: f64,
    ) -> Result<Self, GameError> {
        let membership = Membership::scalar(cluster_sizes)?;
        if coefficients.len() != membership.agent_count() {
            return Err(GameError::DimensionMismatch {
                expected: membership.agent_count(),
                found: coefficients.len(),
            });
        }
        for (agent, k) in coefficients.iter().enumerate() {
            if !(k.a > 0.0 && k.a.is_finite()) {
                return Err(GameError::NonPositiveCurvature { agent, a: k.a });
            }
        }
        if !(price_constant > 0.0 && price_constant.is_finite()) {
            return Err(GameError::InvalidPrice(price_constant));
        }
        Ok(Self {
            membership,
            coefficients,
            price_constant,
        })
    }

    /// Every factory shares the same coefficients.
    pub fn uniform(
        cluster_sizes: &[usize],
        a: f64,
        b: f64,
        c: f64,
        price_constant: f64,
    ) -> Result<Self, GameError> {
        let n = cluster_sizes.iter().sum();
        Self::new(
            cluster_sizes,
            vec![CournotCoefficients { a, b, c }; n],
            price_constant,
        )
    }

    /// Coefficients drawn from a named seed.
    pub fn seeded(cluster_sizes: &[usize], price_constant: f64, seed: u64) -> Result<Self, GameError> {
        let n = cluster_sizes.iter().sum();
        Self::new(
            cluster_sizes,
            CournotCoefficients::seeded(n, seed),
            price_constant,
        )
    }

    pub fn coefficients(&self) -> &[CournotCoefficients] {
        &self.coefficients
    }

    pub fn price_constant(&self) -> f64 {
        self.price_constant
    }

    /// `P(x) = P_c − Σ_j x_j`.
    pub fn price(&self, x: &DVector<f64>) -> f64 {
        self.price_constant - x.sum()
    }
}

impl ClusterGame for CournotGame {
    fn membership(&self) -> &Membership {
        &self.membership
    }

    fn cost(&self, agent: usize, x: &DVector<f64>) -> f64 {
        let k = self.coefficients[agent];
        let xi = x[agent];
        k.a * xi * xi + k.b * xi + k.c - xi * self.price(x)
    }

    fn grad_block(&self, agent: usize, x: &DVector<f64>) -> DVector<f64> {
        let h = self.membership.cluster_of(agent);
        let agents = self.membership.agents(h);
        let k = self.coefficients[agent];
        let xi = x[agent];
        let mut g = DVector::from_element(agents.len(), xi);
        g[agent - agents.start] = 2.0 * k.a * xi + k.b - self.price_constant + x.sum() + xi;
        g
    }
}

impl AffineGame for CournotGame {
    fn block_affine(&self, agent: usize) -> (DMatrix<f64>, DVector<f64>) {
        let h = self.membership.cluster_of(agent);
        let agents = self.membership.agents(h);
        let n = self.membership.agent_count();
        let k = self.coefficients[agent];
        let own = agent - agents.start;
        let mut jac = DMatrix::zeros(agents.len(), n);
        for r in 0..agents.len() {
            jac[(r, agent)] = 1.0;
        }
        for col in 0..n {
            jac[(own, col)] = 1.0;
        }
        jac[(own, agent)] = 2.0 * k.a + 2.0;
        let mut c = DVector::zeros(agents.len());
        c[own] = k.b - self.price_constant;
        (jac, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::ClusterGame;

    fn symmetric() -> CournotGame {
        CournotGame::uniform(&[1, 1, 1], 1.0, 0.0, 0.0, 10.0).unwrap()
    }

    #[test]
    fn cost_at_origin_is_fixed_cost() {
        let g = CournotGame::seeded(&[2, 2], 10.0, 4).unwrap();
        let zero = DVector::zeros(4);
        for i in 0..4 {
            assert_eq!(g.cost(i, &zero), g.coefficients()[i].c);
        }
    }

    #[test]
    fn cost_hand_evaluation() {
        let x = DVector::from_element(3, 1.0);
        // a x² + b x + c − x (P_c − Σx) = 1 − (10 − 3)
        let expected = 1.0 * 1.0 * 1.0 + 0.0 + 0.0 - 1.0 * (10.0 - 3.0);
        assert_eq!(expected, -6.0);
        assert_eq!(symmetric().cost(0, &x), -6.0);
    }

    #[test]
    fn own_curvature_by_finite_differences() {
        let g = CournotGame::seeded(&[3], 10.0, 8).unwrap();
        for i in 0..3 {
            let f = |t: f64| {
                let mut x = DVector::zeros(3);
                x[i] = t;
                g.cost(i, &x)
            };
            let h = 1e-3;
            let second = (f(1.0 + h) - 2.0 * f(1.0) + f(1.0 - h)) / (h * h);
            // d²/dx_i² of a x² + x² = 2a + 2
            assert!((second - (2.0 * g.coefficients()[i].a + 2.0)).abs() < 1e-5);
            // doubling x_i with the others at 0 scales the quadratic part by 4
            let quad = |t: f64| f(t) - f(0.0) - t * (g.coefficients()[i].b - 10.0);
            assert!((quad(2.0) - 4.0 * quad(1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn gradient_hand_evaluation() {
        let x = DVector::from_element(3, 1.0);
        let grad = symmetric().grad_block(0, &x);
        assert_eq!(grad.len(), 1);
        assert_eq!(grad[0], -4.0);
    }

    #[test]
    fn gradient_layout_within_cluster() {
        let g = CournotGame::uniform(&[2, 3], 1.0, 0.0, 0.0, 10.0).unwrap();
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        // agent 3 is the second member of cluster 1 (agents 2..5)
        let grad = g.grad_block(3, &x);
        assert_eq!(grad.len(), 3);
        assert_eq!(grad[0], 4.0);
        assert_eq!(grad[2], 4.0);
        assert_eq!(grad[1], 2.0 * 4.0 + 0.0 - 10.0 + 15.0 + 4.0);
    }

    #[test]
    fn rejects_invalid_coefficients() {
        assert!(matches!(
            CournotGame::uniform(&[2], 0.0, 1.0, 1.0, 10.0),
            Err(GameError::NonPositiveCurvature { agent: 0, .. })
        ));
        assert!(matches!(
            CournotGame::uniform(&[2], 1.0, 1.0, 1.0, -1.0),
            Err(GameError::InvalidPrice(_))
        ));
        assert!(CournotGame::new(&[2], CournotCoefficients::seeded(3, 0), 1.0).is_err());
    }

    #[test]
    fn seeded_is_deterministic() {
        assert_eq!(
            CournotCoefficients::seeded(5, 42),
            CournotCoefficients::seeded(5, 42)
        );
    }
}
