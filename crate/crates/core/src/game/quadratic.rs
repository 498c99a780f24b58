use nalgebra::{DMatrix, DVector};

use super::{AffineGame, ClusterGame, GameError, Membership};

/// Game with quadratic agent costs `f_i(x) = ½ xᵀQ_i x + p_iᵀx + r_i` over
/// an arbitrary decision layout. With a single cluster this is a plain
/// distributed optimization problem.
#[derive(Debug, Clone)]
pub struct QuadraticGame {
    membership: Membership,
    hessians: Vec<DMatrix<f64>>,
    linear: Vec<DVector<f64>>,
    constants: Vec<f64>,
}

impl QuadraticGame {
    pub fn new(
        membership: Membership,
        hessians: Vec<DMatrix<f64>>,
        linear: Vec<DVector<f64>>,
        constants: Vec<f64>,
    ) -> Result<Self, GameError> {
        let n = membership.agent_count();
        let q = membership.layout().total();
        for len in [hessians.len(), linear.len(), constants.len()] {
            if len != n {
                return Err(GameError::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        for (i, (h, p)) in hessians.iter().zip(&linear).enumerate() {
            if h.nrows() != q || h.ncols() != q {
                return Err(GameError::DimensionMismatch {
                    expected: q,
                    found: h.nrows(),
                });
            }
            if p.len() != q {
                return Err(GameError::DimensionMismatch {
                    expected: q,
                    found: p.len(),
                });
            }
            if (h - h.transpose()).amax() > 1e-12 * h.amax().max(1.0) {
                return Err(GameError::NotSymmetric(i));
            }
        }
        Ok(Self {
            membership,
            hessians,
            linear,
            constants,
        })
    }

    /// One agent, one cluster, `f(x) = x²`.
    pub fn scalar_square() -> Self {
        Self::new(
            Membership::scalar(&[1]).unwrap(),
            vec![DMatrix::from_element(1, 1, 2.0)],
            vec![DVector::zeros(1)],
            vec![0.0],
        )
        .unwrap()
    }
}

impl ClusterGame for QuadraticGame {
    fn membership(&self) -> &Membership {
        &self.membership
    }

    fn cost(&self, agent: usize, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessians[agent] * x)) + self.linear[agent].dot(x) + self.constants[agent]
    }

    fn grad_block(&self, agent: usize, x: &DVector<f64>) -> DVector<f64> {
        let block = self
            .membership
            .layout()
            .block(self.membership.cluster_of(agent));
        let full = &self.hessians[agent] * x + &self.linear[agent];
        full.rows(block.start, block.len()).into_owned()
    }
}

impl AffineGame for QuadraticGame {
    fn block_affine(&self, agent: usize) -> (DMatrix<f64>, DVector<f64>) {
        let block = self
            .membership
            .layout()
            .block(self.membership.cluster_of(agent));
        (
            self.hessians[agent]
                .rows(block.start, block.len())
                .into_owned(),
            self.linear[agent].rows(block.start, block.len()).into_owned(),
        )
    }
}
