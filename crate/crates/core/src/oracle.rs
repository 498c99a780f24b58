//! Reference equilibria and optimality checks, independent of the
//! distributed solver.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{
    cluster_gradient, game_mapping, linear_form, monotonicity_constant, AffineGame, ClusterGame,
    GameError,
};
use crate::norms::spectral_norm;

/// Residual bound every reference solution must meet.
pub const REFERENCE_RESIDUAL_TOL: f64 = 1e-10;
const CENTRALIZED_MAX_ITER: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("game mapping matrix is singular")]
    Singular,
    #[error("reference residual {0:e} exceeds tolerance")]
    Residual(f64),
    #[error("centralized iteration did not reach tolerance in {0} iterations")]
    IterationCap(usize),
    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("starting point has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceMethod {
    LinearSolve,
    CentralizedIteration,
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub x_star: Vec<f64>,
    /// `‖M(x*)‖₂`
    pub residual: f64,
    pub method: ReferenceMethod,
}

impl ReferenceSolution {
    pub fn vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x_star)
    }
}

/// Unique equilibrium of an affine game: solves `B x = −d`.
pub fn solve_quadratic_ne<G: AffineGame + ?Sized>(game: &G) -> Result<ReferenceSolution, OracleError> {
    monotonicity_constant(game)?;
    let lf = linear_form(game);
    let lu = lf.b.clone().lu();
    let rhs = -&lf.d;
    let mut x = lu.solve(&rhs).ok_or(OracleError::Singular)?;
    // one step of iterative refinement
    let r = &lf.b * &x - &rhs;
    if let Some(dx) = lu.solve(&r) {
        x -= dx;
    }
    let residual = game_mapping(game, &x).norm();
    let scale = 1.0_f64.max(lf.d.norm());
    if !(residual <= REFERENCE_RESIDUAL_TOL * scale) {
        return Err(OracleError::Residual(residual));
    }
    Ok(ReferenceSolution {
        x_star: x.iter().copied().collect(),
        residual,
        method: ReferenceMethod::LinearSolve,
    })
}

/// `τ = μ / L_M²` with `L_M = ‖B‖₂`, inside the contraction range
/// `(0, 2μ/L_M²)` of the forward iteration.
pub fn default_tau<G: AffineGame + ?Sized>(game: &G) -> Result<f64, OracleError> {
    let mu = monotonicity_constant(game)?;
    let lm = spectral_norm(&linear_form(game).b).map_err(|_| OracleError::Singular)?;
    Ok(mu / (lm * lm))
}

/// Forward iteration `x ← x − τ M(x)` from `x0` until `‖M(x)‖₂ ≤ tol`.
pub fn solve_ne_centralized<G: ClusterGame + ?Sized>(
    game: &G,
    x0: &DVector<f64>,
    tol: f64,
    tau: f64,
) -> Result<ReferenceSolution, OracleError> {
    let q = game.layout().total();
    if x0.len() != q {
        return Err(OracleError::DimensionMismatch {
            expected: q,
            found: x0.len(),
        });
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(OracleError::InvalidStep(tau));
    }
    let mut x = x0.clone();
    for _ in 0..CENTRALIZED_MAX_ITER {
        let m = game_mapping(game, &x);
        let residual = m.norm();
        if residual <= tol {
            return Ok(ReferenceSolution {
                x_star: x.iter().copied().collect(),
                residual,
                method: ReferenceMethod::CentralizedIteration,
            });
        }
        if !residual.is_finite() {
            break;
        }
        x -= m * tau;
    }
    Err(OracleError::IterationCap(CENTRALIZED_MAX_ITER))
}

/// Equilibrium of the uniform Cournot game with single-factory companies:
/// `x*_i = (P_c − b) / (2a + n + 1)`.
pub fn symmetric_cournot_ne(n: usize, a: f64, b: f64, price_constant: f64) -> ReferenceSolution {
    let value = (price_constant - b) / (2.0 * a + n as f64 + 1.0);
    ReferenceSolution {
        x_star: vec![value; n],
        residual: 0.0,
        method: ReferenceMethod::ClosedForm,
    }
}

/// Verdicts on the consensus, social-welfare and Nash conditions for a
/// matrix of agent estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    /// `max_{i,j} ‖x_i − x_j‖_∞`
    pub consensus_residual: f64,
    pub consensus: bool,
    /// `‖g^h(x̄)‖₂` per cluster, at the row mean `x̄`.
    pub welfare_residuals: Vec<f64>,
    pub social_welfare: bool,
    /// Follows from consensus plus social welfare for convex cluster costs.
    pub nash_equilibrium: bool,
}

pub fn verify_optimality<G: ClusterGame + ?Sized>(
    game: &G,
    x: &DMatrix<f64>,
    tol: f64,
) -> OptimalityReport {
    let mut consensus_residual: f64 = 0.0;
    for col in x.column_iter() {
        consensus_residual = consensus_residual.max(col.max() - col.min());
    }
    let x_bar = x.row_mean().transpose();
    let welfare_residuals: Vec<f64> = (0..game.cluster_count())
        .map(|h| cluster_gradient(game, h, &x_bar).norm())
        .collect();
    let consensus = consensus_residual <= tol;
    let social_welfare = welfare_residuals.iter().all(|&r| r <= tol);
    OptimalityReport {
        consensus_residual,
        consensus,
        welfare_residuals,
        social_welfare,
        nash_equilibrium: consensus && social_welfare,
    }
}
