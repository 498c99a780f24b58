//! Numerical convergence certificate.
//!
//! The three error norms `v(k) = (e_opt, e_cons, e_track)` of a run satisfy
//! `v(k+1) ≤ A(α) v(k)` elementwise for a nonnegative 3×3 matrix `A(α)` built
//! from graph and game constants. A step size is certified when
//! `ρ(A(α)) < 1`.

mod checks;
mod spectral;

pub use checks::{
    check_step_inequalities, check_trajectory_bound, default_trajectory_tol, InequalityReport,
    InequalitySnapshot, BoundViolation, InequalityCheck, TrajectoryReport,
};
pub use spectral::{eigenvalues_3x3, spectral_radius_3x3};

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{lipschitz_constant, monotonicity_constant, AffineGame, GameError};
use crate::norms::{
    contraction_sigma_c, contraction_sigma_r, equivalence_constants, spectral_norm,
    EquivalenceConstants, NormError,
};
use crate::topology::WeightPair;

/// Margin below 1 that a spectral radius must clear to certify a step size.
pub const CERTIFY_MARGIN: f64 = 1e-9;
pub const DEFAULT_GRID_POINTS: usize = 64;
pub const DEFAULT_GRID_MIN: f64 = 1e-6;
pub const DEFAULT_GRID_MAX: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertificateError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error("step size must be nonnegative and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("phi radicand is negative at alpha = {0}")]
    NegativeRadicand(f64),
    #[error("game has {game} agents in {game_clusters} clusters, weights have {weights} agents in {weight_clusters} clusters")]
    SizeMismatch {
        game: usize,
        game_clusters: usize,
        weights: usize,
        weight_clusters: usize,
    },
    #[error("trace row {row}: {reason}")]
    Trace { row: usize, reason: String },
}

/// Every constant entering the bound matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsLedger {
    pub agents: usize,
    pub clusters: usize,
    /// `‖R − 1uᵀ‖₂^u`
    pub sigma_r: f64,
    /// `max_h ‖C^h − v^h 1ᵀ‖₂^{v^h}`
    pub sigma_c: f64,
    /// `‖R − 1uᵀ‖₂`
    pub sigma_2: f64,
    /// `max_h ‖I − v^h 1ᵀ‖_F`
    pub sigma_i: f64,
    pub delta: EquivalenceConstants,
    /// `L = max_i ‖J_i‖₂`
    pub lipschitz: f64,
    /// `L_v = L max_{i,h} v_i^h`
    pub lipschitz_v: f64,
    pub mu: f64,
    /// `η^h = (v^h)ᵀu^h / n_h` with `u^h` the restriction of `u` to cluster `h`.
    pub eta: Vec<f64>,
    pub eta_lower: f64,
    /// `‖1uᵀ‖₂ = √n ‖u‖₂`
    pub norm_one_u: f64,
    /// `‖R − I‖₂`
    pub norm_r_minus_i: f64,
    /// `‖R‖₂`, at least 1 and equal to 1 only for doubly stochastic `R`.
    pub norm_r: f64,
}

pub fn assemble_constants<G: AffineGame + ?Sized>(
    game: &G,
    weights: &WeightPair,
) -> Result<ConstantsLedger, CertificateError> {
    let membership = game.membership();
    let n = game.agent_count();
    let h_count = game.cluster_count();
    if weights.agent_count() != n || weights.cluster_count() != h_count {
        return Err(CertificateError::SizeMismatch {
            game: n,
            game_clusters: h_count,
            weights: weights.agent_count(),
            weight_clusters: weights.cluster_count(),
        });
    }
    let mu = monotonicity_constant(game)?;
    let lipschitz = lipschitz_constant(game);

    let sigma_r = contraction_sigma_r(&weights.r, &weights.u)?;
    let mut sigma_c: f64 = 0.0;
    let mut sigma_i: f64 = 0.0;
    let mut eta = Vec::with_capacity(h_count);
    for h in 0..h_count {
        let (c, v) = (&weights.c[h], &weights.v[h]);
        sigma_c = sigma_c.max(contraction_sigma_c(c, v)?);
        let nh = v.len();
        let ones = DVector::from_element(nh, 1.0);
        sigma_i = sigma_i.max((DMatrix::identity(nh, nh) - v * ones.transpose()).norm());
        let agents = membership.agents(h);
        let u_h = weights.u.rows(agents.start, agents.len());
        eta.push(v.dot(&u_h) / nh as f64);
    }
    let eta_lower = eta.iter().copied().fold(f64::INFINITY, f64::min);

    let ones = DVector::from_element(n, 1.0);
    let consensus = &ones * weights.u.transpose();
    let sigma_2 = spectral_norm(&(&weights.r - &consensus))?;
    let norm_r_minus_i = spectral_norm(&(&weights.r - DMatrix::identity(n, n)))?;
    let norm_r = spectral_norm(&weights.r)?;
    let v_max = weights.v.iter().map(|v| v.max()).fold(0.0, f64::max);

    Ok(ConstantsLedger {
        agents: n,
        clusters: h_count,
        sigma_r,
        sigma_c,
        sigma_2,
        sigma_i,
        delta: equivalence_constants(&weights.u, &weights.v),
        lipschitz,
        lipschitz_v: lipschitz * v_max,
        mu,
        eta,
        eta_lower,
        norm_one_u: (n as f64).sqrt() * weights.u.norm(),
        norm_r_minus_i,
        norm_r,
    })
}

/// The α-independent factors `a_ij` of the bound matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundFactors {
    pub a12: f64,
    pub a13: f64,
    pub a21: f64,
    pub a22: f64,
    pub a23: f64,
    pub a31: f64,
    pub a32: f64,
    pub a32_prime: f64,
    pub a33: f64,
}

impl ConstantsLedger {
    pub fn factors(&self) -> BoundFactors {
        let d = &self.delta;
        let sqrt_h = (self.clusters as f64).sqrt();
        let h = self.clusters as f64;
        let l = self.lipschitz;
        let lv = self.lipschitz_v;
        // Line 3 bounds ‖x(k+1) − x(k)‖ through ‖R Y‖ ≤ ‖R‖₂ ‖Y‖.
        let line3 = d.delta_v_f * self.sigma_i * l;
        BoundFactors {
            a12: d.delta_f_u * lv * self.norm_one_u,
            a13: self.norm_one_u * d.delta_f_v,
            a21: d.delta_u_f * self.sigma_2 * sqrt_h * lv,
            a22: d.delta_u_f * self.sigma_2 * sqrt_h * d.delta_f_u * lv,
            a23: d.delta_u_f * d.delta_f_v * self.sigma_2,
            a31: line3 * h * lv * self.norm_r,
            a32: line3 * d.delta_f_u * sqrt_h * self.norm_r_minus_i,
            a32_prime: line3 * h * d.delta_f_u * lv * self.norm_r,
            a33: line3 * sqrt_h * d.delta_f_v * self.norm_r,
        }
    }

    /// `1 − 2αη̲μ + α² L_v² ‖1uᵀ‖₂²`
    pub fn phi_radicand(&self, alpha: f64) -> f64 {
        let lv = self.lipschitz_v * self.norm_one_u;
        1.0 - 2.0 * alpha * self.eta_lower * self.mu + alpha * alpha * lv * lv
    }

    pub fn phi(&self, alpha: f64) -> Result<f64, CertificateError> {
        let r = self.phi_radicand(alpha);
        if r < 0.0 || !r.is_finite() {
            return Err(CertificateError::NegativeRadicand(alpha));
        }
        Ok(r.sqrt())
    }

    /// `A(α)` without the `α ≥ 0` precondition, so that the leading
    /// eigenvalue can be differenced across `α = 0`.
    pub fn entries(&self, alpha: f64) -> Result<Matrix3<f64>, CertificateError> {
        let f = self.factors();
        let phi = self.phi(alpha)?;
        Ok(Matrix3::new(
            phi,
            alpha * f.a12,
            alpha * f.a13,
            alpha * f.a21,
            self.sigma_r + alpha * f.a22,
            alpha * f.a23,
            alpha * f.a31,
            f.a32 + alpha * f.a32_prime,
            self.sigma_c + alpha * f.a33,
        ))
    }

    /// The real eigenvalue of `A(α)` that equals 1 at `α = 0`.
    pub fn leading_eigenvalue(&self, alpha: f64) -> Result<f64, CertificateError> {
        let ev = eigenvalues_3x3(&self.entries(alpha)?);
        Ok(ev
            .iter()
            .filter(|z| z.im == 0.0)
            .map(|z| z.re)
            .min_by(|a, b| (a - 1.0).abs().total_cmp(&(b - 1.0).abs()))
            .unwrap_or(ev[0].re))
    }
}

impl ConstantsLedger {
    /// `dλ₁/dα` at `α = 0` by central differences with step `h`, Richardson
    /// extrapolated once. The leading eigenvalue has a large cubic term from
    /// the off-diagonal coupling, so the plain central difference needs
    /// `h` small enough that rounding starts to dominate.
    pub fn leading_slope_at_zero(&self, h: f64) -> Result<f64, CertificateError> {
        let central = |h: f64| -> Result<f64, CertificateError> {
            Ok((self.leading_eigenvalue(h)? - self.leading_eigenvalue(-h)?) / (2.0 * h))
        };
        let coarse = central(h)?;
        let fine = central(0.5 * h)?;
        Ok((4.0 * fine - coarse) / 3.0)
    }
}

/// `A(α)` with its spectral radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundMatrix {
    pub alpha: f64,
    pub entries: [[f64; 3]; 3],
    pub phi: f64,
    pub rho: f64,
}

impl BoundMatrix {
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.entries[r][c])
    }
}

pub fn bound_matrix(ledger: &ConstantsLedger, alpha: f64) -> Result<BoundMatrix, CertificateError> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(CertificateError::InvalidAlpha(alpha));
    }
    let m = ledger.entries(alpha)?;
    Ok(BoundMatrix {
        alpha,
        entries: [0, 1, 2].map(|r| [0, 1, 2].map(|c| m[(r, c)])),
        phi: m[(0, 0)],
        rho: spectral_radius_3x3(&m),
    })
}

/// `count` log-spaced points from `lo` to `hi`, both included.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}

pub fn default_alpha_grid() -> Vec<f64> {
    log_grid(DEFAULT_GRID_MIN, DEFAULT_GRID_MAX, DEFAULT_GRID_POINTS)
}

/// `ρ(A(α))` at one grid point; `None` where `φ(α)` is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub alpha: f64,
    pub rho: Option<f64>,
}

pub fn rho_table(ledger: &ConstantsLedger, grid: &[f64]) -> Vec<GridPoint> {
    grid.iter()
        .map(|&alpha| GridPoint {
            alpha,
            rho: bound_matrix(ledger, alpha).ok().map(|b| b.rho),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub alpha: f64,
    pub rho: f64,
}

/// Largest grid step size with `ρ(A(α)) < 1 − CERTIFY_MARGIN`.
pub fn certify_stepsize(ledger: &ConstantsLedger, grid: &[f64]) -> Option<Certification> {
    rho_table(ledger, grid)
        .into_iter()
        .filter_map(|p| p.rho.map(|rho| Certification { alpha: p.alpha, rho }))
        .filter(|c| c.alpha > 0.0 && c.rho < 1.0 - CERTIFY_MARGIN)
        .max_by(|a, b| a.alpha.total_cmp(&b.alpha))
}
