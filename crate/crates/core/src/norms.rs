//! Weighted Frobenius and spectral matrix norms.
//!
//! For a positive weight vector `u` (the left Perron vector of `R`) the
//! weighted norms are `‖diag(√u) A‖_F` and `‖diag(√u) X diag(√u)⁻¹‖₂`. For a
//! right Perron vector `v` the weighting is inverted:
//! `‖diag(√v)⁻¹ A‖_F` and `‖diag(√v)⁻¹ X diag(√v)‖₂`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

const SPECTRAL_TOL: f64 = 1e-12;
const SPECTRAL_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error("dimension mismatch: matrix has {rows} rows, weight has {weights} entries")]
    DimensionMismatch { rows: usize, weights: usize },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("weights must be strictly positive")]
    NonPositiveWeight,
    #[error("spectral norm power iteration did not converge")]
    NotConverged,
    #[error("contraction factor {0} is not below 1")]
    NotContractive(f64),
}

/// Perron weights defining the `u`- and `v^h`-weighted norms.
#[derive(Debug, Clone)]
pub struct NormWeights {
    pub u: DVector<f64>,
    pub v: Vec<DVector<f64>>,
}

impl NormWeights {
    pub fn new(u: DVector<f64>, v: Vec<DVector<f64>>) -> Result<Self, NormError> {
        check_positive(&u)?;
        for vh in &v {
            check_positive(vh)?;
        }
        Ok(Self { u, v })
    }
}

fn check_positive(w: &DVector<f64>) -> Result<(), NormError> {
    if w.iter().all(|&x| x > 0.0 && x.is_finite()) {
        Ok(())
    } else {
        Err(NormError::NonPositiveWeight)
    }
}

fn check_rows(a: &DMatrix<f64>, w: &DVector<f64>) -> Result<(), NormError> {
    if a.nrows() != w.len() {
        return Err(NormError::DimensionMismatch {
            rows: a.nrows(),
            weights: w.len(),
        });
    }
    check_positive(w)
}

fn check_square(x: &DMatrix<f64>) -> Result<(), NormError> {
    if x.nrows() != x.ncols() {
        return Err(NormError::NotSquare {
            rows: x.nrows(),
            cols: x.ncols(),
        });
    }
    Ok(())
}

/// `‖diag(√u) A‖_F`.
pub fn frob_u(a: &DMatrix<f64>, u: &DVector<f64>) -> Result<f64, NormError> {
    check_rows(a, u)?;
    let mut acc = 0.0;
    for (i, row) in a.row_iter().enumerate() {
        acc += u[i] * row.norm_squared();
    }
    Ok(acc.sqrt())
}

/// `‖diag(√v)⁻¹ A‖_F`.
pub fn frob_v(a: &DMatrix<f64>, v: &DVector<f64>) -> Result<f64, NormError> {
    check_rows(a, v)?;
    let mut acc = 0.0;
    for (i, row) in a.row_iter().enumerate() {
        acc += row.norm_squared() / v[i];
    }
    Ok(acc.sqrt())
}

/// `‖diag(√u) X diag(√u)⁻¹‖₂`.
pub fn spec_u(x: &DMatrix<f64>, u: &DVector<f64>) -> Result<f64, NormError> {
    check_square(x)?;
    check_rows(x, u)?;
    let s = u.map(f64::sqrt);
    let weighted = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| s[i] * x[(i, j)] / s[j]);
    spectral_norm(&weighted)
}

/// `‖diag(√v)⁻¹ X diag(√v)‖₂`.
pub fn spec_v(x: &DMatrix<f64>, v: &DVector<f64>) -> Result<f64, NormError> {
    check_square(x)?;
    check_rows(x, v)?;
    let s = v.map(f64::sqrt);
    let weighted = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * s[j] / s[i]);
    spectral_norm(&weighted)
}

/// Largest singular value, by power iteration on the Gram matrix `MᵀM`.
pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64, NormError> {
    let cols = m.ncols();
    if cols == 0 || m.nrows() == 0 {
        return Ok(0.0);
    }
    let gram = m.tr_mul(m);
    // Irrational-ish start so it is never orthogonal to a structured singular vector.
    let mut x = DVector::from_fn(cols, |i, _| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_75).fract());
    x.normalize_mut();
    let mut lambda = x.dot(&(&gram * &x));
    if lambda == 0.0 {
        // Start may lie in the kernel; fall back to the unit vectors.
        match (0..cols).find(|&j| gram[(j, j)] > 0.0) {
            Some(j) => {
                x = DVector::zeros(cols);
                x[j] = 1.0;
                lambda = gram[(j, j)];
            }
            None => return Ok(0.0),
        }
    }
    for _ in 0..SPECTRAL_MAX_ITER {
        let mut next = &gram * &x;
        let norm = next.norm();
        if !norm.is_finite() {
            return Err(NormError::NotConverged);
        }
        if norm == 0.0 {
            return Ok(0.0);
        }
        next /= norm;
        let next_lambda = next.dot(&(&gram * &next));
        let settled = (next_lambda - lambda).abs() <= 0.1 * SPECTRAL_TOL * next_lambda.abs();
        x = next;
        lambda = next_lambda;
        if settled {
            return Ok(lambda.max(0.0).sqrt());
        }
    }
    Err(NormError::NotConverged)
}

/// `σ_R = ‖R − 1uᵀ‖₂^u`, the contraction factor of the consensus residual
/// under row-stochastic mixing. Fails if the factor is not below 1.
pub fn contraction_sigma_r(r: &DMatrix<f64>, u: &DVector<f64>) -> Result<f64, NormError> {
    check_square(r)?;
    check_rows(r, u)?;
    let n = r.nrows();
    let residual = r - DVector::from_element(n, 1.0) * u.transpose();
    let sigma = spec_u(&residual, u)?;
    if sigma >= 1.0 {
        return Err(NormError::NotContractive(sigma));
    }
    Ok(sigma)
}

/// `σ_C = ‖C − v1ᵀ‖₂^v` for a column-stochastic cluster matrix.
pub fn contraction_sigma_c(c: &DMatrix<f64>, v: &DVector<f64>) -> Result<f64, NormError> {
    check_square(c)?;
    check_rows(c, v)?;
    let n = c.nrows();
    let residual = c - v * DVector::from_element(n, 1.0).transpose();
    let sigma = spec_v(&residual, v)?;
    if sigma >= 1.0 {
        return Err(NormError::NotContractive(sigma));
    }
    Ok(sigma)
}

/// Tight norm-equivalence constants between the weighted and plain
/// Frobenius norms.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EquivalenceConstants {
    /// `‖·‖_F^u ≤ δ_{u,F} ‖·‖_F`
    pub delta_u_f: f64,
    /// `‖·‖_F ≤ δ_{F,u} ‖·‖_F^u`
    pub delta_f_u: f64,
    /// `‖·‖_F^v ≤ δ_{v,F} ‖·‖_F`
    pub delta_v_f: f64,
    /// `‖·‖_F ≤ δ_{F,v} ‖·‖_F^v`
    pub delta_f_v: f64,
}

pub fn equivalence_constants(u: &DVector<f64>, v: &[DVector<f64>]) -> EquivalenceConstants {
    let u_max = u.max();
    let u_min = u.min();
    let v_max = v.iter().map(|x| x.max()).fold(f64::MIN, f64::max);
    let v_min = v.iter().map(|x| x.min()).fold(f64::MAX, f64::min);
    EquivalenceConstants {
        delta_u_f: u_max.sqrt(),
        delta_f_u: 1.0 / u_min.sqrt(),
        delta_v_f: 1.0 / v_min.sqrt(),
        delta_f_v: v_max.sqrt(),
    }
}
