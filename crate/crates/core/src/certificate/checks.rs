//! Checks of the bound system against recorded trajectories.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::{BoundMatrix, CertificateError, ConstantsLedger};
use crate::game::{cluster_gradient, ClusterGame};
use crate::norms::{frob_u, frob_v};
use crate::solver::{IterateTrace, SolverState};
use crate::topology::WeightPair;

/// `1e−9 · (1 + ‖v(0)‖₂)`
pub fn default_trajectory_tol(trace: &IterateTrace) -> f64 {
    let v0 = trace
        .rows
        .first()
        .and_then(|r| r.error_vector())
        .map(|v| Vector3::from(v).norm())
        .unwrap_or(0.0);
    1e-9 * (1.0 + v0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundViolation {
    /// Iteration whose successor broke the bound.
    pub k: usize,
    /// 0 = e_opt, 1 = e_cons, 2 = e_track.
    pub component: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub steps_checked: usize,
    pub tol: f64,
    pub violations: usize,
    pub first_violation: Option<BoundViolation>,
    /// Smallest `(A v(k))_r − v_r(k+1)` per component.
    pub min_margin: [f64; 3],
}

impl TrajectoryReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Verifies `v(k+1) ≤ A v(k) + tol` elementwise on a stride-1 trace with
/// reference errors.
pub fn check_trajectory_bound(
    trace: &IterateTrace,
    bound: &BoundMatrix,
    tol: f64,
) -> Result<TrajectoryReport, CertificateError> {
    let a = bound.matrix();
    let mut report = TrajectoryReport {
        steps_checked: 0,
        tol,
        violations: 0,
        first_violation: None,
        min_margin: [f64::INFINITY; 3],
    };
    let vectors = trace
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.error_vector().map(Vector3::from).ok_or_else(|| CertificateError::Trace {
                row: i,
                reason: "e_opt missing; the run needs a reference solution".into(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    for (i, pair) in trace.rows.windows(2).enumerate() {
        if pair[1].k != pair[0].k + 1 {
            return Err(CertificateError::Trace {
                row: i + 1,
                reason: format!("k jumps from {} to {}; record every step", pair[0].k, pair[1].k),
            });
        }
        let rhs = a * vectors[i];
        let lhs = vectors[i + 1];
        report.steps_checked += 1;
        for c in 0..3 {
            let margin = rhs[c] - lhs[c];
            report.min_margin[c] = report.min_margin[c].min(margin);
            if margin < -tol {
                report.violations += 1;
                report.first_violation.get_or_insert(BoundViolation {
                    k: pair[0].k,
                    component: c,
                    lhs: lhs[c],
                    rhs: rhs[c],
                });
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl InequalityCheck {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// The four auxiliary inequalities at one iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalitySnapshot {
    pub k: usize,
    pub parts: [InequalityCheck; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub snapshots: Vec<InequalitySnapshot>,
    /// Smallest margin per part over all snapshots.
    pub min_margin: [f64; 4],
}

impl InequalityReport {
    /// True when every part holds up to `tol` at every snapshot.
    pub fn holds(&self, tol: f64) -> bool {
        self.min_margin.iter().all(|&m| m >= -tol)
    }
}

fn embed_blocks<G: ClusterGame + ?Sized>(game: &G, blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let m = game.membership();
    let layout = m.layout();
    let mut out = DMatrix::zeros(m.agent_count(), layout.total());
    for (h, b) in blocks.iter().enumerate() {
        out.view_mut((m.agents(h).start, layout.offsets()[h]), b.shape())
            .copy_from(b);
    }
    out
}

/// `‖1 uᵀ M‖_F = √n ‖Mᵀu‖₂`
fn consensus_norm(u: &DVector<f64>, m: &DMatrix<f64>) -> f64 {
    (u.len() as f64).sqrt() * m.tr_mul(u).norm()
}

/// Evaluates the four inequalities used to build lines 1–3 of the bound
/// matrix at every snapshot. Here the tracker average is the mean
/// `ȳ^h = (1/n_h) 1ᵀy^h` and `ḡ^h` is the mean cluster gradient at `x̄`.
pub fn check_step_inequalities<G: ClusterGame + ?Sized>(
    states: &[SolverState],
    game: &G,
    weights: &WeightPair,
    ledger: &ConstantsLedger,
    x_star: &DVector<f64>,
    alpha: f64,
) -> Result<InequalityReport, CertificateError> {
    let phi = ledger.phi(alpha)?;
    let d = &ledger.delta;
    let lv = ledger.lipschitz_v;
    let sqrt_h = (ledger.clusters as f64).sqrt();
    let u = &weights.u;
    let n = u.len();
    let ones = DVector::from_element(n, 1.0);
    let mut report = InequalityReport {
        snapshots: Vec::with_capacity(states.len()),
        min_margin: [f64::INFINITY; 4],
    };
    for state in states {
        let x_bar = state.weighted_average(u);
        let e_opt = (n as f64).sqrt() * (&x_bar - x_star).norm();
        let e_cons = frob_u(&(&state.x - &ones * x_bar.transpose()), u)?;
        let mut lambda_g = Vec::with_capacity(ledger.clusters);
        let mut lambda_y = Vec::with_capacity(ledger.clusters);
        let mut dispersion_v = 0.0;
        let mut dispersion_f = 0.0;
        for (h, y) in state.y.iter().enumerate() {
            let v = &weights.v[h];
            let nh = y.nrows() as f64;
            let g_bar = cluster_gradient(game, h, &x_bar) / nh;
            lambda_g.push(v * g_bar.transpose());
            let center = v * state.tracker_average(h).transpose();
            let dev = y - &center;
            dispersion_v += frob_v(&dev, v)?;
            dispersion_f += dev.norm();
            lambda_y.push(center);
        }
        let lambda_g = embed_blocks(game, &lambda_g);
        let lambda_y = embed_blocks(game, &lambda_y);
        let y_hat = embed_blocks(game, &state.y);
        let gap = &ones * (&x_bar - x_star).transpose();
        let part1 = InequalityCheck {
            lhs: (gap - &ones * lambda_g.tr_mul(u).transpose() * alpha).norm(),
            rhs: phi * e_opt,
        };
        let part2 = InequalityCheck {
            lhs: alpha * consensus_norm(u, &(&lambda_g - &lambda_y)),
            rhs: alpha * d.delta_f_u * lv * ledger.norm_one_u * e_cons,
        };
        let part3 = InequalityCheck {
            lhs: alpha * consensus_norm(u, &(&lambda_y - &y_hat)),
            rhs: alpha * ledger.norm_one_u * d.delta_f_v * dispersion_v,
        };
        let part4 = InequalityCheck {
            lhs: y_hat.norm(),
            rhs: dispersion_f + sqrt_h * d.delta_f_u * lv * e_cons + sqrt_h * lv * e_opt,
        };
        let parts = [part1, part2, part3, part4];
        for (m, p) in report.min_margin.iter_mut().zip(&parts) {
            *m = m.min(p.margin());
        }
        report.snapshots.push(InequalitySnapshot { k: state.k, parts });
    }
    Ok(report)
}
