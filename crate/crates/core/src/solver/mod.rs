//! Distributed gradient tracking for multi-cluster games.
//!
//! Matrix form of one iteration:
//!
//! ```text
//! x(k+1)   = R (x(k) − α Y(k))
//! y^h(k+1) = C^h y^h(k) + G^h(k+1) − G^h(k)
//! ```
//!
//! where `Y(k)` places each tracker row `y_i^h` in the column block of
//! cluster `h` and `G^h(k)` stacks the members' own-block gradients at their
//! current estimates.

mod checkpoint;
mod rate;
mod trace;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::game::{game_mapping, ClusterGame};
use crate::norms::{frob_u, frob_v};
use crate::topology::WeightPair;

pub use checkpoint::{parse_checkpoint, write_checkpoint, CheckpointError};
pub use rate::{
    fit_linear_rate, RateFit, RateFitOutcome, DEFAULT_WINDOW_LOWER, DEFAULT_WINDOW_UPPER,
};
pub use trace::{IterateTrace, TraceError, TraceRow, TRACE_COLUMNS};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("shape mismatch for {what}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        what: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("iterates diverged: non-finite values after iteration {last_finite_k}")]
    Divergence {
        last_finite_k: usize,
        trace: Box<IterateTrace>,
    },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    pub alpha: f64,
    pub max_iter: usize,
    pub consensus_tol: f64,
    pub gradient_tol: f64,
    pub record_every: usize,
}

impl SolverConfig {
    pub fn new(alpha: f64, max_iter: usize) -> Self {
        Self {
            alpha,
            max_iter,
            consensus_tol: 0.0,
            gradient_tol: 0.0,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(SolverError::InvalidConfig(format!(
                "alpha must be a nonnegative finite number, got {}",
                self.alpha
            )));
        }
        if self.max_iter == 0 || self.record_every == 0 {
            return Err(SolverError::InvalidConfig(
                "max_iter and record_every must be positive".into(),
            ));
        }
        if !(self.consensus_tol >= 0.0 && self.gradient_tol >= 0.0) {
            return Err(SolverError::InvalidConfig(
                "tolerances must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Iterate of the algorithm: all decision estimates (row `i` is agent `i`'s
/// estimate of the full decision vector), the per-cluster gradient trackers,
/// and the gradient matrices `G^h(k)` evaluated at the current estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: DMatrix<f64>,
    pub y: Vec<DMatrix<f64>>,
    pub g_prev: Vec<DMatrix<f64>>,
    pub k: usize,
}

impl SolverState {
    /// Agent `i`'s estimate `x_i(k)` as a column vector.
    pub fn estimate(&self, agent: usize) -> DVector<f64> {
        self.x.row(agent).transpose()
    }

    /// Weighted average `x̄ = uᵀx`.
    pub fn weighted_average(&self, u: &DVector<f64>) -> DVector<f64> {
        self.x.tr_mul(u)
    }

    /// `ȳ^h = (1/n_h) 1ᵀ y^h`.
    pub fn tracker_average(&self, h: usize) -> DVector<f64> {
        column_mean(&self.y[h])
    }

    fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite())
            && self.y.iter().all(|m| m.iter().all(|v| v.is_finite()))
            && self.g_prev.iter().all(|m| m.iter().all(|v| v.is_finite()))
    }
}

pub(crate) fn column_mean(m: &DMatrix<f64>) -> DVector<f64> {
    m.row_mean().transpose()
}

/// `G^h` for every cluster, each agent's own-block gradient at its own row
/// of `x`.
pub fn cluster_gradients<G: ClusterGame + ?Sized>(game: &G, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let m = game.membership();
    (0..m.cluster_count())
        .map(|h| {
            let agents = m.agents(h);
            let mut g = DMatrix::zeros(agents.len(), m.layout().dim(h));
            for (r, i) in agents.enumerate() {
                let grad = game.grad_block(i, &x.row(i).transpose());
                g.set_row(r, &grad.transpose());
            }
            g
        })
        .collect()
}

/// Trackers start at the local gradients: `y_i^h(0) = ∇_{x^h} f_i^h(x_i(0))`.
pub fn init_state<G: ClusterGame + ?Sized>(
    game: &G,
    x0: DMatrix<f64>,
) -> Result<SolverState, SolverError> {
    let n = game.agent_count();
    let q = game.layout().total();
    if x0.shape() != (n, q) {
        return Err(SolverError::ShapeMismatch {
            what: "initial estimates",
            expected: (n, q),
            found: x0.shape(),
        });
    }
    let g = cluster_gradients(game, &x0);
    Ok(SolverState {
        x: x0,
        y: g.clone(),
        g_prev: g,
        k: 0,
    })
}

fn check_weights<G: ClusterGame + ?Sized>(game: &G, weights: &WeightPair) -> Result<(), SolverError> {
    let sizes = game.membership().cluster_sizes();
    let n = game.agent_count();
    if weights.r.shape() != (n, n) {
        return Err(SolverError::ShapeMismatch {
            what: "row-stochastic weights",
            expected: (n, n),
            found: weights.r.shape(),
        });
    }
    if weights.c.len() != sizes.len() {
        return Err(SolverError::ShapeMismatch {
            what: "cluster weight count",
            expected: (sizes.len(), 1),
            found: (weights.c.len(), 1),
        });
    }
    for (c, &nh) in weights.c.iter().zip(&sizes) {
        if c.shape() != (nh, nh) {
            return Err(SolverError::ShapeMismatch {
                what: "column-stochastic weights",
                expected: (nh, nh),
                found: c.shape(),
            });
        }
    }
    Ok(())
}

/// One iteration of the matrix-form update. Returns `Divergence` if any
/// value of the new iterate is not finite.
pub fn step<G: ClusterGame + ?Sized>(
    state: &SolverState,
    game: &G,
    weights: &WeightPair,
    alpha: f64,
) -> Result<SolverState, SolverError> {
    let m = game.membership();
    let layout = m.layout();
    let mut shifted = state.x.clone();
    for h in 0..m.cluster_count() {
        let agents = m.agents(h);
        let mut block = shifted.view_mut((agents.start, layout.offsets()[h]), (agents.len(), layout.dim(h)));
        block -= &state.y[h] * alpha;
    }
    let x = &weights.r * shifted;
    let g = cluster_gradients(game, &x);
    let y = (0..m.cluster_count())
        .map(|h| &weights.c[h] * &state.y[h] + &g[h] - &state.g_prev[h])
        .collect();
    let next = SolverState {
        x,
        y,
        g_prev: g,
        k: state.k + 1,
    };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(SolverError::Divergence {
            last_finite_k: state.k,
            trace: Box::default(),
        })
    }
}

/// `max_i ‖x_i − x_1‖_∞`.
pub fn raw_consensus(x: &DMatrix<f64>) -> f64 {
    let first = x.row(0);
    x.row_iter()
        .map(|r| (r - first).amax())
        .fold(0.0, f64::max)
}

/// Largest deviation of `(1/n_h) 1ᵀy^h` from the average of the cluster's
/// current own-block gradients, with the gradients recomputed from `x`. The
/// trackers conserve this average because every `C^h` is column-stochastic.
pub fn tracking_identity_residual<G: ClusterGame + ?Sized>(game: &G, state: &SolverState) -> f64 {
    let fresh = cluster_gradients(game, &state.x);
    (0..fresh.len())
        .map(|h| (state.tracker_average(h) - column_mean(&fresh[h])).amax())
        .fold(0.0, f64::max)
}

/// `y − v 1ᵀy`
pub fn tracking_deviation(y: &DMatrix<f64>, v: &DVector<f64>) -> DMatrix<f64> {
    y - v * y.row_sum()
}

/// The three tracked error norms and the observable stopping quantities.
///
/// * `e_opt   = ‖1x̄ − 1x*‖_F` (only with a reference `x*`)
/// * `e_cons  = ‖x − 1x̄‖_F^u`
/// * `e_track = Σ_h ‖y^h − v^h 1ᵀy^h‖_F^{v^h}`
///
/// `e_track` measures the trackers against their consensus value
/// `v^h 1ᵀy^h`, the fixed point of `C^h`. Measuring against
/// `v^h ȳ^h = v^h (1/n_h) 1ᵀy^h` instead leaves a residual
/// `(n_h − 1) v^h ȳ^h` that `C^h` does not contract.
pub fn metrics<G: ClusterGame + ?Sized>(
    state: &SolverState,
    game: &G,
    weights: &WeightPair,
    x_star: Option<&DVector<f64>>,
) -> TraceRow {
    let n = state.x.nrows();
    let x_bar = state.weighted_average(&weights.u);
    let ones = DVector::from_element(n, 1.0);
    let consensus_residual = &state.x - &ones * x_bar.transpose();
    let e_cons = frob_u(&consensus_residual, &weights.u).expect("weights match state");
    let e_track = (0..state.y.len())
        .map(|h| {
            frob_v(&tracking_deviation(&state.y[h], &weights.v[h]), &weights.v[h])
                .expect("weights match state")
        })
        .sum();
    let e_opt = x_star.map(|xs| (n as f64).sqrt() * (&x_bar - xs).norm());
    TraceRow {
        k: state.k,
        e_opt,
        e_cons,
        e_track,
        raw_consensus: raw_consensus(&state.x),
        mapping_norm: game_mapping(game, &x_bar).norm(),
        x_mean: x_bar.iter().copied().collect(),
    }
}

/// Final iterate of a run plus its recorded trace.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: SolverState,
    pub trace: IterateTrace,
    /// True when both stopping tolerances were met before `max_iter`.
    pub converged: bool,
}

/// Runs from `x0` until `max_iter` or until both the raw consensus residual
/// and `‖M(x̄)‖₂` fall below their tolerances.
pub fn run<G: ClusterGame + ?Sized>(
    game: &G,
    weights: &WeightPair,
    config: &SolverConfig,
    x0: DMatrix<f64>,
    x_star: Option<&DVector<f64>>,
) -> Result<RunOutcome, SolverError> {
    let state = init_state(game, x0)?;
    run_from(game, weights, config, state, x_star, |_| {})
}

/// Continues from an existing state (e.g. a checkpoint). `observe` sees
/// every iterate including the starting one.
pub fn run_from<G, F>(
    game: &G,
    weights: &WeightPair,
    config: &SolverConfig,
    mut state: SolverState,
    x_star: Option<&DVector<f64>>,
    mut observe: F,
) -> Result<RunOutcome, SolverError>
where
    G: ClusterGame + ?Sized,
    F: FnMut(&SolverState),
{
    config.validate()?;
    check_weights(game, weights)?;
    let mut trace = IterateTrace::default();
    let start = state.k;
    observe(&state);
    let mut row = metrics(&state, game, weights, x_star);
    trace.rows.push(row.clone());
    let mut converged = stop_reached(&row, config);
    while !converged && state.k - start < config.max_iter {
        state = match step(&state, game, weights, config.alpha) {
            Ok(next) => next,
            Err(SolverError::Divergence { last_finite_k, .. }) => {
                return Err(SolverError::Divergence {
                    last_finite_k,
                    trace: Box::new(trace),
                })
            }
            Err(e) => return Err(e),
        };
        observe(&state);
        row = metrics(&state, game, weights, x_star);
        converged = stop_reached(&row, config);
        let done = converged || state.k - start == config.max_iter;
        if (state.k - start).is_multiple_of(config.record_every) || done {
            trace.rows.push(row.clone());
        }
    }
    Ok(RunOutcome {
        state,
        trace,
        converged,
    })
}

fn stop_reached(row: &TraceRow, config: &SolverConfig) -> bool {
    row.raw_consensus <= config.consensus_tol && row.mapping_norm <= config.gradient_tol
}
