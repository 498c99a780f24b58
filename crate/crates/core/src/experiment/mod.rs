//! Config-driven experiments: build an instance, certify a step size, run
//! the solver and summarize the outcome.

pub mod config;
mod report;

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certificate::{
    assemble_constants, bound_matrix, certify_stepsize, check_trajectory_bound,
    default_alpha_grid, default_trajectory_tol, rho_table, BoundMatrix, CertificateError,
    Certification, ConstantsLedger, GridPoint, TrajectoryReport,
};
use crate::game::{ClusterGame, CournotGame, GameError};
use crate::oracle::{solve_quadratic_ne, verify_optimality, OptimalityReport, OracleError, ReferenceSolution};
use crate::solver::{
    fit_linear_rate, init_state, run_from, step, tracking_identity_residual, IterateTrace,
    RateFitOutcome, SolverConfig, SolverError, TraceError,
};
use crate::topology::{
    dense_global, leader_follower_global, ClusterTopology, Digraph, TopologyError, WeightPair,
};

pub use config::{
    AlphaSpec, ClusterSpec, ConfigError, ExperimentConfig, GlobalGraphSpec, GraphSpec,
    OutputSpec, RateWindow,
};
pub use report::{
    parse_report_json, render_certify_text, render_compare_text, render_run_text, render_trace_report,
    trajectory_csv, REPORT_JSON_MARKER,
};

/// Optimality verdicts in run reports use this tolerance.
pub const OPTIMALITY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{field}: {source}")]
    Graph {
        field: String,
        source: TopologyError,
    },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
    #[error("no step size on the grid certifies convergence; set alpha explicitly")]
    NoCertifiedStep,
    #[error("solver diverged after iteration {last_finite_k}")]
    Divergence {
        last_finite_k: usize,
        trace: Box<IterateTrace>,
    },
    #[error(transparent)]
    Solver(SolverError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    CompareFailed(String),
}

impl From<SolverError> for ExperimentError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Divergence {
                last_finite_k,
                trace,
            } => ExperimentError::Divergence {
                last_finite_k,
                trace,
            },
            other => ExperimentError::Solver(other),
        }
    }
}

impl ExperimentError {
    /// 2 for invalid input or violated assumptions, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_)
            | ExperimentError::Graph { .. }
            | ExperimentError::Topology(_)
            | ExperimentError::Game(_)
            | ExperimentError::Trace(_) => 2,
            ExperimentError::Oracle(OracleError::Game(_)) => 2,
            ExperimentError::Certificate(CertificateError::Game(_))
            | ExperimentError::Certificate(CertificateError::Norm(_)) => 2,
            _ => 1,
        }
    }
}

pub fn io_error(path: &Path, source: std::io::Error) -> ExperimentError {
    ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn build_graph(
    graph: &GraphSpec,
    n: usize,
    base_dir: &Path,
    field: &str,
) -> Result<Digraph, ExperimentError> {
    let wrap = |source| ExperimentError::Graph {
        field: field.to_string(),
        source,
    };
    match graph {
        GraphSpec::Ring => Digraph::ring(n),
        GraphSpec::Complete => Digraph::complete(n),
        GraphSpec::Random { seed, extra_edges } => {
            Digraph::random_strongly_connected(n, *extra_edges, *seed)
        }
        GraphSpec::Edges { edges } => Digraph::new(n, edges.iter().map(|e| (e[0], e[1]))),
        GraphSpec::File { path } => {
            let full = base_dir.join(path);
            let text = std::fs::read_to_string(&full).map_err(|e| io_error(&full, e))?;
            Digraph::parse_edge_list(&text, Some(n))
        }
    }
    .map_err(wrap)
}

/// Global and cluster graphs of a config. `leader_follower` selects the
/// restricted inter-cluster layer regardless of the config flag.
pub fn build_topology(
    config: &ExperimentConfig,
    leader_follower: bool,
) -> Result<ClusterTopology, ExperimentError> {
    let base = &config.base_dir;
    let clusters = config
        .clusters
        .iter()
        .enumerate()
        .map(|(h, c)| build_graph(&c.graph, c.size, base, &format!("clusters[{h}].graph")))
        .collect::<Result<Vec<_>, _>>()?;
    let layer = &config.global_graph;
    let global = if leader_follower {
        let leaders = layer.leaders.as_ref().unwrap_or(&layer.inter);
        let leaders = build_graph(leaders, clusters.len(), base, "global_graph.leaders")?;
        leader_follower_global(&clusters, &leaders)
    } else {
        let inter = build_graph(&layer.inter, config.agent_count(), base, "global_graph.inter")?;
        dense_global(&clusters, &inter)
    }
    .map_err(|source| ExperimentError::Graph {
        field: "global_graph".into(),
        source,
    })?;
    Ok(ClusterTopology::with_scalar_decisions(global, clusters)?)
}

/// `n × q` initial estimates drawn uniformly from `x0_range` with `x0_seed`.
pub fn initial_estimates(config: &ExperimentConfig, n: usize, q: usize) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.x0_seed);
    let [lo, hi] = config.x0_range;
    DMatrix::from_fn(n, q, |_, _| rng.random_range(lo..hi))
}

/// Everything a run needs, built deterministically from a config.
#[derive(Debug, Clone)]
pub struct Instance {
    pub topology: ClusterTopology,
    pub game: CournotGame,
    pub weights: WeightPair,
    pub reference: ReferenceSolution,
    pub x0: DMatrix<f64>,
}

impl Instance {
    pub fn build(config: &ExperimentConfig, leader_follower: bool) -> Result<Self, ExperimentError> {
        let topology = build_topology(config, leader_follower)?;
        let game = CournotGame::new(&config.cluster_sizes(), config.coefficients(), config.price_constant)?;
        let weights = WeightPair::from_topology(&topology)?;
        let reference = solve_quadratic_ne(&game)?;
        let n = game.agent_count();
        let x0 = initial_estimates(config, n, game.layout().total());
        Ok(Self {
            topology,
            game,
            weights,
            reference,
            x0,
        })
    }

    pub fn x_star(&self) -> DVector<f64> {
        self.reference.vector()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyOutcome {
    pub ledger: ConstantsLedger,
    pub table: Vec<GridPoint>,
    pub certification: Option<Certification>,
}

pub fn certify(instance: &Instance) -> Result<CertifyOutcome, ExperimentError> {
    let ledger = assemble_constants(&instance.game, &instance.weights)?;
    let grid = default_alpha_grid();
    Ok(CertifyOutcome {
        table: rho_table(&ledger, &grid),
        certification: certify_stepsize(&ledger, &grid),
        ledger,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaSource {
    Explicit,
    Certified,
}

pub fn resolve_alpha(
    config: &ExperimentConfig,
    outcome: &CertifyOutcome,
) -> Result<(f64, AlphaSource), ExperimentError> {
    match config.alpha {
        AlphaSpec::Value(a) => Ok((a, AlphaSource::Explicit)),
        AlphaSpec::Certify => outcome
            .certification
            .map(|c| (c.alpha, AlphaSource::Certified))
            .ok_or(ExperimentError::NoCertifiedStep),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSection {
    pub ledger: ConstantsLedger,
    pub certification: Option<Certification>,
    /// `A(α)` at the step size actually used.
    pub bound: BoundMatrix,
    pub run_alpha_certified: bool,
    /// Present when the trace was recorded at every iteration.
    pub trajectory: Option<TrajectoryReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: Option<String>,
    pub cluster_sizes: Vec<usize>,
    pub alpha: f64,
    pub alpha_source: AlphaSource,
    pub iterations: usize,
    pub converged: bool,
    /// `max_i ‖x_i − x_1‖_∞` at the final iterate.
    pub final_consensus: f64,
    /// `Σ_i |x_1 − x_i|` per decision coordinate.
    pub deviation_from_agent1: Vec<f64>,
    /// `‖x_1 − x*‖₂`
    pub epsilon: f64,
    pub x_star: Vec<f64>,
    pub x_agent1: Vec<f64>,
    pub rate: RateFitOutcome,
    pub optimality: OptimalityReport,
    pub tracking_identity_max: f64,
    pub certificate: CertificateSection,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub trace: IterateTrace,
    /// `k,agent,x_0..x_{q-1}` at every recorded iteration.
    pub estimates_csv: String,
}

pub fn deviation_from_agent1(x: &DMatrix<f64>) -> Vec<f64> {
    x.column_iter()
        .map(|col| col.iter().skip(1).fold(0.0, |acc, v| acc + (col[0] - v).abs()))
        .collect()
}

fn estimates_header(q: usize) -> String {
    let mut s = String::from("k,agent");
    for c in 0..q {
        let _ = write!(s, ",x_{c}");
    }
    s.push('\n');
    s
}

fn push_estimates(out: &mut String, k: usize, x: &DMatrix<f64>) {
    for (i, row) in x.row_iter().enumerate() {
        let _ = write!(out, "{k},{i}");
        for v in row.iter() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
}

pub fn execute_run(config: &ExperimentConfig) -> Result<RunOutput, ExperimentError> {
    let instance = Instance::build(config, config.global_graph.leader_follower)?;
    let cert = certify(&instance)?;
    let (alpha, alpha_source) = resolve_alpha(config, &cert)?;
    let x_star = instance.x_star();
    let solver_config = SolverConfig {
        alpha,
        max_iter: config.max_iter,
        consensus_tol: config.consensus_tol,
        gradient_tol: config.gradient_tol,
        record_every: config.record_every,
    };
    let q = instance.game.layout().total();
    let mut estimates_csv = estimates_header(q);
    let mut identity_max: f64 = 0.0;
    let start = init_state(&instance.game, instance.x0.clone())?;
    let game = &instance.game;
    let mut last_recorded = None;
    let outcome = run_from(game, &instance.weights, &solver_config, start, Some(&x_star), |s| {
        identity_max = identity_max.max(tracking_identity_residual(game, s));
        if s.k % config.record_every == 0 {
            push_estimates(&mut estimates_csv, s.k, &s.x);
            last_recorded = Some(s.k);
        }
    })?;
    let state = &outcome.state;
    if last_recorded != Some(state.k) {
        push_estimates(&mut estimates_csv, state.k, &state.x);
    }

    let bound = bound_matrix(&cert.ledger, alpha)?;
    let trajectory = if config.record_every == 1 {
        Some(check_trajectory_bound(
            &outcome.trace,
            &bound,
            default_trajectory_tol(&outcome.trace),
        )?)
    } else {
        None
    };
    let x1 = state.estimate(0);
    let summary = RunSummary {
        name: config.name.clone(),
        cluster_sizes: config.cluster_sizes(),
        alpha,
        alpha_source,
        iterations: state.k,
        converged: outcome.converged,
        final_consensus: crate::solver::raw_consensus(&state.x),
        deviation_from_agent1: deviation_from_agent1(&state.x),
        epsilon: (&x1 - &x_star).norm(),
        x_star: x_star.iter().copied().collect(),
        x_agent1: x1.iter().copied().collect(),
        rate: fit_linear_rate(&outcome.trace, config.rate_window.upper, config.rate_window.lower),
        optimality: verify_optimality(game, &state.x, OPTIMALITY_TOL),
        tracking_identity_max: identity_max,
        certificate: CertificateSection {
            run_alpha_certified: bound.rho < 1.0 - crate::certificate::CERTIFY_MARGIN,
            ledger: cert.ledger,
            certification: cert.certification,
            bound,
            trajectory,
        },
    };
    Ok(RunOutput {
        summary,
        trace: outcome.trace,
        estimates_csv,
    })
}

/// Iterations until `‖x_1(k) − x*‖₂ ≤ ε`, or `None` within `max_iter`.
pub fn iterations_to_epsilon(
    instance: &Instance,
    alpha: f64,
    epsilon: f64,
    max_iter: usize,
) -> Result<Option<usize>, ExperimentError> {
    let x_star = instance.x_star();
    let mut state = init_state(&instance.game, instance.x0.clone())?;
    loop {
        if (state.estimate(0) - &x_star).norm() <= epsilon {
            return Ok(Some(state.k));
        }
        if state.k >= max_iter {
            return Ok(None);
        }
        state = step(&state, &instance.game, &instance.weights, alpha)?;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareOutcome {
    pub alpha: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub dense: Option<usize>,
    pub leader_follower: Option<usize>,
}

impl CompareOutcome {
    /// The restricted topology needs at least as many iterations as the
    /// dense one. A count that never reached `ε` counts as infinite.
    pub fn ordering_holds(&self) -> bool {
        match (self.dense, self.leader_follower) {
            (Some(d), Some(l)) => l >= d,
            (Some(_), None) => true,
            (None, _) => false,
        }
    }
}

/// Iterations-to-ε of two instances built from the same config, computed
/// in parallel.
pub fn compare_instances(
    dense: &Instance,
    restricted: &Instance,
    alpha: f64,
    epsilon: f64,
    max_iter: usize,
) -> Result<CompareOutcome, ExperimentError> {
    let (d, l) = std::thread::scope(|s| {
        let d = s.spawn(|| iterations_to_epsilon(dense, alpha, epsilon, max_iter));
        let l = s.spawn(|| iterations_to_epsilon(restricted, alpha, epsilon, max_iter));
        (
            d.join().expect("dense arm panicked"),
            l.join().expect("leader-follower arm panicked"),
        )
    });
    Ok(CompareOutcome {
        alpha,
        epsilon,
        max_iter,
        dense: d?,
        leader_follower: l?,
    })
}

pub fn execute_compare(config: &ExperimentConfig) -> Result<CompareOutcome, ExperimentError> {
    let dense = Instance::build(config, false)?;
    let restricted = Instance::build(config, true)?;
    let alpha = match config.alpha {
        AlphaSpec::Value(a) => a,
        AlphaSpec::Certify => resolve_alpha(config, &certify(&dense)?)?.0,
    };
    compare_instances(&dense, &restricted, alpha, config.compare_epsilon, config.compare_max_iter)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub rows: usize,
    pub rate: RateFitOutcome,
}

/// Rate fit of a stored trace plus its long-form trajectory CSV.
pub fn execute_report(trace_csv: &str, window: RateWindow) -> Result<(TraceReport, String), ExperimentError> {
    let trace = IterateTrace::parse_csv(trace_csv)?;
    let report = TraceReport {
        rows: trace.rows.len(),
        rate: fit_linear_rate(&trace, window.upper, window.lower),
    };
    Ok((report, trajectory_csv(&trace)))
}

#[cfg(test)]
mod tests;
