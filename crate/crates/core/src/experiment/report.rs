//! Plain-text reports with a trailing JSON section.

use std::fmt::Write as _;

use serde_json::json;

use super::{CertifyOutcome, CompareOutcome, ExperimentConfig, RunSummary, TraceReport};
use crate::certificate::ConstantsLedger;
use crate::solver::IterateTrace;

/// Line separating the text part of a report from its JSON part.
pub const REPORT_JSON_MARKER: &str = "--- json ---";

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn write_ledger(out: &mut String, l: &ConstantsLedger) {
    let d = &l.delta;
    let _ = writeln!(out, "  agents, clusters      {}, {}", l.agents, l.clusters);
    let _ = writeln!(out, "  sigma_R               {:.6e}", l.sigma_r);
    let _ = writeln!(out, "  sigma_C               {:.6e}", l.sigma_c);
    let _ = writeln!(out, "  sigma_2               {:.6e}", l.sigma_2);
    let _ = writeln!(out, "  sigma_I               {:.6e}", l.sigma_i);
    let _ = writeln!(
        out,
        "  delta u,F F,u v,F F,v {:.6e} {:.6e} {:.6e} {:.6e}",
        d.delta_u_f, d.delta_f_u, d.delta_v_f, d.delta_f_v
    );
    let _ = writeln!(out, "  L, L_v                {:.6e}, {:.6e}", l.lipschitz, l.lipschitz_v);
    let _ = writeln!(out, "  mu                    {:.6e}", l.mu);
    let etas: Vec<String> = l.eta.iter().map(|e| format!("{e:.6e}")).collect();
    let _ = writeln!(out, "  eta^h                 {}", etas.join(" "));
    let _ = writeln!(out, "  eta_lower             {:.6e}", l.eta_lower);
    let _ = writeln!(out, "  |1u^T|_2              {:.6e}", l.norm_one_u);
    let _ = writeln!(out, "  |R - I|_2, |R|_2      {:.6e}, {:.6e}", l.norm_r_minus_i, l.norm_r);
}

fn json_section(out: &mut String, value: serde_json::Value) {
    let _ = writeln!(out, "\n{REPORT_JSON_MARKER}");
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(&value).expect("report serializes"));
}

pub fn render_run_text(config: &ExperimentConfig, s: &RunSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "run report: {}", s.name.as_deref().unwrap_or("unnamed"));
    let sizes: Vec<String> = s.cluster_sizes.iter().map(|n| n.to_string()).collect();
    let _ = writeln!(out, "clusters: {} (sizes {})", s.cluster_sizes.len(), sizes.join(", "));
    let _ = writeln!(out, "step size: {} ({:?})", s.alpha, s.alpha_source);
    let _ = writeln!(
        out,
        "iterations: {} ({})",
        s.iterations,
        if s.converged { "stopping tolerances met" } else { "iteration limit" }
    );
    let _ = writeln!(out, "final consensus residual max_i |x_i - x_1|_inf: {:.6e}", s.final_consensus);
    let max_dev = s.deviation_from_agent1.iter().copied().fold(0.0, f64::max);
    let _ = writeln!(out, "largest per-dimension sum_i |x_1 - x_i|: {max_dev:.6e}");
    let _ = writeln!(out, "epsilon = |x_1 - x*|_2: {:.6e}", s.epsilon);
    let _ = writeln!(out, "rate fit: {}", s.rate);
    let o = &s.optimality;
    let _ = writeln!(
        out,
        "optimality (tol 1e-6): consensus {}, social welfare {}, Nash equilibrium {}",
        yes_no(o.consensus),
        yes_no(o.social_welfare),
        yes_no(o.nash_equilibrium)
    );
    let _ = writeln!(out, "tracking identity max residual: {:.3e}", s.tracking_identity_max);

    let c = &s.certificate;
    let _ = writeln!(out, "\ncertificate");
    write_ledger(&mut out, &c.ledger);
    match c.certification {
        Some(cert) => {
            let _ = writeln!(out, "  certified alpha       {:.6e} (rho {:.12})", cert.alpha, cert.rho);
        }
        None => {
            let _ = writeln!(out, "  certified alpha       none certified on the grid");
        }
    }
    let _ = writeln!(out, "  A(alpha) at alpha = {}:", c.bound.alpha);
    for row in &c.bound.entries {
        let _ = writeln!(out, "    {:.6e} {:.6e} {:.6e}", row[0], row[1], row[2]);
    }
    let _ = writeln!(out, "  rho(A(alpha))         {:.12}", c.bound.rho);
    if c.run_alpha_certified {
        let _ = writeln!(out, "  the step size used is certified");
    } else {
        let _ = writeln!(
            out,
            "  the step size used is not certified; the bound is sufficient only, so the run may still converge"
        );
    }
    match &c.trajectory {
        Some(t) if t.passed() => {
            let _ = writeln!(out, "  trajectory bound: holds on all {} steps (tol {:.3e})", t.steps_checked, t.tol);
        }
        Some(t) => {
            let first = t.first_violation.expect("violations have a first");
            let _ = writeln!(
                out,
                "  trajectory bound: {} violations over {} steps, first at k = {} component {} ({:.6e} > {:.6e})",
                t.violations, t.steps_checked, first.k, first.component, first.lhs, first.rhs
            );
        }
        None => {
            let _ = writeln!(out, "  trajectory bound: not checked (record_every > 1)");
        }
    }
    json_section(
        &mut out,
        json!({ "summary": s, "config_toml": config.to_toml() }),
    );
    out
}

pub fn render_certify_text(config: &ExperimentConfig, c: &CertifyOutcome) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "certificate: {}", config.name.as_deref().unwrap_or("unnamed"));
    write_ledger(&mut out, &c.ledger);
    match c.certification {
        Some(cert) => {
            let _ = writeln!(out, "certified alpha: {} (rho {:.12})", cert.alpha, cert.rho);
        }
        None => {
            let _ = writeln!(out, "certified alpha: none certified");
        }
    }
    let _ = writeln!(out, "\n{:>14}  rho(A(alpha))", "alpha");
    for p in &c.table {
        match p.rho {
            Some(rho) => {
                let _ = writeln!(out, "{:>14.6e}  {:.12}", p.alpha, rho);
            }
            None => {
                let _ = writeln!(out, "{:>14.6e}  undefined", p.alpha);
            }
        }
    }
    json_section(&mut out, json!({ "certify": c, "config_toml": config.to_toml() }));
    out
}

pub fn render_compare_text(config: &ExperimentConfig, c: &CompareOutcome) -> String {
    let count = |v: Option<usize>| v.map_or_else(|| format!("not reached in {}", c.max_iter), |k| k.to_string());
    let mut out = String::new();
    let _ = writeln!(out, "compare: {}", config.name.as_deref().unwrap_or("unnamed"));
    let _ = writeln!(out, "alpha {}, epsilon {:e}", c.alpha, c.epsilon);
    let _ = writeln!(out, "iterations to |x_1 - x*|_2 <= epsilon");
    let _ = writeln!(out, "  dense inter-cluster graph: {}", count(c.dense));
    let _ = writeln!(out, "  leader-follower graph:     {}", count(c.leader_follower));
    let _ = writeln!(
        out,
        "leader-follower needs at least as many iterations: {}",
        yes_no(c.ordering_holds())
    );
    json_section(&mut out, json!({ "compare": c, "config_toml": config.to_toml() }));
    out
}

pub fn render_trace_report(r: &TraceReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "trace rows: {}", r.rows);
    let _ = writeln!(out, "rate fit: {}", r.rate);
    json_section(&mut out, json!({ "report": r }));
    out
}

/// JSON part of a rendered report.
pub fn parse_report_json(text: &str) -> Option<serde_json::Value> {
    let (_, tail) = text.split_once(REPORT_JSON_MARKER)?;
    serde_json::from_str(tail.trim()).ok()
}

/// `k,dimension,value` rows of the consensus-averaged decision, one line
/// per coordinate and recorded iteration.
pub fn trajectory_csv(trace: &IterateTrace) -> String {
    let mut out = String::from("k,dimension,value\n");
    for row in &trace.rows {
        for (d, v) in row.x_mean.iter().enumerate() {
            let _ = writeln!(out, "{},{d},{v}", row.k);
        }
    }
    out
}
