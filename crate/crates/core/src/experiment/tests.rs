use super::config::tests::SAMPLE;
use super::*;

fn sample() -> ExperimentConfig {
    ExperimentConfig::from_toml_str(SAMPLE).unwrap()
}

#[test]
fn runs_are_bit_identical() {
    let c = sample();
    let a = execute_run(&c).unwrap();
    let b = execute_run(&c).unwrap();
    assert_eq!(a.trace.to_csv().unwrap(), b.trace.to_csv().unwrap());
    assert_eq!(a.estimates_csv, b.estimates_csv);
    assert_eq!(a.summary, b.summary);
}

#[test]
fn report_embeds_round_trippable_config() {
    let c = sample();
    let out = execute_run(&c).unwrap();
    let text = render_run_text(&c, &out.summary);
    let json = parse_report_json(&text).unwrap();
    let embedded = json["config_toml"].as_str().unwrap();
    assert_eq!(ExperimentConfig::from_toml_str(embedded).unwrap(), c);
    let summary: RunSummary = serde_json::from_value(json["summary"].clone()).unwrap();
    assert_eq!(summary, out.summary);
}

#[test]
fn certify_alpha_matches_certify_command() {
    let c = ExperimentConfig::from_toml_str(&SAMPLE.replace("alpha = 0.1", "alpha = \"certify\"")).unwrap();
    let cert = certify(&Instance::build(&c, false).unwrap()).unwrap();
    let expected = cert.certification.unwrap().alpha;
    let out = execute_run(&c).unwrap();
    assert_eq!(out.summary.alpha, expected);
    assert_eq!(out.summary.alpha_source, AlphaSource::Certified);
    assert!(out.summary.certificate.run_alpha_certified);
    let printed = parse_report_json(&render_certify_text(&c, &cert)).unwrap();
    assert_eq!(printed["certify"]["certification"]["alpha"].as_f64().unwrap(), expected);
}

#[test]
fn identical_arms_give_equal_counts() {
    let inst = Instance::build(&sample(), false).unwrap();
    let out = compare_instances(&inst, &inst, 0.1, 1e-3, 5000).unwrap();
    assert!(out.dense.is_some());
    assert_eq!(out.dense, out.leader_follower);
    assert!(out.ordering_holds());
}

#[test]
fn loose_epsilon_gives_zero_counts() {
    let c = sample();
    let dense = Instance::build(&c, false).unwrap();
    let lf = Instance::build(&c, true).unwrap();
    let out = compare_instances(&dense, &lf, 0.1, 1e6, 10).unwrap();
    assert_eq!((out.dense, out.leader_follower), (Some(0), Some(0)));
}

#[test]
fn validation_errors_exit_with_two() {
    let err = ExperimentConfig::from_toml_str(&SAMPLE.replace("price_constant = 20.0\n", "")).unwrap_err();
    let err = ExperimentError::from(err);
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("price_constant"), "{err}");

    let text = SAMPLE.replace(
        "size = 2\ncoefficient_seed = 4\ngraph = { kind = \"ring\" }",
        "size = 3\ncoefficient_seed = 4\ngraph = { kind = \"edges\", edges = [[0, 1], [1, 2]] }",
    );
    let err = execute_run(&ExperimentConfig::from_toml_str(&text).unwrap()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("cluster 0"), "{err}");
}

#[test]
fn divergence_exits_with_one_and_keeps_trace() {
    let c = ExperimentConfig::from_toml_str(&SAMPLE.replace("alpha = 0.1", "alpha = 50.0").replace("max_iter = 50", "max_iter = 5000")).unwrap();
    let err = execute_run(&c).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    match err {
        ExperimentError::Divergence { last_finite_k, trace } => {
            assert!(!trace.rows.is_empty());
            assert_eq!(trace.rows.last().unwrap().k, last_finite_k);
        }
        other => panic!("{other}"),
    }
}

#[test]
fn report_on_short_trace_is_insufficient() {
    let text = "k,e_opt,e_cons,e_track,raw_consensus,mapping_norm,x_mean_0\n0,1,1,1,1,1,0\n1,0.5,0.5,0.5,0.5,0.5,0\n";
    let (report, csv) = execute_report(text, RateWindow::default()).unwrap();
    assert_eq!(report.rows, 2);
    assert!(report.rate.fit().is_none());
    assert!(render_trace_report(&report).contains("insufficient data"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn report_on_converged_run_fits_rate() {
    let c = ExperimentConfig::from_toml_str(&SAMPLE.replace("max_iter = 50", "max_iter = 600")).unwrap();
    let out = execute_run(&c).unwrap();
    let (report, _) = execute_report(&out.trace.to_csv().unwrap(), c.rate_window).unwrap();
    let fit = report.rate.fit().unwrap();
    assert!(fit.slope < 0.0 && fit.r_squared >= 0.99, "{fit:?}");
    assert_eq!(report.rate, out.summary.rate);
}

#[test]
fn malformed_trace_exits_with_two() {
    let err = execute_report("k,e_opt\n0,x\n", RateWindow::default()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn leader_follower_restricts_inter_edges() {
    let c = sample();
    let topo = build_topology(&c, true).unwrap();
    let sizes = c.cluster_sizes();
    let leaders = [0, sizes[0]];
    let cluster_of = |i: usize| usize::from(i >= sizes[0]);
    for (from, to) in topo.global().edges() {
        if cluster_of(from) != cluster_of(to) {
            assert!(leaders.contains(&from) && leaders.contains(&to));
        }
    }
}
