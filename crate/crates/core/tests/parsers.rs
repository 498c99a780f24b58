//! The fuzz-target properties, replayed on the checked-in corpus seeds and
//! on every prefix of each seed.

use std::path::{Path, PathBuf};

use cluster_game::experiment::ExperimentConfig;
use cluster_game::solver::{fit_linear_rate, parse_checkpoint, write_checkpoint, IterateTrace};
use cluster_game::topology::Digraph;

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let path = e.unwrap().path();
            let text = std::fs::read_to_string(&path).unwrap();
            (path, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

fn prefixes(text: &str) -> impl Iterator<Item = &str> {
    (0..=text.len()).filter(|&i| text.is_char_boundary(i)).map(|i| &text[..i])
}

fn edge_list(text: &str) -> bool {
    match Digraph::parse_edge_list(text, None) {
        Ok(g) => {
            assert_eq!(Digraph::parse_edge_list(&g.to_edge_list(), None).unwrap(), g);
            true
        }
        Err(_) => false,
    }
}

fn config(text: &str) -> bool {
    match ExperimentConfig::from_toml_str(text) {
        Ok(c) => {
            assert_eq!(c.coefficients().len(), c.agent_count());
            assert_eq!(ExperimentConfig::from_toml_str(&c.to_toml()).unwrap(), c);
            true
        }
        Err(_) => false,
    }
}

fn trace(text: &str) -> bool {
    match IterateTrace::parse_csv(text) {
        Ok(t) => {
            let _ = fit_linear_rate(&t, 1e-1, 1e-8);
            assert_eq!(IterateTrace::parse_csv(&t.to_csv().unwrap()).unwrap(), t);
            true
        }
        Err(_) => false,
    }
}

fn checkpoint(text: &str) -> bool {
    match parse_checkpoint(text) {
        Ok(s) => {
            let written = write_checkpoint(&s);
            assert_eq!(write_checkpoint(&parse_checkpoint(&written).unwrap()), written);
            true
        }
        Err(_) => false,
    }
}

fn replay(target: &str, check: fn(&str) -> bool) {
    for (path, text) in seeds(target) {
        assert!(check(&text), "seed {} should parse", path.display());
        for p in prefixes(&text) {
            check(p);
        }
    }
}

#[test]
fn edge_list_seeds() {
    replay("edge_list", edge_list);
}

#[test]
fn config_seeds() {
    replay("config", config);
}

#[test]
fn trace_csv_seeds() {
    replay("trace_csv", trace);
}

#[test]
fn checkpoint_seeds() {
    replay("checkpoint", checkpoint);
}

#[test]
fn shipped_configs_match_config_seeds() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for (path, text) in seeds("config") {
        let shipped = std::fs::read_to_string(configs.join(path.file_name().unwrap())).unwrap();
        assert_eq!(shipped, text, "{}", path.display());
    }
}

#[test]
fn malformed_inputs_are_rejected() {
    assert!(!edge_list("0 1 2\n"));
    assert!(!edge_list("# nodes x\n"));
    assert!(!edge_list("0 0\n"));
    assert!(!config("price_constant = \"high\"\n"));
    assert!(!trace("k,e_opt\n"));
    assert!(!trace("k,e_opt,e_cons,e_track,raw_consensus,mapping_norm\n1,1,1,1,1,1\n0,1,1,1,1,1\n"));
    assert!(!checkpoint("cluster-game-checkpoint 1\nk 0\nclusters 1\nmatrix x 99999999 99999999\n"));
}
