#![no_main]

use cluster_game::topology::Digraph;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(g) = Digraph::parse_edge_list(text, None) {
        let again = Digraph::parse_edge_list(&g.to_edge_list(), None).expect("written edge list parses");
        assert_eq!(g, again);
    }
});
