#![no_main]

use cluster_game::solver::{parse_checkpoint, write_checkpoint};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(state) = parse_checkpoint(text) {
        let written = write_checkpoint(&state);
        assert_eq!(write_checkpoint(&parse_checkpoint(&written).expect("written checkpoint parses")), written);
    }
});
