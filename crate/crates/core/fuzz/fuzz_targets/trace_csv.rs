#![no_main]

use cluster_game::solver::{fit_linear_rate, IterateTrace};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(trace) = IterateTrace::parse_csv(text) {
        let _ = fit_linear_rate(&trace, 1e-1, 1e-8);
        let written = trace.to_csv().expect("parsed trace serializes");
        assert_eq!(IterateTrace::parse_csv(&written).expect("written trace parses"), trace);
    }
});
