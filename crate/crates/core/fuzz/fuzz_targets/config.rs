#![no_main]

use cluster_game::experiment::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = ExperimentConfig::from_toml_str(text) {
        assert_eq!(config.coefficients().len(), config.agent_count());
        let again = ExperimentConfig::from_toml_str(&config.to_toml()).expect("written config parses");
        assert_eq!(config, again);
    }
});
