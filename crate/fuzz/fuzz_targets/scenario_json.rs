#![no_main]

use libfuzzer_sys::fuzz_target;
use sasl_core::harness::{analyze, run_scenario, RunOptions};
use sasl_core::{validate_scenario, ScenarioConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(mut cfg) = ScenarioConfig::from_json_str(text) else { return };
    if !validate_scenario(&cfg).is_empty() {
        return;
    }
    // Keep the expensive stages bounded.
    if cfg.n_agents() > 8 || cfg.n_hypotheses() > 8 || cfg.likelihoods.iter().any(|l| l.alphabet_size() > 16) {
        return;
    }
    let _ = analyze(&cfg);
    cfg.horizon = cfg.horizon.min(20);
    let _ = run_scenario(&cfg, &RunOptions::default());
});
