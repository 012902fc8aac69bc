#![no_main]

use libfuzzer_sys::fuzz_target;
use sasl_core::ScenarioConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = ScenarioConfig::from_json_str(text) {
            let again = ScenarioConfig::from_json_str(&cfg.to_json_pretty()).unwrap();
            assert_eq!(cfg, again);
        }
    }
});
