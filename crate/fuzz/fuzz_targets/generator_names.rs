#![no_main]

use libfuzzer_sys::fuzz_target;
use sasl_core::harness::{Topology, Variant};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(v) = s.parse::<Variant>() {
        assert_eq!(v.name(), s);
        assert_eq!(v.to_string().parse::<Variant>(), Ok(v));
    }
    let _ = s.parse::<Topology>();
});
