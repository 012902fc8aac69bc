//! Bundled scenarios.
//!
//! `example1` and `example2` are the three-agent triangle (agents 0 and 1 on
//! `theta2`, agent 2 on `theta3`). In `example1` agent 0 cannot tell `theta1`
//! from `theta2`; in `example2` agent 0 observes pure noise.

use crate::harness::{generate_section5_scenario, GeneratorParams, Topology, Variant};
use crate::model::ScenarioConfig;

pub const EXAMPLE1_JSON: &str = include_str!("../scenarios/example1.json");
pub const EXAMPLE2_JSON: &str = include_str!("../scenarios/example2.json");

pub const NAMES: [&str; 5] = ["example1", "example2", "distinct-states", "two-groups", "unidentifiable"];

pub fn example1() -> ScenarioConfig {
    ScenarioConfig::from_json_str(EXAMPLE1_JSON).expect("bundled scenario parses")
}

pub fn example2() -> ScenarioConfig {
    ScenarioConfig::from_json_str(EXAMPLE2_JSON).expect("bundled scenario parses")
}

/// Ten-agent family on the two-cluster preset with `q = 0.28`.
pub fn section5(variant: Variant, horizon: usize) -> ScenarioConfig {
    generate_section5_scenario(&GeneratorParams {
        variant,
        topology: Topology::TwoClusters,
        horizon,
        ..GeneratorParams::default()
    })
    .expect("preset parameters are consistent")
}

pub fn by_name(name: &str) -> Option<ScenarioConfig> {
    match name {
        "example1" => Some(example1()),
        "example2" => Some(example2()),
        other => other.parse::<Variant>().ok().map(|v| section5(v, 1000)),
    }
}
