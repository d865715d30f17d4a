//! Scenario runner for the metric-space topologies of `lorentz-topology`.
//!
//! A scenario file names metrics and families on a chart and lists tasks
//! (norms, ball membership, convergence, equivalence, chains). The runner
//! judges each task against its expectation and writes JSON and CSV
//! reports.

pub mod geroch;
pub mod random;
pub mod report;
pub mod scenario;
pub mod suite;

/// The built-in Geroch scenario, as TOML.
pub const GEROCH_SCENARIO: &str = include_str!("../scenarios/geroch.toml");

pub fn geroch_scenario() -> scenario::Scenario {
    scenario::parse_scenario(GEROCH_SCENARIO).expect("the embedded scenario is valid")
}
