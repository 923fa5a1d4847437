//! Scenario runner for the giant-atom simulations in `lhsm-core`: JSON
//! configs in, CSV tables, SVG plots and a manifest out.

pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod scenario;

pub use config::{Overrides, ScenarioConfig, ScenarioKind};
pub use error::HarnessError;
pub use output::{Cell, ResultSet, Table};
pub use scenario::{run_scenario, sweep};
