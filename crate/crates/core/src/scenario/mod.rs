//! Scenario files, figure presets, the end-to-end pipeline and sweeps.

pub mod config;
pub mod output;
pub mod presets;
pub mod run;
pub mod spin_check;
pub mod sweep;

pub use config::{parse_config, ScenarioConfig};
pub use output::{emit_outputs, write_trajectory_csv};
pub use presets::{preset, PRESETS};
pub use run::{run_scenario, RunResult};
pub use spin_check::{spin_check, SpinCheckReport};
pub use sweep::{run_sweep, SweepAxis, SweepRow};
