//! Batch harness, command line, episode logs and the wire protocol for the
//! shieldsim simulator.

pub mod checks;
pub mod config;
pub mod harness;
pub mod log;
pub mod wire;

pub use config::{PolicyKind, RunConfig, RunFile};
pub use harness::{run_suite, SuiteResult};
pub use log::{render_svg, EpisodeLog};
