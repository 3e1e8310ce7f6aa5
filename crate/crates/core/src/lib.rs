//! Set-based safety shield for a planar point robot.
//!
//! The crate is `no_std` (it needs `alloc`) and contains every algorithmic
//! piece of the simulator: planar geometry, the point-robot dynamics with its
//! failsafe controller, reachable occupancies, the per-step shield, the two
//! intervention-reduction filters (action replacement and action projection),
//! the episodic goal task and the scripted policies. File formats, the CLI
//! and the batch harness live in the `shieldsim` crate.

#![no_std]
#![warn(missing_debug_implementations)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod math;

pub mod dynamics;
pub mod env;
pub mod filters;
pub mod geometry;
pub mod metrics;
pub mod policy;
pub mod reachability;
pub mod shield;

pub use dynamics::{Action, Control, DynamicsParams, RobotModel, RobotState, TimeGrid, Trajectory, TrajectoryKind};
pub use env::{Env, EnvConfig, EnvError, Mode, Observation, ShieldStep, StepRecord};
pub use filters::{FilterConfig, FilterOutcome, Projection};
pub use geometry::{Ball, Capsule, Point2, Segment, Shape};
pub use metrics::{EpisodeMetrics, Summary};
pub use reachability::{Motion, Obstacle, ObstacleKind, ObstacleView};
pub use shield::{ShieldDecision, ShieldMode, ShieldState, Substitution, Verdict};
