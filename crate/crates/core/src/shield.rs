//! The per-step safety shield.
//!
//! Every shield step the shield builds a *shielded trajectory* (one step of
//! the requested control followed by a full failsafe), verifies that its
//! robot occupancy is disjoint from all obstacle occupancies, and commits it.
//! When verification fails it keeps executing the last committed trajectory,
//! which was verified when it was committed and ends at rest outside every
//! obstacle envelope. Starting from such a state, safety holds by induction.

use alloc::vec::Vec;

use crate::dynamics::{self, Control, RobotModel, RobotState, Trajectory, TrajectoryKind};
use crate::geometry::{self, Ball, Shape};
use crate::reachability::{self, ObstacleView};

/// Broad-phase chunk length as a fraction of elapsed steps.
const CHUNK_RATIO: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Substitution {
    /// The agent's own action.
    #[default]
    Original,
    Replaced,
    Projected,
    ZeroAction,
}

/// First offending step of a trajectory. `step == len` refers to the terminal
/// rest state; `obstacle` is `None` when the trajectory does not end at rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub step: usize,
    pub obstacle: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Safe,
    Unsafe(Violation),
}

impl Verdict {
    pub fn is_safe(&self) -> bool {
        matches!(self, Verdict::Safe)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ShieldError {
    #[error("initial state is not verifiably safe (step {}, obstacle {:?})", .0.step, .0.obstacle)]
    UnsafeStart(Violation),
}

/// One step of `u` followed by a full failsafe: `1 + k_failsafe` steps.
pub fn build_shielded(model: &RobotModel, s0: &RobotState, u: Control) -> Trajectory {
    dynamics::intended_then_failsafe(model, s0, u, 1, TrajectoryKind::Shielded)
}

/// Checks the trajectory's robot occupancy against the obstacles' occupancies
/// predicted from their observed state, and its final rest disc against every
/// obstacle envelope. Goals and buttons are ignored.
pub fn verify(model: &RobotModel, traj: &Trajectory, obstacles: &[ObstacleView]) -> Verdict {
    let r = model.occupancy_radius();
    let len = traj.len();
    let relevant: Vec<&ObstacleView> = obstacles.iter().filter(|o| o.kind.is_shielded()).collect();

    let chunks = reachability::broad_phase_chunks(traj, r, CHUNK_RATIO);
    let extent = Shape::Ball(reachability::chunks_extent(traj.state(0).position, &chunks));
    let horizon = traj.time(len);
    let candidates: Vec<&ObstacleView> =
        relevant.iter().copied().filter(|o| o.region(horizon).intersects(&extent)).collect();

    if !candidates.is_empty() {
        for chunk in &chunks {
            let shape = Shape::Capsule(chunk.capsule);
            let until = traj.time(chunk.last);
            let flagged: Vec<&ObstacleView> =
                candidates.iter().copied().filter(|o| o.region(until).intersects(&shape)).collect();
            if flagged.is_empty() {
                continue;
            }
            for i in chunk.first..chunk.last {
                let cap = Shape::Capsule(reachability::step_capsule(traj, i, r));
                let t = traj.time(i + 1);
                if let Some(o) = flagged.iter().find(|o| o.region(t).intersects(&cap)) {
                    return Verdict::Unsafe(Violation { step: i, obstacle: Some(o.id) });
                }
            }
        }
    }

    if !traj.ends_at_rest() {
        return Verdict::Unsafe(Violation { step: len, obstacle: None });
    }
    let rest = Shape::Ball(Ball::new(traj.final_state().position, r));
    if let Some(o) = relevant.iter().find(|o| geometry::intersects(&rest, &Shape::Ball(o.envelope))) {
        return Verdict::Unsafe(Violation { step: len, obstacle: Some(o.id) });
    }
    Verdict::Safe
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShieldMode {
    Nominal,
    FailsafeExecuting,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShieldDecision {
    pub executed_control: Control,
    /// Failsafe newly engaged during the current agent step.
    pub intervention: bool,
    pub substituted: Substitution,
    pub verdict: Verdict,
}

/// Shield bookkeeping for one robot.
#[derive(Debug, Clone)]
pub struct ShieldState {
    committed: Trajectory,
    cursor: usize,
    mode: ShieldMode,
    intervened_this_action: bool,
}

impl ShieldState {
    /// Commits the failsafe from `s0` (a stationary plan when starting at rest).
    pub fn initialize(model: &RobotModel, s0: &RobotState, obstacles: &[ObstacleView]) -> Result<Self, ShieldError> {
        let committed = dynamics::failsafe_trajectory(model, s0);
        if let Verdict::Unsafe(v) = verify(model, &committed, obstacles) {
            return Err(ShieldError::UnsafeStart(v));
        }
        Ok(ShieldState { committed, cursor: 0, mode: ShieldMode::Nominal, intervened_this_action: false })
    }

    pub fn committed(&self) -> &Trajectory {
        &self.committed
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn mode(&self) -> ShieldMode {
        self.mode
    }

    /// Marks the start of a new agent step for intervention counting.
    pub fn begin_action(&mut self) {
        self.intervened_this_action = false;
    }

    /// One shield update from the current robot state.
    pub fn step(
        &mut self,
        model: &RobotModel,
        s_now: &RobotState,
        u: Control,
        substituted: Substitution,
        obstacles: &[ObstacleView],
    ) -> ShieldDecision {
        let candidate = build_shielded(model, s_now, u);
        let verdict = verify(model, &candidate, obstacles);
        if verdict.is_safe() {
            let executed_control = candidate.control(0);
            self.committed = candidate;
            self.cursor = 1;
            self.mode = ShieldMode::Nominal;
            return ShieldDecision { executed_control, intervention: false, substituted, verdict };
        }
        debug_assert!(
            self.committed.state(self.cursor.min(self.committed.len())).position.distance(s_now.position) < 1e-9
        );
        let executed_control =
            if self.cursor < self.committed.len() { self.committed.control(self.cursor) } else { Control::ZERO };
        self.cursor = (self.cursor + 1).min(self.committed.len());
        self.mode = ShieldMode::FailsafeExecuting;
        let intervention = !self.intervened_this_action;
        self.intervened_this_action = true;
        ShieldDecision { executed_control, intervention, substituted, verdict }
    }
}
