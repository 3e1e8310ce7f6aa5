//! Scripted policies that stand in for a trained agent.

use rand::Rng;

use crate::dynamics::{Action, DynamicsParams};
use crate::env::Observation;
use crate::filters;
use crate::geometry::Vector2;
use crate::math;

/// Proportional controller toward the goal with a speed governor.
///
/// The desired velocity points at the goal with a speed limited by the
/// cruise speed and by the distance left to brake. Thrust acts only along the
/// heading, so the heading axis (forward or reverse, whichever is closer) is
/// turned toward the velocity error, biased toward the goal direction, and
/// thrust is the velocity error projected on the heading.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct GoalSeek {
    /// Yaw fraction per radian of axis error.
    pub yaw_gain: f64,
    /// Thrust fraction per m/s of velocity error.
    pub speed_gain: f64,
    /// Top approach speed (m/s).
    pub cruise_speed: f64,
    /// Fraction of the thrust limit assumed for slowing down near the goal.
    pub braking_share: f64,
    /// Weight of the goal direction in the heading target.
    pub goal_bias: f64,
    /// Axis error (rad) beyond which no thrust is given; thrust fades
    /// linearly to zero at this error.
    pub thrust_cone: f64,
}

impl Default for GoalSeek {
    fn default() -> Self {
        GoalSeek {
            yaw_gain: 10.0,
            speed_gain: 20.0,
            cruise_speed: 0.3,
            braking_share: 0.5,
            goal_bias: 0.5,
            thrust_cone: 0.15,
        }
    }
}

impl GoalSeek {
    pub fn act(&self, obs: &Observation, params: &DynamicsParams) -> Action {
        let rel = obs.goal_offset;
        let d = rel.norm();
        let h = obs.robot.heading_dir();
        let v_des = self.cruise_speed.min(math::sqrt(2.0 * self.braking_share * params.u1_max * d));
        let want: Vector2 = if d > 0.0 { rel * (v_des / d) } else { Vector2::ORIGIN };
        let err = want - obs.robot.velocity;
        let aim = err + want * self.goal_bias;
        let axis_error = if aim.norm_sq() > 0.0 {
            math::wrap_half_angle(math::atan2(aim.y, aim.x) - obs.robot.heading)
        } else {
            0.0
        };
        let gate = (1.0 - axis_error.abs() / self.thrust_cone).max(0.0);
        Action::new(self.speed_gain * gate * err.dot(h), self.yaw_gain * axis_error)
    }
}

/// Uniform action on the unit box.
pub fn random_action<R: Rng + ?Sized>(rng: &mut R) -> Action {
    filters::sample_action(rng)
}
