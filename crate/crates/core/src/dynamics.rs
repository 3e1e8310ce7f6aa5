//! Point-robot model, the shield time grid, trajectories and the failsafe
//! controller.
//!
//! The robot state is `x = [p, v, φ]` with `φ̇ = u2`, `v̇ = R(φ)·[u1, 0]ᵀ`,
//! `ṗ = v`. Controls are held constant over a shield step and the state is
//! advanced with the exact solution of that system, so grid states are samples
//! of the continuous trajectory.

use alloc::vec::Vec;

use crate::geometry::{Point2, Vector2};
use crate::math;

/// Speeds below this are flushed to exactly zero at the end of a step.
pub const REST_SPEED: f64 = 1e-12;

/// Residual heading error (rad) at which the failsafe stops rotating.
const ALIGN_EPS: f64 = 1e-14;

/// Absolute slack (m) on robot capsules for floating-point rounding in
/// positions; the linearisation bound is tight for straight full thrust.
pub const ROUNDING_GUARD: f64 = 1e-12;

/// Relative slack on control bounds for values produced by division.
const BOUND_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("control ({thrust}, {yaw_rate}) exceeds the actuator limits")]
    ControlOutOfBounds { thrust: f64, yaw_rate: f64 },
    #[error("invalid time grid: {0}")]
    InvalidGrid(&'static str),
    #[error("invalid dynamics parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DynamicsParams {
    /// Bound on |u1| (m/s²).
    pub u1_max: f64,
    /// Bound on |u2| (rad/s).
    pub u2_max: f64,
    pub mass: f64,
    /// Thrust is clamped so that |v| never exceeds this (m/s).
    pub speed_cap: f64,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        let mass = 1.0;
        DynamicsParams { u1_max: 0.05 / mass, u2_max: 0.05 / mass, mass, speed_cap: 0.5 }
    }
}

impl DynamicsParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.u1_max > 0.0 && self.u2_max > 0.0) {
            return Err(DynamicsError::InvalidParams("actuator limits must be positive"));
        }
        if !(self.mass > 0.0) {
            return Err(DynamicsError::InvalidParams("mass must be positive"));
        }
        if !(self.speed_cap > 0.0 && self.speed_cap.is_finite()) {
            return Err(DynamicsError::InvalidParams("speed cap must be positive and finite"));
        }
        Ok(())
    }
}

/// Shield step `dt`, shield steps per agent action `L`, failsafe horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub steps_per_action: usize,
    pub failsafe_steps: usize,
}

impl TimeGrid {
    /// Steps needed to align with the travel axis (at most π/2) and brake from
    /// the speed cap.
    pub fn min_failsafe_steps(params: &DynamicsParams, dt: f64) -> usize {
        let brake = math::ceil(params.speed_cap / (params.u1_max * dt));
        let rotate = math::ceil(math::FRAC_PI_2 / (params.u2_max * dt));
        brake as usize + rotate as usize
    }

    pub fn new(
        params: &DynamicsParams,
        dt: f64,
        steps_per_action: usize,
        failsafe_steps: usize,
    ) -> Result<Self, DynamicsError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(DynamicsError::InvalidGrid("dt must be positive"));
        }
        if steps_per_action == 0 {
            return Err(DynamicsError::InvalidGrid("at least one shield step per action"));
        }
        if failsafe_steps < Self::min_failsafe_steps(params, dt) {
            return Err(DynamicsError::InvalidGrid("failsafe horizon too short to reach rest"));
        }
        Ok(TimeGrid { dt, steps_per_action, failsafe_steps })
    }

    /// Grid with the minimal failsafe horizon plus two steps of margin.
    pub fn with_default_failsafe(
        params: &DynamicsParams,
        dt: f64,
        steps_per_action: usize,
    ) -> Result<Self, DynamicsError> {
        Self::new(params, dt, steps_per_action, Self::min_failsafe_steps(params, dt) + 2)
    }

    /// Duration of one agent action.
    pub fn action_duration(&self) -> f64 {
        self.dt * self.steps_per_action as f64
    }
}

/// Everything the shield needs to know about the robot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotModel {
    pub params: DynamicsParams,
    pub grid: TimeGrid,
    /// Radius of the robot's disc footprint (m).
    pub radius: f64,
}

impl RobotModel {
    pub fn new(params: DynamicsParams, grid: TimeGrid, radius: f64) -> Result<Self, DynamicsError> {
        params.validate()?;
        if !(radius >= 0.0) {
            return Err(DynamicsError::InvalidParams("robot radius must be non-negative"));
        }
        Ok(RobotModel { params, grid, radius })
    }

    /// Default desk-scale robot: dt = 0.01 s, ten shield steps per action,
    /// 0.1 m radius.
    pub fn desk_default() -> Self {
        let params = DynamicsParams::default();
        let grid = TimeGrid::with_default_failsafe(&params, 0.01, 10).expect("default grid is valid");
        RobotModel { params, grid, radius: 0.1 }
    }

    /// Linearisation error added to every capsule.
    pub fn zeta(&self) -> f64 {
        crate::reachability::linearization_error(self.grid.dt, self.params.u1_max * self.params.mass, self.params.mass)
    }

    /// Radius of the per-step robot capsules: footprint, linearisation error
    /// and a rounding guard.
    pub fn occupancy_radius(&self) -> f64 {
        self.radius + self.zeta() + ROUNDING_GUARD
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RobotState {
    pub position: Point2,
    pub velocity: Vector2,
    /// Heading in (−π, π].
    pub heading: f64,
}

impl RobotState {
    pub fn at_rest(position: Point2, heading: f64) -> Self {
        RobotState { position, velocity: Vector2::ORIGIN, heading: math::wrap_angle(heading) }
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }

    pub fn is_at_rest(&self) -> bool {
        self.velocity == Vector2::ORIGIN
    }

    /// Unit vector along the heading.
    pub fn heading_dir(&self) -> Vector2 {
        Point2::from_angle(self.heading)
    }

    /// Velocity component along the heading.
    pub fn forward_speed(&self) -> f64 {
        self.velocity.dot(self.heading_dir())
    }
}

/// Body-frame thrust `u1` (m/s²) and yaw rate `u2` (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Control {
    pub thrust: f64,
    pub yaw_rate: f64,
}

impl Control {
    pub const ZERO: Control = Control { thrust: 0.0, yaw_rate: 0.0 };

    pub const fn new(thrust: f64, yaw_rate: f64) -> Self {
        Control { thrust, yaw_rate }
    }

    pub fn within(&self, params: &DynamicsParams) -> bool {
        self.thrust.abs() <= params.u1_max * (1.0 + BOUND_SLACK)
            && self.yaw_rate.abs() <= params.u2_max * (1.0 + BOUND_SLACK)
    }
}

/// Normalised agent action: thrust and yaw-rate fractions in [−1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Action {
    pub thrust: f64,
    pub yaw: f64,
}

impl Action {
    pub const ZERO: Action = Action { thrust: 0.0, yaw: 0.0 };

    /// Builds an action, clamping both components to the unit box. NaN maps to 0.
    pub fn new(thrust: f64, yaw: f64) -> Self {
        let c = |x: f64| if x.is_nan() { 0.0 } else { x.clamp(-1.0, 1.0) };
        Action { thrust: c(thrust), yaw: c(yaw) }
    }

    pub fn to_control(self, params: &DynamicsParams) -> Control {
        let a = Action::new(self.thrust, self.yaw);
        Control::new(a.thrust * params.u1_max, a.yaw * params.u2_max)
    }

    pub fn from_control(u: Control, params: &DynamicsParams) -> Self {
        Action::new(u.thrust / params.u1_max, u.yaw_rate / params.u2_max)
    }
}

/// Coefficients of the zero-order-hold solution for yaw angle `θ = u2·τ`:
/// `(sin θ/θ, (1−cos θ)/θ, (1−cos θ)/θ², (θ−sin θ)/θ²)`.
fn zoh_coefficients(theta: f64) -> (f64, f64, f64, f64) {
    if theta.abs() < 1e-2 {
        let t2 = theta * theta;
        let s1 = 1.0 - t2 / 6.0 * (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0));
        let c2 = 0.5 - t2 / 24.0 * (1.0 - t2 / 30.0 * (1.0 - t2 / 56.0));
        let s2 = theta * (1.0 / 6.0 - t2 / 120.0 * (1.0 - t2 / 42.0 * (1.0 - t2 / 72.0)));
        (s1, theta * c2, c2, s2)
    } else {
        let (s, _) = math::sin_cos(theta);
        let h = math::sin(0.5 * theta);
        let one_minus_cos = 2.0 * h * h;
        (s / theta, one_minus_cos / theta, one_minus_cos / (theta * theta), (theta - s) / (theta * theta))
    }
}

/// Velocity change per unit thrust over `tau` under yaw rate `yaw_rate`.
fn thrust_velocity_gain(s: &RobotState, yaw_rate: f64, tau: f64) -> Vector2 {
    let (s1, c1, _, _) = zoh_coefficients(yaw_rate * tau);
    let (sp, cp) = math::sin_cos(s.heading);
    Point2::new(tau * s1, tau * c1).rotate_sc(sp, cp)
}

/// Exact solution of the point dynamics over `tau` with `u` held constant.
pub fn flow(s: &RobotState, u: Control, tau: f64) -> RobotState {
    let theta = u.yaw_rate * tau;
    let heading = math::wrap_angle(s.heading + theta);
    if u.thrust == 0.0 {
        return RobotState { position: s.position + s.velocity * tau, velocity: s.velocity, heading };
    }
    let (s1, c1, c2, s2) = zoh_coefficients(theta);
    let (sp, cp) = math::sin_cos(s.heading);
    let dv = Point2::new(u.thrust * tau * s1, u.thrust * tau * c1).rotate_sc(sp, cp);
    let dp = Point2::new(u.thrust * tau * tau * c2, u.thrust * tau * tau * s2).rotate_sc(sp, cp);
    RobotState { position: s.position + s.velocity * tau + dp, velocity: s.velocity + dv, heading }
}

/// The control actually applied over one step: thrust is reduced so the end
/// speed does not exceed the speed cap.
pub fn effective_control(params: &DynamicsParams, s: &RobotState, u: Control, dt: f64) -> Control {
    if u.thrust == 0.0 {
        return u;
    }
    let w = thrust_velocity_gain(s, u.yaw_rate, dt);
    let cap = params.speed_cap;
    if (s.velocity + w * u.thrust).norm_sq() <= cap * cap {
        return u;
    }
    // Solve |v + x·w|² = cap² for the root on the side of u.thrust.
    let a = w.norm_sq();
    let b = s.velocity.dot(w);
    let c = s.velocity.norm_sq() - cap * cap;
    let disc = b * b - a * c;
    let sign = u.thrust.signum();
    let x = if disc >= 0.0 {
        let root = if sign > 0.0 { (-b + math::sqrt(disc)) / a } else { (-b - math::sqrt(disc)) / a };
        if root * sign >= 0.0 {
            root
        } else {
            0.0
        }
    } else {
        // Already above the cap and unable to reach it: only allow speed-reducing thrust.
        let best = -b / a;
        if best * sign > 0.0 {
            best
        } else {
            0.0
        }
    };
    let thrust = if x.abs() < u.thrust.abs() { x } else { u.thrust };
    Control::new(thrust, u.yaw_rate)
}

/// Advances one shield step.
pub fn step(params: &DynamicsParams, s: &RobotState, u: Control, dt: f64) -> Result<RobotState, DynamicsError> {
    if !u.within(params) {
        return Err(DynamicsError::ControlOutOfBounds { thrust: u.thrust, yaw_rate: u.yaw_rate });
    }
    Ok(step_unchecked(params, s, u, dt))
}

pub(crate) fn step_unchecked(params: &DynamicsParams, s: &RobotState, u: Control, dt: f64) -> RobotState {
    if u == Control::ZERO && s.is_at_rest() {
        return *s;
    }
    settle(flow(s, effective_control(params, s, u, dt), dt))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TrajectoryKind {
    Intended,
    Failsafe,
    Shielded,
    Validation,
    Projected,
}

/// States on the shield grid with the piecewise-constant controls between them.
///
/// Stored as runs of one control. Single-step runs are produced by explicit
/// stepping; longer runs come from the failsafe (pure rotation, braking along
/// the heading, rest) and are evaluated in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    kind: TrajectoryKind,
    dt: f64,
    runs: Vec<Run>,
    end: RobotState,
}

/// `steps` shield steps from `start` under `applied` (the capped `control`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Run {
    pub first: usize,
    pub start: RobotState,
    pub control: Control,
    pub applied: Control,
    pub steps: usize,
}

impl Run {
    pub fn state_at(&self, j: usize, dt: f64) -> RobotState {
        if j == 0 || (self.applied == Control::ZERO && self.start.is_at_rest()) {
            return self.start;
        }
        settle(flow(&self.start, self.applied, j as f64 * dt))
    }

    /// Bound on how far positions within steps `a..=b` stray from the chord
    /// between the positions at `a` and `b`.
    pub fn chord_deviation(&self, a: usize, b: usize, dt: f64) -> f64 {
        if self.steps == 1 || self.applied.thrust == 0.0 {
            return 0.0;
        }
        let s = self.state_at(a, dt);
        let tau = (b - a) as f64 * dt;
        let h = s.heading_dir();
        let along = s.velocity.dot(h);
        let accel = self.applied.thrust;
        if self.applied.yaw_rate == 0.0 && along * (along + accel * tau) >= 0.0 {
            return s.velocity.cross(h).abs() * tau;
        }
        s.speed() * tau + 0.5 * accel.abs() * tau * tau
    }
}

fn settle(mut s: RobotState) -> RobotState {
    if s.velocity.norm() < REST_SPEED {
        s.velocity = Vector2::ORIGIN;
    }
    s
}

impl Trajectory {
    fn start(kind: TrajectoryKind, dt: f64, s0: RobotState) -> Self {
        Trajectory { kind, dt, runs: Vec::new(), end: s0 }
    }

    fn push(&mut self, params: &DynamicsParams, u: Control) -> RobotState {
        let applied = effective_control(params, &self.end, u, self.dt);
        self.push_run(u, applied, 1)
    }

    fn push_run(&mut self, control: Control, applied: Control, steps: usize) -> RobotState {
        let run = Run { first: self.len(), start: self.end, control, applied, steps };
        self.end = run.state_at(steps, self.dt);
        self.runs.push(run);
        self.end
    }

    /// Pads with zero-control rest steps up to `steps` logical steps.
    fn hold_until(&mut self, steps: usize) {
        debug_assert!(self.end.is_at_rest());
        let n = steps.saturating_sub(self.len());
        if n > 0 {
            self.push_run(Control::ZERO, Control::ZERO, n);
        }
    }

    /// Appends `tail`, whose first state must equal this trajectory's last.
    fn extend(mut self, tail: Trajectory, kind: TrajectoryKind) -> Trajectory {
        debug_assert_eq!(self.end, tail.state(0));
        let offset = self.len();
        self.runs.extend(tail.runs.iter().map(|r| Run { first: r.first + offset, ..*r }));
        self.end = tail.end;
        self.kind = kind;
        self
    }

    pub(crate) fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn kind(&self) -> TrajectoryKind {
        self.kind
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of logical steps (controls); there are `len() + 1` states.
    pub fn len(&self) -> usize {
        self.runs.last().map_or(0, |r| r.first + r.steps)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Trailing zero-control steps at rest.
    pub fn hold_steps(&self) -> usize {
        match self.runs.last() {
            Some(r) if r.applied == Control::ZERO && r.start.is_at_rest() => r.steps,
            _ => 0,
        }
    }

    /// Steps before the trailing hold.
    pub fn moving_len(&self) -> usize {
        self.len() - self.hold_steps()
    }

    fn run_at(&self, i: usize) -> &Run {
        let k = self.runs.partition_point(|r| r.first <= i);
        &self.runs[k - 1]
    }

    /// State at grid index `i` (0..=len).
    pub fn state(&self, i: usize) -> RobotState {
        let len = self.len();
        assert!(i <= len, "state index {i} beyond trajectory of {len} steps");
        if i == len {
            return self.end;
        }
        let r = self.run_at(i);
        r.state_at(i - r.first, self.dt)
    }

    /// Control applied on step `i` (0..len).
    pub fn control(&self, i: usize) -> Control {
        assert!(i < self.len(), "control index {i} beyond trajectory of {} steps", self.len());
        self.run_at(i).control
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn final_state(&self) -> &RobotState {
        &self.end
    }

    pub fn ends_at_rest(&self) -> bool {
        self.end.is_at_rest()
    }

    pub fn states(&self) -> impl Iterator<Item = RobotState> + '_ {
        (0..=self.len()).map(move |i| self.state(i))
    }

    pub fn controls(&self) -> impl Iterator<Item = Control> + '_ {
        (0..self.len()).map(move |i| self.control(i))
    }
}

/// `L` shield steps under one constant control.
pub fn intended_trajectory(model: &RobotModel, s0: &RobotState, u: Control) -> Trajectory {
    constant_control(model, s0, u, model.grid.steps_per_action, TrajectoryKind::Intended)
}

pub(crate) fn constant_control(
    model: &RobotModel,
    s0: &RobotState,
    u: Control,
    steps: usize,
    kind: TrajectoryKind,
) -> Trajectory {
    let mut traj = Trajectory::start(kind, model.grid.dt, *s0);
    for _ in 0..steps {
        traj.push(&model.params, u);
    }
    traj
}

/// Rotates to the travel axis, then brakes along it, each with whole steps at
/// the actuator limit and one fractional step.
fn align_and_brake(params: &DynamicsParams, traj: &mut Trajectory) {
    let dt = traj.dt;
    let s = traj.end;
    let err = math::wrap_half_angle(math::atan2(s.velocity.y, s.velocity.x) - s.heading);
    let whole = math::floor(err.abs() / (params.u2_max * dt)) as usize;
    if whole > 0 {
        let u = Control::new(0.0, params.u2_max.copysign(err));
        traj.push_run(u, u, whole);
    }
    let s = traj.end;
    let rest = math::wrap_half_angle(math::atan2(s.velocity.y, s.velocity.x) - s.heading);
    if rest.abs() > ALIGN_EPS {
        let u = Control::new(0.0, rest / dt);
        traj.push_run(u, u, 1);
    }

    let along = traj.end.forward_speed();
    let whole = math::floor(along.abs() / (params.u1_max * dt)) as usize;
    if whole > 0 {
        let u = Control::new(-params.u1_max.copysign(along), 0.0);
        traj.push_run(u, u, whole);
    }
    if !traj.end.is_at_rest() {
        let u = Control::new(-traj.end.forward_speed() / dt, 0.0);
        traj.push_run(u, u, 1);
    }
}

/// Rotate-then-brake manoeuvre to rest, padded to exactly `k_failsafe` steps.
///
/// If the horizon is too short (speed above the cap) the manoeuvre still runs
/// to rest and the trajectory is longer than `k_failsafe`.
pub fn failsafe_trajectory(model: &RobotModel, s0: &RobotState) -> Trajectory {
    let mut traj = Trajectory::start(TrajectoryKind::Failsafe, model.grid.dt, *s0);
    for _ in 0..4 {
        if traj.end.is_at_rest() {
            break;
        }
        align_and_brake(&model.params, &mut traj);
    }
    if traj.end.is_at_rest() {
        traj.hold_until(model.grid.failsafe_steps);
    }
    traj
}

/// A planned trajectory with the distance between its rest point and the target.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub trajectory: Trajectory,
    pub control: Control,
    pub terminal_distance: f64,
}

/// One constant control for `L` steps toward `target`, then the failsafe.
///
/// The control is a one-shot point-mass rule along the heading axis:
/// `u2 = clamp(bearing_error / T)`, `u1 = clamp(2·(d_h − v_h·T) / T²)` with
/// `T = L·dt`, `d_h` the target offset and `v_h` the velocity, both projected
/// on the heading.
pub fn plan_to_point(model: &RobotModel, s0: &RobotState, target: Point2) -> Plan {
    let p = &model.params;
    let horizon = model.grid.action_duration();
    let rel = target - s0.position;
    let bearing_error =
        if rel.norm_sq() == 0.0 { 0.0 } else { math::wrap_angle(math::atan2(rel.y, rel.x) - s0.heading) };
    let h = s0.heading_dir();
    let yaw_rate = (bearing_error / horizon).clamp(-p.u2_max, p.u2_max);
    let thrust = (2.0 * (rel.dot(h) - s0.velocity.dot(h) * horizon) / (horizon * horizon)).clamp(-p.u1_max, p.u1_max);
    let control = Control::new(thrust, yaw_rate);
    let head = constant_control(model, s0, control, model.grid.steps_per_action, TrajectoryKind::Projected);
    let tail = failsafe_trajectory(model, head.final_state());
    let trajectory = head.extend(tail, TrajectoryKind::Projected);
    let terminal_distance = trajectory.final_state().position.distance(target);
    Plan { trajectory, control, terminal_distance }
}

/// `D` steps under `u` followed by a full failsafe.
pub(crate) fn intended_then_failsafe(
    model: &RobotModel,
    s0: &RobotState,
    u: Control,
    intended_steps: usize,
    kind: TrajectoryKind,
) -> Trajectory {
    let head = constant_control(model, s0, u, intended_steps, kind);
    let tail = failsafe_trajectory(model, head.final_state());
    head.extend(tail, kind)
}
