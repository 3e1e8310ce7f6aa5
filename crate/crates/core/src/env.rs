//! Episodic goal-reaching task in a square arena with static hazards and
//! gremlins circling on fixed paths.
//!
//! One agent step applies the selected filter, then runs `L` shield steps.
//! Between shield steps the robot's continuous motion is swept at a finer
//! resolution to account costs and detect true contacts.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{self, Action, DynamicsError, DynamicsParams, RobotModel, RobotState, TimeGrid};
use crate::filters::{self, FilterConfig, FilterError, Projection};
use crate::geometry::{Ball, Point2, Vector2};
use crate::math;
use crate::reachability::{Motion, Obstacle, ObstacleKind, ObstacleView, ReachError};
use crate::shield::{ShieldError, ShieldState, Substitution};

/// RNG streams derived from an episode seed.
pub mod stream {
    pub const LAYOUT: u64 = 0;
    pub const GOAL: u64 = 1;
    pub const FILTER: u64 = 2;
    pub const POLICY: u64 = 3;
}

/// ChaCha8 generator for one stream of an episode seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Mode {
    #[default]
    BareShield,
    Replace,
    Project,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::BareShield, Mode::Replace, Mode::Project];

    pub fn name(self) -> &'static str {
        match self {
            Mode::BareShield => "bare-shield",
            Mode::Replace => "replace",
            Mode::Project => "project",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ArenaConfig {
    /// Positions are sampled in `[-half_extent, half_extent]²`.
    pub half_extent: f64,
    pub hazards: usize,
    pub hazard_radius: f64,
    pub gremlins: usize,
    pub gremlin_radius: f64,
    pub gremlin_path_radius: f64,
    pub gremlin_speed: f64,
    pub goal_radius: f64,
    /// Minimum distance between a new goal and the robot.
    pub goal_min_distance: f64,
    /// Minimum gap between obstacle envelopes, spawn and goal.
    pub clearance: f64,
    /// Rejection-sampling attempts per placed object.
    pub max_attempts: usize,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        ArenaConfig {
            half_extent: 4.0,
            hazards: 8,
            hazard_radius: 0.2,
            gremlins: 4,
            gremlin_radius: 0.1,
            gremlin_path_radius: 0.3,
            gremlin_speed: 0.15,
            goal_radius: 0.3,
            goal_min_distance: 1.0,
            clearance: 0.1,
            max_attempts: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RobotConfig {
    pub radius: f64,
    pub dynamics: DynamicsParams,
    pub dt: f64,
    pub steps_per_action: usize,
    /// Defaults to the shortest horizon that reaches rest, plus two steps.
    pub failsafe_steps: Option<usize>,
}

impl Default for RobotConfig {
    fn default() -> Self {
        RobotConfig {
            radius: 0.1,
            dynamics: DynamicsParams::default(),
            dt: 0.01,
            steps_per_action: 10,
            failsafe_steps: None,
        }
    }
}

impl RobotConfig {
    pub fn model(&self) -> Result<RobotModel, DynamicsError> {
        self.dynamics.validate()?;
        let grid = match self.failsafe_steps {
            Some(k) => TimeGrid::new(&self.dynamics, self.dt, self.steps_per_action, k)?,
            None => TimeGrid::with_default_failsafe(&self.dynamics, self.dt, self.steps_per_action)?,
        };
        RobotModel::new(self.dynamics, grid, self.radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TaskConfig {
    /// Agent steps per episode.
    pub horizon: usize,
    /// Reward per metre of progress toward the goal.
    pub progress_weight: f64,
    pub goal_bonus: f64,
    /// Sweep samples per shield step for cost and contact accounting.
    pub sweep_substeps: usize,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig { horizon: 1000, progress_weight: 1.0, goal_bonus: 1.0, sweep_substeps: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct EnvConfig {
    pub arena: ArenaConfig,
    pub robot: RobotConfig,
    pub task: TaskConfig,
    pub filter: FilterConfig,
}

impl EnvConfig {
    /// Checks every section; returns the robot model on success.
    pub fn validate(&self) -> Result<RobotModel, EnvError> {
        let model = self.robot.model()?;
        self.filter.validate()?;
        let a = &self.arena;
        let positive = [a.half_extent, a.goal_radius];
        let non_negative = [
            a.hazard_radius,
            a.gremlin_radius,
            a.gremlin_path_radius,
            a.gremlin_speed,
            a.goal_min_distance,
            a.clearance,
        ];
        if positive.iter().any(|x| !(*x > 0.0 && x.is_finite()))
            || non_negative.iter().any(|x| !(*x >= 0.0 && x.is_finite()))
        {
            return Err(EnvError::InvalidConfig("arena sizes must be finite and non-negative"));
        }
        if a.gremlins > 0 && !(a.gremlin_path_radius > 0.0) {
            return Err(EnvError::InvalidConfig("gremlin path radius must be positive"));
        }
        if a.max_attempts == 0 || self.task.horizon == 0 || self.task.sweep_substeps == 0 {
            return Err(EnvError::InvalidConfig("attempts, horizon and sweep substeps must be positive"));
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Reach(#[from] ReachError),
    #[error(transparent)]
    Shield(#[from] ShieldError),
    #[error("invalid environment configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("could not place {what} after {attempts} attempts; the arena is too crowded")]
    Crowded { what: &'static str, attempts: usize },
    #[error("the episode has finished; call reset")]
    EpisodeFinished,
}

/// Sampled scene of one episode.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Layout {
    pub half_extent: f64,
    pub spawn: RobotState,
    pub goal: Ball,
    pub hazards: Vec<Obstacle>,
    pub gremlins: Vec<Obstacle>,
}

impl Layout {
    pub fn obstacles(&self) -> impl Iterator<Item = &Obstacle> {
        self.hazards.iter().chain(self.gremlins.iter())
    }

    /// Smallest gap between any two obstacle envelopes.
    pub fn min_obstacle_gap(&self) -> f64 {
        let all: Vec<Ball> = self.obstacles().map(Obstacle::envelope).collect();
        let mut gap = f64::INFINITY;
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                gap = gap.min(a.center.distance(b.center) - a.radius - b.radius);
            }
        }
        gap
    }
}

fn uniform_point<R: Rng + ?Sized>(rng: &mut R, half: f64) -> Point2 {
    if half <= 0.0 {
        return Point2::ORIGIN;
    }
    Point2::new(rng.random_range(-half..=half), rng.random_range(-half..=half))
}

fn clear_of(p: Point2, r: f64, others: &[Ball], gap: f64) -> bool {
    others.iter().all(|o| p.distance(o.center) >= r + o.radius + gap)
}

/// Rejection-samples a layout honouring all spacing constraints.
pub fn sample_layout<R: Rng + ?Sized>(cfg: &EnvConfig, rng: &mut R) -> Result<Layout, EnvError> {
    let a = &cfg.arena;
    let mut placed: Vec<Ball> = Vec::new();
    let place = |rng: &mut R, r: f64, placed: &mut Vec<Ball>, what: &'static str| {
        for _ in 0..a.max_attempts {
            let c = uniform_point(rng, a.half_extent - r);
            if clear_of(c, r, placed, a.clearance) {
                placed.push(Ball::new(c, r));
                return Ok(c);
            }
        }
        Err(EnvError::Crowded { what, attempts: a.max_attempts })
    };

    let mut hazards = Vec::with_capacity(a.hazards);
    for i in 0..a.hazards {
        let c = place(rng, a.hazard_radius, &mut placed, "hazard")?;
        hazards.push(Obstacle::fixed(i as u32, ObstacleKind::Hazard, c, a.hazard_radius));
    }
    let mut gremlins = Vec::with_capacity(a.gremlins);
    for i in 0..a.gremlins {
        let c = place(rng, a.gremlin_path_radius + a.gremlin_radius, &mut placed, "gremlin")?;
        let direction = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let phase = rng.random_range(-math::PI..math::PI);
        let motion = Motion::Circular {
            center: c,
            radius: a.gremlin_path_radius,
            angular_rate: direction * a.gremlin_speed / a.gremlin_path_radius,
            phase,
        };
        let id = (a.hazards + i) as u32;
        gremlins.push(Obstacle::new(id, ObstacleKind::Gremlin, a.gremlin_radius, a.gremlin_speed, motion)?);
    }

    let r = cfg.robot.radius;
    let spawn_at = place(rng, r, &mut placed.clone(), "robot")?;
    let spawn = RobotState::at_rest(spawn_at, rng.random_range(-math::PI..math::PI));
    let goal = sample_goal(cfg, &placed, spawn_at, rng)?;
    Ok(Layout { half_extent: a.half_extent, spawn, goal, hazards, gremlins })
}

/// Goal centre reachable by a robot at rest, away from `robot`.
fn sample_goal<R: Rng + ?Sized>(
    cfg: &EnvConfig,
    envelopes: &[Ball],
    robot: Point2,
    rng: &mut R,
) -> Result<Ball, EnvError> {
    let a = &cfg.arena;
    let r = cfg.robot.radius;
    for _ in 0..a.max_attempts {
        let c = uniform_point(rng, a.half_extent - a.goal_radius);
        if c.distance(robot) >= a.goal_min_distance && clear_of(c, r, envelopes, a.clearance) {
            return Ok(Ball::new(c, a.goal_radius));
        }
    }
    Err(EnvError::Crowded { what: "goal", attempts: a.max_attempts })
}

/// An obstacle as seen by the agent, relative to the robot.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObstacleObservation {
    pub id: u32,
    pub kind: ObstacleKind,
    pub offset: Vector2,
    pub radius: f64,
    pub v_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Observation {
    pub time: f64,
    /// Agent steps taken.
    pub step: usize,
    pub robot: RobotState,
    pub goal: Point2,
    pub goal_radius: f64,
    pub goal_offset: Vector2,
    pub obstacles: Vec<ObstacleObservation>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepRecord {
    pub observation: Observation,
    /// Action handed to the shield after filtering.
    pub action: Action,
    pub reward: f64,
    /// 1 if the robot centre entered a hazard or the robot touched a gremlin.
    pub cost: u8,
    /// Robot disc overlapped any obstacle disc during the step.
    pub contact: bool,
    /// The shield engaged the failsafe during this agent step.
    pub intervention: bool,
    pub substituted: Substitution,
    pub alpha_used: Option<f64>,
    pub samples_tried: usize,
    pub projection: Option<Projection>,
    pub goal_reached: bool,
    pub done: bool,
}

/// One shield step as executed: the state it started from and the control
/// after the speed cap.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShieldStep {
    pub time: f64,
    pub state: RobotState,
    pub applied: dynamics::Control,
}

/// One running episode.
#[derive(Debug, Clone)]
pub struct Env {
    cfg: EnvConfig,
    model: RobotModel,
    layout: Layout,
    state: RobotState,
    time: f64,
    step: usize,
    goal: Ball,
    shield: ShieldState,
    goal_rng: ChaCha8Rng,
    filter_rng: ChaCha8Rng,
    trace: Vec<ShieldStep>,
    done: bool,
}

impl Env {
    pub fn reset(cfg: &EnvConfig, seed: u64) -> Result<Env, EnvError> {
        let model = cfg.validate()?;
        let layout = sample_layout(cfg, &mut stream_rng(seed, stream::LAYOUT))?;
        let state = layout.spawn;
        let views: Vec<ObstacleView> = layout.obstacles().map(|o| o.observe(0.0)).collect::<Result<_, _>>()?;
        let shield = ShieldState::initialize(&model, &state, &views)?;
        Ok(Env {
            cfg: *cfg,
            model,
            goal: layout.goal,
            layout,
            state,
            time: 0.0,
            step: 0,
            shield,
            goal_rng: stream_rng(seed, stream::GOAL),
            filter_rng: stream_rng(seed, stream::FILTER),
            trace: Vec::with_capacity(model.grid.steps_per_action),
            done: false,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn model(&self) -> &RobotModel {
        &self.model
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn goal(&self) -> Ball {
        self.goal
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn shield(&self) -> &ShieldState {
        &self.shield
    }

    /// Shield steps of the most recent agent step.
    pub fn last_trace(&self) -> &[ShieldStep] {
        &self.trace
    }

    /// Obstacle snapshots at the current time.
    pub fn obstacle_views(&self) -> Vec<ObstacleView> {
        self.views_at(self.time)
    }

    fn views_at(&self, t: f64) -> Vec<ObstacleView> {
        self.layout.obstacles().map(|o| o.observe(t).expect("circular and static motions are total")).collect()
    }

    pub fn observation(&self) -> Observation {
        let p = self.state.position;
        let obstacles = self
            .layout
            .obstacles()
            .map(|o| ObstacleObservation {
                id: o.id,
                kind: o.kind,
                offset: o.position_at(self.time).expect("total motion") - p,
                radius: o.radius,
                v_max: o.v_max,
            })
            .collect();
        Observation {
            time: self.time,
            step: self.step,
            robot: self.state,
            goal: self.goal.center,
            goal_radius: self.goal.radius,
            goal_offset: self.goal.center - p,
            obstacles,
        }
    }

    /// One agent step.
    pub fn step(&mut self, action: Action, mode: Mode) -> Result<StepRecord, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        let action = Action::new(action.thrust, action.yaw);
        let views = self.obstacle_views();
        let outcome = match mode {
            Mode::BareShield => None,
            Mode::Replace => Some(filters::replace_action(
                &self.model,
                &self.state,
                action,
                &views,
                &mut self.filter_rng,
                &self.cfg.filter,
            )),
            Mode::Project => Some(filters::project_action(&self.model, &self.state, action, &views, &self.cfg.filter)),
        };
        let (chosen, substituted) = outcome.as_ref().map_or((action, Substitution::Original), |o| (o.action, o.kind));
        let u = chosen.to_control(&self.model.params);

        let d_prev = self.state.position.distance(self.goal.center);
        let mut intervention = false;
        let mut cost = false;
        let mut contact = false;
        self.shield.begin_action();
        self.trace.clear();
        for _ in 0..self.model.grid.steps_per_action {
            let views = self.views_at(self.time);
            let decision = self.shield.step(&self.model, &self.state, u, substituted, &views);
            intervention |= decision.intervention;
            let applied = dynamics::effective_control(
                &self.model.params,
                &self.state,
                decision.executed_control,
                self.model.grid.dt,
            );
            self.trace.push(ShieldStep { time: self.time, state: self.state, applied });
            let (c, k) = self.sweep(&self.state, applied);
            cost |= c;
            contact |= k;
            self.state =
                dynamics::step(&self.model.params, &self.state, decision.executed_control, self.model.grid.dt)?;
            self.time += self.model.grid.dt;
        }
        self.step += 1;

        let d_now = self.state.position.distance(self.goal.center);
        let goal_reached = d_now <= self.goal.radius;
        let mut reward = self.cfg.task.progress_weight * (d_prev - d_now);
        if goal_reached {
            reward += self.cfg.task.goal_bonus;
            let envelopes: Vec<Ball> = self.layout.obstacles().map(Obstacle::envelope).collect();
            self.goal = sample_goal(&self.cfg, &envelopes, self.state.position, &mut self.goal_rng)?;
        }
        self.done = self.step >= self.cfg.task.horizon;
        Ok(StepRecord {
            observation: self.observation(),
            action: chosen,
            reward,
            cost: u8::from(cost),
            contact,
            intervention,
            substituted,
            alpha_used: outcome.as_ref().and_then(|o| o.alpha_used),
            samples_tried: outcome.as_ref().map_or(0, |o| o.samples_tried),
            projection: outcome.as_ref().and_then(|o| o.projection),
            goal_reached,
            done: self.done,
        })
    }

    /// Samples the continuous motion over one shield step: `(cost, contact)`.
    fn sweep(&self, s: &RobotState, applied: dynamics::Control) -> (bool, bool) {
        let n = self.cfg.task.sweep_substeps;
        let dt = self.model.grid.dt;
        let r = self.model.radius;
        let mut cost = false;
        let mut contact = false;
        for j in 1..=n {
            let tau = dt * j as f64 / n as f64;
            let p = dynamics::flow(s, applied, tau).position;
            let t = self.time + tau;
            for o in self.layout.obstacles() {
                let c = o.position_at(t).expect("total motion");
                let d = p.distance(c);
                let touching = d <= r + o.radius;
                contact |= touching;
                cost |= match o.kind {
                    ObstacleKind::Hazard => d <= o.radius,
                    ObstacleKind::Gremlin => touching,
                    _ => false,
                };
            }
        }
        (cost, contact)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::GoalSeek;

    #[test]
    fn same_seed_same_layout() {
        let cfg = EnvConfig::default();
        let a = Env::reset(&cfg, 42).unwrap();
        let b = Env::reset(&cfg, 42).unwrap();
        assert_eq!(a.layout(), b.layout());
        let c = Env::reset(&cfg, 43).unwrap();
        assert_ne!(a.layout(), c.layout());
    }

    #[test]
    fn default_layout_respects_spacing() {
        let cfg = EnvConfig::default();
        for seed in 0..50 {
            let env = Env::reset(&cfg, seed).unwrap();
            let l = env.layout();
            assert!(l.min_obstacle_gap() >= cfg.arena.clearance - 1e-12);
            assert_eq!(l.hazards.len(), 8);
            assert_eq!(l.gremlins.len(), 4);
            for o in l.obstacles() {
                let e = o.envelope();
                assert!(
                    l.spawn.position.distance(e.center) >= e.radius + cfg.robot.radius + cfg.arena.clearance - 1e-12
                );
                assert!(l.goal.center.distance(e.center) >= e.radius + cfg.robot.radius + cfg.arena.clearance - 1e-12);
            }
        }
    }

    #[test]
    fn empty_arena_is_valid() {
        let mut cfg = EnvConfig::default();
        cfg.arena.hazards = 0;
        cfg.arena.gremlins = 0;
        let env = Env::reset(&cfg, 1).unwrap();
        assert!(env.layout().obstacles().next().is_none());
    }

    #[test]
    fn crowded_arena_is_an_error() {
        let mut cfg = EnvConfig::default();
        cfg.arena.half_extent = 0.5;
        cfg.arena.hazards = 50;
        cfg.arena.max_attempts = 100;
        assert!(matches!(Env::reset(&cfg, 1), Err(EnvError::Crowded { .. })));
    }

    #[test]
    fn progress_toward_goal_is_rewarded() {
        let mut cfg = EnvConfig::default();
        cfg.arena.hazards = 0;
        cfg.arena.gremlins = 0;
        let mut env = Env::reset(&cfg, 7).unwrap();
        let g = env.goal().center - env.state().position;
        env.state.heading = libm::atan2(g.y, g.x);
        let policy = GoalSeek::default();
        let mut total = 0.0;
        for _ in 0..20 {
            let a = policy.act(&env.observation(), &env.model().params);
            total += env.step(a, Mode::BareShield).unwrap().reward;
        }
        assert!(total > 0.0);
    }

    #[test]
    fn finished_episode_rejects_steps() {
        let mut cfg = EnvConfig::default();
        cfg.task.horizon = 2;
        let mut env = Env::reset(&cfg, 3).unwrap();
        assert!(!env.step(Action::ZERO, Mode::BareShield).unwrap().done);
        assert!(env.step(Action::ZERO, Mode::BareShield).unwrap().done);
        assert_eq!(env.step(Action::ZERO, Mode::BareShield), Err(EnvError::EpisodeFinished));
    }

    #[test]
    fn goal_under_robot_pays_bonus_and_moves() {
        let mut cfg = EnvConfig::default();
        cfg.arena.hazards = 0;
        cfg.arena.gremlins = 0;
        let mut env = Env::reset(&cfg, 9).unwrap();
        env.goal = Ball::new(env.state.position, cfg.arena.goal_radius);
        let rec = env.step(Action::ZERO, Mode::BareShield).unwrap();
        assert!(rec.goal_reached);
        assert!((rec.reward - cfg.task.goal_bonus).abs() < 1e-12);
        assert!(env.goal().center.distance(env.state().position) >= cfg.arena.goal_min_distance);
    }

    #[test]
    fn modes_round_trip_names() {
        for m in Mode::ALL {
            assert_eq!(Mode::parse(m.name()), Some(m));
        }
    }
}
