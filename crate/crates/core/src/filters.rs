//! Intervention-reduction filters.
//!
//! Both filters look at the whole agent step. An action is *temporarily safe*
//! when its validation trajectory (all `L` intended steps, then a failsafe)
//! verifies. Unsafe actions are swapped for a temporarily safe substitute
//! before the shield sees them; the shield still checks every shield step.

use alloc::vec::Vec;

use rand::Rng;

use crate::dynamics::{self, Action, RobotModel, RobotState, Trajectory, TrajectoryKind};
use crate::geometry::{self, FreePrefix, Point2, Shape};
use crate::reachability::{self, ObstacleRegion, ObstacleView};
use crate::shield::{self, Substitution};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct FilterConfig {
    /// Replacement samples per agent step.
    pub m_replace: usize,
    /// Retries of the projection with α halved.
    pub m_project: usize,
    /// Clearance added to the obstacle expansion (m).
    pub epsilon: f64,
    /// Lower bound on α, as `α > −alpha_min`.
    pub alpha_min: f64,
    /// Upper bound on α.
    pub alpha_cap: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig { m_replace: 32, m_project: 5, epsilon: 0.01, alpha_min: 0.5, alpha_cap: 0.999 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum FilterError {
    #[error("invalid filter configuration: {0}")]
    InvalidConfig(&'static str),
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        if self.m_replace == 0 || self.m_project == 0 {
            return Err(FilterError::InvalidConfig("sample and retry budgets must be positive"));
        }
        if !(self.epsilon > 0.0 && self.alpha_min > 0.0 && self.alpha_cap > 0.0) {
            return Err(FilterError::InvalidConfig("epsilon, alpha_min and alpha_cap must be positive"));
        }
        if !(self.alpha_cap < 1.0) {
            return Err(FilterError::InvalidConfig("alpha_cap must be below 1"));
        }
        Ok(())
    }
}

/// Geometry of a projection attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Projection {
    /// Robot position `p0`.
    pub origin: Point2,
    /// Centre `c_V` of the ball around the validation trajectory's end.
    pub target: Point2,
    pub r_v: f64,
    pub r_exp: f64,
    /// α after capping, before any halving.
    pub alpha_opt: f64,
    /// `g(α_used)`, the planner's target.
    pub point: Point2,
    /// Distance between the planned rest point and `point`.
    pub terminal_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub action: Action,
    pub kind: Substitution,
    pub alpha_used: Option<f64>,
    /// Replacement samples drawn, or projection plans tried.
    pub samples_tried: usize,
    pub projection: Option<Projection>,
}

impl FilterOutcome {
    fn original(action: Action) -> Self {
        FilterOutcome { action, kind: Substitution::Original, alpha_used: None, samples_tried: 0, projection: None }
    }

    fn zero(samples_tried: usize, projection: Option<Projection>) -> Self {
        FilterOutcome {
            action: Action::ZERO,
            kind: Substitution::ZeroAction,
            alpha_used: None,
            samples_tried,
            projection,
        }
    }
}

/// The whole agent step under `a` followed by a failsafe.
pub fn build_validation(model: &RobotModel, s0: &RobotState, a: Action) -> Trajectory {
    let u = a.to_control(&model.params);
    dynamics::intended_then_failsafe(model, s0, u, model.grid.steps_per_action, TrajectoryKind::Validation)
}

pub fn validate_temporal(model: &RobotModel, s0: &RobotState, a: Action, obstacles: &[ObstacleView]) -> bool {
    shield::verify(model, &build_validation(model, s0, a), obstacles).is_safe()
}

/// Uniform sample from the action box.
pub fn sample_action<R: Rng + ?Sized>(rng: &mut R) -> Action {
    Action::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))
}

/// Keeps `a` if temporarily safe, else the first of `m_replace` uniform samples
/// that is, else the zero action.
pub fn replace_action<R: Rng + ?Sized>(
    model: &RobotModel,
    s0: &RobotState,
    a: Action,
    obstacles: &[ObstacleView],
    rng: &mut R,
    cfg: &FilterConfig,
) -> FilterOutcome {
    if validate_temporal(model, s0, a, obstacles) {
        return FilterOutcome::original(a);
    }
    for n in 1..=cfg.m_replace {
        let candidate = sample_action(rng);
        if validate_temporal(model, s0, candidate, obstacles) {
            return FilterOutcome {
                action: candidate,
                kind: Substitution::Replaced,
                alpha_used: None,
                samples_tried: n,
                projection: None,
            };
        }
    }
    FilterOutcome::zero(cfg.m_replace, None)
}

/// Obstacle regions over `[0, until]` grown by `r`.
pub fn expanded_regions(obstacles: &[ObstacleView], until: f64, r: f64) -> Vec<ObstacleRegion> {
    obstacles.iter().filter(|o| o.kind.is_shielded()).map(|o| o.region(until).expanded(r)).collect()
}

/// Keeps `a` if temporarily safe. Otherwise plans toward the farthest point
/// on the segment from the robot to the end of the validation trajectory
/// that keeps a ball of radius `r_V + ε` clear of all obstacles, halving α
/// on failure, and finally falls back to the zero action.
pub fn project_action(
    model: &RobotModel,
    s0: &RobotState,
    a: Action,
    obstacles: &[ObstacleView],
    cfg: &FilterConfig,
) -> FilterOutcome {
    let validation = build_validation(model, s0, a);
    if shield::verify(model, &validation, obstacles).is_safe() {
        return FilterOutcome::original(a);
    }
    let r = model.occupancy_radius();
    let last = Shape::Capsule(reachability::step_capsule(&validation, validation.len() - 1, r));
    let ball = geometry::ball_overapprox(&[last]).expect("one primitive");
    let r_exp = ball.radius + cfg.epsilon;
    let regions = expanded_regions(obstacles, validation.time(validation.len()), r_exp);

    let origin = s0.position;
    let alpha_opt = match geometry::free_prefix_alpha(origin, ball.center, &regions) {
        Ok(FreePrefix::Unbounded) => cfg.alpha_cap,
        Ok(FreePrefix::Bounded(alpha)) => alpha.min(cfg.alpha_cap),
        Err(_) => return FilterOutcome::zero(0, None),
    };
    let mut detail = Projection {
        origin,
        target: ball.center,
        r_v: ball.radius,
        r_exp,
        alpha_opt,
        point: origin,
        terminal_distance: 0.0,
    };
    if !(alpha_opt > -cfg.alpha_min) {
        return FilterOutcome::zero(0, Some(detail));
    }

    let mut alpha = alpha_opt;
    for attempt in 1..=cfg.m_project + 1 {
        let point = origin.lerp(ball.center, alpha);
        let plan = dynamics::plan_to_point(model, s0, point);
        detail.point = point;
        detail.terminal_distance = plan.terminal_distance;
        if shield::verify(model, &plan.trajectory, obstacles).is_safe() {
            return FilterOutcome {
                action: Action::from_control(plan.control, &model.params),
                kind: Substitution::Projected,
                alpha_used: Some(alpha),
                samples_tried: attempt,
                projection: Some(detail),
            };
        }
        alpha *= 0.5;
    }
    FilterOutcome::zero(cfg.m_project + 1, Some(detail))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reachability::{Obstacle, ObstacleKind};
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hazard(id: u32, x: f64, y: f64, r: f64) -> ObstacleView {
        Obstacle::fixed(id, ObstacleKind::Hazard, Point2::new(x, y), r).observe(0.0).unwrap()
    }

    #[test]
    fn default_config_is_valid() {
        assert!(FilterConfig::default().validate().is_ok());
        let bad = FilterConfig { alpha_cap: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn validation_has_constant_head() {
        let m = RobotModel::desk_default();
        let a = Action::new(0.7, -0.3);
        let t = build_validation(&m, &RobotState::default(), a);
        let u = a.to_control(&m.params);
        assert_eq!(t.len(), m.grid.steps_per_action + m.grid.failsafe_steps);
        assert!((0..m.grid.steps_per_action).all(|i| t.control(i) == u));
        assert!(t.ends_at_rest());
        assert_eq!(t.kind(), TrajectoryKind::Validation);
        let s = shield::build_shielded(&m, &RobotState::default(), u);
        assert_eq!(s.control(0), t.control(0));
    }

    #[test]
    fn stationary_validation_at_rest() {
        let m = RobotModel::desk_default();
        let s = RobotState::at_rest(Point2::new(0.5, 0.5), 1.0);
        let t = build_validation(&m, &s, Action::ZERO);
        assert!(t.states().all(|x| x == s));
    }

    #[test]
    fn free_space_keeps_original() {
        let m = RobotModel::desk_default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Action::new(1.0, 0.2);
        let cfg = FilterConfig::default();
        let r = replace_action(&m, &RobotState::default(), a, &[], &mut rng, &cfg);
        assert_eq!(r.kind, Substitution::Original);
        assert_eq!(r.samples_tried, 0);
        let p = project_action(&m, &RobotState::default(), a, &[], &cfg);
        assert_eq!(p.kind, Substitution::Original);
        assert_eq!(p.action, a);
    }

    #[test]
    fn enclosure_yields_zero_action() {
        let m = RobotModel::desk_default();
        let s = RobotState { velocity: Point2::new(0.2, 0.0), ..Default::default() };
        let ring: Vec<ObstacleView> = (0..16)
            .map(|k| {
                let th = k as f64 * core::f64::consts::TAU / 16.0;
                hazard(k, 0.16 * libm::cos(th), 0.16 * libm::sin(th), 0.05)
            })
            .collect();
        let cfg = FilterConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = replace_action(&m, &s, Action::new(1.0, 0.0), &ring, &mut rng, &cfg);
        assert_eq!(r.kind, Substitution::ZeroAction);
        assert_eq!(r.samples_tried, cfg.m_replace);
        let p = project_action(&m, &s, Action::new(1.0, 0.0), &ring, &cfg);
        assert_eq!(p.kind, Substitution::ZeroAction);
    }

    #[test]
    fn replacement_is_reproducible() {
        let m = RobotModel::desk_default();
        let s = RobotState { velocity: Point2::new(0.2, 0.0), ..Default::default() };
        let obs = vec![hazard(1, 0.61, 0.0, 0.1)];
        let cfg = FilterConfig::default();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            replace_action(&m, &s, Action::new(1.0, 0.0), &obs, &mut rng, &cfg)
        };
        let a = run(11);
        assert_eq!(a, run(11));
        assert_eq!(a.kind, Substitution::Replaced);
        assert!(validate_temporal(&m, &s, a.action, &obs));
    }

    #[test]
    fn projection_stops_short_of_hazard() {
        let m = RobotModel::desk_default();
        let s = RobotState { velocity: Point2::new(0.2, 0.0), ..Default::default() };
        let obs = vec![hazard(1, 0.61, 0.0, 0.1)];
        let cfg = FilterConfig::default();
        let out = project_action(&m, &s, Action::new(1.0, 0.0), &obs, &cfg);
        assert_eq!(out.kind, Substitution::Projected);
        let alpha = out.alpha_used.unwrap();
        assert!(alpha > 0.0 && alpha < 1.0, "{alpha}");
        let d = out.projection.unwrap();
        let seg = geometry::Segment::new(d.origin, d.origin.lerp(d.target, alpha));
        let clearance = geometry::dist_point_segment(Point2::new(0.61, 0.0), seg) - 0.1 - d.r_v;
        assert!(clearance >= cfg.epsilon - 1e-9, "{clearance}");
    }
}
