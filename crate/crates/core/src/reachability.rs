//! Reachable occupancies of the robot and of obstacles.
//!
//! The robot's position between two grid states is the chord between them plus
//! the linearisation error ζ, so every shield step occupies a capsule of radius
//! `robot_radius + ζ`. Obstacles follow the velocity-constrained model: from
//! the last observed centre they may be anywhere within `v_max·t` after `t`
//! seconds. Each obstacle additionally carries an all-time *envelope*, the
//! region its motion can ever cover; a robot at rest outside every envelope is
//! invariably safe.

use alloc::vec::Vec;

use crate::dynamics::{RobotModel, Trajectory};
use crate::geometry::{self, Ball, Capsule, Intersection, Point2, RayCast, Shape, Vector2};

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ReachError {
    #[error("time {time} is outside the scripted horizon [{start}, {end}]")]
    BeyondHorizon { time: f64, start: f64, end: f64 },
    #[error("invalid interval [{0}, {1}]")]
    InvalidInterval(f64, f64),
    #[error("obstacle {id} moves at {speed} m/s, above its declared bound {v_max}")]
    SpeedBound { id: u32, speed: f64, v_max: f64 },
    #[error("obstacle {0} has an invalid motion description")]
    InvalidMotion(u32),
}

/// `ζ = a_max·dt²/(8·m)`.
pub fn linearization_error(dt: f64, a_max: f64, mass: f64) -> f64 {
    a_max * dt * dt / (8.0 * mass)
}

/// Time interval relative to the start of the prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeInterval {
    pub start: f64,
    pub end: f64,
}

impl TimeInterval {
    pub fn new(start: f64, end: f64) -> Result<Self, ReachError> {
        if !(start <= end) || start < 0.0 {
            return Err(ReachError::InvalidInterval(start, end));
        }
        Ok(TimeInterval { start, end })
    }

    pub fn overlaps(&self, other: &TimeInterval) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedOccupancy {
    pub interval: TimeInterval,
    pub shape: Shape,
}

/// Union of timed primitives; intervals tile the covered span without gaps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OccupancySet {
    pub items: Vec<TimedOccupancy>,
}

impl OccupancySet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn span(&self) -> Option<TimeInterval> {
        Some(TimeInterval { start: self.items.first()?.interval.start, end: self.items.last()?.interval.end })
    }

    /// Spatial union test for a point (ignores time).
    pub fn contains(&self, p: Point2) -> bool {
        self.items.iter().any(|o| o.shape.contains(p))
    }
}

/// Capsule occupied during step `i` of a trajectory.
pub(crate) fn step_capsule(traj: &Trajectory, i: usize, radius: f64) -> Capsule {
    Capsule::new(traj.state(i).position, traj.state(i + 1).position, radius)
}

/// One capsule per trajectory step, radius `robot_radius + ζ`.
pub fn robot_occupancy(traj: &Trajectory, robot_radius: f64, zeta: f64) -> OccupancySet {
    let r = robot_radius + zeta;
    let items = (0..traj.len())
        .map(|i| TimedOccupancy {
            interval: TimeInterval { start: traj.time(i), end: traj.time(i + 1) },
            shape: Shape::Capsule(step_capsule(traj, i, r)),
        })
        .collect();
    OccupancySet { items }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ObstacleKind {
    Hazard,
    Gremlin,
    Goal,
    Button,
}

impl ObstacleKind {
    /// Whether the shield must keep the robot clear of this obstacle.
    pub fn is_shielded(self) -> bool {
        matches!(self, ObstacleKind::Hazard | ObstacleKind::Gremlin)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum Motion {
    Static {
        center: Point2,
    },
    /// `center + radius·(cos(phase + rate·t), sin(phase + rate·t))`.
    Circular {
        center: Point2,
        radius: f64,
        angular_rate: f64,
        phase: f64,
    },
    /// Piecewise-linear path through `(time, position)` knots with increasing
    /// times; undefined outside the first and last knot.
    Waypoints {
        knots: Vec<(f64, Point2)>,
    },
}

impl Motion {
    pub fn position_at(&self, t: f64) -> Result<Point2, ReachError> {
        match self {
            Motion::Static { center } => Ok(*center),
            Motion::Circular { center, radius, angular_rate, phase } => {
                Ok(*center + Point2::from_angle(phase + angular_rate * t) * *radius)
            }
            Motion::Waypoints { knots } => {
                let (first, last) = match (knots.first(), knots.last()) {
                    (Some(f), Some(l)) => (f.0, l.0),
                    _ => return Err(ReachError::BeyondHorizon { time: t, start: 0.0, end: 0.0 }),
                };
                if !(t >= first && t <= last) {
                    return Err(ReachError::BeyondHorizon { time: t, start: first, end: last });
                }
                let idx = knots.partition_point(|k| k.0 <= t).clamp(1, knots.len() - 1);
                let (t0, p0) = knots[idx - 1];
                let (t1, p1) = knots[idx];
                if t1 == t0 {
                    return Ok(p1);
                }
                Ok(p0.lerp(p1, ((t - t0) / (t1 - t0)).clamp(0.0, 1.0)))
            }
        }
    }

    /// Fastest speed along the scripted path.
    pub fn max_speed(&self) -> f64 {
        match self {
            Motion::Static { .. } => 0.0,
            Motion::Circular { radius, angular_rate, .. } => (radius * angular_rate).abs(),
            Motion::Waypoints { knots } => knots
                .windows(2)
                .map(|w| {
                    let dt = w[1].0 - w[0].0;
                    let d = w[1].1.distance(w[0].1);
                    if dt > 0.0 {
                        d / dt
                    } else if d == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                })
                .fold(0.0, f64::max),
        }
    }

    /// Ball containing every centre position the motion can take.
    pub fn extent(&self) -> Ball {
        match self {
            Motion::Static { center } => Ball::new(*center, 0.0),
            Motion::Circular { center, radius, .. } => Ball::new(*center, radius.abs()),
            Motion::Waypoints { knots } => {
                let pts: Vec<Point2> = knots.iter().map(|k| k.1).collect();
                geometry::points_overapprox(&pts).unwrap_or(Ball::new(Point2::ORIGIN, 0.0))
            }
        }
    }

    fn horizon(&self) -> Option<(f64, f64)> {
        match self {
            Motion::Waypoints { knots } => Some((knots.first()?.0, knots.last()?.0)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Obstacle {
    pub id: u32,
    pub kind: ObstacleKind,
    /// Footprint disc radius (m).
    pub radius: f64,
    /// Declared speed bound (m/s).
    pub v_max: f64,
    pub motion: Motion,
}

impl Obstacle {
    pub fn new(id: u32, kind: ObstacleKind, radius: f64, v_max: f64, motion: Motion) -> Result<Self, ReachError> {
        let ob = Obstacle { id, kind, radius, v_max, motion };
        ob.validate()?;
        Ok(ob)
    }

    pub fn fixed(id: u32, kind: ObstacleKind, center: Point2, radius: f64) -> Self {
        Obstacle { id, kind, radius, v_max: 0.0, motion: Motion::Static { center } }
    }

    /// Checks the footprint and that the scripted path respects `v_max`.
    pub fn validate(&self) -> Result<(), ReachError> {
        if !(self.radius >= 0.0 && self.v_max >= 0.0) {
            return Err(ReachError::InvalidMotion(self.id));
        }
        if let Motion::Waypoints { knots } = &self.motion {
            if knots.is_empty() || knots.windows(2).any(|w| !(w[1].0 >= w[0].0)) {
                return Err(ReachError::InvalidMotion(self.id));
            }
        }
        let speed = self.motion.max_speed();
        if speed > self.v_max * (1.0 + 1e-12) {
            return Err(ReachError::SpeedBound { id: self.id, speed, v_max: self.v_max });
        }
        Ok(())
    }

    pub fn position_at(&self, t: f64) -> Result<Point2, ReachError> {
        self.motion.position_at(t)
    }

    /// Footprint at time `t`.
    pub fn footprint_at(&self, t: f64) -> Result<Ball, ReachError> {
        Ok(Ball::new(self.position_at(t)?, self.radius))
    }

    /// Region covered by the footprint over all time.
    pub fn envelope(&self) -> Ball {
        let e = self.motion.extent();
        Ball::new(e.center, e.radius + self.radius)
    }

    /// What the shield observes at time `t`.
    pub fn observe(&self, t: f64) -> Result<ObstacleView, ReachError> {
        Ok(ObstacleView {
            id: self.id,
            kind: self.kind,
            position: self.position_at(t)?,
            radius: self.radius,
            v_max: self.v_max,
            envelope: self.envelope(),
        })
    }

    pub fn horizon(&self) -> Option<(f64, f64)> {
        self.motion.horizon()
    }
}

/// Snapshot of an obstacle at the start of a prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObstacleView {
    pub id: u32,
    pub kind: ObstacleKind,
    pub position: Point2,
    pub radius: f64,
    pub v_max: f64,
    pub envelope: Ball,
}

impl ObstacleView {
    /// Velocity-constrained occupancy over `[start, end]`: every footprint
    /// reachable within `end` seconds of the observation.
    pub fn occupancy(&self, interval: TimeInterval) -> TimedOccupancy {
        TimedOccupancy { interval, shape: Shape::Ball(self.reach(interval.end)) }
    }

    pub fn reach(&self, until: f64) -> Ball {
        Ball::new(self.position, self.radius + self.v_max * until)
    }

    /// Occupancy over `[0, until]` intersected with the envelope.
    pub fn region(&self, until: f64) -> ObstacleRegion {
        ObstacleRegion { reach: self.reach(until), envelope: self.envelope }
    }
}

/// Intersection of an obstacle's reach ball and its envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleRegion {
    pub reach: Ball,
    pub envelope: Ball,
}

impl ObstacleRegion {
    /// Conservative overlap test: the shape must meet both balls.
    pub fn intersects(&self, shape: &Shape) -> bool {
        geometry::intersects(shape, &Shape::Ball(self.envelope))
            && geometry::intersects(shape, &Shape::Ball(self.reach))
    }

    pub fn contains(&self, p: Point2) -> bool {
        self.reach.contains(p) && self.envelope.contains(p)
    }

    /// Minkowski sum with a disc, over-approximated by expanding both balls.
    pub fn expanded(&self, r: f64) -> ObstacleRegion {
        ObstacleRegion {
            reach: Ball::new(self.reach.center, self.reach.radius + r),
            envelope: Ball::new(self.envelope.center, self.envelope.radius + r),
        }
    }
}

impl RayCast for ObstacleRegion {
    fn ray_interval(&self, origin: Point2, dir: Vector2) -> Option<(f64, f64)> {
        Intersection(self.reach, self.envelope).ray_interval(origin, dir)
    }
}

/// Occupancy of a moving obstacle observed at `observed_at`, over `interval`
/// measured from the observation.
pub fn obstacle_occupancy(
    ob: &Obstacle,
    observed_at: f64,
    interval: TimeInterval,
) -> Result<TimedOccupancy, ReachError> {
    if let Some((start, end)) = ob.horizon() {
        let last = observed_at + interval.end;
        if last > end {
            return Err(ReachError::BeyondHorizon { time: last, start, end });
        }
    }
    Ok(ob.observe(observed_at)?.occupancy(interval))
}

/// Broad-phase chunk over trajectory steps `first..last`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Chunk {
    pub first: usize,
    pub last: usize,
    pub capsule: Capsule,
}

/// Groups trajectory steps into chunks whose length grows with elapsed time
/// (about `1/ratio` of it). Each chunk capsule joins the first and last
/// position and is widened by a bound on the deviation of the positions
/// between, so it contains every per-step capsule of the chunk.
pub(crate) fn broad_phase_chunks(traj: &Trajectory, radius: f64, ratio: usize) -> Vec<Chunk> {
    let dt = traj.dt();
    let runs = traj.runs();
    let mut out = Vec::new();
    let mut k = 0;
    while k < runs.len() {
        if runs[k].steps == 1 {
            let g = k;
            while k < runs.len() && runs[k].steps == 1 {
                k += 1;
            }
            let base = runs[g].first;
            let mut positions: Vec<Point2> = runs[g..k].iter().map(|r| r.start.position).collect();
            positions.push(traj.state(base + positions.len()).position);
            let mut a = 0;
            while a + 1 < positions.len() {
                let b = (a + ((base + a) / ratio).max(1)).min(positions.len() - 1);
                let axis = geometry::Segment::new(positions[a], positions[b]);
                let dev =
                    positions[a + 1..b].iter().map(|p| geometry::dist_point_segment(*p, axis)).fold(0.0, f64::max);
                out.push(Chunk {
                    first: base + a,
                    last: base + b,
                    capsule: Capsule::new(axis.start, axis.end, radius + dev),
                });
                a = b;
            }
        } else {
            let run = &runs[k];
            let mut a = 0;
            let mut pa = run.start.position;
            while a < run.steps {
                let b = (a + ((run.first + a) / ratio).max(1)).min(run.steps);
                let pb = run.state_at(b, dt).position;
                let dev = run.chord_deviation(a, b, dt) + CHORD_SLACK;
                out.push(Chunk {
                    first: run.first + a,
                    last: run.first + b,
                    capsule: Capsule::new(pa, pb, radius + dev),
                });
                a = b;
                pa = pb;
            }
            k += 1;
        }
    }
    out
}

/// Absolute slack for rounding in closed-form run positions (m).
const CHORD_SLACK: f64 = 1e-9;

/// Ball around the first state containing every chunk capsule.
pub(crate) fn chunks_extent(start: Point2, chunks: &[Chunk]) -> Ball {
    let far = chunks
        .iter()
        .map(|c| c.capsule.a.distance(start).max(c.capsule.b.distance(start)) + c.capsule.radius)
        .fold(0.0, f64::max);
    Ball::new(start, far)
}

impl RobotModel {
    /// Occupancy with the model's capsule radius, rounding guard included.
    pub fn robot_occupancy(&self, traj: &Trajectory) -> OccupancySet {
        robot_occupancy(traj, self.radius, self.occupancy_radius() - self.radius)
    }
}
