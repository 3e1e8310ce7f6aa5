//! Planar primitives and the intersection predicates the occupancy checks run on.
//!
//! All sets are closed: two shapes that touch intersect. Balls and capsules are
//! stored as a core point/segment plus a radius, so every predicate reduces to a
//! point-segment or segment-segment distance compared against a radius sum.

use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

/// Points double as displacement vectors.
pub type Vector2 = Point2;

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    /// Unit vector at `angle` radians from the x axis.
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = math::sin_cos(angle);
        Point2::new(c, s)
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z component of the 3D cross product.
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        math::hypot(self.x, self.y)
    }

    pub fn distance(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    pub fn lerp(self, o: Point2, t: f64) -> Point2 {
        self + (o - self) * t
    }

    pub fn midpoint(self, o: Point2) -> Point2 {
        Point2::new(0.5 * (self.x + o.x), 0.5 * (self.y + o.y))
    }

    /// Rotates counter-clockwise by the angle whose sine and cosine are given.
    pub fn rotate_sc(self, sin: f64, cos: f64) -> Point2 {
        Point2::new(cos * self.x - sin * self.y, sin * self.x + cos * self.y)
    }

    pub fn perp(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point2 {
    fn add_assign(&mut self, o: Point2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Segment {
    pub start: Point2,
    pub end: Point2,
}

impl Segment {
    pub const fn new(start: Point2, end: Point2) -> Self {
        Segment { start, end }
    }

    pub fn point(p: Point2) -> Self {
        Segment { start: p, end: p }
    }

    pub fn length(&self) -> f64 {
        self.start.distance(self.end)
    }

    pub fn at(&self, t: f64) -> Point2 {
        self.start.lerp(self.end, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Ball {
    pub center: Point2,
    pub radius: f64,
}

impl Ball {
    pub const fn new(center: Point2, radius: f64) -> Self {
        Ball { center, radius }
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.distance(self.center) <= self.radius
    }
}

/// A segment swept by a disc. `a == b` is allowed and degenerates to a ball.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Capsule {
    pub a: Point2,
    pub b: Point2,
    pub radius: f64,
}

impl Capsule {
    pub const fn new(a: Point2, b: Point2, radius: f64) -> Self {
        Capsule { a, b, radius }
    }

    pub fn axis(&self) -> Segment {
        Segment::new(self.a, self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum Shape {
    Ball(Ball),
    Capsule(Capsule),
}

impl Shape {
    /// The point or segment whose radius-neighbourhood is this shape.
    pub fn core(&self) -> Segment {
        match self {
            Shape::Ball(b) => Segment::point(b.center),
            Shape::Capsule(c) => c.axis(),
        }
    }

    pub fn radius(&self) -> f64 {
        match self {
            Shape::Ball(b) => b.radius,
            Shape::Capsule(c) => c.radius,
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        dist_point_segment(p, self.core()) <= self.radius()
    }
}

impl From<Ball> for Shape {
    fn from(b: Ball) -> Self {
        Shape::Ball(b)
    }
}

impl From<Capsule> for Shape {
    fn from(c: Capsule) -> Self {
        Shape::Capsule(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("expansion radius must be non-negative, got {0}")]
    NegativeRadius(f64),
    #[error("cannot over-approximate an empty set of primitives")]
    Empty,
    #[error("line origin lies inside obstacle {index}")]
    OriginInside { index: usize },
}

pub fn dist_point_segment(p: Point2, s: Segment) -> f64 {
    let d = s.end - s.start;
    let l2 = d.norm_sq();
    if l2 == 0.0 {
        return p.distance(s.start);
    }
    let t = ((p - s.start).dot(d) / l2).clamp(0.0, 1.0);
    p.distance(s.start + d * t)
}

fn strictly_opposite(a: f64, b: f64) -> bool {
    (a > 0.0 && b < 0.0) || (a < 0.0 && b > 0.0)
}

/// Minimum distance between two segments (either may be a single point).
pub fn dist_segment_segment(s: Segment, t: Segment) -> f64 {
    let ds = s.end - s.start;
    let dt = t.end - t.start;
    let o1 = ds.cross(t.start - s.start);
    let o2 = ds.cross(t.end - s.start);
    let o3 = dt.cross(s.start - t.start);
    let o4 = dt.cross(s.end - t.start);
    if strictly_opposite(o1, o2) && strictly_opposite(o3, o4) {
        return 0.0;
    }
    // Non-crossing segments attain their distance at an endpoint of one of them.
    dist_point_segment(s.start, t)
        .min(dist_point_segment(s.end, t))
        .min(dist_point_segment(t.start, s))
        .min(dist_point_segment(t.end, s))
}

/// Closed-set overlap test.
pub fn intersects(a: &Shape, b: &Shape) -> bool {
    dist_segment_segment(a.core(), b.core()) <= a.radius() + b.radius()
}

/// Minkowski sum with a disc of radius `r`.
pub fn expand(shape: &Shape, r: f64) -> Result<Shape, GeometryError> {
    if !(r >= 0.0) {
        return Err(GeometryError::NegativeRadius(r));
    }
    Ok(match *shape {
        Shape::Ball(b) => Shape::Ball(Ball::new(b.center, b.radius + r)),
        Shape::Capsule(c) => Shape::Capsule(Capsule::new(c.a, c.b, c.radius + r)),
    })
}

/// Sets a parametrised line `origin + α·dir` can be clipped against.
pub trait RayCast {
    /// Closed parameter interval `[lo, hi]` of the line inside the set, if any.
    /// Unbounded ends are reported as infinities.
    fn ray_interval(&self, origin: Point2, dir: Vector2) -> Option<(f64, f64)>;
}

fn circle_interval(origin: Point2, dir: Vector2, center: Point2, r: f64) -> Option<(f64, f64)> {
    let m = origin - center;
    let a = dir.norm_sq();
    let c = m.norm_sq() - r * r;
    if a == 0.0 {
        return (c <= 0.0).then_some((f64::NEG_INFINITY, f64::INFINITY));
    }
    let half_b = m.dot(dir);
    let disc = half_b * half_b - a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = math::sqrt(disc);
    // Stable root pair: q shares the sign of -half_b.
    let q = if half_b >= 0.0 { -half_b - sq } else { -half_b + sq };
    let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    Some((r1.min(r2), r1.max(r2)))
}

/// Interval of α for which `lo_bound <= k·α + c <= hi_bound`.
fn slab_interval(k: f64, c: f64, lo_bound: f64, hi_bound: f64) -> Option<(f64, f64)> {
    if k == 0.0 {
        return (c >= lo_bound && c <= hi_bound).then_some((f64::NEG_INFINITY, f64::INFINITY));
    }
    let t1 = (lo_bound - c) / k;
    let t2 = (hi_bound - c) / k;
    Some((t1.min(t2), t1.max(t2)))
}

fn hull(a: Option<(f64, f64)>, b: Option<(f64, f64)>) -> Option<(f64, f64)> {
    match (a, b) {
        (Some(x), Some(y)) => Some((x.0.min(y.0), x.1.max(y.1))),
        (x, None) => x,
        (None, y) => y,
    }
}

fn overlap(a: Option<(f64, f64)>, b: Option<(f64, f64)>) -> Option<(f64, f64)> {
    let (a, b) = (a?, b?);
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    (lo <= hi).then_some((lo, hi))
}

impl RayCast for Ball {
    fn ray_interval(&self, origin: Point2, dir: Vector2) -> Option<(f64, f64)> {
        circle_interval(origin, dir, self.center, self.radius)
    }
}

impl RayCast for Capsule {
    fn ray_interval(&self, origin: Point2, dir: Vector2) -> Option<(f64, f64)> {
        let caps =
            hull(circle_interval(origin, dir, self.a, self.radius), circle_interval(origin, dir, self.b, self.radius));
        let axis = self.b - self.a;
        let len = axis.norm();
        if len == 0.0 {
            return caps;
        }
        let u = axis * (1.0 / len);
        let n = u.perp();
        let m = origin - self.a;
        let body = overlap(
            slab_interval(dir.dot(u), m.dot(u), 0.0, len),
            slab_interval(dir.dot(n), m.dot(n), -self.radius, self.radius),
        );
        // The capsule is convex, so the union of its pieces' intervals is one interval.
        hull(caps, body)
    }
}

impl RayCast for Shape {
    fn ray_interval(&self, origin: Point2, dir: Vector2) -> Option<(f64, f64)> {
        match self {
            Shape::Ball(b) => b.ray_interval(origin, dir),
            Shape::Capsule(c) => c.ray_interval(origin, dir),
        }
    }
}

/// Intersection of two convex sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intersection<A, B>(pub A, pub B);

impl<A: RayCast, B: RayCast> RayCast for Intersection<A, B> {
    fn ray_interval(&self, origin: Point2, dir: Vector2) -> Option<(f64, f64)> {
        overlap(self.0.ray_interval(origin, dir), self.1.ray_interval(origin, dir))
    }
}

/// Result of clipping the ray `g(α) = origin + α·(target − origin)`, α ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FreePrefix {
    /// The whole ray is clear.
    Unbounded,
    /// `G([0, α])` touches an obstacle exactly at `α` and is clear before it.
    Bounded(f64),
}

impl FreePrefix {
    pub fn alpha(self) -> f64 {
        match self {
            FreePrefix::Unbounded => f64::INFINITY,
            FreePrefix::Bounded(a) => a,
        }
    }
}

/// Largest α such that the segment from `origin` to `g(α)` stays clear of every
/// obstacle (the supremum; the closed segment up to it touches).
pub fn free_prefix_alpha<R: RayCast>(
    origin: Point2,
    target: Point2,
    obstacles: &[R],
) -> Result<FreePrefix, GeometryError> {
    let dir = target - origin;
    let mut best = FreePrefix::Unbounded;
    for (index, ob) in obstacles.iter().enumerate() {
        let Some((lo, hi)) = ob.ray_interval(origin, dir) else {
            continue;
        };
        if hi < 0.0 {
            continue;
        }
        if lo <= 0.0 {
            return Err(GeometryError::OriginInside { index });
        }
        if lo < best.alpha() {
            best = FreePrefix::Bounded(lo);
        }
    }
    Ok(best)
}

/// Ball containing every primitive: centre at the midpoint of the two farthest
/// core points (double sweep), radius large enough to cover everything.
pub fn ball_overapprox(prims: &[Shape]) -> Result<Ball, GeometryError> {
    let first = prims.first().ok_or(GeometryError::Empty)?;
    let points = || {
        prims.iter().flat_map(|p| {
            let s = p.core();
            [s.start, s.end]
        })
    };
    let farthest_from = |q: Point2| {
        points()
            .fold((q, -1.0), |(best, d), p| {
                let dp = p.distance(q);
                if dp > d {
                    (p, dp)
                } else {
                    (best, d)
                }
            })
            .0
    };
    let a = farthest_from(first.core().start);
    let b = farthest_from(a);
    let center = a.midpoint(b);
    let radius = prims
        .iter()
        .map(|p| {
            let s = p.core();
            center.distance(s.start).max(center.distance(s.end)) + p.radius()
        })
        .fold(0.0, f64::max);
    Ok(Ball::new(center, radius))
}

/// Bounding ball of a point cloud (same double-sweep heuristic).
pub fn points_overapprox(points: &[Point2]) -> Result<Ball, GeometryError> {
    let prims: Vec<Shape> = points.iter().map(|&p| Shape::Ball(Ball::new(p, 0.0))).collect();
    ball_overapprox(&prims)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    #[test]
    fn point_segment_examples() {
        let s = Segment::new(p(-1.0, 0.0), p(1.0, 0.0));
        assert_eq!(dist_point_segment(p(0.0, 1.0), s), 1.0);
        assert_eq!(dist_point_segment(p(2.0, 0.0), s), 1.0);
        let s = Segment::new(p(0.0, 0.0), p(1.0, 0.0));
        assert!((dist_point_segment(p(0.5, 0.05), s) - 0.05).abs() < 1e-15);
        assert_eq!(dist_point_segment(p(3.0, 4.0), Segment::point(p(0.0, 0.0))), 5.0);
    }

    #[test]
    fn intersects_examples() {
        let a = Shape::Ball(Ball::new(p(0.0, 0.0), 0.1));
        let b = Shape::Ball(Ball::new(p(1.0, 0.0), 0.1));
        assert!(!intersects(&a, &b));
        let c = Shape::Capsule(Capsule::new(p(0.0, 0.0), p(1.0, 0.0), 0.1));
        let d = Shape::Ball(Ball::new(p(0.5, 0.05), 0.1));
        assert!(intersects(&c, &d));
        // touching counts
        let e = Shape::Ball(Ball::new(p(0.5, 0.0), 0.25));
        let f = Shape::Ball(Ball::new(p(0.0, 0.0), 0.25));
        assert!(intersects(&e, &f));
    }

    #[test]
    fn crossing_segments_have_zero_distance() {
        let s = Segment::new(p(-1.0, -1.0), p(1.0, 1.0));
        let t = Segment::new(p(-1.0, 1.0), p(1.0, -1.0));
        assert_eq!(dist_segment_segment(s, t), 0.0);
        let t = Segment::new(p(2.0, 0.0), p(3.0, 0.0));
        assert!((dist_segment_segment(s, t) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn expand_examples() {
        let b = Shape::Ball(Ball::new(p(1.0, 0.0), 0.1));
        assert_eq!(expand(&b, 0.0).unwrap(), b);
        assert_eq!(expand(&b, 0.15).unwrap().radius(), 0.25);
        let c = Shape::Capsule(Capsule::new(p(0.0, 0.0), p(1.0, 1.0), 0.05));
        let e = expand(&c, 0.02).unwrap();
        assert!((e.radius() - 0.07).abs() < 1e-15);
        assert_eq!(e.core(), c.core());
        assert_eq!(expand(&b, -0.1), Err(GeometryError::NegativeRadius(-0.1)));
    }

    #[test]
    fn free_prefix_examples() {
        let none: [Shape; 0] = [];
        assert_eq!(free_prefix_alpha(p(0.0, 0.0), p(1.0, 0.0), &none), Ok(FreePrefix::Unbounded));

        let ob = [Shape::Ball(Ball::new(p(0.5, 0.0), 0.2))];
        match free_prefix_alpha(p(0.0, 0.0), p(1.0, 0.0), &ob).unwrap() {
            FreePrefix::Bounded(a) => assert!((a - 0.3).abs() < 1e-12),
            other => panic!("expected bounded, got {other:?}"),
        }

        let ob = [Shape::Ball(Ball::new(p(0.0, 1.0), 0.5))];
        assert_eq!(free_prefix_alpha(p(0.0, 0.0), p(1.0, 0.0), &ob), Ok(FreePrefix::Unbounded));

        let ob = [Shape::Ball(Ball::new(p(0.0, 0.0), 0.5))];
        assert_eq!(free_prefix_alpha(p(0.0, 0.0), p(1.0, 0.0), &ob), Err(GeometryError::OriginInside { index: 0 }));
    }

    #[test]
    fn free_prefix_ignores_obstacles_behind() {
        let ob = [Shape::Ball(Ball::new(p(-1.0, 0.0), 0.2))];
        assert_eq!(free_prefix_alpha(p(0.0, 0.0), p(1.0, 0.0), &ob), Ok(FreePrefix::Unbounded));
    }

    #[test]
    fn capsule_ray_hits_body_and_caps() {
        let c = Capsule::new(p(1.0, -1.0), p(1.0, 1.0), 0.1);
        let (lo, hi) = c.ray_interval(p(0.0, 0.0), p(1.0, 0.0)).unwrap();
        assert!((lo - 0.9).abs() < 1e-12 && (hi - 1.1).abs() < 1e-12);
        // along the axis: enters through the lower cap
        let (lo, _) = c.ray_interval(p(1.0, -3.0), p(0.0, 1.0)).unwrap();
        assert!((lo - 1.9).abs() < 1e-12);
    }

    #[test]
    fn lens_interval_is_overlap() {
        let lens = Intersection(Ball::new(p(0.0, 0.0), 1.0), Ball::new(p(1.5, 0.0), 1.0));
        let (lo, hi) = lens.ray_interval(p(-3.0, 0.0), p(1.0, 0.0)).unwrap();
        assert!((lo - 3.5).abs() < 1e-12 && (hi - 4.0).abs() < 1e-12);
        let apart = Intersection(Ball::new(p(0.0, 0.0), 1.0), Ball::new(p(5.0, 0.0), 1.0));
        assert!(apart.ray_interval(p(-3.0, 0.0), p(1.0, 0.0)).is_none());
    }

    #[test]
    fn overapprox_examples() {
        let one = [Shape::Ball(Ball::new(p(0.0, 0.0), 0.1))];
        assert_eq!(ball_overapprox(&one).unwrap(), Ball::new(p(0.0, 0.0), 0.1));
        let two = [Shape::Ball(Ball::new(p(-1.0, 0.0), 0.1)), Shape::Ball(Ball::new(p(1.0, 0.0), 0.1))];
        let b = ball_overapprox(&two).unwrap();
        assert_eq!(b.center, p(0.0, 0.0));
        assert!((b.radius - 1.1).abs() < 1e-15);
        assert_eq!(ball_overapprox(&[]), Err(GeometryError::Empty));
    }
}
