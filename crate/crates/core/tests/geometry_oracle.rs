mod oracles;

use oracles::{first_entry, p, segment_distance, Prim, P};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shieldsim_core::geometry::{self, Ball, Capsule, FreePrefix, GeometryError, Point2, Segment, Shape};

fn pt(q: Point2) -> P {
    p(q.x, q.y)
}

fn random_shape(rng: &mut ChaCha8Rng) -> Shape {
    let c = Point2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    let r = rng.random_range(0.0..0.6);
    if rng.random_bool(0.4) {
        Shape::Ball(Ball::new(c, r))
    } else {
        let d = Point2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        Shape::Capsule(Capsule::new(c, c + d, r))
    }
}

fn prim(s: &Shape) -> Prim {
    let core = s.core();
    Prim { a: pt(core.start), b: pt(core.end), r: s.radius() }
}

#[test]
fn segment_distance_matches_nested_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..2000 {
        let mut q = || Point2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let (a, b, c, d) = (q(), q(), q(), q());
        let got = geometry::dist_segment_segment(Segment::new(a, b), Segment::new(c, d));
        let want = segment_distance(pt(a), pt(b), pt(c), pt(d));
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
}

#[test]
fn intersection_matches_oracle_outside_band() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    for _ in 0..2000 {
        let (a, b) = (random_shape(&mut rng), random_shape(&mut rng));
        let (pa, pb) = (prim(&a), prim(&b));
        let gap = segment_distance(pa.a, pa.b, pb.a, pb.b) - pa.r - pb.r;
        if gap.abs() < 1e-9 {
            continue;
        }
        checked += 1;
        assert_eq!(geometry::intersects(&a, &b), gap < 0.0, "{a:?} {b:?} gap {gap}");
    }
    assert!(checked > 1900);
}

#[test]
fn free_prefix_matches_ray_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut bounded = 0;
    for _ in 0..1000 {
        let origin = Point2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let target = Point2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let n = rng.random_range(1..5);
        let obs: Vec<Shape> = (0..n).map(|_| random_shape(&mut rng)).collect();
        let (o, dir) = (pt(origin), pt(target).sub(pt(origin)));
        let mut want: Option<f64> = None;
        let mut inside = false;
        let mut grazing = false;
        for s in &obs {
            let pr = prim(s);
            let f = |a: f64| pr.signed(o.add(dir.scale(a)));
            let (_, fm) = oracles::golden_min(0.0, 1e3, 200, f);
            if fm.abs() < 1e-9 || f(0.0).abs() < 1e-9 {
                grazing = true;
            }
            match first_entry(1e3, f) {
                Some(0.0) => inside = true,
                Some(a) => want = Some(want.map_or(a, |w: f64| w.min(a))),
                None => {}
            }
        }
        if grazing {
            continue;
        }
        let got = geometry::free_prefix_alpha(origin, target, &obs);
        if inside {
            assert!(matches!(got, Err(GeometryError::OriginInside { .. })), "{got:?}");
            continue;
        }
        match (got.unwrap(), want) {
            (FreePrefix::Unbounded, None) => {}
            (FreePrefix::Bounded(a), Some(w)) => {
                bounded += 1;
                assert!((a - w).abs() <= 1e-7 * w.max(1.0), "{a} vs {w}");
            }
            (g, w) => panic!("impl {g:?} vs oracle {w:?}"),
        }
    }
    assert!(bounded > 100);
}

#[test]
fn free_prefix_is_sound_on_sampled_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let origin = Point2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let target = Point2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let obs: Vec<Shape> = (0..3).map(|_| random_shape(&mut rng)).collect();
        let Ok(FreePrefix::Bounded(alpha)) = geometry::free_prefix_alpha(origin, target, &obs) else {
            continue;
        };
        let hi = alpha - 1e-9;
        for _ in 0..10_000 {
            let a = rng.random_range(0.0..=hi.max(0.0));
            let q = origin.lerp(target, a);
            assert!(obs.iter().all(|s| !s.contains(q)), "point at α={a} inside, α*={alpha}");
        }
    }
}

#[test]
fn overapprox_ball_contains_sampled_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let n = rng.random_range(1..6);
        let prims: Vec<Shape> = (0..n).map(|_| random_shape(&mut rng)).collect();
        let ball = geometry::ball_overapprox(&prims).unwrap();
        for s in &prims {
            let core = s.core();
            for _ in 0..200 {
                let t = rng.random_range(0.0..=1.0);
                let ang = rng.random_range(0.0..std::f64::consts::TAU);
                let rad = s.radius() * rng.random_range(0.0f64..=1.0).sqrt();
                let q = core.at(t) + Point2::from_angle(ang) * rad;
                assert!(q.distance(ball.center) <= ball.radius + 1e-12);
            }
        }
    }
}

fn arb_shape() -> impl Strategy<Value = Shape> {
    let coord = -3.0f64..3.0;
    let radius = 0.0f64..1.0;
    prop_oneof![
        (coord.clone(), coord.clone(), radius.clone())
            .prop_map(|(x, y, r)| Shape::Ball(Ball::new(Point2::new(x, y), r))),
        (coord.clone(), coord.clone(), coord.clone(), coord, radius)
            .prop_map(|(x, y, u, v, r)| Shape::Capsule(Capsule::new(Point2::new(x, y), Point2::new(u, v), r))),
    ]
}

proptest! {
    #[test]
    fn intersects_is_symmetric(a in arb_shape(), b in arb_shape()) {
        prop_assert_eq!(geometry::intersects(&a, &b), geometry::intersects(&b, &a));
    }

    #[test]
    fn expansion_is_monotone(a in arb_shape(), b in arb_shape(), r in 0.0f64..1.0) {
        let grown = geometry::expand(&a, r).unwrap();
        if geometry::intersects(&a, &b) {
            prop_assert!(geometry::intersects(&grown, &b));
        }
        prop_assert!((grown.radius() - a.radius() - r).abs() < 1e-15);
    }

    #[test]
    fn shape_contains_its_core(a in arb_shape(), t in 0.0f64..=1.0) {
        prop_assert!(a.contains(a.core().at(t)));
    }
}
