//! Oracle-backed checks of the simulator's guarantees.
//!
//! Each check recomputes its reference values independently (RK4
//! integration, golden-section and bisection searches, closed-form lens
//! distances) and compares them with the simulator. `selftest` runs them at
//! reduced sizes; the acceptance target runs them at full size.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use shieldsim_core::dynamics::{self, effective_control};
use shieldsim_core::geometry::{self, Ball, Capsule, FreePrefix, GeometryError, Point2, Shape};
use shieldsim_core::policy::GoalSeek;
use shieldsim_core::reachability::{obstacle_occupancy, Motion, Obstacle, ObstacleKind, TimeInterval};
use shieldsim_core::shield::{self, Substitution};
use shieldsim_core::{
    Control, DynamicsParams, Env, EnvConfig, EpisodeMetrics, Mode, Projection, RobotModel, RobotState,
};

use crate::config::{PolicyKind, RunConfig};
use crate::harness::{self, episode_seed};

#[path = "../../core/tests/oracles/mod.rs"]
mod oracle;

use oracle::{first_entry, golden_min, p, point_segment_distance, rk4, rk4_path, segment_distance, Prim, P};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Check {
        Check { name, passed, detail }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sizes {
    pub contact_episodes: usize,
    pub contact_horizon: usize,
    pub zeta_cases: usize,
    pub capsule_cases: usize,
    pub obstacle_cases: usize,
    pub geometry_cases: usize,
    pub reduction_episodes: usize,
    pub determinism_horizon: usize,
}

impl Sizes {
    pub const ACCEPTANCE: Sizes = Sizes {
        contact_episodes: 1000,
        contact_horizon: 1000,
        zeta_cases: 10_000,
        capsule_cases: 10_000,
        obstacle_cases: 10_000,
        geometry_cases: 10_000,
        reduction_episodes: 100,
        determinism_horizon: 300,
    };

    pub const SELFTEST: Sizes = Sizes {
        contact_episodes: 8,
        contact_horizon: 300,
        zeta_cases: 1000,
        capsule_cases: 500,
        obstacle_cases: 1000,
        geometry_cases: 500,
        reduction_episodes: 100,
        determinism_horizon: 60,
    };
}

fn q(v: Point2) -> P {
    p(v.x, v.y)
}

fn x(s: &RobotState) -> oracle::X {
    [s.position.x, s.position.y, s.velocity.x, s.velocity.y, s.heading]
}

fn random_state(rng: &mut ChaCha8Rng, cap: f64) -> RobotState {
    let speed = cap * rng.random_range(0.0f64..=1.0).sqrt();
    RobotState {
        position: Point2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
        velocity: Point2::from_angle(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)) * speed,
        heading: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
    }
}

fn random_control(rng: &mut ChaCha8Rng, params: &DynamicsParams) -> Control {
    Control::new(rng.random_range(-params.u1_max..params.u1_max), rng.random_range(-params.u2_max..params.u2_max))
}

/// Random policy, default scene: true contacts from the dense sweep.
pub fn zero_contacts(episodes: usize, horizon: usize) -> Check {
    let mut cfg = EnvConfig::default();
    cfg.task.horizon = horizon;
    let started = Instant::now();
    let per: Result<Vec<EpisodeMetrics>, String> = (0..episodes)
        .into_par_iter()
        .map(|i| {
            harness::run_episode(&cfg, Mode::BareShield, PolicyKind::Random, episode_seed(0, i), false)
                .map(|(m, _)| m)
                .map_err(|e| format!("episode {i}: {e}"))
        })
        .collect();
    let secs = started.elapsed().as_secs_f64();
    match per {
        Err(e) => Check::new("zero-violation shield", false, e),
        Ok(ms) => {
            let contacts: u64 = ms.iter().map(|m| u64::from(m.contacts)).sum();
            let steps: u64 = ms.iter().map(|m| u64::from(m.steps)).sum();
            let interventions: u64 = ms.iter().map(|m| u64::from(m.interventions)).sum();
            Check::new(
                "zero-violation shield",
                contacts == 0 && steps == (episodes * horizon) as u64,
                format!(
                    "{episodes} episodes x {horizon} steps, {contacts} contacts, {interventions} interventions, {secs:.1} s"
                ),
            )
        }
    }
}

/// Midpoint of the true single-step path vs the chord midpoint.
pub fn linearization_bound(cases: usize) -> Check {
    let m = RobotModel::desk_default();
    let zeta = m.zeta();
    let expected = 0.05 * 0.01 * 0.01 / 8.0;
    let mut rng = ChaCha8Rng::seed_from_u64(0x2e7a);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let s = RobotState { position: Point2::ORIGIN, ..random_state(&mut rng, m.params.speed_cap) };
        let u = random_control(&mut rng, &m.params);
        let Ok(next) = dynamics::step(&m.params, &s, u, m.grid.dt) else {
            violations += 1;
            continue;
        };
        let ue = effective_control(&m.params, &s, u, m.grid.dt);
        let mid = rk4(x(&s), ue.thrust / m.params.mass, ue.yaw_rate, m.grid.dt / 2.0, 50);
        let dev = p(mid[0], mid[1]).dist(q(next.position).scale(0.5));
        worst = worst.max(dev);
        violations += usize::from(dev > zeta);
    }
    let formula_ok = (zeta - expected).abs() <= 1e-18;
    Check::new(
        "linearization bound",
        violations == 0 && formula_ok,
        format!("zeta = {zeta:e} (expected {expected:e}), {cases} steps, worst deviation {worst:e}, {violations} violations"),
    )
}

/// Fine RK4 paths inside the robot capsules; scripted obstacles inside their
/// predicted balls.
pub fn occupancy_soundness(capsule_cases: usize, obstacle_cases: usize) -> Check {
    let m = RobotModel::desk_default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0cc);
    let mut capsule_violations = 0;
    for _ in 0..capsule_cases {
        let s = random_state(&mut rng, m.params.speed_cap);
        let u = random_control(&mut rng, &m.params);
        let traj = shield::build_shielded(&m, &s, u);
        let i = if rng.random_bool(0.5) { 0 } else { rng.random_range(0..traj.moving_len().max(1)) };
        let occ = m.robot_occupancy(&traj);
        let item = occ.items[i];
        let Shape::Capsule(c) = item.shape else {
            capsule_violations += 1;
            continue;
        };
        let interval_ok = item.interval.start == traj.time(i) && item.interval.end == traj.time(i + 1);
        let si = traj.state(i);
        let ue = effective_control(&m.params, &si, traj.control(i), m.grid.dt);
        let inner = c.radius - m.radius;
        let escaped = rk4_path(x(&si), ue.thrust / m.params.mass, ue.yaw_rate, m.grid.dt, 100)
            .into_iter()
            .any(|pt| point_segment_distance(pt, q(c.a), q(c.b)) > inner);
        capsule_violations += usize::from(escaped || !interval_ok);
    }

    let mut obstacle_violations = 0;
    for _ in 0..obstacle_cases {
        let path = rng.random_range(0.05..1.0);
        let rate = rng.random_range(-1.0..1.0);
        let r = rng.random_range(0.01..0.4);
        let motion = Motion::Circular {
            center: Point2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
            radius: path,
            angular_rate: rate,
            phase: rng.random_range(-3.2..3.2),
        };
        let ob = Obstacle::new(0, ObstacleKind::Gremlin, r, path * f64::abs(rate), motion.clone())
            .expect("declared speed matches the path");
        let t0 = rng.random_range(0.0..100.0);
        let end = rng.random_range(0.001..50.0);
        let Ok(occ) = obstacle_occupancy(&ob, t0, TimeInterval::new(0.0, end).expect("ordered")) else {
            obstacle_violations += 1;
            continue;
        };
        let Shape::Ball(ball) = occ.shape else {
            obstacle_violations += 1;
            continue;
        };
        let env = ob.envelope();
        for k in 0..=100 {
            let t = t0 + end * k as f64 / 100.0;
            let c = match motion {
                Motion::Circular { center, radius, angular_rate, phase } => {
                    let a = phase + angular_rate * t;
                    p(center.x + radius * a.cos(), center.y + radius * a.sin())
                }
                _ => unreachable!(),
            };
            let outside_reach = c.dist(q(ball.center)) + r > ball.radius + 1e-12;
            let outside_env = c.dist(q(env.center)) + r > env.radius + 1e-12;
            if outside_reach || outside_env {
                obstacle_violations += 1;
                break;
            }
        }
    }
    Check::new(
        "occupancy soundness",
        capsule_violations == 0 && obstacle_violations == 0,
        format!(
            "{capsule_cases} capsule cases at dt/100: {capsule_violations} violations; \
             {obstacle_cases} obstacle cases: {obstacle_violations} violations"
        ),
    )
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
    Prim { a: q(core.start), b: q(core.end), r: s.radius() }
}

/// Intersection tests and free-prefix search against discretised oracles.
pub fn geometry_equivalence(cases: usize) -> Check {
    const BAND: f64 = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(0x6e0);
    let (mut checked_i, mut bad_i) = (0, 0);
    for _ in 0..cases {
        let (a, b) = (random_shape(&mut rng), random_shape(&mut rng));
        let (pa, pb) = (prim(&a), prim(&b));
        let gap = segment_distance(pa.a, pa.b, pb.a, pb.b) - pa.r - pb.r;
        if gap.abs() < BAND {
            continue;
        }
        checked_i += 1;
        bad_i += usize::from(geometry::intersects(&a, &b) != (gap < 0.0));
    }

    let (mut checked_f, mut bad_f) = (0, 0);
    for _ in 0..cases {
        let origin = Point2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let target = Point2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let n = rng.random_range(1..5);
        let obs: Vec<Shape> = (0..n).map(|_| random_shape(&mut rng)).collect();
        let (o, dir) = (q(origin), q(target).sub(q(origin)));
        let mut want: Option<f64> = None;
        let mut inside = false;
        let mut grazing = false;
        for s in &obs {
            let pr = prim(s);
            let f = |a: f64| pr.signed(o.add(dir.scale(a)));
            let (_, fm) = golden_min(0.0, 1e3, 200, f);
            if fm.abs() < BAND || f(0.0).abs() < BAND {
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
        checked_f += 1;
        let got = geometry::free_prefix_alpha(origin, target, &obs);
        let agrees = if inside {
            matches!(got, Err(GeometryError::OriginInside { .. }))
        } else {
            match (got, want) {
                (Ok(FreePrefix::Unbounded), None) => true,
                (Ok(FreePrefix::Bounded(a)), Some(w)) => (a - w).abs() <= 1e-7 * w.max(1.0),
                _ => false,
            }
        };
        bad_f += usize::from(!agrees);
    }
    Check::new(
        "geometry oracle equivalence",
        bad_i == 0 && bad_f == 0,
        format!(
            "intersection: {checked_i} of {cases} outside the band, {bad_i} disagreements; \
             free prefix: {checked_f} of {cases}, {bad_f} disagreements"
        ),
    )
}

/// Distance from `x` to the intersection of two discs (infinite if empty).
fn lens_distance(x: P, a: (P, f64), b: (P, f64)) -> f64 {
    let inside = |pt: P, d: (P, f64)| pt.dist(d.0) <= d.1 + 1e-12;
    if inside(x, a) && inside(x, b) {
        return 0.0;
    }
    let project = |d: (P, f64)| {
        let r = x.dist(d.0);
        if r <= d.1 {
            x
        } else {
            d.0.add(x.sub(d.0).scale(d.1 / r))
        }
    };
    let mut best = f64::INFINITY;
    let pa = project(a);
    if inside(pa, b) {
        best = best.min(x.dist(pa));
    }
    let pb = project(b);
    if inside(pb, a) {
        best = best.min(x.dist(pb));
    }
    let d = a.0.dist(b.0);
    if d > 0.0 && d <= a.1 + b.1 && d >= (a.1 - b.1).abs() {
        let along = (d * d + a.1 * a.1 - b.1 * b.1) / (2.0 * d);
        let h = (a.1 * a.1 - along * along).max(0.0).sqrt();
        let u = b.0.sub(a.0).scale(1.0 / d);
        let base = a.0.add(u.scale(along));
        for s in [1.0, -1.0] {
            let corner = p(base.x - s * h * u.y, base.y + s * h * u.x);
            best = best.min(x.dist(corner));
        }
    }
    best
}

type EpisodeRun = Result<(EpisodeMetrics, Vec<ProjectionEvent>), String>;

struct ProjectionEvent {
    time: f64,
    alpha: f64,
    detail: Projection,
    seed: u64,
}

/// Goal-seek suites in every mode on identical seeds, plus clearance of
/// every projection made in project mode.
pub fn intervention_reduction(episodes: usize) -> (Check, Check) {
    let cfg = EnvConfig::default();
    let policy = GoalSeek::default();
    let started = Instant::now();
    let runs: Vec<(Mode, EpisodeRun)> = Mode::ALL
        .iter()
        .flat_map(|&mode| (0..episodes).map(move |i| (mode, i)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(mode, i)| {
            let seed = episode_seed(0, i);
            let run = || -> Result<_, shieldsim_core::EnvError> {
                let mut env = Env::reset(&cfg, seed)?;
                let mut metrics = EpisodeMetrics::default();
                let mut events = Vec::new();
                while !env.is_done() {
                    let obs = env.observation();
                    let rec = env.step(policy.act(&obs, &env.model().params), mode)?;
                    metrics.record(&rec);
                    if rec.substituted == Substitution::Projected {
                        events.push(ProjectionEvent {
                            time: obs.time,
                            alpha: rec.alpha_used.unwrap_or(f64::NAN),
                            detail: rec.projection.expect("projected steps carry their projection"),
                            seed,
                        });
                    }
                }
                Ok((metrics, events))
            };
            (mode, run().map_err(|e| format!("{} episode {i}: {e}", mode.name())))
        })
        .collect();
    let secs = started.elapsed().as_secs_f64();

    let mut means = Vec::new();
    let mut events = Vec::new();
    for mode in Mode::ALL {
        let mut n = 0.0;
        let (mut interventions, mut goals) = (0.0, 0.0);
        for (m, r) in &runs {
            if *m != mode {
                continue;
            }
            match r {
                Ok((metrics, ev)) => {
                    n += 1.0;
                    interventions += f64::from(metrics.interventions);
                    goals += f64::from(metrics.goals_reached);
                    if mode == Mode::Project {
                        events.extend(ev.iter().map(|e| (e.time, e.alpha, e.detail, e.seed)));
                    }
                }
                Err(e) => {
                    let fail = Check::new("intervention reduction", false, e.clone());
                    return (fail.clone(), Check { name: "projection clearance", ..fail });
                }
            }
        }
        means.push((mode, interventions / n, goals / n));
    }
    let (_, bare_i, bare_g) = means[0];
    let mut passed = true;
    let mut parts = vec![format!("bare-shield: {bare_i:.2} interventions, {bare_g:.2} goals per episode")];
    for &(mode, mi, mg) in &means[1..] {
        let ok = mi <= 0.5 * bare_i && mg >= 0.9 * bare_g;
        passed &= ok;
        let ratio = if bare_i > 0.0 { mi / bare_i } else { 0.0 };
        parts.push(format!("{}: {mi:.2} interventions ({ratio:.3}x), {mg:.2} goals", mode.name()));
    }
    parts.push(format!("{episodes} episodes per mode, {secs:.1} s"));
    let reduction = Check::new("intervention reduction", passed, parts.join("; "));
    (reduction, projection_clearance(&cfg, &events))
}

fn projection_clearance(cfg: &EnvConfig, events: &[(f64, f64, Projection, u64)]) -> Check {
    let model = cfg.validate().expect("default config is valid");
    let eps = cfg.filter.epsilon;
    let t_v = (model.grid.steps_per_action + model.grid.failsafe_steps) as f64 * model.grid.dt;
    let mut worst = f64::INFINITY;
    let mut bad = 0;
    for &(time, alpha, pr, seed) in events {
        let env = Env::reset(cfg, seed).expect("seed replayed");
        let o = q(pr.origin);
        let dir = q(pr.target).sub(o);
        let mut clearance = f64::INFINITY;
        for ob in env.layout().obstacles().filter(|ob| ob.kind.is_shielded()) {
            let c = q(ob.position_at(time).expect("total motion"));
            let e = ob.envelope();
            let reach = (c, ob.radius + ob.v_max * t_v);
            let envelope = (q(e.center), e.radius);
            let hi = alpha.max(0.0);
            let (_, d) = golden_min(0.0, hi, 200, |a| lens_distance(o.add(dir.scale(a)), reach, envelope));
            let d = d.min(lens_distance(o, reach, envelope)).min(lens_distance(o.add(dir.scale(hi)), reach, envelope));
            clearance = clearance.min(d - pr.r_v);
        }
        worst = worst.min(clearance);
        bad += usize::from(clearance.is_nan() || clearance < eps - 1e-6 || !alpha.is_finite());
    }
    Check::new(
        "projection clearance",
        bad == 0 && !events.is_empty(),
        format!(
            "{} projections, worst clearance {:.6} m (required {:.6}), {bad} violations",
            events.len(),
            worst,
            eps - 1e-6
        ),
    )
}

/// Same configuration twice, with different thread counts: identical bytes.
pub fn determinism(horizon: usize) -> Check {
    let mut free = EnvConfig::default();
    free.arena.hazards = 0;
    free.arena.gremlins = 0;
    let mut parts = Vec::new();
    let mut passed = true;
    for (label, env) in [("default", EnvConfig::default()), ("free", free)] {
        for policy in [PolicyKind::GoalSeek, PolicyKind::Random] {
            let mut env = env;
            env.task.horizon = horizon;
            let cfg = RunConfig {
                env_path: None,
                env,
                modes: Mode::ALL.to_vec(),
                policy,
                seeds: vec![0, 7],
                episodes_per_seed: 2,
                out_dir: std::path::PathBuf::new(),
                traces: false,
            };
            let bytes = |threads: usize| -> anyhow::Result<(Vec<u8>, Vec<u8>)> {
                let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
                pool.install(|| {
                    let (r, _) = harness::run_jobs(&cfg, false)?;
                    Ok((harness::metrics_csv(&r)?, harness::summary_csv(&r)?))
                })
            };
            match (bytes(1), bytes(3)) {
                (Ok(a), Ok(b)) => {
                    let same = a == b;
                    passed &= same;
                    parts.push(format!(
                        "{label}/{policy}: {} bytes {}",
                        a.0.len(),
                        if same { "identical" } else { "DIFFER" }
                    ));
                }
                (Err(e), _) | (_, Err(e)) => {
                    passed = false;
                    parts.push(format!("{label}/{policy}: {e:#}"));
                }
            }
        }
    }
    Check::new("determinism", passed, parts.join("; "))
}

pub fn run_all(sizes: &Sizes) -> Vec<Check> {
    let (reduction, clearance) = intervention_reduction(sizes.reduction_episodes);
    vec![
        zero_contacts(sizes.contact_episodes, sizes.contact_horizon),
        linearization_bound(sizes.zeta_cases),
        occupancy_soundness(sizes.capsule_cases, sizes.obstacle_cases),
        geometry_equivalence(sizes.geometry_cases),
        reduction,
        clearance,
        determinism(sizes.determinism_horizon),
    ]
}
