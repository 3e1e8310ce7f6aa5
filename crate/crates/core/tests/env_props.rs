mod oracles;

use oracles::{p, rk4_path, P};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shieldsim_core::env::{stream, stream_rng, Env, EnvConfig, EnvError, Mode, StepRecord};
use shieldsim_core::geometry::Point2;
use shieldsim_core::policy::{random_action, GoalSeek};
use shieldsim_core::reachability::ObstacleKind;
use shieldsim_core::shield::Substitution;
use shieldsim_core::Action;

fn q(v: Point2) -> P {
    p(v.x, v.y)
}

fn short(horizon: usize) -> EnvConfig {
    let mut cfg = EnvConfig::default();
    cfg.task.horizon = horizon;
    cfg
}

fn random_run(cfg: &EnvConfig, seed: u64, mode: Mode) -> Vec<StepRecord> {
    let mut env = Env::reset(cfg, seed).unwrap();
    let mut rng = stream_rng(seed, stream::POLICY);
    let mut out = Vec::new();
    while !env.is_done() {
        out.push(env.step(random_action(&mut rng), mode).unwrap());
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn executed_motion_never_touches(seed in any::<u64>(), mode in 0usize..3) {
        let cfg = short(150);
        let mode = Mode::ALL[mode];
        let mut env = Env::reset(&cfg, seed).unwrap();
        let mut rng = stream_rng(seed, stream::POLICY);
        let dt = env.model().grid.dt;
        let r = env.model().radius;
        let mass = env.model().params.mass;
        while !env.is_done() {
            let before = *env.state();
            let rec = env.step(random_action(&mut rng), mode).unwrap();
            let trace = env.last_trace();
            prop_assert_eq!(trace.len(), env.model().grid.steps_per_action);
            prop_assert_eq!(trace[0].state, before);
            let mut cost = false;
            for st in trace {
                let s = st.state;
                let x0 = [s.position.x, s.position.y, s.velocity.x, s.velocity.y, s.heading];
                let path = rk4_path(x0, st.applied.thrust / mass, st.applied.yaw_rate, dt, 20);
                for (j, pt) in path.iter().enumerate() {
                    let t = st.time + dt * j as f64 / 20.0;
                    for o in env.layout().obstacles() {
                        let d = pt.dist(q(o.position_at(t).unwrap()));
                        prop_assert!(d > r + o.radius, "contact with {} at t={t}", o.id);
                        cost |= o.kind == ObstacleKind::Hazard && d <= o.radius;
                    }
                }
            }
            prop_assert!(!rec.contact);
            prop_assert_eq!(rec.cost, u8::from(cost));
        }
    }

    #[test]
    fn gremlins_respect_their_speed(seed in any::<u64>()) {
        let cfg = EnvConfig::default();
        let env = Env::reset(&cfg, seed).unwrap();
        let h = env.model().grid.dt / 10.0;
        for g in &env.layout().gremlins {
            prop_assert!(g.v_max <= cfg.arena.gremlin_speed + 1e-12);
            let mut prev = q(g.position_at(0.0).unwrap());
            for k in 1..=20_000 {
                let cur = q(g.position_at(k as f64 * h).unwrap());
                prop_assert!(cur.dist(prev) <= g.v_max * h * (1.0 + 1e-9));
                prev = cur;
            }
        }
    }

    #[test]
    fn reward_is_goal_progress(seed in any::<u64>()) {
        let cfg = short(200);
        let mut env = Env::reset(&cfg, seed).unwrap();
        let policy = GoalSeek::default();
        while !env.is_done() {
            let obs = env.observation();
            let rec = env.step(policy.act(&obs, &env.model().params), Mode::Project).unwrap();
            let now = rec.observation.robot.position;
            let progress = q(obs.goal).dist(q(obs.robot.position)) - q(obs.goal).dist(q(now));
            let bonus = if rec.goal_reached { cfg.task.goal_bonus } else { 0.0 };
            prop_assert!((rec.reward - (progress + bonus)).abs() < 1e-12);
            prop_assert_eq!(rec.goal_reached, q(obs.goal).dist(q(now)) <= cfg.arena.goal_radius);
        }
    }
}

#[test]
fn same_seed_same_records() {
    let cfg = short(120);
    for mode in Mode::ALL {
        assert_eq!(random_run(&cfg, 9, mode), random_run(&cfg, 9, mode));
    }
}

#[test]
fn modes_agree_until_first_substitution() {
    let cfg = short(300);
    for seed in 0..6 {
        let bare = random_run(&cfg, seed, Mode::BareShield);
        for mode in [Mode::Replace, Mode::Project] {
            let other = random_run(&cfg, seed, mode);
            let first = other.iter().position(|r| r.substituted != Substitution::Original).unwrap_or(other.len());
            for i in 0..first {
                assert_eq!(bare[i].observation, other[i].observation, "seed {seed} {mode:?} step {i}");
                assert_eq!(bare[i].intervention, other[i].intervention);
            }
        }
    }
}

#[test]
fn episode_ends_at_horizon() {
    let cfg = short(5);
    let mut env = Env::reset(&cfg, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for k in 1..=5 {
        let rec = env.step(random_action(&mut rng), Mode::BareShield).unwrap();
        assert_eq!(rec.done, k == 5);
        assert_eq!(rec.observation.step, k);
    }
    assert!(matches!(env.step(Action::ZERO, Mode::BareShield), Err(EnvError::EpisodeFinished)));
}

#[test]
fn goal_seek_reaches_goals_in_free_space() {
    let mut cfg = EnvConfig::default();
    cfg.arena.hazards = 0;
    cfg.arena.gremlins = 0;
    let policy = GoalSeek::default();
    let reached = (0..100)
        .filter(|&seed| {
            let mut env = Env::reset(&cfg, seed).unwrap();
            while !env.is_done() {
                let a = policy.act(&env.observation(), &env.model().params);
                if env.step(a, Mode::BareShield).unwrap().goal_reached {
                    return true;
                }
            }
            false
        })
        .count();
    assert!(reached >= 99, "{reached}/100");
}
