use std::io::Cursor;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shieldsim::config::PolicyKind;
use shieldsim::harness;
use shieldsim::wire::{self, ErrorKind, Payload, Reply, Session, WIRE_VERSION};
use shieldsim_core::env::{stream, stream_rng};
use shieldsim_core::policy::random_action;
use shieldsim_core::{Action, Env, EnvConfig, EpisodeMetrics, Mode};

fn exchange(cfg: EnvConfig, lines: &[String]) -> Vec<Reply> {
    let input = lines.join("\n") + "\n";
    let mut out = Vec::new();
    wire::serve(cfg, Cursor::new(input), &mut out).unwrap();
    String::from_utf8(out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn step_line(a: Action) -> String {
    serde_json::json!({ "op": "step", "action": [a.thrust, a.yaw] }).to_string()
}

#[test]
fn every_reply_is_versioned() {
    let lines = vec![
        r#"{"op":"reset","seed":7}"#.to_string(),
        step_line(Action::new(0.5, 0.1)),
        "not json".to_string(),
        r#"{"op":"close"}"#.to_string(),
    ];
    let replies = exchange(EnvConfig::default(), &lines);
    assert_eq!(replies.len(), 4);
    assert!(replies.iter().all(|r| r.version == WIRE_VERSION));
    assert!(replies[0].ok && replies[1].ok && !replies[2].ok && replies[3].ok);
    assert_eq!(replies[3].op.as_deref(), Some("close"));
}

#[test]
fn reset_twice_gives_identical_observations() {
    let mut s = Session::new(EnvConfig::default());
    let a = s.handle(r#"{"op":"reset","seed":7}"#).unwrap();
    let b = s.handle(r#"{"op":"reset","seed":7}"#).unwrap();
    assert_eq!(a, b);
    assert!(matches!(a.payload, Payload::Reset { .. }));
}

#[test]
fn errors_keep_the_session_alive() {
    let mut cfg = EnvConfig::default();
    cfg.task.horizon = 2;
    let mut s = Session::new(cfg);
    let kind = |r: Reply| r.error.map(|e| e.kind);
    assert_eq!(kind(s.handle(&step_line(Action::ZERO)).unwrap()), Some(ErrorKind::Protocol));
    assert_eq!(kind(s.handle("{\"op\":\"jump\"}").unwrap()), Some(ErrorKind::Parse));
    assert_eq!(kind(s.handle("{\"op\":\"step\",\"action\":[1]}").unwrap()), Some(ErrorKind::Parse));
    assert!(s.handle(r#"{"op":"reset","seed":1,"mode":"replace"}"#).unwrap().ok);
    assert!(s.handle(&step_line(Action::ZERO)).unwrap().ok);
    let last = s.handle(&step_line(Action::ZERO)).unwrap();
    assert!(matches!(last.payload, Payload::Step { done: true, .. }));
    assert_eq!(kind(s.handle(&step_line(Action::ZERO)).unwrap()), Some(ErrorKind::Env));
    assert!(s.handle(r#"{"op":"reset","seed":1}"#).unwrap().ok);
    assert!(s.handle(&step_line(Action::ZERO)).unwrap().ok);
    assert!(s.handle(r#"{"op":"close"}"#).is_none());
}

#[test]
fn end_of_input_ends_the_session() {
    let replies = exchange(EnvConfig::default(), &[r#"{"op":"reset","seed":3}"#.to_string()]);
    assert_eq!(replies.len(), 1);
}

#[test]
fn session_matches_in_process_run_exactly() {
    let cfg = EnvConfig::default();
    let seed = 21;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let actions: Vec<Action> =
        (0..cfg.task.horizon).map(|_| Action::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let mut lines = vec![format!(r#"{{"op":"reset","seed":{seed},"mode":"project"}}"#)];
    lines.extend(actions.iter().map(|&a| step_line(a)));
    let replies = exchange(cfg, &lines);
    assert_eq!(replies.len(), 1 + actions.len());

    let mut env = Env::reset(&cfg, seed).unwrap();
    let Payload::Reset { observation } = &replies[0].payload else { panic!() };
    assert_eq!(*observation, env.observation());
    for (a, reply) in actions.iter().zip(&replies[1..]) {
        let rec = env.step(*a, Mode::Project).unwrap();
        assert_eq!(reply.payload, Payload::from(&rec));
    }
}

#[test]
fn seeded_rollout_matches_harness_metrics() {
    let mut cfg = EnvConfig::default();
    cfg.task.horizon = 300;
    let seed = harness::episode_seed(4, 1);
    let mut rng = stream_rng(seed, stream::POLICY);
    let mut lines = vec![format!(r#"{{"op":"reset","seed":{seed},"mode":"replace"}}"#)];
    lines.extend((0..cfg.task.horizon).map(|_| step_line(random_action(&mut rng))));
    let replies = exchange(cfg, &lines);
    let mut over_wire = EpisodeMetrics::default();
    for r in &replies[1..] {
        let Payload::Step { reward, cost, contact, intervention, .. } = r.payload else { panic!("{r:?}") };
        over_wire.steps += 1;
        over_wire.episode_return += reward;
        over_wire.cost += u32::from(cost);
        over_wire.contacts += u32::from(contact);
        over_wire.interventions += u32::from(intervention);
    }
    let (local, _) = harness::run_episode(&cfg, Mode::Replace, PolicyKind::Random, seed, false).unwrap();
    assert_eq!(over_wire.steps, local.steps);
    assert_eq!(over_wire.episode_return, local.episode_return);
    assert_eq!(over_wire.cost, local.cost);
    assert_eq!(over_wire.interventions, local.interventions);
    assert_eq!(over_wire.contacts, 0);
}
