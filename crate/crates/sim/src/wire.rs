//! Line-delimited JSON session over a byte stream.
//!
//! Requests, one JSON object per line:
//!
//! | op      | fields                                            |
//! |---------|---------------------------------------------------|
//! | `reset` | `seed` (u64), optional `mode` (default `bare-shield`) |
//! | `step`  | `action`: `[thrust, yaw]`, each clamped to [-1, 1] |
//! | `close` | none                                              |
//!
//! Every reply carries `version` and `ok`. Successful replies echo `op`;
//! `reset` adds `observation`, `step` adds `observation`, `reward`, `cost`,
//! `contact`, `intervention`, `substituted` and `done`. Failed replies carry
//! `error: {kind, message}` with kind `parse`, `protocol` or `env`, and leave
//! the session as it was. End of input or `close` ends the session.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use shieldsim_core::env::{Observation, StepRecord};
use shieldsim_core::shield::Substitution;
use shieldsim_core::{Action, Env, EnvConfig, Mode};

pub const WIRE_VERSION: &str = "shieldsim.wire.v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Request {
    Reset {
        seed: u64,
        #[serde(default)]
        mode: Mode,
    },
    Step {
        action: [f64; 2],
    },
    Close,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Parse,
    Protocol,
    Env,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireError {
    pub kind: ErrorKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payload {
    Step {
        observation: Observation,
        reward: f64,
        cost: u8,
        contact: bool,
        intervention: bool,
        substituted: Substitution,
        done: bool,
    },
    Reset {
        observation: Observation,
    },
    Empty {},
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    pub version: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<WireError>,
    #[serde(flatten)]
    pub payload: Payload,
}

impl Reply {
    fn ok(op: &str, payload: Payload) -> Reply {
        Reply { version: WIRE_VERSION.into(), ok: true, op: Some(op.into()), error: None, payload }
    }

    fn err(kind: ErrorKind, message: impl Into<String>) -> Reply {
        Reply {
            version: WIRE_VERSION.into(),
            ok: false,
            op: None,
            error: Some(WireError { kind, message: message.into() }),
            payload: Payload::Empty {},
        }
    }
}

impl From<&StepRecord> for Payload {
    fn from(r: &StepRecord) -> Payload {
        Payload::Step {
            observation: r.observation.clone(),
            reward: r.reward,
            cost: r.cost,
            contact: r.contact,
            intervention: r.intervention,
            substituted: r.substituted,
            done: r.done,
        }
    }
}

/// One protocol session. Holds at most one episode.
pub struct Session {
    cfg: EnvConfig,
    episode: Option<(Env, Mode)>,
}

impl Session {
    pub fn new(cfg: EnvConfig) -> Self {
        Session { cfg, episode: None }
    }

    /// Answers one request line; `None` means the session is over.
    pub fn handle(&mut self, line: &str) -> Option<Reply> {
        let req: Request = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => return Some(Reply::err(ErrorKind::Parse, e.to_string())),
        };
        Some(match req {
            Request::Reset { seed, mode } => match Env::reset(&self.cfg, seed) {
                Ok(env) => {
                    let observation = env.observation();
                    self.episode = Some((env, mode));
                    Reply::ok("reset", Payload::Reset { observation })
                }
                Err(e) => Reply::err(ErrorKind::Env, e.to_string()),
            },
            Request::Step { action } => match self.episode.as_mut() {
                None => Reply::err(ErrorKind::Protocol, "step before reset"),
                Some((env, mode)) => match env.step(Action::new(action[0], action[1]), *mode) {
                    Ok(rec) => Reply::ok("step", Payload::from(&rec)),
                    Err(e) => Reply::err(ErrorKind::Env, e.to_string()),
                },
            },
            Request::Close => return None,
        })
    }
}

/// Serves requests from `input` until `close` or end of input.
pub fn serve<R: BufRead, W: Write>(cfg: EnvConfig, input: R, mut output: W) -> io::Result<()> {
    let mut session = Session::new(cfg);
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match session.handle(&line) {
            Some(r) => r,
            None => {
                write_reply(&mut output, &Reply::ok("close", Payload::Empty {}))?;
                break;
            }
        };
        write_reply(&mut output, &reply)?;
    }
    output.flush()
}

fn write_reply<W: Write>(out: &mut W, reply: &Reply) -> io::Result<()> {
    serde_json::to_writer(&mut *out, reply)?;
    out.write_all(b"\n")?;
    out.flush()
}
