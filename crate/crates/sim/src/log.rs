//! Episode logs and their SVG rendering.

use std::fmt::Write;

use serde::{Deserialize, Serialize};
use shieldsim_core::env::{Layout, Observation, StepRecord};
use shieldsim_core::geometry::Point2;
use shieldsim_core::shield::Substitution;
use shieldsim_core::{Env, EnvConfig, Mode};

use crate::config::PolicyKind;

pub const LOG_SCHEMA: &str = "shieldsim.log.v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeLog {
    pub schema: String,
    pub mode: Mode,
    pub policy: PolicyKind,
    pub seed: u64,
    pub config: EnvConfig,
    pub layout: Layout,
    pub start: Observation,
    pub records: Vec<StepRecord>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LogError {
    #[error("unsupported log schema `{0}`")]
    Schema(String),
    #[error("log has no steps")]
    Empty,
    #[error("log is incomplete: {steps} of {horizon} steps, last step not done")]
    Incomplete { steps: usize, horizon: usize },
    #[error("record {index} has step counter {found}")]
    StepOrder { index: usize, found: usize },
    #[error("record {index} has a non-finite position")]
    NonFinite { index: usize },
    #[error("invalid obstacle {id}: {message}")]
    Obstacle { id: u32, message: String },
}

impl EpisodeLog {
    pub fn start(env: &Env, mode: Mode, policy: PolicyKind, seed: u64) -> Self {
        EpisodeLog {
            schema: LOG_SCHEMA.to_string(),
            mode,
            policy,
            seed,
            config: *env.config(),
            layout: env.layout().clone(),
            start: env.observation(),
            records: Vec::new(),
        }
    }

    pub fn file_stem(&self) -> String {
        format!("{}-{}-{}", self.mode.name(), self.policy.name(), self.seed)
    }

    pub fn validate(&self) -> Result<(), LogError> {
        if self.schema != LOG_SCHEMA {
            return Err(LogError::Schema(self.schema.clone()));
        }
        let last = self.records.last().ok_or(LogError::Empty)?;
        if !last.done {
            return Err(LogError::Incomplete { steps: self.records.len(), horizon: self.config.task.horizon });
        }
        for o in self.layout.obstacles() {
            o.validate().map_err(|e| LogError::Obstacle { id: o.id, message: e.to_string() })?;
        }
        for (index, r) in self.records.iter().enumerate() {
            if r.observation.step != self.start.step + index + 1 {
                return Err(LogError::StepOrder { index, found: r.observation.step });
            }
            let p = r.observation.robot.position;
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(LogError::NonFinite { index });
            }
        }
        Ok(())
    }

    pub fn interventions(&self) -> usize {
        self.records.iter().filter(|r| r.intervention).count()
    }
}

const SCALE: f64 = 100.0;
const MARGIN: f64 = 20.0;
/// Gremlin snapshots drawn per episode.
const SNAPSHOTS: usize = 10;

struct Canvas {
    half: f64,
    out: String,
}

impl Canvas {
    fn x(&self, p: Point2) -> f64 {
        (p.x + self.half) * SCALE + MARGIN
    }

    fn y(&self, p: Point2) -> f64 {
        (self.half - p.y) * SCALE + MARGIN
    }

    fn circle(&mut self, class: &str, c: Point2, r: f64) {
        let (x, y) = (self.x(c), self.y(c));
        let _ = writeln!(self.out, r#"  <circle class="{class}" cx="{x:.3}" cy="{y:.3}" r="{:.3}"/>"#, r * SCALE);
    }

    fn square(&mut self, class: &str, c: Point2, side: f64) {
        let (x, y) = (self.x(c) - side / 2.0, self.y(c) - side / 2.0);
        let _ = writeln!(self.out, r#"  <rect class="{class}" x="{x:.3}" y="{y:.3}" width="{side}" height="{side}"/>"#);
    }

    fn polyline(&mut self, class: &str, pts: &[Point2]) {
        let mut s = String::new();
        for (i, p) in pts.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{:.3},{:.3}", self.x(*p), self.y(*p));
        }
        let _ = writeln!(self.out, r#"  <polyline class="{class}" points="{s}"/>"#);
    }
}

const STYLE: &str = "\
    .arena { fill: #fbfbf8; stroke: #888; }\n\
    .hazard { fill: #7b5ea7; fill-opacity: 0.35; stroke: #7b5ea7; }\n\
    .gremlin { fill: #d9534f; fill-opacity: 0.15; stroke: #d9534f; }\n\
    .gremlin-track { fill: none; stroke: #d9534f; stroke-dasharray: 4 3; }\n\
    .goal { fill: #5cb85c; fill-opacity: 0.25; stroke: #3d8b3d; }\n\
    .robot-path { fill: none; stroke: #1f4e79; stroke-width: 1.5; }\n\
    .spawn { fill: #1f4e79; }\n\
    .intervention { fill: none; stroke: #e67e22; stroke-width: 2; }\n\
    .replaced { fill: #17a2b8; }\n\
    .projected { fill: #28a745; }\n\
    .zero-action { fill: #333; }\n";

/// Renders a validated log as a standalone SVG document.
pub fn render_svg(log: &EpisodeLog) -> Result<String, LogError> {
    log.validate()?;
    let half = log.layout.half_extent;
    let size = 2.0 * half * SCALE + 2.0 * MARGIN;
    let mut c = Canvas { half, out: String::new() };
    let _ = writeln!(
        c.out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(c.out, "  <title>{} / {} / seed {}</title>", log.mode.name(), log.policy.name(), log.seed);
    let _ = writeln!(c.out, "  <style>\n{STYLE}  </style>");
    let _ = writeln!(
        c.out,
        r#"  <rect class="arena" x="{MARGIN}" y="{MARGIN}" width="{w}" height="{w}"/>"#,
        w = 2.0 * half * SCALE
    );

    for h in &log.layout.hazards {
        c.circle("hazard", h.position_at(0.0).unwrap_or(Point2::ORIGIN), h.radius);
    }
    let end = log.records.last().map_or(log.start.time, |r| r.observation.time);
    for g in &log.layout.gremlins {
        let track: Vec<Point2> = (0..=200)
            .filter_map(|k| g.position_at(log.start.time + (end - log.start.time) * k as f64 / 200.0).ok())
            .collect();
        c.polyline("gremlin-track", &track);
        for k in 0..SNAPSHOTS {
            let t = log.start.time + (end - log.start.time) * k as f64 / SNAPSHOTS as f64;
            if let Ok(p) = g.position_at(t) {
                c.circle("gremlin", p, g.radius);
            }
        }
    }

    let mut goals = vec![log.start.goal];
    for r in &log.records {
        if goals.last() != Some(&r.observation.goal) {
            goals.push(r.observation.goal);
        }
    }
    for g in goals {
        c.circle("goal", g, log.start.goal_radius);
    }

    let mut path = vec![log.start.robot.position];
    path.extend(log.records.iter().map(|r| r.observation.robot.position));
    c.polyline("robot-path", &path);
    c.circle("spawn", log.start.robot.position, 0.03);

    for (r, from) in log.records.iter().zip(&path) {
        match r.substituted {
            Substitution::Original => {}
            Substitution::Replaced => c.square("replaced", *from, 4.0),
            Substitution::Projected => c.square("projected", *from, 4.0),
            Substitution::ZeroAction => c.square("zero-action", *from, 4.0),
        }
    }
    for (r, from) in log.records.iter().zip(&path) {
        if r.intervention {
            c.circle("intervention", *from, 0.05);
        }
    }
    c.out.push_str("</svg>\n");
    Ok(c.out)
}
