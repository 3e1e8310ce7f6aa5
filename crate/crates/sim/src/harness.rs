//! Seeded episode suites, metrics tables and their summaries.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use rand::RngCore;
use rayon::prelude::*;
use shieldsim_core::env::{stream, stream_rng};
use shieldsim_core::policy::{random_action, GoalSeek};
use shieldsim_core::{Env, EnvConfig, EnvError, EpisodeMetrics, Mode, Summary};

use crate::config::{PolicyKind, RunConfig};
use crate::log::EpisodeLog;

pub const METRICS_SCHEMA: &str = "shieldsim.metrics.v1";
pub const SUMMARY_SCHEMA: &str = "shieldsim.summary.v1";

const EPISODE_STREAM: u64 = 1 << 32;

/// Seed of episode `index` under suite seed `seed`.
pub fn episode_seed(seed: u64, index: usize) -> u64 {
    stream_rng(seed, EPISODE_STREAM + index as u64).next_u64()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRow {
    pub mode: Mode,
    pub policy: PolicyKind,
    pub seed: u64,
    pub episode: usize,
    pub episode_seed: u64,
    pub metrics: EpisodeMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub rows: Vec<EpisodeRow>,
    pub summaries: Vec<(Mode, Summary)>,
}

impl SuiteResult {
    pub fn summary(&self, mode: Mode) -> Option<&Summary> {
        self.summaries.iter().find(|(m, _)| *m == mode).map(|(_, s)| s)
    }

    /// Invariant failures found in the rows.
    pub fn violations(&self, horizon: usize) -> Vec<String> {
        let mut out = Vec::new();
        for r in &self.rows {
            let at = format!("{} seed {} episode {}", r.mode.name(), r.seed, r.episode);
            if r.metrics.contacts > 0 {
                out.push(format!("{at}: {} agent steps with contact", r.metrics.contacts));
            }
            if r.metrics.interventions as usize > horizon {
                out.push(format!("{at}: {} interventions exceed the horizon", r.metrics.interventions));
            }
        }
        out
    }
}

/// Runs one episode to its horizon.
pub fn run_episode(
    cfg: &EnvConfig,
    mode: Mode,
    policy: PolicyKind,
    seed: u64,
    keep_log: bool,
) -> Result<(EpisodeMetrics, Option<EpisodeLog>), EnvError> {
    let mut env = Env::reset(cfg, seed)?;
    let mut rng = stream_rng(seed, stream::POLICY);
    let goal_seek = GoalSeek::default();
    let mut metrics = EpisodeMetrics::default();
    let mut log = keep_log.then(|| EpisodeLog::start(&env, mode, policy, seed));
    while !env.is_done() {
        let action = match policy {
            PolicyKind::GoalSeek => goal_seek.act(&env.observation(), &env.model().params),
            PolicyKind::Random => random_action(&mut rng),
        };
        let rec = env.step(action, mode)?;
        metrics.record(&rec);
        if let Some(log) = log.as_mut() {
            log.records.push(rec);
        }
    }
    Ok((metrics, log))
}

/// Runs every (mode, seed, episode) job in parallel and merges in job order.
pub fn run_jobs(cfg: &RunConfig, keep_logs: bool) -> anyhow::Result<(SuiteResult, Vec<EpisodeLog>)> {
    let mut jobs = Vec::new();
    for &mode in &cfg.modes {
        for &seed in &cfg.seeds {
            for episode in 0..cfg.episodes_per_seed {
                jobs.push((mode, seed, episode));
            }
        }
    }
    let results: Vec<(EpisodeRow, Option<EpisodeLog>)> = jobs
        .par_iter()
        .map(|&(mode, seed, episode)| {
            let es = episode_seed(seed, episode);
            let (metrics, log) = run_episode(&cfg.env, mode, cfg.policy, es, keep_logs)
                .with_context(|| format!("{} seed {seed} episode {episode}", mode.name()))?;
            Ok((EpisodeRow { mode, policy: cfg.policy, seed, episode, episode_seed: es, metrics }, log))
        })
        .collect::<anyhow::Result<_>>()?;
    let (rows, logs): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let summaries = cfg
        .modes
        .iter()
        .map(|&m| {
            let ms: Vec<EpisodeMetrics> = rows.iter().filter(|r| r.mode == m).map(|r| r.metrics).collect();
            (m, Summary::of(&ms))
        })
        .collect();
    Ok((SuiteResult { rows, summaries }, logs.into_iter().flatten().collect()))
}

pub fn run_suite(cfg: &RunConfig) -> anyhow::Result<SuiteResult> {
    cfg.validate().map_err(anyhow::Error::msg)?;
    let (result, logs) = run_jobs(cfg, cfg.traces)?;
    write_outputs(&cfg.out_dir, &result, &logs)?;
    Ok(result)
}

pub fn write_outputs(dir: &Path, result: &SuiteResult, logs: &[EpisodeLog]) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join("episodes.csv");
    fs::write(&path, metrics_csv(result)?).with_context(|| format!("writing {}", path.display()))?;
    let path = dir.join("summary.csv");
    fs::write(&path, summary_csv(result)?).with_context(|| format!("writing {}", path.display()))?;
    if !logs.is_empty() {
        let traces = dir.join("traces");
        fs::create_dir_all(&traces).with_context(|| format!("creating {}", traces.display()))?;
        for log in logs {
            let path = traces.join(log.file_stem() + ".json");
            let mut f = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
            serde_json::to_writer(&mut f, log)?;
            f.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn num(x: f64) -> String {
    format!("{x}")
}

pub fn metrics_csv(result: &SuiteResult) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["schema", "mode", "policy", "seed", "episode", "episode_seed"];
    header.extend(EpisodeMetrics::FIELDS);
    w.write_record(&header)?;
    for r in &result.rows {
        let mut rec = vec![
            METRICS_SCHEMA.to_string(),
            r.mode.name().to_string(),
            r.policy.name().to_string(),
            r.seed.to_string(),
            r.episode.to_string(),
            r.episode_seed.to_string(),
        ];
        rec.extend(r.metrics.values().iter().map(|&v| num(v)));
        w.write_record(&rec)?;
    }
    Ok(w.into_inner()?)
}

pub fn summary_csv(result: &SuiteResult) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["schema", "mode", "episodes", "metric", "mean", "std"])?;
    for (mode, s) in &result.summaries {
        for st in &s.stats {
            w.write_record([
                SUMMARY_SCHEMA,
                mode.name(),
                &s.episodes.to_string(),
                st.name,
                &num(st.mean),
                &num(st.std),
            ])?;
        }
    }
    Ok(w.into_inner()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn episode_seeds_are_distinct_and_stable() {
        let a: Vec<u64> = (0..50).map(|e| episode_seed(3, e)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), 50);
        assert_eq!(a[7], episode_seed(3, 7));
        assert_ne!(episode_seed(3, 0), episode_seed(4, 0));
    }
}
