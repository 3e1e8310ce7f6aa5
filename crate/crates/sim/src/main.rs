use std::fs;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use shieldsim::checks::{self, Sizes};
use shieldsim::config::{self, PolicyKind, RunConfig};
use shieldsim::{harness, log, wire};
use shieldsim_core::EnvConfig;

#[derive(Parser)]
#[command(name = "shieldsim", version, about = "Safety-shielded 2D robot simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded episode suite and write episodes.csv and summary.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// bare-shield, replace, project, a comma-separated list, or all.
        #[arg(long, default_value = "all")]
        mode: String,
        /// goal-seek or random.
        #[arg(long, default_value = "goal-seek")]
        policy: String,
        #[arg(long)]
        out: PathBuf,
        /// Also write one JSON episode log per episode under <out>/traces.
        #[arg(long)]
        traces: bool,
    },
    /// Render an episode log as SVG.
    Render {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the oracle checks at reduced size.
    Selftest,
    /// Serve line-delimited JSON requests on stdin/stdout.
    Serve {
        /// Environment config (JSON); defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { config: path, mode, policy, out, traces } => {
            let file = config::load_run_file(&path)?;
            let cfg = RunConfig {
                env_path: Some(path),
                env: file.env,
                modes: config::parse_modes(&mode).map_err(anyhow::Error::msg)?,
                policy: PolicyKind::parse(&policy).with_context(|| format!("unknown policy `{policy}`"))?,
                seeds: file.seeds,
                episodes_per_seed: file.episodes_per_seed,
                out_dir: out,
                traces,
            };
            let result = harness::run_suite(&cfg)?;
            for (mode, s) in &result.summaries {
                let get = |k| s.get(k).map_or(0.0, |x| x.mean);
                println!(
                    "{:<12} episodes {:>4}  return {:>8.3}  cost {:>6.2}  interventions {:>8.2}  goals {:>6.2}",
                    mode.name(),
                    s.episodes,
                    get("return"),
                    get("cost"),
                    get("interventions"),
                    get("goals_reached")
                );
            }
            let violations = result.violations(cfg.env.task.horizon);
            if !violations.is_empty() {
                for v in &violations {
                    eprintln!("invariant violated: {v}");
                }
                bail!("{} invariant violations", violations.len());
            }
            Ok(())
        }
        Command::Render { log: path, out } => {
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let episode: log::EpisodeLog = serde_json::from_str(&text)
                .map_err(|e| anyhow::anyhow!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))?;
            let svg = log::render_svg(&episode).with_context(|| format!("rejecting {}", path.display()))?;
            fs::write(&out, svg).with_context(|| format!("writing {}", out.display()))?;
            Ok(())
        }
        Command::Selftest => {
            let results = checks::run_all(&Sizes::SELFTEST);
            for c in &results {
                println!("{}", c.line());
            }
            let failed = results.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                bail!("{failed} checks failed");
            }
            Ok(())
        }
        Command::Serve { config: path } => {
            let cfg = match path {
                Some(p) => config::load_env_config(&p)?,
                None => EnvConfig::default(),
            };
            let stdin = io::stdin();
            wire::serve(cfg, stdin.lock(), io::stdout().lock())?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
