//! Command-line driver: parses arguments, builds the gateway and runs one
//! pipeline stage or experiment into a fresh run directory.

pub mod config;
mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use config::{BackendConfig, DataConfig, LiveConfig, Mode, RunConfig};
pub use run::{execute, Outcome};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, config or input files.
    #[error("{0}")]
    Input(String),
    /// The completion backend failed after retries.
    #[error("{0}")]
    Gateway(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Gateway(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "annokit",
    version,
    about = "Explain-then-annotate labeling with LLMs"
)]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample explanations for every demonstration and save them as a store.
    Explain(Common),
    /// Label a split and save the raw results.
    Annotate(Common),
    /// Label a split (or load saved results) and score it against gold.
    Eval(Common),
    /// Run the five CoT assembly ablation rows.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Restrict to these rows (1-5). Defaults to all.
        #[arg(long = "row", value_parser = clap::value_parser!(u8).range(1..=5))]
        rows: Vec<u8>,
    },
    /// Score one CoT prompt per explanation set and report the spread.
    Consistency(Common),
    /// Score every prompt variant of the few-shot and CoT families.
    Stability(Common),
    /// Run stages against a mock or live backend and save their completions
    /// as a replay fixture store.
    RecordFixtures {
        #[command(flatten)]
        common: Common,
        /// Fixture store to write. Existing entries are kept.
        #[arg(long)]
        out: PathBuf,
        /// Stages to run, in order.
        #[arg(long = "run", value_enum, required = true)]
        stages: Vec<Stage>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    Explain,
    Annotate,
    Eval,
    Ablate,
    Consistency,
    Stability,
}

/// Config file plus overrides shared by every command.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long)]
    pub demos: Option<PathBuf>,
    #[arg(long)]
    pub explanations: Option<PathBuf>,
    #[arg(long)]
    pub unguided_explanations: Option<PathBuf>,
    /// Score these saved results instead of annotating.
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// Replace the configured backend with a replay store.
    #[arg(long, conflicts_with_all = ["mock", "live_url"])]
    pub replay: Option<PathBuf>,
    /// Replace the configured backend with a mock script.
    #[arg(long, conflicts_with = "live_url")]
    pub mock: Option<PathBuf>,
    /// Replace the configured backend with an OpenAI-compatible endpoint.
    #[arg(long)]
    pub live_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub variant: Option<annokit::Variant>,
    #[arg(long)]
    pub shots: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub sets: Option<usize>,
    /// Generate or use label-free explanations.
    #[arg(long)]
    pub no_gold: bool,
    /// Remove leading sentences that state the label.
    #[arg(long)]
    pub strip: bool,
    /// Do not append the "Therefore" label sentence.
    #[arg(long)]
    pub no_append: bool,
    /// Keep this many gold-agreeing explanations per demo.
    #[arg(long)]
    pub filter_keep: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    #[arg(long)]
    pub rate_limit: Option<usize>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Persistent completion cache.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Add a simulated crowd baseline with this per-annotator accuracy.
    #[arg(long)]
    pub crowd_p: Option<f64>,
}

impl Common {
    /// Loads the config file (if any) and applies the overrides.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match (&self.config, &self.task) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(task)) => RunConfig::minimal(task),
            (None, None) => {
                return Err(CliError::Input(
                    "either --config or --task is required".into(),
                ))
            }
        };
        if let Some(t) = &self.task {
            cfg.task = t.clone();
        }
        let d = &mut cfg.data;
        set(&mut d.split, &self.split);
        set(&mut d.demos, &self.demos);
        set(&mut d.explanations, &self.explanations);
        set(&mut d.unguided_explanations, &self.unguided_explanations);
        set(&mut d.results, &self.results);
        if self.replay.is_some() || self.mock.is_some() || self.live_url.is_some() {
            let key_env = cfg.backend.live.as_ref().map(|l| l.api_key_env.clone());
            cfg.backend = BackendConfig {
                replay: self.replay.clone(),
                mock: self.mock.clone(),
                live: self.live_url.as_ref().map(|url| LiveConfig {
                    base_url: url.clone(),
                    api_key_env: key_env.unwrap_or_else(|| "OPENAI_API_KEY".into()),
                    timeout_secs: 60,
                }),
            };
        }
        if let Some(m) = &self.model {
            cfg.model = m.clone();
        }
        if let Some(m) = &self.mode {
            cfg.mode = m.clone();
        }
        if let Some(v) = self.variant {
            cfg.variant = v;
        }
        if self.shots.is_some() {
            cfg.shots = self.shots;
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(n) = self.sets {
            cfg.sets = n;
        }
        if self.no_gold {
            cfg.ablation.with_gold = false;
        }
        if self.strip {
            cfg.ablation.strip = true;
        }
        if self.no_append {
            cfg.ablation.append = false;
        }
        if let Some(keep) = self.filter_keep {
            cfg.ablation.filter_keep = Some(keep);
            cfg.filter_keep = keep;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.max_in_flight {
            cfg.max_in_flight = n;
        }
        if self.rate_limit.is_some() {
            cfg.rate_limit_per_minute = self.rate_limit;
        }
        if let Some(o) = &self.output_dir {
            cfg.output_dir = o.clone();
        }
        set(&mut cfg.cache, &self.cache);
        if self.crowd_p.is_some() {
            cfg.crowd_p = self.crowd_p;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set(slot: &mut Option<PathBuf>, value: &Option<PathBuf>) {
    if value.is_some() {
        *slot = value.clone();
    }
}

/// Parses `args`, runs the command and returns the process exit code.
/// Errors go to stderr, reports to stdout.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
    match execute(&cli.command) {
        Ok(outcome) => {
            print!("{}", outcome.report);
            println!("run directory: {}", outcome.run_dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
