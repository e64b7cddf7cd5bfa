//! Run configuration: one JSON file plus command-line overrides.

use std::path::{Path, PathBuf};

use annokit::explain::AssemblyFlags;
use annokit::prompt::Variant;
use annokit::task::{DataFormat, SplitName};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    ZeroShot,
    FewShot,
    Cot,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "zero_shot" => Ok(Mode::ZeroShot),
            "few_shot" => Ok(Mode::FewShot),
            "cot" => Ok(Mode::Cot),
            other => Err(format!("unknown mode `{other}` (zero_shot, few_shot, cot)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiveConfig {
    pub base_url: String,
    /// Environment variable holding the API key.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_key_env() -> String {
    "OPENAI_API_KEY".into()
}

fn default_timeout() -> u64 {
    60
}

/// Exactly one of the three fields must be set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub live: Option<LiveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock: Option<PathBuf>,
}

impl BackendConfig {
    pub fn configured(&self) -> usize {
        [
            self.live.is_some(),
            self.replay.is_some(),
            self.mock.is_some(),
        ]
        .into_iter()
        .filter(|b| *b)
        .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Labeled demonstrations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demos: Option<PathBuf>,
    /// Demonstrations for chain-of-thought prompts, when they differ from `demos`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cot_demos: Option<PathBuf>,
    /// Examples to annotate or evaluate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<PathBuf>,
    #[serde(default = "default_split_name")]
    pub split_name: SplitName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<DataFormat>,
    /// Label-guided explanation store.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanations: Option<PathBuf>,
    /// Label-free explanation store.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unguided_explanations: Option<PathBuf>,
    /// One store per explanation set.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub explanation_sets: Vec<PathBuf>,
    /// Existing annotation results to score instead of annotating.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub results: Option<PathBuf>,
}

fn default_split_name() -> SplitName {
    SplitName::Dev
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            demos: None,
            cot_demos: None,
            split: None,
            split_name: default_split_name(),
            format: None,
            explanations: None,
            unguided_explanations: None,
            explanation_sets: Vec::new(),
            results: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: String,
    /// Task definition for custom tasks (TOML).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates_file: Option<PathBuf>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default)]
    pub annotation_temperature: f64,
    #[serde(default = "default_explanation_temperature")]
    pub explanation_temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_max_words")]
    pub max_words: usize,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default)]
    pub variant: Variant,
    /// Demonstrations per prompt; defaults to every loaded demo.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<usize>,
    /// Explanations sampled per demo.
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub ablation: AssemblyFlags,
    /// Prompts built per experiment configuration.
    #[serde(default = "default_sets")]
    pub sets: usize,
    #[serde(default = "default_keep")]
    pub filter_keep: usize,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_limit_per_minute: Option<usize>,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default)]
    pub retry_on_unparsed: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Per-annotator accuracy for the simulated crowd baseline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crowd_p: Option<f64>,
}

fn default_model() -> String {
    "gpt-3.5-turbo".into()
}
fn default_explanation_temperature() -> f64 {
    0.7
}
fn default_max_tokens() -> u32 {
    256
}
fn default_max_words() -> usize {
    100
}
fn default_mode() -> Mode {
    Mode::ZeroShot
}
fn default_k() -> usize {
    5
}
fn default_sets() -> usize {
    5
}
fn default_keep() -> usize {
    3
}
fn default_in_flight() -> usize {
    8
}
fn default_attempts() -> u32 {
    5
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl RunConfig {
    pub fn minimal(task: &str) -> RunConfig {
        serde_json::from_value(serde_json::json!({ "task": task })).expect("defaults deserialize")
    }

    pub fn from_json(text: &str) -> Result<RunConfig, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("invalid config: {e}")))
    }

    /// Loads a config file. Relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let mut cfg = RunConfig::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let d = &mut self.data;
        for p in [
            &mut d.demos,
            &mut d.cot_demos,
            &mut d.split,
            &mut d.explanations,
            &mut d.unguided_explanations,
            &mut d.results,
            &mut self.backend.replay,
            &mut self.backend.mock,
            &mut self.cache,
            &mut self.task_file,
            &mut self.templates_file,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        d.explanation_sets.iter_mut().for_each(fix);
        fix(&mut self.output_dir);
    }

    /// Checks the invariants that do not depend on which command runs.
    pub fn validate(&self) -> Result<(), CliError> {
        let n = self.backend.configured();
        if n != 1 {
            return Err(CliError::Input(format!(
                "exactly one backend (live, replay or mock) must be configured, found {n}"
            )));
        }
        if self.k == 0 {
            return Err(CliError::Input("k must be at least 1".into()));
        }
        if self.sets == 0 || self.filter_keep == 0 {
            return Err(CliError::Input(
                "sets and filter_keep must be at least 1".into(),
            ));
        }
        if self.max_in_flight == 0 {
            return Err(CliError::Input("max_in_flight must be at least 1".into()));
        }
        if self.rate_limit_per_minute == Some(0) {
            return Err(CliError::Input(
                "rate_limit_per_minute must be at least 1".into(),
            ));
        }
        if self.max_attempts == 0 {
            return Err(CliError::Input("max_attempts must be at least 1".into()));
        }
        if self.annotation_temperature < 0.0 || self.explanation_temperature < 0.0 {
            return Err(CliError::Input("temperatures must be non-negative".into()));
        }
        if let Some(p) = self.crowd_p {
            if !(0.0..=1.0).contains(&p) {
                return Err(CliError::Input(format!("crowd_p {p} is outside [0, 1]")));
            }
        }
        if self.ablation.filter_keep == Some(0) {
            return Err(CliError::Input(
                "ablation.filter_keep must be at least 1".into(),
            ));
        }
        if self.mode == Mode::Cot && self.explanation_store().is_none() {
            return Err(CliError::Input(
                "cot mode needs an explanation store (data.explanations or data.unguided_explanations); run `annokit explain` first".into(),
            ));
        }
        Ok(())
    }

    /// The store matching `ablation.with_gold`.
    pub fn explanation_store(&self) -> Option<&PathBuf> {
        if self.ablation.with_gold {
            self.data.explanations.as_ref()
        } else {
            self.data.unguided_explanations.as_ref()
        }
    }
}
