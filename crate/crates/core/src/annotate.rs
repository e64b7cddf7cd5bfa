//! Annotation drivers: complete a prompt, extract the label, retry when the
//! completion names no label.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::explain::CotDemonstration;
use crate::extract::{extract_label, ExtractionRule};
use crate::gateway::{CompletionRequest, Gateway, GatewayError};
use crate::parallel::ordered_map;
use crate::prompt::{Family, PromptError, PromptForge, RenderedPrompt, Variant};
use crate::task::{DatasetSplit, Example, TaskSpec};

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("example `{example_id}`: {source}")]
    Gateway {
        example_id: String,
        #[source]
        source: GatewayError,
    },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("cannot annotate with a {0} prompt")]
    WrongFamily(Family),
    #[error("split is empty")]
    EmptySplit,
    #[error("results line {line}: {message}")]
    Results { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationResult {
    pub example_id: String,
    pub raw_text: String,
    pub label: Option<String>,
    pub extraction_rule: ExtractionRule,
    pub prompt_digest: String,
    /// Backend attempts summed over every completion requested for this example.
    pub attempts: u32,
}

impl AnnotationResult {
    pub fn is_parsed(&self) -> bool {
        self.label.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotateSettings {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub retry_on_unparsed: u32,
    pub max_in_flight: usize,
}

impl Default for AnnotateSettings {
    fn default() -> Self {
        AnnotateSettings {
            model: "gpt-3.5-turbo".into(),
            temperature: 0.0,
            max_tokens: 256,
            retry_on_unparsed: 0,
            max_in_flight: 8,
        }
    }
}

/// Which prompt each example of a split is annotated with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PromptPlan {
    ZeroShot {
        variant: Variant,
    },
    FewShot {
        demos: Vec<Example>,
        variant: Variant,
    },
    Cot {
        demos: Vec<CotDemonstration>,
        variant: Variant,
    },
}

impl PromptPlan {
    pub fn render(&self, forge: &PromptForge, x: &Example) -> Result<RenderedPrompt, PromptError> {
        match self {
            PromptPlan::ZeroShot { variant } => forge.zero_shot(x, *variant),
            PromptPlan::FewShot { demos, variant } => forge.few_shot(demos, x, *variant),
            PromptPlan::Cot { demos, variant } => forge.cot(demos, x, *variant),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            PromptPlan::ZeroShot { .. } => Family::ZeroShot,
            PromptPlan::FewShot { .. } => Family::FewShot,
            PromptPlan::Cot { .. } => Family::Cot,
        }
    }

    pub fn shots(&self) -> usize {
        match self {
            PromptPlan::ZeroShot { .. } => 0,
            PromptPlan::FewShot { demos, .. } => demos.len(),
            PromptPlan::Cot { demos, .. } => demos.len(),
        }
    }
}

pub fn annotate_one(
    gateway: &Gateway,
    task: &TaskSpec,
    example_id: &str,
    prompt: &RenderedPrompt,
    settings: &AnnotateSettings,
) -> Result<AnnotationResult, AnnotateError> {
    if prompt.family == Family::Explanation {
        return Err(AnnotateError::WrongFamily(prompt.family));
    }
    let lexicon = task.lexicon();
    let mut attempts = 0;
    let mut sample = 0;
    loop {
        let req = CompletionRequest::new(
            &settings.model,
            &prompt.text,
            settings.temperature,
            settings.max_tokens,
            sample,
        );
        let resp = gateway
            .complete(&req)
            .map_err(|source| AnnotateError::Gateway {
                example_id: example_id.to_string(),
                source,
            })?;
        attempts += resp.attempts;
        let found = extract_label(&resp.text, &lexicon);
        if found.is_some() || sample >= settings.retry_on_unparsed {
            let (label, rule) = match found {
                Some(e) => (Some(e.label), e.rule),
                None => (None, ExtractionRule::None),
            };
            return Ok(AnnotationResult {
                example_id: example_id.to_string(),
                raw_text: resp.text,
                label,
                extraction_rule: rule,
                prompt_digest: prompt.digest.clone(),
                attempts,
            });
        }
        log::debug!("example {example_id}: no label in sample {sample}, retrying");
        sample += 1;
    }
}

/// Annotates every example; results stay aligned with the split order.
pub fn annotate_split(
    gateway: &Gateway,
    forge: &PromptForge,
    plan: &PromptPlan,
    split: &DatasetSplit,
    settings: &AnnotateSettings,
) -> Result<Vec<Result<AnnotationResult, AnnotateError>>, AnnotateError> {
    if split.is_empty() {
        return Err(AnnotateError::EmptySplit);
    }
    let prompts = split
        .examples
        .iter()
        .map(|x| plan.render(forge, x))
        .collect::<Result<Vec<_>, _>>()?;
    let results = ordered_map(&prompts, settings.max_in_flight, |i, p| {
        annotate_one(gateway, forge.task(), &split.examples[i].id, p, settings)
    });
    let unparsed = results
        .iter()
        .filter(|r| matches!(r, Ok(a) if !a.is_parsed()))
        .count();
    let failed = results.iter().filter(|r| r.is_err()).count();
    log::info!(
        "annotated {} examples with {} prompts: {} unparsed, {} failed",
        results.len(),
        plan.family(),
        unparsed,
        failed
    );
    Ok(results)
}

pub fn results_to_jsonl(results: &[AnnotationResult]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&serde_json::to_string(r).expect("result serializes"));
        out.push('\n');
    }
    out
}

pub fn results_from_jsonl(text: &str) -> Result<Vec<AnnotationResult>, AnnotateError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| AnnotateError::Results {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn load_results(path: impl AsRef<Path>) -> Result<Vec<AnnotationResult>, AnnotateError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| AnnotateError::Io {
        path: path.display().to_string(),
        source,
    })?;
    results_from_jsonl(&text)
}
