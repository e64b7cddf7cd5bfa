//! Explanation generation and chain-of-thought demonstration assembly.
//!
//! A demonstration's explanation is sampled `k` times from the model. The
//! ablation operations (filter by gold, strip the leading label sentence,
//! append a label trailer) then shape what goes into the final prompt.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::{extract_label, label_occurrences};
use crate::gateway::{CompletionRequest, Gateway, GatewayError};
use crate::prompt::{PromptError, PromptForge};
use crate::task::{Example, Lexicon, TaskSpec};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("demo `{demo_id}` sample {sample_index}: {source}")]
    Gateway {
        demo_id: String,
        sample_index: u32,
        #[source]
        source: GatewayError,
    },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("demo `{0}` has no gold label")]
    MissingGold(String),
    #[error("k must be at least 1")]
    ZeroSamples,
    #[error("keep must be at least 1")]
    ZeroKeep,
    #[error("no explanation records to choose from")]
    NoRecords,
    #[error("demo `{0}` produced an empty demonstration")]
    Degenerate(String),
    #[error("no explanation for demo `{demo_id}` in set {set}")]
    MissingExplanation { demo_id: String, set: usize },
    #[error("explanation store line {line}: {message}")]
    Store { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub demo_id: String,
    pub sample_index: u32,
    pub text: String,
    pub revealed_label: Option<String>,
    pub guided_by_gold: bool,
    pub word_count: usize,
}

impl ExplanationRecord {
    pub fn new(
        demo_id: impl Into<String>,
        sample_index: u32,
        text: impl Into<String>,
        guided_by_gold: bool,
        lexicon: &Lexicon,
    ) -> ExplanationRecord {
        let text = text.into();
        ExplanationRecord {
            demo_id: demo_id.into(),
            sample_index,
            revealed_label: extract_label(&text, lexicon).map(|e| e.label),
            word_count: text.split_whitespace().count(),
            guided_by_gold,
            text,
        }
    }

    pub fn exceeds(&self, max_words: usize) -> bool {
        self.word_count > max_words
    }

    pub fn agrees_with(&self, gold: &str) -> bool {
        self.revealed_label.as_deref() == Some(gold)
    }
}

/// Settings for explanation sampling requests.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSettings {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub max_words: usize,
    pub max_in_flight: usize,
}

impl Default for SamplingSettings {
    fn default() -> Self {
        SamplingSettings {
            model: "gpt-3.5-turbo".into(),
            temperature: 0.7,
            max_tokens: 256,
            max_words: crate::prompt::DEFAULT_MAX_WORDS,
            max_in_flight: 4,
        }
    }
}

/// Requests `k` explanations for one demonstration, returned in sample order.
pub fn generate_explanations(
    gateway: &Gateway,
    forge: &PromptForge,
    demo: &Example,
    k: usize,
    with_gold: bool,
    settings: &SamplingSettings,
) -> Result<Vec<ExplanationRecord>, ExplainError> {
    if k == 0 {
        return Err(ExplainError::ZeroSamples);
    }
    let gold = demo
        .gold
        .as_deref()
        .ok_or_else(|| ExplainError::MissingGold(demo.id.clone()))?;
    let prompt = forge.explanation(demo, with_gold.then_some(gold), settings.max_words)?;
    let reqs: Vec<CompletionRequest> = (0..k as u32)
        .map(|i| {
            CompletionRequest::new(
                &settings.model,
                &prompt.text,
                settings.temperature,
                settings.max_tokens,
                i,
            )
        })
        .collect();
    let lexicon = forge.task().lexicon();
    let mut out = Vec::with_capacity(k);
    for (req, resp) in reqs
        .iter()
        .zip(gateway.complete_batch(&reqs, settings.max_in_flight))
    {
        let resp = resp.map_err(|source| ExplainError::Gateway {
            demo_id: demo.id.clone(),
            sample_index: req.sample_index,
            source,
        })?;
        let rec =
            ExplanationRecord::new(&demo.id, req.sample_index, resp.text, with_gold, &lexicon);
        if rec.exceeds(settings.max_words) {
            log::warn!(
                "demo {} sample {}: {} words exceeds {}",
                demo.id,
                rec.sample_index,
                rec.word_count,
                settings.max_words
            );
        }
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filtered {
    pub records: Vec<ExplanationRecord>,
    /// Fewer than `keep` records agreed with the gold label.
    pub degraded: bool,
}

/// Keeps up to `keep` records agreeing with `gold`, topping up with the
/// remaining records in sample order when too few agree.
pub fn filter_by_gold(
    records: &[ExplanationRecord],
    gold: &str,
    keep: usize,
) -> Result<Filtered, ExplainError> {
    if keep == 0 {
        return Err(ExplainError::ZeroKeep);
    }
    if records.is_empty() {
        return Err(ExplainError::NoRecords);
    }
    let mut sorted: Vec<&ExplanationRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.sample_index);
    let (good, bad): (Vec<_>, Vec<_>) = sorted.into_iter().partition(|r| r.agrees_with(gold));
    let degraded = good.len() < keep;
    let records = good.into_iter().chain(bad).take(keep).cloned().collect();
    Ok(Filtered { records, degraded })
}

/// First sentence of `text` as a byte length, including its terminator.
fn first_sentence_len(text: &str) -> usize {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut in_quote = false;
    for (j, &(i, c)) in chars.iter().enumerate() {
        match c {
            '"' => in_quote = !in_quote,
            '\u{201c}' => in_quote = true,
            '\u{201d}' => in_quote = false,
            '.' | '!' | '?' => {
                let next = chars.get(j + 1).map(|&(_, n)| n);
                match next {
                    None => return text.len(),
                    Some(n) if n.is_whitespace() && !in_quote => return i + 1,
                    Some(q) if in_quote && (q == '"' || q == '\u{201d}') => {
                        // Punctuation inside a closing quote ends the sentence
                        // only when a new sentence visibly starts after it.
                        let after = chars.get(j + 2).map(|&(_, a)| a);
                        let then = chars.get(j + 3).map(|&(_, a)| a);
                        let end = chars.get(j + 2).map(|&(a, _)| a).unwrap_or(text.len());
                        match (after, then) {
                            (None, _) => return text.len(),
                            (Some(a), Some(t)) if a.is_whitespace() && t.is_uppercase() => {
                                return end
                            }
                            _ => {}
                        }
                    }
                    _ => {}
                }
            }
            _ => {}
        }
    }
    text.len()
}

fn mentions_label(sentence: &str, label: &str, lexicon: &Lexicon) -> bool {
    label_occurrences(sentence, lexicon)
        .iter()
        .any(|o| o.label == label)
}

/// Removes leading sentences while they mention `label`.
///
/// A mention is any whole-word, case-insensitive occurrence of one of the
/// label's surface forms that is not part of a longer label. Repeating the
/// removal keeps the operation idempotent.
pub fn strip_leading_label_sentence(text: &str, label: &str, lexicon: &Lexicon) -> String {
    let mut rest = text;
    loop {
        let n = first_sentence_len(rest);
        if n == 0 || !mentions_label(&rest[..n], label, lexicon) {
            return rest.to_string();
        }
        rest = rest[n..].trim_start();
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CotDemonstration {
    pub example: Example,
    pub explanation: ExplanationRecord,
    pub stripped_leading_label: bool,
    pub label_trailer_appended: bool,
    /// Text placed in the demonstration's answer slot.
    pub answer_text: String,
}

pub fn build_cot_demonstration(
    task: &TaskSpec,
    demo: &Example,
    record: &ExplanationRecord,
    strip: bool,
    append_label: bool,
) -> Result<CotDemonstration, ExplainError> {
    let gold = demo
        .gold
        .as_deref()
        .ok_or_else(|| ExplainError::MissingGold(demo.id.clone()))?;
    let body = if strip {
        strip_leading_label_sentence(&record.text, gold, &task.lexicon())
    } else {
        record.text.clone()
    };
    if body.trim().is_empty() {
        return Err(ExplainError::Degenerate(demo.id.clone()));
    }
    let answer_text = if append_label {
        format!("{} {}", body, task.label_trailer(gold))
    } else {
        body
    };
    Ok(CotDemonstration {
        example: demo.clone(),
        explanation: record.clone(),
        stripped_leading_label: strip,
        label_trailer_appended: append_label,
        answer_text,
    })
}

/// JSONL collection of explanation records.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExplanationStore {
    pub records: Vec<ExplanationRecord>,
}

impl ExplanationStore {
    pub fn new(records: Vec<ExplanationRecord>) -> ExplanationStore {
        ExplanationStore { records }
    }

    pub fn from_jsonl(text: &str) -> Result<ExplanationStore, ExplainError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(line).map_err(|e| ExplainError::Store {
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        Ok(ExplanationStore { records })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ExplanationStore, ExplainError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ExplainError::Io {
            path: path.display().to_string(),
            source,
        })?;
        ExplanationStore::from_jsonl(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ExplainError> {
        let path = path.as_ref();
        fs::write(path, self.to_jsonl()).map_err(|source| ExplainError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Records of one demo in sample order.
    pub fn for_demo(&self, demo_id: &str) -> Vec<ExplanationRecord> {
        let mut v: Vec<_> = self
            .records
            .iter()
            .filter(|r| r.demo_id == demo_id)
            .cloned()
            .collect();
        v.sort_by_key(|r| r.sample_index);
        v
    }

    pub fn by_demo(&self) -> BTreeMap<String, Vec<ExplanationRecord>> {
        let mut map: BTreeMap<String, Vec<ExplanationRecord>> = BTreeMap::new();
        for r in &self.records {
            map.entry(r.demo_id.clone()).or_default().push(r.clone());
        }
        for v in map.values_mut() {
            v.sort_by_key(|r| r.sample_index);
        }
        map
    }
}

/// Assembly flags for one CoT prompt configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssemblyFlags {
    pub with_gold: bool,
    pub strip: bool,
    /// Keep this many gold-agreeing explanations per demo.
    pub filter_keep: Option<usize>,
    pub append: bool,
}

impl AssemblyFlags {
    pub const DEFAULT: AssemblyFlags = AssemblyFlags {
        with_gold: true,
        strip: false,
        filter_keep: None,
        append: true,
    };
}

impl Default for AssemblyFlags {
    fn default() -> Self {
        AssemblyFlags::DEFAULT
    }
}

/// Demonstrations for one CoT prompt plus the demos whose filter degraded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemoSet {
    pub demos: Vec<CotDemonstration>,
    pub degraded: Vec<String>,
}

/// Builds `n_sets` demonstration sets from a store.
///
/// Without filtering, set `i` uses each demo's `i`-th sample. With
/// `filter_keep`, each demo's kept records are optionally shuffled by `seed`
/// and set `i` takes the `i`-th kept record.
pub fn assemble_sets(
    task: &TaskSpec,
    demos: &[Example],
    store: &ExplanationStore,
    flags: AssemblyFlags,
    n_sets: usize,
    seed: Option<u64>,
) -> Result<Vec<DemoSet>, ExplainError> {
    let mut sets: Vec<DemoSet> = (0..n_sets)
        .map(|_| DemoSet {
            demos: Vec::new(),
            degraded: Vec::new(),
        })
        .collect();
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    for demo in demos {
        let gold = demo
            .gold
            .as_deref()
            .ok_or_else(|| ExplainError::MissingGold(demo.id.clone()))?;
        let records = store.for_demo(&demo.id);
        let (pool, degraded) = match flags.filter_keep {
            Some(keep) if !records.is_empty() => {
                let f = filter_by_gold(&records, gold, keep)?;
                let mut kept = f.records;
                if let Some(rng) = rng.as_mut() {
                    kept.shuffle(rng);
                }
                (kept, f.degraded)
            }
            _ => (records, false),
        };
        for (i, set) in sets.iter_mut().enumerate() {
            let rec = pool
                .get(i)
                .ok_or_else(|| ExplainError::MissingExplanation {
                    demo_id: demo.id.clone(),
                    set: i,
                })?;
            set.demos.push(build_cot_demonstration(
                task,
                demo,
                rec,
                flags.strip,
                flags.append,
            )?);
            if degraded {
                set.degraded.push(demo.id.clone());
            }
        }
    }
    Ok(sets)
}
