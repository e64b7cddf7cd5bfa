//! Explain-then-annotate: turn a chat-completion model into a data annotator.
//!
//! The pipeline samples label-guided explanations for a handful of labeled
//! demonstrations, assembles them into few-shot chain-of-thought prompts,
//! annotates unlabeled examples with those prompts, and scores the result.
//!
//! - [`task`]: built-in tasks, lexicons, dataset loading
//! - [`prompt`]: template rendering for every prompt family
//! - [`explain`]: explanation sampling and demonstration assembly
//! - [`gateway`]: completion backends with caching, retries and rate limits
//! - [`extract`] and [`annotate`]: label extraction and annotation drivers
//! - [`eval`]: accuracy, crowd simulation, experiment runners

pub mod annotate;
pub mod eval;
pub mod explain;
pub mod extract;
pub mod gateway;
pub mod parallel;
pub mod prompt;
pub mod task;

pub use annotate::{annotate_one, annotate_split, AnnotateSettings, AnnotationResult, PromptPlan};
pub use explain::{
    build_cot_demonstration, filter_by_gold, generate_explanations, strip_leading_label_sentence,
    CotDemonstration, ExplanationRecord, ExplanationStore,
};
pub use extract::{extract_label, Extraction, ExtractionRule};
pub use gateway::{CompletionRequest, CompletionResponse, Gateway};
pub use prompt::{Family, PromptForge, RenderedPrompt, Variant};
pub use task::{DataFormat, DatasetSplit, Example, Lexicon, SplitName, TaskId, TaskSpec};
