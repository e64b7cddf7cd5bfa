//! Accuracy reports, crowd simulation, and the experiment runners.

mod crowd;
mod experiments;
mod reference;
mod table;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crowd::{
    consensus_from_votes, monte_carlo_agreement, other_label, simulate_crowd, ConsensusTrace,
    CrowdSimulator, VOTES_TO_AGREE,
};
pub use experiments::{
    consistency_experiment, run_ablation, split_by_sample, stability_experiment, AblationInputs,
    AblationOutcome, AblationRow, ConsistencyOutcome, Experiment, StabilityCell, StabilityMatrix,
};
pub use reference::{Reference, ReferenceBaselines, ReferenceEntry};
pub use table::{render_table, TableRow};

use crate::annotate::{AnnotateError, AnnotationResult};
use crate::explain::{AssemblyFlags, ExplainError};
use crate::prompt::{Family, PromptError, Variant};
use crate::task::{Lexicon, SplitName, TaskId};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{results} results but {golds} gold labels")]
    LengthMismatch { results: usize, golds: usize },
    #[error("gold label `{0}` is not in the task lexicon")]
    UnknownGold(String),
    #[error("example `{0}` has no gold label")]
    MissingGold(String),
    #[error("annotator accuracy {0} is outside [0, 1]")]
    BadProbability(f64),
    #[error("crowd simulation needs exactly two labels, found {0}")]
    NotBinary(usize),
    #[error("ablation row {row}: {detail}")]
    MissingVariant { row: u8, detail: String },
    #[error("explanation set {set}: {detail}")]
    BadSet { set: usize, detail: String },
    #[error("prompt variants are only defined for the boolq task, not {0}")]
    VariantsUnavailable(TaskId),
    #[error("invalid reference baselines: {0}")]
    Baselines(String),
    #[error(transparent)]
    Annotate(#[from] AnnotateError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

impl EvalError {
    /// True when the failure came from the completion backend.
    pub fn is_gateway(&self) -> bool {
        matches!(
            self,
            EvalError::Annotate(AnnotateError::Gateway { .. })
                | EvalError::Explain(ExplainError::Gateway { .. })
        )
    }
}

/// How the labels in a report were produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MethodTag {
    Crowd,
    ZeroShot {
        variant: Variant,
    },
    FewShot {
        shots: usize,
        variant: Variant,
    },
    Cot {
        shots: usize,
        variant: Variant,
        flags: AssemblyFlags,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ablation_row: Option<u8>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        explanation_set: Option<usize>,
    },
}

impl MethodTag {
    pub fn family(&self) -> Option<Family> {
        match self {
            MethodTag::Crowd => None,
            MethodTag::ZeroShot { .. } => Some(Family::ZeroShot),
            MethodTag::FewShot { .. } => Some(Family::FewShot),
            MethodTag::Cot { .. } => Some(Family::Cot),
        }
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let variant = |v: &Variant| {
            if *v == Variant::Base {
                String::new()
            } else {
                format!("/{v}")
            }
        };
        match self {
            MethodTag::Crowd => f.write_str("crowd"),
            MethodTag::ZeroShot { variant: v } => write!(f, "zero_shot{}", variant(v)),
            MethodTag::FewShot { shots, variant: v } => {
                write!(f, "few_shot({shots}){}", variant(v))
            }
            MethodTag::Cot {
                shots,
                variant: v,
                flags,
                ablation_row,
                explanation_set,
            } => {
                write!(f, "cot({shots}){}", variant(v))?;
                if let Some(row) = ablation_row {
                    write!(f, " row{row}")?;
                }
                let mut marks = vec![if flags.with_gold { "gen+L" } else { "gen-L" }];
                if flags.strip {
                    marks.push("strip");
                }
                let filter;
                if let Some(k) = flags.filter_keep {
                    filter = format!("filter{k}");
                    marks.push(&filter);
                }
                if flags.append {
                    marks.push("append");
                }
                write!(f, " [{}]", marks.join(","))?;
                if let Some(s) = explanation_set {
                    write!(f, " set{s}")?;
                }
                Ok(())
            }
        }
    }
}

/// Counts behind an accuracy figure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub accuracy: f64,
    pub n_examples: usize,
    pub n_correct: usize,
    pub n_unparsed: usize,
}

/// Exact-match accuracy. Unparsed results count as incorrect.
pub fn score(
    results: &[AnnotationResult],
    golds: &[String],
    lexicon: &Lexicon,
) -> Result<Score, EvalError> {
    if results.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            results: results.len(),
            golds: golds.len(),
        });
    }
    if let Some(g) = golds.iter().find(|g| !lexicon.contains(g)) {
        return Err(EvalError::UnknownGold(g.clone()));
    }
    let n_correct = results
        .iter()
        .zip(golds)
        .filter(|(r, g)| r.label.as_deref() == Some(g.as_str()))
        .count();
    let n_unparsed = results.iter().filter(|r| r.label.is_none()).count();
    let n = results.len();
    Ok(Score {
        accuracy: if n == 0 {
            0.0
        } else {
            n_correct as f64 / n as f64
        },
        n_examples: n,
        n_correct,
        n_unparsed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task_id: TaskId,
    pub split: SplitName,
    pub method: MethodTag,
    pub accuracy: f64,
    pub n_examples: usize,
    pub n_correct: usize,
    pub n_unparsed: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Reference>,
}

impl EvalReport {
    pub fn new(task_id: TaskId, split: SplitName, method: MethodTag, score: Score) -> EvalReport {
        EvalReport {
            task_id,
            split,
            method,
            accuracy: score.accuracy,
            n_examples: score.n_examples,
            n_correct: score.n_correct,
            n_unparsed: score.n_unparsed,
            reference: None,
        }
    }

    pub fn with_reference(mut self, baselines: Option<&ReferenceBaselines>) -> EvalReport {
        self.reference = baselines.and_then(|b| b.lookup(&self.task_id, &self.method, self.split));
        self
    }
}

/// Builds a report from results and golds in one step.
pub fn accuracy(
    task_id: &TaskId,
    lexicon: &Lexicon,
    split: SplitName,
    method: MethodTag,
    results: &[AnnotationResult],
    golds: &[String],
) -> Result<EvalReport, EvalError> {
    Ok(EvalReport::new(
        task_id.clone(),
        split,
        method,
        score(results, golds, lexicon)?,
    ))
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub stddev: f64,
    pub n: usize,
}

impl Spread {
    pub fn of(values: &[f64]) -> Spread {
        let n = values.len();
        if n == 0 {
            return Spread {
                mean: 0.0,
                stddev: 0.0,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        Spread {
            mean,
            stddev: var.sqrt(),
            n,
        }
    }

    pub fn of_reports(reports: &[EvalReport]) -> Spread {
        Spread::of(&reports.iter().map(|r| r.accuracy).collect::<Vec<_>>())
    }
}
