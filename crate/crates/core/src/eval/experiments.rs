//! Ablation, consistency and stability runners.

use serde::{Deserialize, Serialize};

use super::{EvalError, EvalReport, MethodTag, Reference, ReferenceBaselines, Spread};
use crate::annotate::{annotate_split, AnnotateSettings, AnnotationResult, PromptPlan};
use crate::explain::{
    assemble_sets, build_cot_demonstration, AssemblyFlags, CotDemonstration, DemoSet, ExplainError,
    ExplanationStore,
};
use crate::gateway::Gateway;
use crate::prompt::{Family, PromptForge, Variant};
use crate::task::{DatasetSplit, Example, TaskId};

/// Everything needed to evaluate prompts over one split.
pub struct Experiment<'a> {
    pub gateway: &'a Gateway,
    pub forge: &'a PromptForge,
    pub split: &'a DatasetSplit,
    pub settings: &'a AnnotateSettings,
    pub baselines: Option<&'a ReferenceBaselines>,
}

impl Experiment<'_> {
    pub fn golds(&self) -> Result<Vec<String>, EvalError> {
        self.split
            .examples
            .iter()
            .map(|e| {
                e.gold
                    .clone()
                    .ok_or_else(|| EvalError::MissingGold(e.id.clone()))
            })
            .collect()
    }

    /// Annotates the split with `plan` and scores it. The first positional
    /// failure aborts the evaluation.
    pub fn evaluate(
        &self,
        plan: &PromptPlan,
        method: MethodTag,
    ) -> Result<(EvalReport, Vec<AnnotationResult>), EvalError> {
        let golds = self.golds()?;
        let results = annotate_split(self.gateway, self.forge, plan, self.split, self.settings)?
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        let task = self.forge.task();
        let report = super::accuracy(
            &task.id,
            &task.lexicon(),
            self.split.name,
            method,
            &results,
            &golds,
        )?
        .with_reference(self.baselines);
        Ok((report, results))
    }

    fn reference(&self, method: &MethodTag) -> Option<Reference> {
        self.baselines
            .and_then(|b| b.lookup(&self.forge.task().id, method, self.split.name))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationRow {
    pub row: u8,
    pub flags: AssemblyFlags,
}

impl AblationRow {
    /// The five standard configurations; row 5 keeps `keep` explanations per demo.
    pub fn standard(keep: usize) -> [AblationRow; 5] {
        let f = |with_gold, strip, filter_keep, append| AssemblyFlags {
            with_gold,
            strip,
            filter_keep,
            append,
        };
        [
            AblationRow {
                row: 1,
                flags: f(true, false, None, true),
            },
            AblationRow {
                row: 2,
                flags: f(true, true, None, true),
            },
            AblationRow {
                row: 3,
                flags: f(true, false, None, false),
            },
            AblationRow {
                row: 4,
                flags: f(false, false, None, true),
            },
            AblationRow {
                row: 5,
                flags: f(false, false, Some(keep), true),
            },
        ]
    }
}

pub struct AblationInputs {
    pub demos: Vec<Example>,
    /// Explanations generated with the gold label shown.
    pub guided: Option<ExplanationStore>,
    /// Explanations generated without the gold label.
    pub unguided: Option<ExplanationStore>,
    /// Prompts per unfiltered row. Filtered rows build one prompt per kept explanation.
    pub sets: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationOutcome {
    pub row: AblationRow,
    pub sets: Vec<DemoSet>,
    pub reports: Vec<EvalReport>,
    pub spread: Spread,
    pub reference: Option<Reference>,
}

impl AblationOutcome {
    /// Demo ids whose filter fell back to incorrect explanations.
    pub fn degraded(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .sets
            .iter()
            .flat_map(|s| s.degraded.iter().cloned())
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn method(&self) -> MethodTag {
        MethodTag::Cot {
            shots: self.sets.first().map_or(0, |s| s.demos.len()),
            variant: Variant::Base,
            flags: self.row.flags,
            ablation_row: Some(self.row.row),
            explanation_set: None,
        }
    }
}

pub fn run_ablation(
    exp: &Experiment<'_>,
    inputs: &AblationInputs,
    rows: &[AblationRow],
) -> Result<Vec<AblationOutcome>, EvalError> {
    let task = exp.forge.task();
    let mut out = Vec::with_capacity(rows.len());
    for &row in rows {
        let (store, which) = if row.flags.with_gold {
            (inputs.guided.as_ref(), "label-guided")
        } else {
            (inputs.unguided.as_ref(), "label-free")
        };
        let store = store.ok_or_else(|| EvalError::MissingVariant {
            row: row.row,
            detail: format!("no {which} explanation store"),
        })?;
        let n_sets = row.flags.filter_keep.unwrap_or(inputs.sets);
        let sets = assemble_sets(task, &inputs.demos, store, row.flags, n_sets, inputs.seed)
            .map_err(|e| match e {
                ExplainError::MissingExplanation { demo_id, set } => EvalError::MissingVariant {
                    row: row.row,
                    detail: format!("{which} store has no explanation {set} for demo `{demo_id}`"),
                },
                other => EvalError::Explain(other),
            })?;
        let mut reports = Vec::with_capacity(sets.len());
        for (i, set) in sets.iter().enumerate() {
            let method = MethodTag::Cot {
                shots: set.demos.len(),
                variant: Variant::Base,
                flags: row.flags,
                ablation_row: Some(row.row),
                explanation_set: Some(i),
            };
            let plan = PromptPlan::Cot {
                demos: set.demos.clone(),
                variant: Variant::Base,
            };
            reports.push(exp.evaluate(&plan, method)?.0.with_reference(None));
        }
        let mut outcome = AblationOutcome {
            row,
            spread: Spread::of_reports(&reports),
            sets,
            reports,
            reference: None,
        };
        outcome.reference = exp.reference(&outcome.method());
        out.push(outcome);
    }
    Ok(out)
}

/// Splits a store with `n` samples per demo into `n` stores of one sample each.
pub fn split_by_sample(store: &ExplanationStore, n: usize) -> Vec<ExplanationStore> {
    (0..n as u32)
        .map(|i| {
            ExplanationStore::new(
                store
                    .records
                    .iter()
                    .filter(|r| r.sample_index == i)
                    .cloned()
                    .collect(),
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyOutcome {
    pub reports: Vec<EvalReport>,
    pub spread: Spread,
    /// Digest of each set's prompt for the split's first example.
    pub prompt_digests: Vec<String>,
    pub reference: Option<Reference>,
}

pub fn consistency_experiment(
    exp: &Experiment<'_>,
    demos: &[Example],
    stores: &[ExplanationStore],
    flags: AssemblyFlags,
) -> Result<ConsistencyOutcome, EvalError> {
    let task = exp.forge.task();
    let first = exp.split.examples.first().ok_or(EvalError::Annotate(
        crate::annotate::AnnotateError::EmptySplit,
    ))?;
    let mut reports = Vec::new();
    let mut prompt_digests = Vec::new();
    for (set, store) in stores.iter().enumerate() {
        let mut cot = Vec::with_capacity(demos.len());
        for demo in demos {
            let recs = store.for_demo(&demo.id);
            let rec = match recs.as_slice() {
                [one] => one,
                [] => {
                    return Err(EvalError::BadSet {
                        set,
                        detail: format!("no explanation for demo `{}`", demo.id),
                    })
                }
                _ => {
                    return Err(EvalError::BadSet {
                        set,
                        detail: format!(
                            "{} explanations for demo `{}`, expected one",
                            recs.len(),
                            demo.id
                        ),
                    })
                }
            };
            cot.push(build_cot_demonstration(
                task,
                demo,
                rec,
                flags.strip,
                flags.append,
            )?);
        }
        let plan = PromptPlan::Cot {
            demos: cot,
            variant: Variant::Base,
        };
        prompt_digests.push(plan.render(exp.forge, first)?.digest);
        let method = MethodTag::Cot {
            shots: demos.len(),
            variant: Variant::Base,
            flags,
            ablation_row: None,
            explanation_set: Some(set),
        };
        reports.push(exp.evaluate(&plan, method)?.0.with_reference(None));
    }
    let summary = MethodTag::Cot {
        shots: demos.len(),
        variant: Variant::Base,
        flags,
        ablation_row: None,
        explanation_set: None,
    };
    Ok(ConsistencyOutcome {
        spread: Spread::of_reports(&reports),
        reports,
        prompt_digests,
        reference: exp.reference(&summary),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCell {
    pub family: Family,
    pub variant: Variant,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityMatrix {
    pub cells: Vec<StabilityCell>,
    pub summary: Vec<(Family, Spread)>,
}

impl StabilityMatrix {
    pub fn get(&self, family: Family, variant: Variant) -> Option<&EvalReport> {
        self.cells
            .iter()
            .find(|c| c.family == family && c.variant == variant)
            .map(|c| &c.report)
    }
}

pub fn stability_experiment(
    exp: &Experiment<'_>,
    few_shot_demos: &[Example],
    cot_demos: &[CotDemonstration],
    variants: &[Variant],
    families: &[Family],
) -> Result<StabilityMatrix, EvalError> {
    let task = exp.forge.task();
    if task.id != TaskId::BoolQ {
        return Err(EvalError::VariantsUnavailable(task.id.clone()));
    }
    // Fail before any completion is requested if a cell cannot be rendered.
    for &family in families {
        for &variant in variants {
            exp.forge.templates().get(family, variant)?;
        }
    }
    let flags = cot_demos
        .first()
        .map_or(AssemblyFlags::DEFAULT, |d| AssemblyFlags {
            with_gold: d.explanation.guided_by_gold,
            strip: d.stripped_leading_label,
            filter_keep: None,
            append: d.label_trailer_appended,
        });
    let mut cells = Vec::new();
    let mut summary = Vec::new();
    for &family in families {
        let mut accs = Vec::new();
        for &variant in variants {
            let (plan, method) = match family {
                Family::FewShot => (
                    PromptPlan::FewShot {
                        demos: few_shot_demos.to_vec(),
                        variant,
                    },
                    MethodTag::FewShot {
                        shots: few_shot_demos.len(),
                        variant,
                    },
                ),
                Family::Cot => (
                    PromptPlan::Cot {
                        demos: cot_demos.to_vec(),
                        variant,
                    },
                    MethodTag::Cot {
                        shots: cot_demos.len(),
                        variant,
                        flags,
                        ablation_row: None,
                        explanation_set: None,
                    },
                ),
                other => {
                    return Err(EvalError::Prompt(
                        crate::prompt::PromptError::VariantUnavailable {
                            task: task.id.clone(),
                            family: other,
                            variant,
                        },
                    ))
                }
            };
            let report = exp.evaluate(&plan, method)?.0;
            accs.push(report.accuracy);
            cells.push(StabilityCell {
                family,
                variant,
                report,
            });
        }
        summary.push((family, Spread::of(&accs)));
    }
    Ok(StabilityMatrix { cells, summary })
}
