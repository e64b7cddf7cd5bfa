//! Full pipeline runs over the recorded fixture stores.

mod common;

use annokit::annotate::{annotate_split, results_to_jsonl, AnnotateSettings, PromptPlan};
use annokit::eval::{
    accuracy, consistency_experiment, run_ablation, split_by_sample, stability_experiment,
    AblationInputs, AblationRow, EvalError, Experiment, MethodTag, ReferenceBaselines,
};
use annokit::explain::{
    assemble_sets, generate_explanations, AssemblyFlags, ExplanationStore, SamplingSettings,
};
use annokit::extract::extract_label;
use annokit::prompt::{Family, PromptForge, Variant};
use annokit::task::{SplitName, TaskSpec};
use common::*;

fn qk_demos() -> Vec<annokit::Example> {
    demos("qk").into_iter().take(4).collect()
}

#[test]
fn explain_assemble_annotate_eval() {
    let task = TaskSpec::qk();
    let forge = PromptForge::builtin(task.clone()).unwrap();
    let gw = replay("qk");
    let settings = SamplingSettings::default();
    let mut records = Vec::new();
    for demo in &qk_demos() {
        records.extend(generate_explanations(&gw, &forge, demo, 5, true, &settings).unwrap());
    }
    let generated = ExplanationStore::new(records);
    assert_eq!(generated.records.len(), 20);
    assert_eq!(
        generated.to_jsonl(),
        store("qk", "explanations.jsonl").to_jsonl()
    );

    let sets = assemble_sets(
        &task,
        &qk_demos(),
        &generated,
        AssemblyFlags::DEFAULT,
        1,
        None,
    )
    .unwrap();
    let plan = PromptPlan::Cot {
        demos: sets[0].demos.clone(),
        variant: Variant::Base,
    };
    let split = split("qk", "mini.tsv", "qk");
    let golds: Vec<String> = split
        .examples
        .iter()
        .map(|e| e.gold.clone().unwrap())
        .collect();
    let run = |width| {
        let s = AnnotateSettings {
            max_in_flight: width,
            ..AnnotateSettings::default()
        };
        annotate_split(&gw, &forge, &plan, &split, &s)
            .unwrap()
            .into_iter()
            .collect::<Result<Vec<_>, _>>()
            .unwrap()
    };
    let serial = run(1);
    assert_eq!(results_to_jsonl(&serial), results_to_jsonl(&run(8)));
    let method = MethodTag::Cot {
        shots: 4,
        variant: Variant::Base,
        flags: AssemblyFlags::DEFAULT,
        ablation_row: None,
        explanation_set: None,
    };
    let report = accuracy(
        &task.id,
        &task.lexicon(),
        SplitName::Dev,
        method,
        &serial,
        &golds,
    )
    .unwrap();
    assert_eq!(report.accuracy, 1.0);
    assert_eq!(report.n_examples, 12);
}

#[test]
fn zero_and_few_shot_replay() {
    let forge = PromptForge::builtin(TaskSpec::qk()).unwrap();
    let gw = replay("qk");
    let split = split("qk", "mini.tsv", "qk");
    let settings = AnnotateSettings::default();
    let exp = Experiment {
        gateway: &gw,
        forge: &forge,
        split: &split,
        settings: &settings,
        baselines: None,
    };
    let v = Variant::Base;
    let (zero, _) = exp
        .evaluate(
            &PromptPlan::ZeroShot { variant: v },
            MethodTag::ZeroShot { variant: v },
        )
        .unwrap();
    let plan = PromptPlan::FewShot {
        demos: demos("qk"),
        variant: v,
    };
    let (few, _) = exp
        .evaluate(
            &plan,
            MethodTag::FewShot {
                shots: 8,
                variant: v,
            },
        )
        .unwrap();
    assert_eq!((zero.accuracy, few.accuracy), (1.0, 1.0));
}

/// First sentence using a plain ". " / "! " / "? " split, independent of the
/// quote-aware splitter used by the stripping code.
fn naive_first_sentence(text: &str) -> &str {
    let cut = ["\". ", ". ", "! ", "? "]
        .iter()
        .filter_map(|p| text.find(p).map(|i| i + p.len()))
        .min()
        .unwrap_or(text.len());
    &text[..cut]
}

#[test]
fn ablation_rows_meet_their_predicates() {
    let task = TaskSpec::qk();
    let lex = task.lexicon();
    let forge = PromptForge::builtin(task.clone()).unwrap();
    let gw = replay("qk");
    let split = split("qk", "mini.tsv", "qk");
    let settings = AnnotateSettings::default();
    let baselines = ReferenceBaselines::bundled();
    let exp = Experiment {
        gateway: &gw,
        forge: &forge,
        split: &split,
        settings: &settings,
        baselines: Some(&baselines),
    };
    let unguided = store("qk", "unguided_explanations.jsonl");
    let inputs = AblationInputs {
        demos: qk_demos(),
        guided: Some(store("qk", "explanations.jsonl")),
        unguided: Some(unguided.clone()),
        sets: 5,
        seed: Some(7),
    };
    let keep = 3;
    let out = run_ablation(&exp, &inputs, &AblationRow::standard(keep)).unwrap();
    assert_eq!(out.len(), 5);
    let tags: std::collections::BTreeSet<String> =
        out.iter().map(|o| o.method().to_string()).collect();
    assert_eq!(tags.len(), 5);
    assert_eq!(out[0].reference.as_ref().unwrap().value, 74.17);

    for set in &out[1].sets {
        for d in &set.demos {
            let gold = d.example.gold.as_deref().unwrap();
            assert!(
                d.explanation.text.contains(gold),
                "row 2 fixture should mention the label"
            );
            let first = naive_first_sentence(&d.answer_text);
            assert_ne!(
                extract_label(first, &lex).map(|e| e.label),
                Some(gold.to_string()),
                "{first}"
            );
        }
    }
    for set in &out[2].sets {
        for d in &set.demos {
            let trailer = task.label_trailer(d.example.gold.as_deref().unwrap());
            assert!(!d.answer_text.ends_with(&trailer));
            assert_eq!(d.answer_text, d.explanation.text);
        }
    }
    for o in &out[..4] {
        assert_eq!(o.sets.len(), 5);
        assert!(o.degraded().is_empty());
    }
    let row5 = &out[4];
    assert_eq!(row5.sets.len(), keep);
    let expected: Vec<String> = qk_demos()
        .iter()
        .filter(|d| {
            let gold = d.gold.as_deref().unwrap();
            unguided
                .for_demo(&d.id)
                .iter()
                .filter(|r| r.agrees_with(gold))
                .count()
                < keep
        })
        .map(|d| d.id.clone())
        .collect();
    assert_eq!(row5.degraded(), expected);
    assert_eq!(expected, ["3"]);
    for set in &row5.sets {
        for d in &set.demos {
            let gold = d.example.gold.as_deref().unwrap();
            assert!(!d.explanation.guided_by_gold);
            assert_eq!(d.explanation.agrees_with(gold), d.example.id != "3");
        }
    }
}

#[test]
fn ablation_names_the_missing_row() {
    let forge = PromptForge::builtin(TaskSpec::qk()).unwrap();
    let gw = replay("qk");
    let split = split("qk", "mini.tsv", "qk");
    let settings = AnnotateSettings::default();
    let exp = Experiment {
        gateway: &gw,
        forge: &forge,
        split: &split,
        settings: &settings,
        baselines: None,
    };
    let inputs = AblationInputs {
        demos: qk_demos(),
        guided: Some(store("qk", "explanations.jsonl")),
        unguided: None,
        sets: 5,
        seed: None,
    };
    match run_ablation(&exp, &inputs, &AblationRow::standard(3)) {
        Err(EvalError::MissingVariant { row: 4, .. }) => {}
        other => panic!("expected a row 4 error, got {other:?}"),
    }
}

#[test]
fn consistency_over_five_sets() {
    let forge = PromptForge::builtin(TaskSpec::qk()).unwrap();
    let gw = replay("qk");
    let split = split("qk", "mini.tsv", "qk");
    let settings = AnnotateSettings::default();
    let exp = Experiment {
        gateway: &gw,
        forge: &forge,
        split: &split,
        settings: &settings,
        baselines: None,
    };
    let stores = split_by_sample(&store("qk", "explanations.jsonl"), 5);
    let out = consistency_experiment(&exp, &qk_demos(), &stores, AssemblyFlags::DEFAULT).unwrap();
    assert_eq!(out.reports.len(), 5);
    let distinct: std::collections::BTreeSet<&String> = out.prompt_digests.iter().collect();
    assert_eq!(distinct.len(), 5);
    assert_eq!(out.spread.stddev, 0.0);
    let mean = out.reports.iter().map(|r| r.accuracy).sum::<f64>() / 5.0;
    assert_eq!(out.spread.mean, mean);

    let mut broken = stores.clone();
    broken[2].records.retain(|r| r.demo_id != "1");
    match consistency_experiment(&exp, &qk_demos(), &broken, AssemblyFlags::DEFAULT) {
        Err(EvalError::BadSet { set: 2, .. }) => {}
        other => panic!("expected a set 2 error, got {other:?}"),
    }
}

#[test]
fn boolq_stability_matrix() {
    let task = TaskSpec::boolq();
    let forge = PromptForge::builtin(task.clone()).unwrap();
    let gw = replay("boolq");
    let split = split("boolq", "mini.jsonl", "boolq");
    let settings = AnnotateSettings::default();
    let baselines = ReferenceBaselines::bundled();
    let exp = Experiment {
        gateway: &gw,
        forge: &forge,
        split: &split,
        settings: &settings,
        baselines: Some(&baselines),
    };
    let cot_examples = cot_demo_examples("boolq");
    let cot = assemble_sets(
        &task,
        &cot_examples,
        &store("boolq", "explanations.jsonl"),
        AssemblyFlags::DEFAULT,
        1,
        None,
    )
    .unwrap()
    .remove(0)
    .demos;
    let families = [Family::FewShot, Family::Cot];
    let m = stability_experiment(&exp, &demos("boolq"), &cot, &Variant::ALL, &families).unwrap();
    assert_eq!(m.cells.len(), 8);
    for f in families {
        for v in Variant::ALL {
            assert_eq!(m.get(f, v).unwrap().accuracy, 1.0);
        }
    }
    assert_eq!(m.summary.len(), 2);
    assert_eq!(
        m.get(Family::Cot, Variant::Base)
            .unwrap()
            .reference
            .as_ref()
            .unwrap()
            .value,
        89.69
    );

    let wic = PromptForge::builtin(TaskSpec::wic()).unwrap();
    let exp = Experiment { forge: &wic, ..exp };
    assert!(matches!(
        stability_experiment(&exp, &[], &[], &Variant::ALL, &families),
        Err(EvalError::VariantsUnavailable(_))
    ));
}

#[test]
fn dev_fixture_replays_without_misses() {
    let split = split("qk_dev", "dev.tsv", "qk");
    assert_eq!(split.len(), 350);
    let forge = PromptForge::builtin(TaskSpec::qk()).unwrap();
    let gw = replay("qk_dev");
    let plan = PromptPlan::ZeroShot {
        variant: Variant::Base,
    };
    let results = annotate_split(&gw, &forge, &plan, &split, &AnnotateSettings::default()).unwrap();
    assert_eq!(results.len(), 350);
    assert!(results.iter().all(|r| r.is_ok()));
}
