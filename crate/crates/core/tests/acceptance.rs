//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use annokit::annotate::{
    annotate_split, results_from_jsonl, results_to_jsonl, AnnotateSettings, PromptPlan,
};
use annokit::eval::{
    accuracy, monte_carlo_agreement, render_table, run_ablation, simulate_crowd, AblationInputs,
    AblationRow, Experiment, MethodTag, ReferenceBaselines, TableRow,
};
use annokit::explain::{
    assemble_sets, generate_explanations, strip_leading_label_sentence, AssemblyFlags,
    ExplanationStore, SamplingSettings,
};
use annokit::extract::extract_label;
use annokit::gateway::FixtureStore;
use annokit::prompt::{PromptForge, Variant};
use annokit::task::{SplitName, TaskSpec};
use common::*;

fn forge(name: &str) -> PromptForge {
    PromptForge::builtin(task(name)).unwrap()
}

fn check(name: &str, text: &str) {
    assert!(
        golden(name) == text,
        "{name} does not match its golden file"
    );
}

fn template_fidelity() {
    for t in ["qk", "wic", "boolq"] {
        let f = forge(t);
        check(
            &format!("zero_shot_{t}"),
            &f.zero_shot(&query(t), Variant::Base).unwrap().text,
        );
        check(
            &format!("few_shot_{t}"),
            &f.few_shot(&demos(t), &query(t), Variant::Base)
                .unwrap()
                .text,
        );
        check(
            &format!("cot_{t}"),
            &f.cot(&cot_demos(t), &query(t), Variant::Base).unwrap().text,
        );
    }
    let b = forge("boolq");
    for v in [Variant::P1, Variant::P2, Variant::P3] {
        check(
            &format!("few_shot_boolq_{v}"),
            &b.few_shot(&demos("boolq")[..1], &query("boolq"), v)
                .unwrap()
                .text,
        );
        check(
            &format!("cot_boolq_{v}"),
            &b.cot(&cot_demos("boolq")[..1], &query("boolq"), v)
                .unwrap()
                .text,
        );
    }
    let qk_demo = &demos("qk")[0];
    check(
        "explanation_qk_guided",
        &forge("qk")
            .explanation(qk_demo, Some("Bad"), 100)
            .unwrap()
            .text,
    );
    check(
        "explanation_qk_unguided",
        &forge("qk").explanation(qk_demo, None, 100).unwrap().text,
    );
    check(
        "explanation_wic",
        &forge("wic")
            .explanation(&demos("wic")[0], Some("false"), 100)
            .unwrap()
            .text,
    );
    check(
        "explanation_boolq",
        &b.explanation(&demos("boolq")[0], Some("No"), 100)
            .unwrap()
            .text,
    );
}

fn parser_corpus() {
    let items = completions();
    let labeled = items.iter().filter(|i| i.expected.is_some()).count();
    assert!(labeled >= 25, "only {labeled} labeled texts");
    assert_eq!(items.len() - labeled, 5);
    for item in &items {
        let got = extract_label(&item.text, &task(&item.task).lexicon()).map(|e| e.label);
        assert_eq!(got, item.expected, "{}", item.source);
    }
    let qk = TaskSpec::qk().lexicon();
    let out3 = &samples().explanation_outputs["qk_unguided"].outputs[2];
    assert!(out3.contains("\"Not bad.\""));
    assert_eq!(extract_label(out3, &qk).unwrap().label, "Not bad");
    assert_eq!(
        extract_label("It is Not bad at all", &qk).unwrap().label,
        "Not bad"
    );
}

fn qk_experiment_parts() -> (
    PromptForge,
    annokit::Gateway,
    annokit::DatasetSplit,
    Vec<annokit::Example>,
) {
    (
        forge("qk"),
        replay("qk"),
        split("qk", "mini.tsv", "qk"),
        demos("qk").into_iter().take(4).collect(),
    )
}

fn ablation_mechanics() {
    let (forge, gw, split, demos) = qk_experiment_parts();
    let task = forge.task().clone();
    let lex = task.lexicon();
    let settings = AnnotateSettings::default();
    let exp = Experiment {
        gateway: &gw,
        forge: &forge,
        split: &split,
        settings: &settings,
        baselines: None,
    };
    let unguided = store("qk", "unguided_explanations.jsonl");
    let inputs = AblationInputs {
        demos: demos.clone(),
        guided: Some(store("qk", "explanations.jsonl")),
        unguided: Some(unguided.clone()),
        sets: 5,
        seed: Some(7),
    };
    let keep = 3;
    let out = run_ablation(&exp, &inputs, &AblationRow::standard(keep)).unwrap();
    assert_eq!(out.len(), 5);
    for d in out[1].sets.iter().flat_map(|s| &s.demos) {
        let gold = d.example.gold.as_deref().unwrap();
        assert_eq!(
            strip_leading_label_sentence(&d.answer_text, gold, &lex),
            d.answer_text
        );
        assert!(d.stripped_leading_label);
    }
    for d in out[2].sets.iter().flat_map(|s| &s.demos) {
        assert!(!d
            .answer_text
            .ends_with(&task.label_trailer(d.example.gold.as_deref().unwrap())));
    }
    let expected: Vec<String> = demos
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
    assert!(
        !expected.is_empty(),
        "fixture should include an all-wrong demo"
    );
    assert_eq!(out[4].degraded(), expected);
    assert!(out[..4].iter().all(|o| o.degraded().is_empty()));
}

/// Exact P(gold) for the first-to-three-votes protocol with two labels.
fn oracle(p: f64) -> f64 {
    let mut reach = [[0.0f64; 4]; 4];
    reach[0][0] = 1.0;
    let mut gold = 0.0;
    for total in 0..5usize {
        for c in 0..=total.min(2) {
            let w = total - c;
            if w > 2 {
                continue;
            }
            let m = reach[c][w];
            if c == 2 {
                gold += m * p;
            } else {
                reach[c + 1][w] += m * p;
            }
            if w < 2 {
                reach[c][w + 1] += m * (1.0 - p);
            }
        }
    }
    gold
}

fn consensus_oracle() {
    for (i, p) in [0.6, 0.8, 0.95].into_iter().enumerate() {
        let mc = monte_carlo_agreement(p, 1_000_000, 17 + i as u64).unwrap();
        assert!(
            (mc - oracle(p)).abs() < 0.003,
            "p={p}: {mc} vs {}",
            oracle(p)
        );
    }
    let lex = TaskSpec::qk().lexicon();
    for seed in 0..100 {
        let t = simulate_crowd("x", "Bad", &lex, 1.0, seed).unwrap();
        assert_eq!((t.consensus.as_str(), t.annotators_used), ("Bad", 3));
        let t = simulate_crowd("x", "Bad", &lex, 0.0, seed).unwrap();
        assert_eq!((t.consensus.as_str(), t.annotators_used), ("Not bad", 3));
        let t = simulate_crowd("x", "Bad", &lex, 0.5, seed).unwrap();
        assert!(t.annotators_used <= 5);
    }
}

fn end_to_end_replay() {
    let (forge, gw, split, demos) = qk_experiment_parts();
    let task = forge.task().clone();
    let mut records = Vec::new();
    for d in &demos {
        records.extend(
            generate_explanations(&gw, &forge, d, 5, true, &SamplingSettings::default()).unwrap(),
        );
    }
    let store = ExplanationStore::new(records);
    let set = assemble_sets(&task, &demos, &store, AssemblyFlags::DEFAULT, 1, None)
        .unwrap()
        .remove(0);
    let plan = PromptPlan::Cot {
        demos: set.demos,
        variant: Variant::Base,
    };
    let run = |w| {
        let s = AnnotateSettings {
            max_in_flight: w,
            ..AnnotateSettings::default()
        };
        let r: Vec<_> = annotate_split(&gw, &forge, &plan, &split, &s)
            .unwrap()
            .into_iter()
            .map(Result::unwrap)
            .collect();
        r
    };
    let one = run(1);
    assert_eq!(one, run(8));
    let golds: Vec<String> = split
        .examples
        .iter()
        .map(|e| e.gold.clone().unwrap())
        .collect();
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
        &one,
        &golds,
    )
    .unwrap();
    assert_eq!(report.accuracy, 1.0);
}

fn round_trip_integrity() {
    for (dir, file) in [
        ("qk", "explanations.jsonl"),
        ("qk", "unguided_explanations.jsonl"),
        ("boolq", "explanations.jsonl"),
    ] {
        let on_disk = std::fs::read_to_string(pipeline(&format!("{dir}/{file}"))).unwrap();
        let once = ExplanationStore::from_jsonl(&on_disk).unwrap().to_jsonl();
        assert_eq!(once, on_disk, "{dir}/{file} is not canonical");
        assert_eq!(
            ExplanationStore::from_jsonl(&once).unwrap().to_jsonl(),
            once
        );
    }
    for dir in ["qk", "boolq", "qk_dev"] {
        let on_disk = std::fs::read_to_string(pipeline(&format!("{dir}/replay.jsonl"))).unwrap();
        let once = FixtureStore::from_jsonl(&on_disk).unwrap().to_jsonl();
        assert_eq!(once, on_disk, "{dir}/replay.jsonl is not canonical");
        assert_eq!(FixtureStore::from_jsonl(&once).unwrap().to_jsonl(), once);
    }
    let (forge, gw, split, _) = qk_experiment_parts();
    let plan = PromptPlan::ZeroShot {
        variant: Variant::Base,
    };
    let results: Vec<_> = annotate_split(&gw, &forge, &plan, &split, &AnnotateSettings::default())
        .unwrap()
        .into_iter()
        .map(Result::unwrap)
        .collect();
    let once = results_to_jsonl(&results);
    let back = results_from_jsonl(&once).unwrap();
    assert_eq!(back, results);
    assert_eq!(results_to_jsonl(&back), once);
}

fn reference_reporting() {
    let baselines = ReferenceBaselines::bundled();
    let (forge, gw, split, demos) = qk_experiment_parts();
    let settings = AnnotateSettings::default();
    let exp = Experiment {
        gateway: &gw,
        forge: &forge,
        split: &split,
        settings: &settings,
        baselines: Some(&baselines),
    };
    let set = assemble_sets(
        forge.task(),
        &demos,
        &store("qk", "explanations.jsonl"),
        AssemblyFlags::DEFAULT,
        1,
        None,
    )
    .unwrap()
    .remove(0);
    let method = MethodTag::Cot {
        shots: 4,
        variant: Variant::Base,
        flags: AssemblyFlags::DEFAULT,
        ablation_row: None,
        explanation_set: None,
    };
    let plan = PromptPlan::Cot {
        demos: set.demos,
        variant: Variant::Base,
    };
    let (report, _) = exp.evaluate(&plan, method.clone()).unwrap();
    assert_eq!(
        report.accuracy, 1.0,
        "measured value stays independent of the reference"
    );
    let r = report.reference.as_ref().unwrap();
    assert_eq!((r.value, r.gating), (74.17, false));
    assert!(r.source.starts_with("Table "));
    let table = render_table(&[TableRow::from(&report)]);
    assert!(
        table.contains("100.00") && table.contains("74.17 (Table 3, reference only)"),
        "{table}"
    );

    let expect = |task: &annokit::TaskId, m: &MethodTag, dev: f64, test: f64| {
        for (split, v) in [(SplitName::Dev, dev), (SplitName::Test, test)] {
            let r = baselines.lookup(task, m, split).unwrap();
            assert_eq!(r.value, v);
            assert!(!r.gating);
            let n: u32 = r.source.trim_start_matches("Table ").parse().unwrap();
            assert!((3..=6).contains(&n), "{}", r.source);
        }
    };
    expect(&annokit::TaskId::Qk, &method, 74.17, 75.60);
    let boolq_cot = MethodTag::Cot {
        shots: 8,
        variant: Variant::Base,
        flags: AssemblyFlags::DEFAULT,
        ablation_row: None,
        explanation_set: None,
    };
    expect(&annokit::TaskId::BoolQ, &boolq_cot, 89.69, 89.20);
}

fn main() {
    let criteria: [(&str, fn(), Duration); 7] = [
        (
            "template fidelity",
            template_fidelity,
            Duration::from_secs(1),
        ),
        ("parser corpus", parser_corpus, Duration::from_secs(1)),
        (
            "ablation mechanics",
            ablation_mechanics,
            Duration::from_secs(5),
        ),
        (
            "consensus oracle",
            consensus_oracle,
            Duration::from_secs(30),
        ),
        (
            "end-to-end replay",
            end_to_end_replay,
            Duration::from_secs(10),
        ),
        (
            "round-trip integrity",
            round_trip_integrity,
            Duration::from_secs(10),
        ),
        (
            "reference reporting",
            reference_reporting,
            Duration::from_secs(5),
        ),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f));
        let took = start.elapsed();
        let verdict = match result {
            Ok(()) if took <= *budget => "PASS".to_string(),
            Ok(()) => format!("FAIL (over the {budget:?} budget)"),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                format!("FAIL ({msg})")
            }
        };
        if !verdict.starts_with("PASS") {
            failed += 1;
        }
        println!(
            "criterion {}: {name}: {verdict} [{:.2}s]",
            i + 1,
            took.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
