#![allow(dead_code)]

use std::path::PathBuf;

use annokit::explain::{build_cot_demonstration, CotDemonstration, ExplanationRecord};
use annokit::task::{load_dataset, DataFormat, DatasetSplit, Example, SplitName, TaskSpec};
use serde::Deserialize;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

pub fn golden(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{name}.txt"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let text = text.replace("\r\n", "\n");
    text.strip_suffix('\n').unwrap_or(&text).to_string()
}

pub fn task(name: &str) -> TaskSpec {
    match name {
        "qk" => TaskSpec::qk(),
        "wic" => TaskSpec::wic(),
        "boolq" => TaskSpec::boolq(),
        other => panic!("unknown task {other}"),
    }
}

fn ext(t: &TaskSpec) -> (&'static str, DataFormat) {
    match t.default_format() {
        DataFormat::Tsv => ("tsv", DataFormat::Tsv),
        DataFormat::Jsonl => ("jsonl", DataFormat::Jsonl),
    }
}

pub fn demos(name: &str) -> Vec<Example> {
    let t = task(name);
    let (e, f) = ext(&t);
    load_dataset(
        &t,
        fixture(&format!("demos/{name}_demos.{e}")),
        f,
        SplitName::Demos,
    )
    .unwrap()
    .examples
}

/// Demonstrations shown in the chain-of-thought tables.
pub fn cot_demo_examples(name: &str) -> Vec<Example> {
    let t = task(name);
    match name {
        "qk" => demos("qk").into_iter().take(4).collect(),
        _ => {
            let (e, f) = ext(&t);
            load_dataset(
                &t,
                fixture(&format!("demos/{name}_cot_demos.{e}")),
                f,
                SplitName::Demos,
            )
            .unwrap()
            .examples
        }
    }
}

pub fn query(name: &str) -> Example {
    let t = task(name);
    let (e, f) = ext(&t);
    let split: DatasetSplit = load_dataset(
        &t,
        fixture(&format!("queries/{name}.{e}")),
        f,
        SplitName::Test,
    )
    .unwrap();
    split.examples.into_iter().next().unwrap()
}

#[derive(Debug, Deserialize)]
pub struct OutputTable {
    pub gold: String,
    pub outputs: Vec<String>,
}

#[derive(Debug, Deserialize)]
pub struct CotText {
    pub text: String,
    pub gold: String,
}

#[derive(Debug, Deserialize)]
pub struct SampleOutputs {
    pub explanation_outputs: std::collections::BTreeMap<String, OutputTable>,
    pub cot_explanations: std::collections::BTreeMap<String, Vec<CotText>>,
}

pub fn samples() -> SampleOutputs {
    serde_json::from_str(&std::fs::read_to_string(fixture("sample_outputs.json")).unwrap()).unwrap()
}

#[derive(Debug, Deserialize)]
pub struct CorpusItem {
    pub source: String,
    pub task: String,
    pub text: String,
    pub expected: Option<String>,
}

pub fn completions() -> Vec<CorpusItem> {
    serde_json::from_str(&std::fs::read_to_string(fixture("completions.json")).unwrap()).unwrap()
}

/// CoT demonstrations rebuilt from the transcribed explanations with the
/// default assembly (no strip, trailer appended).
pub fn cot_demos(name: &str) -> Vec<CotDemonstration> {
    let t = task(name);
    let texts = &samples().cot_explanations[name];
    let examples = cot_demo_examples(name);
    assert_eq!(examples.len(), texts.len());
    examples
        .iter()
        .zip(texts)
        .map(|(ex, ct)| {
            assert_eq!(ex.gold.as_deref(), Some(ct.gold.as_str()), "demo {}", ex.id);
            let rec = ExplanationRecord::new(&ex.id, 0, &ct.text, true, &t.lexicon());
            build_cot_demonstration(&t, ex, &rec, false, true).unwrap()
        })
        .collect()
}

pub fn pipeline(rel: &str) -> PathBuf {
    fixture("pipeline").join(rel)
}

/// Closed-world gateway over a recorded fixture store.
pub fn replay(dir: &str) -> annokit::Gateway {
    let backend =
        annokit::gateway::ReplayBackend::load(pipeline(&format!("{dir}/replay.jsonl"))).unwrap();
    annokit::Gateway::new(std::sync::Arc::new(backend))
}

pub fn split(dir: &str, file: &str, name: &str) -> DatasetSplit {
    let t = task(name);
    load_dataset(
        &t,
        pipeline(&format!("{dir}/{file}")),
        t.default_format(),
        SplitName::Dev,
    )
    .unwrap()
}

pub fn store(dir: &str, file: &str) -> annokit::ExplanationStore {
    annokit::ExplanationStore::load(pipeline(&format!("{dir}/{file}"))).unwrap()
}
