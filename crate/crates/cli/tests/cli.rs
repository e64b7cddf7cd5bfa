use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn pipeline(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures/pipeline")
        .join(rel)
}

fn demos(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures/demos")
        .join(name)
}

fn annokit(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_annokit"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_dirs(out: &Path) -> Vec<PathBuf> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    dirs.sort();
    dirs
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn explain_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = pipeline("qk/config.json");
    for _ in 0..2 {
        let o = annokit(tmp.path(), &["explain", "-c", s(&cfg)]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(
            stdout(&o).contains("demo 0: 5/5 explanations reveal gold \"Bad\""),
            "{}",
            stdout(&o)
        );
    }
    let dirs = run_dirs(tmp.path());
    assert_eq!(dirs.len(), 2, "reruns get their own directory");
    let a = fs::read_to_string(dirs[0].join("explanations.jsonl")).unwrap();
    let b = fs::read_to_string(dirs[1].join("explanations.jsonl")).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 20);
    assert_eq!(
        a,
        fs::read_to_string(pipeline("qk/explanations.jsonl")).unwrap()
    );
}

#[test]
fn demo_without_gold_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("demos.tsv");
    fs::write(&bad, "google data studio sharepoint\tsharepoint migration tool file share\tBad\nmotorhomes sale\trv sale used class c\n").unwrap();
    let out = tmp.path().join("runs");
    let o = annokit(
        &out,
        &[
            "explain",
            "-c",
            s(&pipeline("qk/config.json")),
            "--demos",
            s(&bad),
            "--shots",
            "2",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no gold label"), "{}", stderr(&o));
}

#[test]
fn cot_without_store_is_actionable() {
    let tmp = tempfile::tempdir().unwrap();
    let o = annokit(
        tmp.path(),
        &[
            "annotate",
            "--task",
            "qk",
            "--split",
            s(&pipeline("qk/mini.tsv")),
            "--demos",
            s(&demos("qk_demos.tsv")),
            "--mock",
            s(&pipeline("qk/mock.json")),
            "--mode",
            "cot",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("annokit explain"), "{}", stderr(&o));
}

#[test]
fn zero_shot_with_mock() {
    let tmp = tempfile::tempdir().unwrap();
    let rows: Vec<String> = fs::read_to_string(pipeline("qk/mini.tsv"))
        .unwrap()
        .lines()
        .take(10)
        .map(String::from)
        .collect();
    let split = tmp.path().join("ten.tsv");
    fs::write(&split, rows.join("\n") + "\n").unwrap();
    let out = tmp.path().join("runs");
    let o = annokit(
        &out,
        &[
            "annotate",
            "--task",
            "qk",
            "--split",
            s(&split),
            "--mock",
            s(&pipeline("qk/mock.json")),
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(
        stdout(&o).contains("annotated 10 examples, 0 unparsed"),
        "{}",
        stdout(&o)
    );
    let results = fs::read_to_string(run_dirs(&out)[0].join("results.jsonl")).unwrap();
    assert_eq!(results.lines().count(), 10);
}

#[test]
fn replay_labels_match_golds() {
    let tmp = tempfile::tempdir().unwrap();
    let o = annokit(
        tmp.path(),
        &["annotate", "-c", s(&pipeline("qk/config.json"))],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let results = fs::read_to_string(run_dirs(tmp.path())[0].join("results.jsonl")).unwrap();
    let golds: Vec<String> = fs::read_to_string(pipeline("qk/mini.tsv"))
        .unwrap()
        .lines()
        .map(|l| l.rsplit('\t').next().unwrap().to_string())
        .collect();
    let labels: Vec<String> = results
        .lines()
        .map(|l| {
            serde_json::from_str::<serde_json::Value>(l).unwrap()["label"]
                .as_str()
                .unwrap()
                .to_string()
        })
        .collect();
    assert_eq!(labels, golds);
}

#[test]
fn eval_reports_reference_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = pipeline("qk/config.json");
    for _ in 0..2 {
        let o = annokit(tmp.path(), &["eval", "-c", s(&cfg), "--crowd-p", "0.8"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let text = stdout(&o);
        assert!(text.contains("100.00"), "{text}");
        assert!(text.contains("74.17 (Table 3, reference only)"), "{text}");
        assert!(text.contains("65.58 (Table 3, reference only)"), "{text}");
    }
    let dirs = run_dirs(tmp.path());
    for f in ["results.jsonl", "eval.json", "report.txt"] {
        assert_eq!(
            fs::read(dirs[0].join(f)).unwrap(),
            fs::read(dirs[1].join(f)).unwrap(),
            "{f}"
        );
    }
    // Scoring saved results gives the same figure without any completions.
    let saved = dirs[0].join("results.jsonl");
    let empty = tmp.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let o = annokit(
        &tmp.path().join("again"),
        &[
            "eval",
            "-c",
            s(&cfg),
            "--results",
            s(&saved),
            "--replay",
            s(&empty),
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("100.00"));
}

#[test]
fn ablate_prints_five_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let o = annokit(
        tmp.path(),
        &["ablate", "-c", s(&pipeline("qk/config.json"))],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for row in 1..=5 {
        assert_eq!(text.matches(&format!(" row{row} ")).count(), 1, "{text}");
    }
    assert!(text.contains("74.17 (Table 4, reference only)"), "{text}");
    assert!(
        text.contains("row 5: filter kept incorrect explanations for demos 3"),
        "{text}"
    );
    let json: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(run_dirs(tmp.path())[0].join("ablation.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(json.as_array().unwrap().len(), 5);
}

#[test]
fn ablate_without_unguided_store_names_the_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(pipeline("qk/config.json")).unwrap()).unwrap();
    let mut cfg = cfg;
    let data = cfg["data"].as_object_mut().unwrap();
    data.remove("unguided_explanations");
    for key in ["demos", "split", "explanations"] {
        let rel = data[key].as_str().unwrap().to_string();
        data.insert(
            key.into(),
            pipeline(&format!("qk/{rel}")).to_str().unwrap().into(),
        );
    }
    cfg["backend"]["replay"] = pipeline("qk/replay.jsonl").to_str().unwrap().into();
    let path = tmp.path().join("config.json");
    fs::write(&path, cfg.to_string()).unwrap();
    let o = annokit(&tmp.path().join("runs"), &["ablate", "-c", s(&path)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("ablation row 4: no label-free explanation store"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn consistency_prints_spread() {
    let tmp = tempfile::tempdir().unwrap();
    let o = annokit(
        tmp.path(),
        &["consistency", "-c", s(&pipeline("qk/config.json"))],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(
        stdout(&o).contains("consistency over 5 explanation sets: mean 100.00% stddev 0.00"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn stability_on_boolq_and_wic() {
    let tmp = tempfile::tempdir().unwrap();
    let o = annokit(
        tmp.path(),
        &["stability", "-c", s(&pipeline("boolq/config.json"))],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("few_shot(8)/p3"), "{}", stdout(&o));
    let o = annokit(
        tmp.path(),
        &[
            "stability",
            "--task",
            "wic",
            "--mock",
            s(&pipeline("qk/mock.json")),
            "--split",
            s(&demos("wic_demos.jsonl")),
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("only defined for the boolq task"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn replay_miss_exits_with_gateway_code() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let o = annokit(
        &tmp.path().join("runs"),
        &[
            "annotate",
            "--task",
            "qk",
            "--split",
            s(&pipeline("qk/mini.tsv")),
            "--replay",
            s(&empty),
        ],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(
        stderr(&o).contains("no recorded completion"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn config_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("c.json");
    fs::write(
        &path,
        r#"{"task": "qk", "backend": {"mock": "m.json", "replay": "r.jsonl"}}"#,
    )
    .unwrap();
    let o = annokit(tmp.path(), &["annotate", "-c", s(&path)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("exactly one backend"), "{}", stderr(&o));

    let o = annokit(tmp.path(), &["annotate"]);
    assert_eq!(o.status.code(), Some(1));

    let o = annokit(
        tmp.path(),
        &[
            "record-fixtures",
            "-c",
            s(&pipeline("qk/config.json")),
            "--out",
            s(&tmp.path().join("f.jsonl")),
            "--run",
            "eval",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("mock or live"), "{}", stderr(&o));
}

#[test]
fn record_fixtures_then_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let store = tmp.path().join("fixtures.jsonl");
    let cfg = pipeline("qk/config.json");
    let mock = pipeline("qk/mock.json");
    let args = [
        "record-fixtures",
        "-c",
        s(&cfg),
        "--mock",
        s(&mock),
        "--mode",
        "zero_shot",
        "--out",
        s(&store),
        "--run",
        "eval",
    ];
    let o = annokit(&tmp.path().join("a"), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(
        stdout(&o).contains("recorded 12 new fixtures (12 total)"),
        "{}",
        stdout(&o)
    );
    let first = fs::read(&store).unwrap();
    let o = annokit(&tmp.path().join("b"), &args);
    assert!(
        stdout(&o).contains("recorded 0 new fixtures (12 total)"),
        "{}",
        stdout(&o)
    );
    assert_eq!(fs::read(&store).unwrap(), first);
    let o = annokit(
        &tmp.path().join("c"),
        &[
            "eval",
            "-c",
            s(&cfg),
            "--mode",
            "zero_shot",
            "--replay",
            s(&store),
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("zero_shot"));
}
