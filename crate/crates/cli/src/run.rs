//! Command execution.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use annokit::annotate::{
    annotate_split, load_results, results_to_jsonl, AnnotateError, AnnotateSettings, PromptPlan,
};
use annokit::eval::{
    consistency_experiment, render_table, run_ablation, split_by_sample, stability_experiment,
    AblationInputs, AblationRow, CrowdSimulator, EvalError, EvalReport, Experiment, MethodTag,
    ReferenceBaselines, Score, TableRow,
};
use annokit::explain::{
    assemble_sets, generate_explanations, ExplainError, ExplanationStore, SamplingSettings,
};
use annokit::gateway::{
    Backend, FixtureStore, Gateway, GatewayError, LiveBackend, MockBackend, MockScript,
    ReplayBackend, RetryPolicy,
};
use annokit::prompt::{Family, PromptForge, TemplateSet, Variant};
use annokit::task::{load_dataset, DatasetSplit, Example, SplitName, TaskId, TaskSpec};
use annokit::{AnnotationResult, CotDemonstration};

use crate::config::{Mode, RunConfig};
use crate::{CliError, Command, Stage};

/// What a finished command leaves behind.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub run_dir: PathBuf,
    /// Human-readable summary, also saved as `report.txt`.
    pub report: String,
}

pub fn execute(command: &Command) -> Result<Outcome, CliError> {
    let (common, stages, rows, out) = match command {
        Command::Explain(c) => (c, vec![Stage::Explain], vec![], None),
        Command::Annotate(c) => (c, vec![Stage::Annotate], vec![], None),
        Command::Eval(c) => (c, vec![Stage::Eval], vec![], None),
        Command::Ablate { common, rows } => (common, vec![Stage::Ablate], rows.clone(), None),
        Command::Consistency(c) => (c, vec![Stage::Consistency], vec![], None),
        Command::Stability(c) => (c, vec![Stage::Stability], vec![], None),
        Command::RecordFixtures {
            common,
            out,
            stages,
        } => (common, stages.clone(), vec![], Some(out.clone())),
    };
    let cfg = common.resolve()?;
    if out.is_some() && cfg.backend.replay.is_some() {
        return Err(CliError::Input(
            "record-fixtures needs a mock or live backend, not replay".into(),
        ));
    }
    let ctx = Context::new(cfg, out.is_some())?;
    let name = match command {
        Command::RecordFixtures { .. } => "record-fixtures",
        _ => stage_name(stages[0]),
    };
    let run_dir = create_run_dir(&ctx.cfg.output_dir, name)?;
    write_file(&run_dir.join("config.json"), &to_pretty(&ctx.cfg))?;
    let mut report = String::new();
    for stage in stages {
        let text = match stage {
            Stage::Explain => ctx.explain(&run_dir)?,
            Stage::Annotate => ctx.annotate(&run_dir)?,
            Stage::Eval => ctx.eval(&run_dir)?,
            Stage::Ablate => ctx.ablate(&run_dir, &rows)?,
            Stage::Consistency => ctx.consistency(&run_dir)?,
            Stage::Stability => ctx.stability(&run_dir)?,
        };
        report.push_str(&text);
    }
    if let Some(out) = out {
        let recorded = ctx.gateway.recorder().expect("recording gateway");
        let target = FixtureStore::load(&out).map_err(input)?;
        let mut added = 0;
        for entry in recorded.entries() {
            if target.insert(entry).map_err(input)? {
                added += 1;
            }
        }
        target.write_to(&out).map_err(input)?;
        let _ = writeln!(
            report,
            "recorded {added} new fixtures ({} total) in {}",
            target.len(),
            out.display()
        );
    }
    write_file(&run_dir.join("report.txt"), &report)?;
    Ok(Outcome { run_dir, report })
}

fn stage_name(stage: Stage) -> &'static str {
    match stage {
        Stage::Explain => "explain",
        Stage::Annotate => "annotate",
        Stage::Eval => "eval",
        Stage::Ablate => "ablate",
        Stage::Consistency => "consistency",
        Stage::Stability => "stability",
    }
}

/// Creates `<output_dir>/<timestamp>-<name>`, adding a counter if it exists.
fn create_run_dir(output_dir: &Path, name: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(output_dir)
        .map_err(|e| CliError::Input(format!("{}: {e}", output_dir.display())))?;
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
    for n in 0.. {
        let leaf = if n == 0 {
            format!("{stamp}-{name}")
        } else {
            format!("{stamp}-{name}-{n}")
        };
        let dir = output_dir.join(leaf);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(CliError::Input(format!("{}: {e}", dir.display()))),
        }
    }
    unreachable!()
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn to_pretty<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn from_eval(e: EvalError) -> CliError {
    if e.is_gateway() {
        CliError::Gateway(e.to_string())
    } else {
        CliError::Input(e.to_string())
    }
}

fn from_explain(e: ExplainError) -> CliError {
    match e {
        ExplainError::Gateway { .. } => CliError::Gateway(e.to_string()),
        other => CliError::Input(other.to_string()),
    }
}

fn from_annotate(e: AnnotateError) -> CliError {
    match e {
        AnnotateError::Gateway { .. } => CliError::Gateway(e.to_string()),
        other => CliError::Input(other.to_string()),
    }
}

struct Context {
    cfg: RunConfig,
    forge: PromptForge,
    gateway: Gateway,
    baselines: ReferenceBaselines,
}

impl Context {
    fn new(cfg: RunConfig, record: bool) -> Result<Context, CliError> {
        let forge = load_forge(&cfg)?;
        let gateway = build_gateway(&cfg, record)?;
        Ok(Context {
            cfg,
            forge,
            gateway,
            baselines: ReferenceBaselines::bundled(),
        })
    }

    fn task(&self) -> &TaskSpec {
        self.forge.task()
    }

    fn load(
        &self,
        path: Option<&PathBuf>,
        what: &str,
        name: SplitName,
    ) -> Result<DatasetSplit, CliError> {
        let path = path
            .ok_or_else(|| CliError::Input(format!("no {what} file configured (data.{what})")))?;
        let format = self
            .cfg
            .data
            .format
            .unwrap_or_else(|| self.task().default_format());
        load_dataset(self.task(), path, format, name).map_err(input)
    }

    fn split(&self) -> Result<DatasetSplit, CliError> {
        let split = self.load(
            self.cfg.data.split.as_ref(),
            "split",
            self.cfg.data.split_name,
        )?;
        if split.is_empty() {
            return Err(CliError::Input("split is empty".into()));
        }
        Ok(split)
    }

    fn labeled_split(&self) -> Result<DatasetSplit, CliError> {
        let split = self.split()?;
        if let Some(e) = split.examples.iter().find(|e| e.gold.is_none()) {
            return Err(CliError::Input(format!(
                "example `{}` has no gold label; scoring needs a labeled split",
                e.id
            )));
        }
        Ok(split)
    }

    /// Loaded demos, truncated to `shots`. Every demo must carry a gold label.
    fn demos_from(&self, path: Option<&PathBuf>, what: &str) -> Result<Vec<Example>, CliError> {
        let split = self.load(path, what, SplitName::Demos)?;
        let mut demos = split.examples;
        if let Some(n) = self.cfg.shots {
            if n > demos.len() {
                return Err(CliError::Input(format!(
                    "shots = {n} but only {} demos are available",
                    demos.len()
                )));
            }
            demos.truncate(n);
        }
        if let Some(d) = demos.iter().find(|d| d.gold.is_none()) {
            return Err(CliError::Input(format!(
                "demo `{}` has no gold label",
                d.id
            )));
        }
        Ok(demos)
    }

    fn demos(&self) -> Result<Vec<Example>, CliError> {
        self.demos_from(self.cfg.data.demos.as_ref(), "demos")
    }

    fn cot_demos(&self) -> Result<Vec<Example>, CliError> {
        match &self.cfg.data.cot_demos {
            Some(p) => self.demos_from(Some(p), "cot_demos"),
            None => self.demos(),
        }
    }

    fn store(&self, path: Option<&PathBuf>, what: &str) -> Result<ExplanationStore, CliError> {
        let path = path.ok_or_else(|| {
            CliError::Input(format!(
                "no {what} explanation store configured; run `annokit explain` first"
            ))
        })?;
        ExplanationStore::load(path).map_err(input)
    }

    fn annotate_settings(&self) -> AnnotateSettings {
        AnnotateSettings {
            model: self.cfg.model.clone(),
            temperature: self.cfg.annotation_temperature,
            max_tokens: self.cfg.max_tokens,
            retry_on_unparsed: self.cfg.retry_on_unparsed,
            max_in_flight: self.cfg.max_in_flight,
        }
    }

    fn experiment<'a>(
        &'a self,
        split: &'a DatasetSplit,
        settings: &'a AnnotateSettings,
    ) -> Experiment<'a> {
        Experiment {
            gateway: &self.gateway,
            forge: &self.forge,
            split,
            settings,
            baselines: Some(&self.baselines),
        }
    }

    /// One CoT demonstration set assembled with the configured flags.
    fn cot_set(&self) -> Result<Vec<CotDemonstration>, CliError> {
        let demos = self.cot_demos()?;
        let which = if self.cfg.ablation.with_gold {
            "label-guided"
        } else {
            "label-free"
        };
        let store = self.store(self.cfg.explanation_store(), which)?;
        let mut sets = assemble_sets(
            self.task(),
            &demos,
            &store,
            self.cfg.ablation,
            1,
            Some(self.cfg.seed),
        )
        .map_err(from_explain)?;
        let set = sets.remove(0);
        for id in &set.degraded {
            log::warn!("demo {id}: fewer gold-agreeing explanations than requested");
        }
        Ok(set.demos)
    }

    fn plan(&self) -> Result<(PromptPlan, MethodTag), CliError> {
        let variant = self.cfg.variant;
        Ok(match self.cfg.mode {
            Mode::ZeroShot => (
                PromptPlan::ZeroShot { variant },
                MethodTag::ZeroShot { variant },
            ),
            Mode::FewShot => {
                let demos = self.demos()?;
                let shots = demos.len();
                (
                    PromptPlan::FewShot { demos, variant },
                    MethodTag::FewShot { shots, variant },
                )
            }
            Mode::Cot => {
                let demos = self.cot_set()?;
                let method = MethodTag::Cot {
                    shots: demos.len(),
                    variant,
                    flags: self.cfg.ablation,
                    ablation_row: None,
                    explanation_set: None,
                };
                (PromptPlan::Cot { demos, variant }, method)
            }
        })
    }

    fn explain(&self, run_dir: &Path) -> Result<String, CliError> {
        let demos = self.cot_demos()?;
        let settings = SamplingSettings {
            model: self.cfg.model.clone(),
            temperature: self.cfg.explanation_temperature,
            max_tokens: self.cfg.max_tokens,
            max_words: self.cfg.max_words,
            max_in_flight: self.cfg.max_in_flight,
        };
        let with_gold = self.cfg.ablation.with_gold;
        let mut records = Vec::new();
        let mut report = String::new();
        for demo in &demos {
            let recs = generate_explanations(
                &self.gateway,
                &self.forge,
                demo,
                self.cfg.k,
                with_gold,
                &settings,
            )
            .map_err(from_explain)?;
            let gold = demo.gold.as_deref().unwrap_or_default();
            let agree = recs.iter().filter(|r| r.agrees_with(gold)).count();
            let _ = writeln!(
                report,
                "demo {}: {agree}/{} explanations reveal gold \"{gold}\"",
                demo.id,
                recs.len()
            );
            records.extend(recs);
        }
        let store = ExplanationStore::new(records);
        let name = if with_gold {
            "explanations.jsonl"
        } else {
            "unguided_explanations.jsonl"
        };
        store.save(run_dir.join(name)).map_err(input)?;
        let _ = writeln!(
            report,
            "wrote {} {} explanations to {name}",
            store.records.len(),
            if with_gold {
                "label-guided"
            } else {
                "label-free"
            }
        );
        Ok(report)
    }

    fn annotate(&self, run_dir: &Path) -> Result<String, CliError> {
        let split = self.split()?;
        let (plan, method) = self.plan()?;
        let settings = self.annotate_settings();
        let outcomes = annotate_split(&self.gateway, &self.forge, &plan, &split, &settings)
            .map_err(from_annotate)?;
        let mut ok = Vec::new();
        let mut failures = Vec::new();
        for r in outcomes {
            match r {
                Ok(a) => ok.push(a),
                Err(e) => failures.push(e),
            }
        }
        write_file(&run_dir.join("results.jsonl"), &results_to_jsonl(&ok))?;
        let unparsed = ok.iter().filter(|r| !r.is_parsed()).count();
        let mut report = format!(
            "{method}: annotated {} examples, {unparsed} unparsed\n",
            ok.len()
        );
        if !failures.is_empty() {
            let msgs: Vec<String> = failures.iter().map(|e| e.to_string()).collect();
            write_file(&run_dir.join("errors.txt"), &(msgs.join("\n") + "\n"))?;
            return Err(CliError::Gateway(format!(
                "{} of {} examples failed (see {}): {}",
                failures.len(),
                split.len(),
                run_dir.join("errors.txt").display(),
                msgs[0]
            )));
        }
        report.push_str("wrote results.jsonl\n");
        Ok(report)
    }

    fn eval(&self, run_dir: &Path) -> Result<String, CliError> {
        let split = self.labeled_split()?;
        let mut reports = Vec::new();
        if let Some(path) = &self.cfg.data.results {
            let saved = load_results(path).map_err(input)?;
            let report = self.score_saved(&split, &saved)?;
            reports.push(report);
        } else {
            let settings = self.annotate_settings();
            let (plan, method) = self.plan()?;
            let (report, results) = self
                .experiment(&split, &settings)
                .evaluate(&plan, method)
                .map_err(from_eval)?;
            write_file(&run_dir.join("results.jsonl"), &results_to_jsonl(&results))?;
            reports.push(report);
        }
        if let Some(p) = self.cfg.crowd_p {
            reports.push(self.crowd(&split, p)?);
        }
        write_file(&run_dir.join("eval.json"), &to_pretty(&reports))?;
        let rows: Vec<TableRow> = reports.iter().map(TableRow::from).collect();
        Ok(render_table(&rows))
    }

    fn score_saved(
        &self,
        split: &DatasetSplit,
        saved: &[AnnotationResult],
    ) -> Result<EvalReport, CliError> {
        let by_id: BTreeMap<&str, &AnnotationResult> =
            saved.iter().map(|r| (r.example_id.as_str(), r)).collect();
        let mut results = Vec::with_capacity(split.len());
        let mut golds = Vec::with_capacity(split.len());
        for e in &split.examples {
            let r = by_id.get(e.id.as_str()).ok_or_else(|| {
                CliError::Input(format!(
                    "saved results have no entry for example `{}`",
                    e.id
                ))
            })?;
            results.push((*r).clone());
            golds.push(e.gold.clone().expect("labeled split"));
        }
        let task = self.task();
        let method = self.saved_method();
        annokit::eval::accuracy(
            &task.id,
            &task.lexicon(),
            split.name,
            method,
            &results,
            &golds,
        )
        .map(|r| r.with_reference(Some(&self.baselines)))
        .map_err(from_eval)
    }

    /// Method tag for saved results, taken from the configuration.
    fn saved_method(&self) -> MethodTag {
        let variant = self.cfg.variant;
        let shots = self.cfg.shots.unwrap_or(0);
        match self.cfg.mode {
            Mode::ZeroShot => MethodTag::ZeroShot { variant },
            Mode::FewShot => MethodTag::FewShot { shots, variant },
            Mode::Cot => MethodTag::Cot {
                shots,
                variant,
                flags: self.cfg.ablation,
                ablation_row: None,
                explanation_set: None,
            },
        }
    }

    fn crowd(&self, split: &DatasetSplit, p: f64) -> Result<EvalReport, CliError> {
        let lex = self.task().lexicon();
        let mut sim = CrowdSimulator::new(p, self.cfg.seed).map_err(from_eval)?;
        let mut n_correct = 0;
        for e in &split.examples {
            let gold = e.gold.as_deref().expect("labeled split");
            let other = annokit::eval::other_label(&lex, gold).map_err(from_eval)?;
            if sim.trace(&e.id, gold, other).consensus == gold {
                n_correct += 1;
            }
        }
        let n = split.len();
        let score = Score {
            accuracy: n_correct as f64 / n as f64,
            n_examples: n,
            n_correct,
            n_unparsed: 0,
        };
        Ok(
            EvalReport::new(self.task().id.clone(), split.name, MethodTag::Crowd, score)
                .with_reference(Some(&self.baselines)),
        )
    }

    fn ablate(&self, run_dir: &Path, only: &[u8]) -> Result<String, CliError> {
        let split = self.labeled_split()?;
        let demos = self.cot_demos()?;
        let load = |p: Option<&PathBuf>| p.map(ExplanationStore::load).transpose().map_err(input);
        let inputs = AblationInputs {
            demos,
            guided: load(self.cfg.data.explanations.as_ref())?,
            unguided: load(self.cfg.data.unguided_explanations.as_ref())?,
            sets: self.cfg.sets,
            seed: Some(self.cfg.seed),
        };
        let rows: Vec<AblationRow> = AblationRow::standard(self.cfg.filter_keep)
            .into_iter()
            .filter(|r| only.is_empty() || only.contains(&r.row))
            .collect();
        let settings = self.annotate_settings();
        let outcomes =
            run_ablation(&self.experiment(&split, &settings), &inputs, &rows).map_err(from_eval)?;
        let mut table = Vec::new();
        let mut json = Vec::new();
        let mut notes = String::new();
        for o in &outcomes {
            table.push(TableRow::summary(
                o.method().to_string(),
                split.name.to_string(),
                o.spread,
                o.reference.clone(),
            ));
            let degraded = o.degraded();
            if !degraded.is_empty() {
                let _ = writeln!(
                    notes,
                    "row {}: filter kept incorrect explanations for demos {}",
                    o.row.row,
                    degraded.join(", ")
                );
            }
            json.push(serde_json::json!({
                "row": o.row,
                "spread": o.spread,
                "reference": o.reference,
                "degraded": degraded,
                "reports": o.reports,
            }));
        }
        write_file(&run_dir.join("ablation.json"), &to_pretty(&json))?;
        Ok(render_table(&table) + &notes)
    }

    fn consistency(&self, run_dir: &Path) -> Result<String, CliError> {
        let split = self.labeled_split()?;
        let demos = self.cot_demos()?;
        let stores = if self.cfg.data.explanation_sets.is_empty() {
            let which = if self.cfg.ablation.with_gold {
                "label-guided"
            } else {
                "label-free"
            };
            split_by_sample(
                &self.store(self.cfg.explanation_store(), which)?,
                self.cfg.sets,
            )
        } else {
            self.cfg
                .data
                .explanation_sets
                .iter()
                .map(|p| ExplanationStore::load(p).map_err(input))
                .collect::<Result<Vec<_>, _>>()?
        };
        let settings = self.annotate_settings();
        let outcome = consistency_experiment(
            &self.experiment(&split, &settings),
            &demos,
            &stores,
            self.cfg.ablation,
        )
        .map_err(from_eval)?;
        let mut rows: Vec<TableRow> = outcome.reports.iter().map(TableRow::from).collect();
        let flags = self.cfg.ablation;
        let label = MethodTag::Cot {
            shots: demos.len(),
            variant: Variant::Base,
            flags,
            ablation_row: None,
            explanation_set: None,
        };
        rows.push(TableRow::summary(
            label.to_string(),
            split.name.to_string(),
            outcome.spread,
            outcome.reference.clone(),
        ));
        write_file(
            &run_dir.join("consistency.json"),
            &to_pretty(&serde_json::json!({
                "spread": outcome.spread,
                "prompt_digests": outcome.prompt_digests,
                "reference": outcome.reference,
                "reports": outcome.reports,
            })),
        )?;
        let mut report = render_table(&rows);
        let _ = writeln!(
            report,
            "consistency over {} explanation sets: mean {:.2}% stddev {:.2}",
            outcome.spread.n,
            outcome.spread.mean * 100.0,
            outcome.spread.stddev * 100.0
        );
        Ok(report)
    }

    fn stability(&self, run_dir: &Path) -> Result<String, CliError> {
        if self.task().id != TaskId::BoolQ {
            return Err(from_eval(EvalError::VariantsUnavailable(
                self.task().id.clone(),
            )));
        }
        let split = self.labeled_split()?;
        let few = self.demos()?;
        let cot = self.cot_set()?;
        let settings = self.annotate_settings();
        let families = [Family::FewShot, Family::Cot];
        let matrix = stability_experiment(
            &self.experiment(&split, &settings),
            &few,
            &cot,
            &Variant::ALL,
            &families,
        )
        .map_err(from_eval)?;
        let mut rows: Vec<TableRow> = matrix
            .cells
            .iter()
            .map(|c| TableRow::from(&c.report))
            .collect();
        for (family, spread) in &matrix.summary {
            rows.push(TableRow::summary(
                format!("{family} over variants"),
                split.name.to_string(),
                *spread,
                None,
            ));
        }
        let cells: Vec<_> = matrix
            .cells
            .iter()
            .map(|c| serde_json::json!({ "family": c.family.as_str(), "variant": c.variant, "report": c.report }))
            .collect();
        let summary: Vec<_> = matrix
            .summary
            .iter()
            .map(|(f, s)| serde_json::json!({ "family": f.as_str(), "spread": s }))
            .collect();
        write_file(
            &run_dir.join("stability.json"),
            &to_pretty(&serde_json::json!({ "cells": cells, "summary": summary })),
        )?;
        Ok(render_table(&rows))
    }
}

fn load_forge(cfg: &RunConfig) -> Result<PromptForge, CliError> {
    let id = TaskId::parse(&cfg.task);
    let read = |p: &Option<PathBuf>, what: &str| -> Result<Option<String>, CliError> {
        p.as_ref()
            .map(|p| {
                fs::read_to_string(p)
                    .map_err(|e| CliError::Input(format!("{what} {}: {e}", p.display())))
            })
            .transpose()
    };
    let task = match read(&cfg.task_file, "task file")? {
        Some(src) => TaskSpec::from_toml(&src).map_err(input)?,
        None if id.is_builtin() => TaskSpec::builtin(&id).map_err(input)?,
        None => {
            return Err(CliError::Input(format!(
                "unknown task `{}`; custom tasks need task_file and templates_file",
                cfg.task
            )))
        }
    };
    let templates = match read(&cfg.templates_file, "templates file")? {
        Some(src) => TemplateSet::from_toml(task.id.clone(), &src).map_err(input)?,
        None => TemplateSet::builtin(&task.id).ok_or_else(|| {
            CliError::Input(format!(
                "task `{}` has no bundled templates; set templates_file",
                task.id
            ))
        })?,
    };
    Ok(PromptForge::new(task, templates))
}

fn build_gateway(cfg: &RunConfig, record: bool) -> Result<Gateway, CliError> {
    let backend: Arc<dyn Backend> = if let Some(live) = &cfg.backend.live {
        let key = std::env::var(&live.api_key_env).ok();
        if key.is_none() {
            log::warn!(
                "{} is not set; sending requests without an API key",
                live.api_key_env
            );
        }
        Arc::new(LiveBackend::new(
            &live.base_url,
            key,
            Duration::from_secs(live.timeout_secs),
        ))
    } else if let Some(path) = &cfg.backend.replay {
        if !path.exists() {
            return Err(CliError::Input(format!(
                "replay store {} does not exist",
                path.display()
            )));
        }
        Arc::new(ReplayBackend::load(path).map_err(input)?)
    } else if let Some(path) = &cfg.backend.mock {
        Arc::new(MockBackend::new(MockScript::load(path).map_err(input)?))
    } else {
        return Err(CliError::Input("no backend configured".into()));
    };
    let mut builder = Gateway::builder(backend)
        .retry(RetryPolicy {
            max_attempts: cfg.max_attempts,
            ..RetryPolicy::default()
        })
        .rate_limit(cfg.rate_limit_per_minute)
        .max_in_flight(cfg.max_in_flight);
    if let Some(path) = &cfg.cache {
        builder = builder.cache(FixtureStore::open_append(path).map_err(input)?);
    }
    if record {
        builder = builder.recorder(FixtureStore::in_memory());
    }
    builder.build().map_err(|e: GatewayError| input(e))
}
