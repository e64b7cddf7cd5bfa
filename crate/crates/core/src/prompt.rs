//! Prompt rendering for the four prompt families.
//!
//! Templates live in TOML assets. A template has a header, a block layout
//! with `{{field:Name}}` placeholders, and an answer label. Rendering joins
//! the header and blocks with single blank lines and leaves the final block's
//! answer slot empty (`Answer:`).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::explain::CotDemonstration;
use crate::task::{Example, TaskId, TaskSpec};

pub const DEFAULT_MAX_WORDS: usize = 100;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("example `{id}` does not match the {task} schema: {detail}")]
    SchemaMismatch {
        id: String,
        task: TaskId,
        detail: String,
    },
    #[error("demonstration `{0}` has no gold label")]
    MissingGold(String),
    #[error("at least one demonstration is required")]
    NoDemos,
    #[error("label `{0}` is not in the task lexicon")]
    UnknownLabel(String),
    #[error("template {family}/{variant} is not defined for task {task}")]
    VariantUnavailable {
        task: TaskId,
        family: Family,
        variant: Variant,
    },
    #[error("template placeholder `{{{{{0}}}}}` cannot be filled")]
    Placeholder(String),
    #[error("unterminated placeholder in template")]
    Unterminated,
    #[error("failed to parse template set: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    ZeroShot,
    FewShot,
    Explanation,
    Cot,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::ZeroShot => "zero_shot",
            Family::FewShot => "few_shot",
            Family::Explanation => "explanation",
            Family::Cot => "cot",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "zero_shot" => Ok(Family::ZeroShot),
            "few_shot" => Ok(Family::FewShot),
            "explanation" => Ok(Family::Explanation),
            "cot" => Ok(Family::Cot),
            other => Err(format!("unknown prompt family `{other}`")),
        }
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    #[default]
    Base,
    P1,
    P2,
    P3,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Base, Variant::P1, Variant::P2, Variant::P3];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::P1 => "p1",
            Variant::P2 => "p2",
            Variant::P3 => "p3",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "base" => Ok(Variant::Base),
            "p1" => Ok(Variant::P1),
            "p2" => Ok(Variant::P2),
            "p3" => Ok(Variant::P3),
            other => Err(format!("unknown prompt variant `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
struct BlockSection {
    header: String,
    block: String,
    answer_label: String,
    #[serde(default)]
    display: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
struct ExplanationSection {
    body: String,
    guided: String,
    unguided: String,
    #[serde(default)]
    display: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
struct TemplateFile {
    zero_shot: BTreeMap<Variant, BlockSection>,
    few_shot: BTreeMap<Variant, BlockSection>,
    cot: BTreeMap<Variant, BlockSection>,
    explanation: ExplanationSection,
}

/// One resolved template: header, block layout, answer label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub family: Family,
    pub task_id: TaskId,
    pub variant: Variant,
    pub header: String,
    pub block: String,
    /// Field names in the order the block shows them.
    pub block_layout: Vec<String>,
    pub answer_label: String,
    /// How gold labels are written inside this template.
    pub display: BTreeMap<String, String>,
}

impl PromptTemplate {
    pub fn display_label<'a>(&'a self, label: &'a str) -> &'a str {
        self.display.get(label).map(String::as_str).unwrap_or(label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplanationTemplate {
    pub body: String,
    pub guided: String,
    pub unguided: String,
    pub display: BTreeMap<String, String>,
}

/// All templates for one task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    task_id: TaskId,
    blocks: BTreeMap<(Family, Variant), PromptTemplate>,
    explanation: ExplanationTemplate,
}

const QK_TEMPLATES: &str = include_str!("../assets/templates/qk.toml");
const WIC_TEMPLATES: &str = include_str!("../assets/templates/wic.toml");
const BOOLQ_TEMPLATES: &str = include_str!("../assets/templates/boolq.toml");

impl TemplateSet {
    pub fn builtin(id: &TaskId) -> Option<TemplateSet> {
        let src = match id {
            TaskId::Qk => QK_TEMPLATES,
            TaskId::Wic => WIC_TEMPLATES,
            TaskId::BoolQ => BOOLQ_TEMPLATES,
            TaskId::Custom(_) => return None,
        };
        Some(TemplateSet::from_toml(id.clone(), src).expect("bundled templates are valid"))
    }

    pub fn from_toml(task_id: TaskId, src: &str) -> Result<TemplateSet, PromptError> {
        let file: TemplateFile =
            toml::from_str(src).map_err(|e| PromptError::Parse(e.to_string()))?;
        let mut blocks = BTreeMap::new();
        for (family, sections) in [
            (Family::ZeroShot, file.zero_shot),
            (Family::FewShot, file.few_shot),
            (Family::Cot, file.cot),
        ] {
            if !sections.contains_key(&Variant::Base) {
                return Err(PromptError::Parse(format!("{family} has no base template")));
            }
            for (variant, s) in sections {
                let block_layout = placeholders(&s.block)?
                    .into_iter()
                    .filter_map(|p| p.strip_prefix("field:").map(str::to_string))
                    .collect();
                blocks.insert(
                    (family, variant),
                    PromptTemplate {
                        family,
                        task_id: task_id.clone(),
                        variant,
                        header: s.header,
                        block: s.block,
                        block_layout,
                        answer_label: s.answer_label,
                        display: s.display,
                    },
                );
            }
        }
        let e = file.explanation;
        Ok(TemplateSet {
            task_id,
            blocks,
            explanation: ExplanationTemplate {
                body: e.body,
                guided: e.guided,
                unguided: e.unguided,
                display: e.display,
            },
        })
    }

    pub fn get(&self, family: Family, variant: Variant) -> Result<&PromptTemplate, PromptError> {
        self.blocks
            .get(&(family, variant))
            .ok_or_else(|| PromptError::VariantUnavailable {
                task: self.task_id.clone(),
                family,
                variant,
            })
    }

    pub fn explanation(&self) -> &ExplanationTemplate {
        &self.explanation
    }

    pub fn variants(&self, family: Family) -> Vec<Variant> {
        self.blocks
            .keys()
            .filter(|(f, _)| *f == family)
            .map(|(_, v)| *v)
            .collect()
    }
}

/// A prompt ready to send.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub digest: String,
    pub family: Family,
    pub variant: Variant,
    pub demo_ids: Vec<String>,
}

impl RenderedPrompt {
    fn new(
        text: String,
        family: Family,
        variant: Variant,
        demo_ids: Vec<String>,
    ) -> RenderedPrompt {
        RenderedPrompt {
            digest: prompt_digest(&text),
            text,
            family,
            variant,
            demo_ids,
        }
    }
}

/// sha256 hex digest of a prompt text.
pub fn prompt_digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Lists placeholder names in order of appearance.
fn placeholders(template: &str) -> Result<Vec<&str>, PromptError> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or(PromptError::Unterminated)?;
        out.push(after[..end].trim());
        rest = &after[end + 2..];
    }
    Ok(out)
}

struct Context<'a> {
    task: &'a TaskSpec,
    example: Option<&'a Example>,
    gold: Option<&'a str>,
    max_words: Option<usize>,
}

/// Single-pass substitution; substituted values are never rescanned.
fn fill(template: &str, ctx: &Context<'_>) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len() * 2);
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or(PromptError::Unterminated)?;
        let name = after[..end].trim();
        let missing = || PromptError::Placeholder(name.to_string());
        match name {
            "description" => out.push_str(&ctx.task.description),
            "definitions" => out.push_str(&ctx.task.definition_lines()),
            "gold" => out.push_str(ctx.gold.ok_or_else(missing)?),
            "max_words" => out.push_str(&ctx.max_words.ok_or_else(missing)?.to_string()),
            _ => {
                let field = name.strip_prefix("field:").ok_or_else(missing)?;
                let value = ctx
                    .example
                    .and_then(|e| e.field(field))
                    .ok_or_else(missing)?;
                out.push_str(value);
            }
        }
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

fn trim_lines(text: &str) -> String {
    text.lines()
        .map(str::trim_end)
        .collect::<Vec<_>>()
        .join("\n")
}

/// Renders prompts for one task.
#[derive(Debug, Clone)]
pub struct PromptForge {
    task: TaskSpec,
    templates: TemplateSet,
}

impl PromptForge {
    pub fn new(task: TaskSpec, templates: TemplateSet) -> PromptForge {
        PromptForge { task, templates }
    }

    /// Forge for a built-in task with its bundled templates.
    pub fn builtin(task: TaskSpec) -> Option<PromptForge> {
        let templates = TemplateSet::builtin(&task.id)?;
        Some(PromptForge::new(task, templates))
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    fn check_schema(&self, x: &Example) -> Result<(), PromptError> {
        if x.matches_schema(&self.task) {
            return Ok(());
        }
        let missing: Vec<&str> = self
            .task
            .field_schema
            .iter()
            .filter(|f| !x.fields.contains_key(*f))
            .map(String::as_str)
            .collect();
        let detail = if missing.is_empty() {
            "unexpected extra fields".to_string()
        } else {
            format!("missing {}", missing.join(", "))
        };
        Err(PromptError::SchemaMismatch {
            id: x.id.clone(),
            task: self.task.id.clone(),
            detail,
        })
    }

    fn block(
        &self,
        t: &PromptTemplate,
        x: &Example,
        answer: Option<&str>,
    ) -> Result<String, PromptError> {
        self.check_schema(x)?;
        let ctx = Context {
            task: &self.task,
            example: Some(x),
            gold: None,
            max_words: None,
        };
        let body = fill(&t.block, &ctx)?;
        let answer_line = match answer {
            Some(a) => format!("{}: {}", t.answer_label, a),
            None => format!("{}:", t.answer_label),
        };
        Ok(format!("{body}\n{answer_line}"))
    }

    fn assemble(&self, t: &PromptTemplate, blocks: Vec<String>) -> Result<String, PromptError> {
        let ctx = Context {
            task: &self.task,
            example: None,
            gold: None,
            max_words: None,
        };
        let mut parts = vec![fill(&t.header, &ctx)?];
        parts.extend(blocks);
        Ok(trim_lines(&parts.join("\n\n")))
    }

    pub fn zero_shot(&self, x: &Example, variant: Variant) -> Result<RenderedPrompt, PromptError> {
        let t = self.templates.get(Family::ZeroShot, variant)?;
        let text = self.assemble(t, vec![self.block(t, x, None)?])?;
        Ok(RenderedPrompt::new(
            text,
            Family::ZeroShot,
            variant,
            Vec::new(),
        ))
    }

    pub fn few_shot(
        &self,
        demos: &[Example],
        x: &Example,
        variant: Variant,
    ) -> Result<RenderedPrompt, PromptError> {
        if demos.is_empty() {
            return Err(PromptError::NoDemos);
        }
        let t = self.templates.get(Family::FewShot, variant)?;
        let mut blocks = Vec::with_capacity(demos.len() + 1);
        for d in demos {
            let gold = d
                .gold
                .as_deref()
                .ok_or_else(|| PromptError::MissingGold(d.id.clone()))?;
            let gold = self
                .task
                .canonical_label(gold)
                .ok_or_else(|| PromptError::UnknownLabel(gold.to_string()))?;
            blocks.push(self.block(t, d, Some(t.display_label(gold)))?);
        }
        blocks.push(self.block(t, x, None)?);
        let text = self.assemble(t, blocks)?;
        let ids = demos.iter().map(|d| d.id.clone()).collect();
        Ok(RenderedPrompt::new(text, Family::FewShot, variant, ids))
    }

    pub fn explanation(
        &self,
        x: &Example,
        gold: Option<&str>,
        max_words: usize,
    ) -> Result<RenderedPrompt, PromptError> {
        self.check_schema(x)?;
        let t = &self.templates.explanation;
        let shown = match gold {
            Some(g) => {
                let canon = self
                    .task
                    .canonical_label(g)
                    .ok_or_else(|| PromptError::UnknownLabel(g.to_string()))?;
                Some(t.display.get(canon).map(String::as_str).unwrap_or(canon))
            }
            None => None,
        };
        let ctx = Context {
            task: &self.task,
            example: Some(x),
            gold: shown,
            max_words: Some(max_words),
        };
        let request = if shown.is_some() {
            &t.guided
        } else {
            &t.unguided
        };
        let text = trim_lines(&format!(
            "{}\n{}",
            fill(&t.body, &ctx)?,
            fill(request, &ctx)?
        ));
        Ok(RenderedPrompt::new(
            text,
            Family::Explanation,
            Variant::Base,
            Vec::new(),
        ))
    }

    pub fn cot(
        &self,
        demos: &[CotDemonstration],
        x: &Example,
        variant: Variant,
    ) -> Result<RenderedPrompt, PromptError> {
        if demos.is_empty() {
            return Err(PromptError::NoDemos);
        }
        let t = self.templates.get(Family::Cot, variant)?;
        let mut blocks = Vec::with_capacity(demos.len() + 1);
        for d in demos {
            blocks.push(self.block(t, &d.example, Some(&d.answer_text))?);
        }
        blocks.push(self.block(t, x, None)?);
        let text = self.assemble(t, blocks)?;
        let ids = demos.iter().map(|d| d.example.id.clone()).collect();
        Ok(RenderedPrompt::new(text, Family::Cot, variant, ids))
    }
}
