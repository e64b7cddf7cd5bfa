//! Built-in classification tasks, label lexicons, and dataset loading.
//!
//! Three tasks ship with the crate (query/keyword relevance, word-in-context,
//! yes/no question answering). Custom tasks are described by the same TOML
//! schema the built-ins use.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("invalid task definition: {0}")]
    Invalid(String),
    #[error("failed to parse task definition: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown built-in task `{0}`")]
    Unknown(String),
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: missing required field `{field}`")]
    MissingField { line: usize, field: String },
    #[error("line {line}: gold label `{label}` is not in the task lexicon")]
    UnknownLabel { line: usize, label: String },
    #[error("duplicate example id `{0}`")]
    DuplicateId(String),
    #[error("format {format} does not match task {task}")]
    FormatMismatch { task: TaskId, format: DataFormat },
    #[error("invalid target span ({start}, {end}) for sentence {sentence:?}: {reason}")]
    BadSpan {
        sentence: String,
        start: usize,
        end: usize,
        reason: &'static str,
    },
    #[error("example `{id}` cannot be written as {format}: {reason}")]
    Unwritable {
        id: String,
        format: DataFormat,
        reason: String,
    },
}

/// Identifier of a task. Built-in ids drive template and loader selection.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskId {
    Qk,
    Wic,
    #[serde(rename = "boolq")]
    BoolQ,
    #[serde(untagged)]
    Custom(String),
}

impl TaskId {
    pub fn as_str(&self) -> &str {
        match self {
            TaskId::Qk => "qk",
            TaskId::Wic => "wic",
            TaskId::BoolQ => "boolq",
            TaskId::Custom(name) => name,
        }
    }

    pub fn parse(name: &str) -> TaskId {
        match name.to_ascii_lowercase().as_str() {
            "qk" => TaskId::Qk,
            "wic" => TaskId::Wic,
            "boolq" => TaskId::BoolQ,
            _ => TaskId::Custom(name.to_string()),
        }
    }

    pub fn is_builtin(&self) -> bool {
        !matches!(self, TaskId::Custom(_))
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One category of a task: canonical label, its definition, and any
/// alternative surface forms a model may use for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub label: String,
    pub definition: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: TaskId,
    pub description: String,
    pub categories: Vec<Category>,
    pub field_schema: Vec<String>,
    /// Label of the answer slot in chain-of-thought blocks.
    pub answer_field_label: String,
    /// Noun used in the closing label sentence ("relevance", "answer").
    pub answer_word: String,
}

const QK_TOML: &str = include_str!("../assets/tasks/qk.toml");
const WIC_TOML: &str = include_str!("../assets/tasks/wic.toml");
const BOOLQ_TOML: &str = include_str!("../assets/tasks/boolq.toml");

impl TaskSpec {
    pub fn builtin(id: &TaskId) -> Result<TaskSpec, TaskError> {
        let src = match id {
            TaskId::Qk => QK_TOML,
            TaskId::Wic => WIC_TOML,
            TaskId::BoolQ => BOOLQ_TOML,
            TaskId::Custom(name) => return Err(TaskError::Unknown(name.clone())),
        };
        TaskSpec::from_toml(src)
    }

    pub fn qk() -> TaskSpec {
        TaskSpec::builtin(&TaskId::Qk).expect("bundled QK task is valid")
    }

    pub fn wic() -> TaskSpec {
        TaskSpec::builtin(&TaskId::Wic).expect("bundled WiC task is valid")
    }

    pub fn boolq() -> TaskSpec {
        TaskSpec::builtin(&TaskId::BoolQ).expect("bundled BoolQ task is valid")
    }

    pub fn from_toml(src: &str) -> Result<TaskSpec, TaskError> {
        let spec: TaskSpec = toml::from_str(src)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        if self.categories.len() < 2 {
            return Err(TaskError::Invalid(format!(
                "task {} needs at least two categories",
                self.id
            )));
        }
        Lexicon::from_categories(&self.categories)
            .map_err(|e| TaskError::Invalid(e.to_string()))?;
        let mut seen = HashSet::new();
        for field in &self.field_schema {
            if field.trim().is_empty() {
                return Err(TaskError::Invalid("empty field name in schema".into()));
            }
            if !seen.insert(field.as_str()) {
                return Err(TaskError::Invalid(format!("duplicate field `{field}`")));
            }
        }
        if self.field_schema.is_empty() {
            return Err(TaskError::Invalid("field schema is empty".into()));
        }
        Ok(())
    }

    pub fn lexicon(&self) -> Lexicon {
        Lexicon::from_categories(&self.categories).expect("validated at construction")
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|c| c.label.as_str())
    }

    /// Canonical label for `label`, matching labels and aliases case-insensitively.
    pub fn canonical_label(&self, label: &str) -> Option<&str> {
        self.categories
            .iter()
            .find(|c| {
                c.label.eq_ignore_ascii_case(label)
                    || c.aliases.iter().any(|a| a.eq_ignore_ascii_case(label))
            })
            .map(|c| c.label.as_str())
    }

    /// Category definition lines as they appear in prompt headers.
    pub fn definition_lines(&self) -> String {
        self.categories
            .iter()
            .map(|c| format!("\"{}\": {}", c.label, c.definition))
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Closing sentence appended to chain-of-thought answers.
    pub fn label_trailer(&self, gold: &str) -> String {
        format!("Therefore, the {} is \"{}\".", self.answer_word, gold)
    }

    pub fn default_format(&self) -> DataFormat {
        match self.id {
            TaskId::Wic | TaskId::BoolQ => DataFormat::Jsonl,
            _ => DataFormat::Tsv,
        }
    }
}

/// Surface form of a label together with the canonical label it denotes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceForm {
    pub form: String,
    pub label: String,
}

/// Closed set of category labels with their alternative surface forms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    labels: Vec<String>,
    forms: Vec<SurfaceForm>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LexiconError {
    #[error("lexicon is empty")]
    Empty,
    #[error("label form `{0}` collides with another label after case-folding")]
    Collision(String),
    #[error("empty label")]
    EmptyLabel,
}

impl Lexicon {
    pub fn new<I, S>(labels: I) -> Result<Lexicon, LexiconError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let cats: Vec<Category> = labels
            .into_iter()
            .map(|l| Category {
                label: l.into(),
                definition: String::new(),
                aliases: Vec::new(),
            })
            .collect();
        Lexicon::from_categories(&cats)
    }

    pub fn from_categories(categories: &[Category]) -> Result<Lexicon, LexiconError> {
        if categories.is_empty() {
            return Err(LexiconError::Empty);
        }
        let mut seen = HashSet::new();
        let mut forms = Vec::new();
        for cat in categories {
            for form in std::iter::once(&cat.label).chain(cat.aliases.iter()) {
                if form.trim().is_empty() {
                    return Err(LexiconError::EmptyLabel);
                }
                if !seen.insert(form.to_lowercase()) {
                    return Err(LexiconError::Collision(form.clone()));
                }
                forms.push(SurfaceForm {
                    form: form.clone(),
                    label: cat.label.clone(),
                });
            }
        }
        Ok(Lexicon {
            labels: categories.iter().map(|c| c.label.clone()).collect(),
            forms,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn forms(&self) -> &[SurfaceForm] {
        &self.forms
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    pub fn canonical(&self, text: &str) -> Option<&str> {
        let folded = text.to_lowercase();
        self.forms
            .iter()
            .find(|f| f.form.to_lowercase() == folded)
            .map(|f| f.label.as_str())
    }

    pub fn forms_of<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.forms
            .iter()
            .filter(move |f| f.label == label)
            .map(|f| f.form.as_str())
    }

    pub fn is_binary(&self) -> bool {
        self.labels.len() == 2
    }
}

/// One data instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub fields: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
    /// Byte spans of the target word in the unquoted source sentences (WiC).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub char_spans: Option<BTreeMap<String, (usize, usize)>>,
}

impl Example {
    pub fn new<I, K, V>(id: impl Into<String>, fields: I) -> Example
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        Example {
            id: id.into(),
            fields: fields
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
            gold: None,
            char_spans: None,
        }
    }

    pub fn with_gold(mut self, gold: impl Into<String>) -> Example {
        self.gold = Some(gold.into());
        self
    }

    pub fn field(&self, name: &str) -> Option<&str> {
        self.fields.get(name).map(String::as_str)
    }

    /// True when `fields` covers exactly the task's schema.
    pub fn matches_schema(&self, task: &TaskSpec) -> bool {
        self.fields.len() == task.field_schema.len()
            && task
                .field_schema
                .iter()
                .all(|f| self.fields.contains_key(f))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Dev,
    Test,
    Demos,
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitName::Dev => "dev",
            SplitName::Test => "test",
            SplitName::Demos => "demos",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub name: SplitName,
    pub examples: Vec<Example>,
}

impl DatasetSplit {
    pub fn new(name: SplitName, examples: Vec<Example>) -> Result<DatasetSplit, DatasetError> {
        let mut seen = HashSet::new();
        for ex in &examples {
            if !seen.insert(ex.id.as_str()) {
                return Err(DatasetError::DuplicateId(ex.id.clone()));
            }
        }
        Ok(DatasetSplit { name, examples })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn golds(&self) -> Vec<Option<&str>> {
        self.examples.iter().map(|e| e.gold.as_deref()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Jsonl,
    Tsv,
}

impl fmt::Display for DataFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataFormat::Jsonl => "jsonl",
            DataFormat::Tsv => "tsv",
        })
    }
}

pub fn load_dataset(
    task: &TaskSpec,
    path: impl AsRef<Path>,
    format: DataFormat,
    name: SplitName,
) -> Result<DatasetSplit, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let split = parse_dataset(task, &text, format, name)?;
    log::info!("loaded {} examples from {}", split.len(), path.display());
    Ok(split)
}

pub fn parse_dataset(
    task: &TaskSpec,
    text: &str,
    format: DataFormat,
    name: SplitName,
) -> Result<DatasetSplit, DatasetError> {
    let examples = match (&task.id, format) {
        (TaskId::BoolQ, DataFormat::Jsonl) => parse_jsonl(task, text, boolq_row)?,
        (TaskId::Wic, DataFormat::Jsonl) => parse_jsonl(task, text, wic_row)?,
        (TaskId::Qk | TaskId::Custom(_), DataFormat::Tsv) => parse_tsv(task, text)?,
        (id, format) => {
            return Err(DatasetError::FormatMismatch {
                task: id.clone(),
                format,
            })
        }
    };
    DatasetSplit::new(name, examples)
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn parse_tsv(task: &TaskSpec, text: &str) -> Result<Vec<Example>, DatasetError> {
    let width = task.field_schema.len();
    let mut out = Vec::new();
    for (row, (line_no, line)) in content_lines(text).enumerate() {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < width {
            return Err(DatasetError::MissingField {
                line: line_no,
                field: task.field_schema[cols.len()].clone(),
            });
        }
        if cols.len() > width + 1 {
            return Err(DatasetError::Malformed {
                line: line_no,
                message: format!(
                    "expected {} or {} columns, found {}",
                    width,
                    width + 1,
                    cols.len()
                ),
            });
        }
        let mut example = Example::new(
            row.to_string(),
            task.field_schema
                .iter()
                .cloned()
                .zip(cols.iter().map(|c| c.to_string())),
        );
        if let Some(raw) = cols.get(width) {
            example.gold = Some(checked_gold(task, raw, line_no)?);
        }
        out.push(example);
    }
    Ok(out)
}

fn checked_gold(task: &TaskSpec, raw: &str, line: usize) -> Result<String, DatasetError> {
    let lexicon = task.lexicon();
    if lexicon.contains(raw) {
        return Ok(raw.to_string());
    }
    // WiC stores canonical lowercase labels; tolerate other casings.
    match lexicon
        .labels()
        .iter()
        .find(|l| l.eq_ignore_ascii_case(raw))
    {
        Some(l) if task.id == TaskId::Wic => Ok(l.clone()),
        _ => Err(DatasetError::UnknownLabel {
            line,
            label: raw.to_string(),
        }),
    }
}

type RowParser =
    fn(&TaskSpec, &serde_json::Map<String, Value>, usize, usize) -> Result<Example, DatasetError>;

fn parse_jsonl(task: &TaskSpec, text: &str, row: RowParser) -> Result<Vec<Example>, DatasetError> {
    let mut out = Vec::new();
    for (idx, (line_no, line)) in content_lines(text).enumerate() {
        let value: Value = serde_json::from_str(line).map_err(|e| DatasetError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        let Value::Object(obj) = value else {
            return Err(DatasetError::Malformed {
                line: line_no,
                message: "expected a JSON object".into(),
            });
        };
        out.push(row(task, &obj, line_no, idx)?);
    }
    Ok(out)
}

fn str_field<'a>(
    obj: &'a serde_json::Map<String, Value>,
    key: &str,
    line: usize,
) -> Result<&'a str, DatasetError> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(DatasetError::Malformed {
            line,
            message: format!("field `{key}` must be a string"),
        }),
        None => Err(DatasetError::MissingField {
            line,
            field: key.into(),
        }),
    }
}

fn usize_field(
    obj: &serde_json::Map<String, Value>,
    key: &str,
    line: usize,
) -> Result<usize, DatasetError> {
    match obj.get(key) {
        Some(v) => v
            .as_u64()
            .map(|n| n as usize)
            .ok_or_else(|| DatasetError::Malformed {
                line,
                message: format!("field `{key}` must be a non-negative integer"),
            }),
        None => Err(DatasetError::MissingField {
            line,
            field: key.into(),
        }),
    }
}

fn example_id(obj: &serde_json::Map<String, Value>, idx: usize) -> String {
    match obj.get("idx") {
        Some(Value::Number(n)) => n.to_string(),
        Some(Value::String(s)) => s.clone(),
        _ => idx.to_string(),
    }
}

/// Maps a JSON label (boolean or string) onto the lexicon.
fn json_gold(
    task: &TaskSpec,
    obj: &serde_json::Map<String, Value>,
    line: usize,
    when_true: &str,
    when_false: &str,
) -> Result<Option<String>, DatasetError> {
    match obj.get("label") {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Bool(true)) => Ok(Some(when_true.to_string())),
        Some(Value::Bool(false)) => Ok(Some(when_false.to_string())),
        Some(Value::String(s)) => task
            .canonical_label(s)
            .map(|l| Some(l.to_string()))
            .ok_or_else(|| DatasetError::UnknownLabel {
                line,
                label: s.clone(),
            }),
        Some(other) => Err(DatasetError::UnknownLabel {
            line,
            label: other.to_string(),
        }),
    }
}

fn boolq_row(
    task: &TaskSpec,
    obj: &serde_json::Map<String, Value>,
    line: usize,
    idx: usize,
) -> Result<Example, DatasetError> {
    let question = str_field(obj, "question", line)?;
    let passage = str_field(obj, "passage", line)?;
    let mut ex = Example::new(
        example_id(obj, idx),
        [("Passage", passage), ("Question", question)],
    );
    ex.gold = json_gold(task, obj, line, "Yes", "No")?;
    Ok(ex)
}

fn wic_row(
    task: &TaskSpec,
    obj: &serde_json::Map<String, Value>,
    line: usize,
    idx: usize,
) -> Result<Example, DatasetError> {
    let word = str_field(obj, "word", line)?;
    let s1 = str_field(obj, "sentence1", line)?;
    let s2 = str_field(obj, "sentence2", line)?;
    let span1 = (
        usize_field(obj, "start1", line)?,
        usize_field(obj, "end1", line)?,
    );
    let span2 = (
        usize_field(obj, "start2", line)?,
        usize_field(obj, "end2", line)?,
    );
    let quoted = |s: &str, span| {
        quote_target_word(s, span).map_err(|e| DatasetError::Malformed {
            line,
            message: e.to_string(),
        })
    };
    let mut ex = Example::new(
        example_id(obj, idx),
        [
            ("w", word.to_string()),
            ("s1", quoted(s1, span1)?),
            ("s2", quoted(s2, span2)?),
        ],
    );
    ex.char_spans = Some(BTreeMap::from([
        ("s1".to_string(), span1),
        ("s2".to_string(), span2),
    ]));
    ex.gold = json_gold(task, obj, line, "true", "false")?;
    Ok(ex)
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '-'
}

/// Wraps the token at `span` in double quotes, leaving every other byte intact.
pub fn quote_target_word(sentence: &str, span: (usize, usize)) -> Result<String, DatasetError> {
    let (start, end) = span;
    let bad = |reason| DatasetError::BadSpan {
        sentence: sentence.to_string(),
        start,
        end,
        reason,
    };
    if start >= end {
        return Err(bad("span is empty"));
    }
    if end > sentence.len() {
        return Err(bad("span is out of range"));
    }
    if !sentence.is_char_boundary(start) || !sentence.is_char_boundary(end) {
        return Err(bad("span splits a character"));
    }
    let token = &sentence[start..end];
    if token.chars().any(char::is_whitespace) {
        return Err(bad("span covers more than one token"));
    }
    let before = sentence[..start].chars().next_back();
    let after = sentence[end..].chars().next();
    if before.is_some_and(is_word_char) || after.is_some_and(is_word_char) {
        return Err(bad("span splits a token"));
    }
    Ok(format!(
        "{}\"{}\"{}",
        &sentence[..start],
        token,
        &sentence[end..]
    ))
}

fn unquote_target_word(quoted: &str, span: (usize, usize)) -> Option<String> {
    let (start, end) = span;
    let bytes = quoted.as_bytes();
    if bytes.get(start) != Some(&b'"') || bytes.get(end + 1) != Some(&b'"') {
        return None;
    }
    Some(format!(
        "{}{}{}",
        &quoted[..start],
        &quoted[start + 1..end + 1],
        &quoted[end + 2..]
    ))
}

/// Serializes a split back into its source format.
pub fn write_dataset(
    task: &TaskSpec,
    split: &DatasetSplit,
    format: DataFormat,
) -> Result<String, DatasetError> {
    let mut out = String::new();
    for ex in &split.examples {
        let unwritable = |reason: String| DatasetError::Unwritable {
            id: ex.id.clone(),
            format,
            reason,
        };
        match (&task.id, format) {
            (TaskId::Qk | TaskId::Custom(_), DataFormat::Tsv) => {
                let mut cols = Vec::new();
                for f in &task.field_schema {
                    let v = ex
                        .field(f)
                        .ok_or_else(|| unwritable(format!("missing field {f}")))?;
                    if v.contains(['\t', '\n', '\r']) {
                        return Err(unwritable(format!("field {f} contains a tab or newline")));
                    }
                    cols.push(v);
                }
                if let Some(g) = &ex.gold {
                    cols.push(g);
                }
                out.push_str(&cols.join("\t"));
            }
            (TaskId::BoolQ, DataFormat::Jsonl) => {
                let mut obj = serde_json::Map::new();
                obj.insert("idx".into(), id_value(&ex.id));
                obj.insert(
                    "question".into(),
                    Value::from(ex.field("Question").unwrap_or_default()),
                );
                obj.insert(
                    "passage".into(),
                    Value::from(ex.field("Passage").unwrap_or_default()),
                );
                if let Some(g) = &ex.gold {
                    obj.insert("label".into(), Value::Bool(g == "Yes"));
                }
                out.push_str(&Value::Object(obj).to_string());
            }
            (TaskId::Wic, DataFormat::Jsonl) => {
                let spans = ex
                    .char_spans
                    .as_ref()
                    .ok_or_else(|| unwritable("missing target spans".into()))?;
                let mut obj = serde_json::Map::new();
                obj.insert("idx".into(), id_value(&ex.id));
                obj.insert(
                    "word".into(),
                    Value::from(ex.field("w").unwrap_or_default()),
                );
                for (n, key) in [(1, "s1"), (2, "s2")] {
                    let span = *spans
                        .get(key)
                        .ok_or_else(|| unwritable(format!("missing span {key}")))?;
                    let quoted = ex.field(key).unwrap_or_default();
                    let plain = unquote_target_word(quoted, span)
                        .ok_or_else(|| unwritable(format!("{key} is not quoted at its span")))?;
                    obj.insert(format!("sentence{n}"), Value::from(plain));
                    obj.insert(format!("start{n}"), Value::from(span.0));
                    obj.insert(format!("end{n}"), Value::from(span.1));
                }
                if let Some(g) = &ex.gold {
                    obj.insert("label".into(), Value::Bool(g == "true"));
                }
                out.push_str(&Value::Object(obj).to_string());
            }
            (id, format) => {
                return Err(DatasetError::FormatMismatch {
                    task: id.clone(),
                    format,
                })
            }
        }
        out.push('\n');
    }
    Ok(out)
}

fn id_value(id: &str) -> Value {
    id.parse::<u64>()
        .map(Value::from)
        .unwrap_or_else(|_| Value::from(id))
}
