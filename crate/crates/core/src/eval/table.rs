//! Plain-text report tables.

use super::{EvalReport, Reference, Spread};

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub method: String,
    pub split: String,
    pub accuracy: f64,
    pub n: Option<usize>,
    pub unparsed: Option<usize>,
    pub reference: Option<Reference>,
}

impl TableRow {
    pub fn summary(
        label: impl Into<String>,
        split: impl Into<String>,
        spread: Spread,
        reference: Option<Reference>,
    ) -> TableRow {
        TableRow {
            method: format!(
                "{} (mean of {}, sd {:.2})",
                label.into(),
                spread.n,
                spread.stddev * 100.0
            ),
            split: split.into(),
            accuracy: spread.mean,
            n: None,
            unparsed: None,
            reference,
        }
    }
}

impl From<&EvalReport> for TableRow {
    fn from(r: &EvalReport) -> TableRow {
        TableRow {
            method: r.method.to_string(),
            split: r.split.to_string(),
            accuracy: r.accuracy,
            n: Some(r.n_examples),
            unparsed: Some(r.n_unparsed),
            reference: r.reference.clone(),
        }
    }
}

fn reference_cell(r: &Option<Reference>) -> String {
    match r {
        Some(r) => format!("{:.2} ({}, reference only)", r.value, r.source),
        None => "-".into(),
    }
}

/// Left-aligned text table with a header rule. Accuracy is in percent.
pub fn render_table(rows: &[TableRow]) -> String {
    let header = ["method", "split", "acc%", "n", "unparsed", "reference"];
    let body: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            [
                r.method.clone(),
                r.split.clone(),
                format!("{:.2}", r.accuracy * 100.0),
                r.n.map_or("-".into(), |n| n.to_string()),
                r.unparsed.map_or("-".into(), |n| n.to_string()),
                reference_cell(&r.reference),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = vec![line(&header.map(String::from))];
    out.push(
        widths
            .iter()
            .map(|w| "-".repeat(*w))
            .collect::<Vec<_>>()
            .join("  "),
    );
    out.extend(body.iter().map(|r| line(r)));
    out.join("\n") + "\n"
}
