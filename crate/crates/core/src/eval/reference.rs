//! Published reference accuracies, attached to reports for comparison only.

use serde::{Deserialize, Serialize};

use super::{EvalError, MethodTag};
use crate::prompt::Variant;
use crate::task::{SplitName, TaskId};

const BUNDLED: &str = include_str!("../../assets/reference_baselines.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    pub task: String,
    pub method: String,
    pub shots: Option<usize>,
    pub split: SplitName,
    /// Accuracy in percent.
    pub value: f64,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation_row: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBaselines {
    pub description: String,
    pub entries: Vec<ReferenceEntry>,
}

/// A published value shown next to a measured one. Never a pass/fail gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    /// Accuracy in percent.
    pub value: f64,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub gating: bool,
}

impl ReferenceBaselines {
    pub fn bundled() -> ReferenceBaselines {
        ReferenceBaselines::from_json(BUNDLED).expect("bundled baselines are valid")
    }

    pub fn from_json(text: &str) -> Result<ReferenceBaselines, EvalError> {
        serde_json::from_str(text).map_err(|e| EvalError::Baselines(e.to_string()))
    }

    pub fn lookup(&self, task: &TaskId, method: &MethodTag, split: SplitName) -> Option<Reference> {
        let (name, shots, row) = match method {
            MethodTag::Crowd => ("crowd", None, None),
            MethodTag::ZeroShot {
                variant: Variant::Base,
            } => ("zero_shot", Some(0), None),
            MethodTag::FewShot {
                shots,
                variant: Variant::Base,
            } => ("few_shot", Some(*shots), None),
            MethodTag::Cot {
                ablation_row: Some(row),
                shots,
                variant: Variant::Base,
                ..
            } => ("ablation", Some(*shots), Some(*row)),
            MethodTag::Cot {
                shots,
                variant: Variant::Base,
                ..
            } => ("cot", Some(*shots), None),
            _ => return None,
        };
        self.entries
            .iter()
            .find(|e| {
                e.task == task.as_str()
                    && e.method == name
                    && e.split == split
                    && e.ablation_row == row
                    && (name == "crowd" || e.shots == shots)
            })
            .map(|e| Reference {
                value: e.value,
                source: e.source.clone(),
                note: e.note.clone(),
                gating: false,
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::AssemblyFlags;

    fn cot(shots: usize, row: Option<u8>) -> MethodTag {
        MethodTag::Cot {
            shots,
            variant: Variant::Base,
            flags: AssemblyFlags::DEFAULT,
            ablation_row: row,
            explanation_set: None,
        }
    }

    #[test]
    fn finds_published_values() {
        let b = ReferenceBaselines::bundled();
        assert_eq!(
            b.lookup(&TaskId::Qk, &cot(4, None), SplitName::Dev)
                .unwrap()
                .value,
            74.17
        );
        assert_eq!(
            b.lookup(&TaskId::Qk, &cot(4, Some(5)), SplitName::Test)
                .unwrap()
                .value,
            73.2
        );
        assert_eq!(
            b.lookup(&TaskId::BoolQ, &cot(8, None), SplitName::Test)
                .unwrap()
                .value,
            89.2
        );
        assert_eq!(
            b.lookup(&TaskId::Wic, &MethodTag::Crowd, SplitName::Dev)
                .unwrap()
                .value,
            80.0
        );
        assert!(b
            .lookup(&TaskId::Qk, &cot(3, None), SplitName::Dev)
            .is_none());
        let p1 = MethodTag::FewShot {
            shots: 8,
            variant: Variant::P1,
        };
        assert!(b.lookup(&TaskId::BoolQ, &p1, SplitName::Dev).is_none());
        assert!(
            !b.lookup(&TaskId::Qk, &MethodTag::Crowd, SplitName::Test)
                .unwrap()
                .gating
        );
    }
}
