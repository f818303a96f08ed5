//! Zero-shot infilling: splice transferred entities and the target topic
//! into the source text.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::saqa::EntityMap;
use crate::text::find_occurrences;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplacementOrigin {
    Entity,
    Topic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    /// Byte span in the source text.
    pub start: usize,
    pub end: usize,
    pub replacement: String,
    pub origin: ReplacementOrigin,
    /// The entity key or topic string this span matched.
    pub matched: String,
}

/// Non-overlapping replacements sorted by position.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfillPlan {
    pub replacements: Vec<Replacement>,
}

impl InfillPlan {
    pub fn is_empty(&self) -> bool {
        self.replacements.is_empty()
    }

    pub fn len(&self) -> usize {
        self.replacements.len()
    }

    pub fn validate(&self, source_text: &str) -> Result<()> {
        let mut last_end = 0;
        for r in &self.replacements {
            if r.start < last_end || r.start > r.end {
                return Err(Error::InvalidPlan(format!(
                    "span [{}, {}) overlaps or is out of order",
                    r.start, r.end
                )));
            }
            if source_text.get(r.start..r.end).is_none() {
                return Err(Error::InvalidPlan(format!(
                    "span [{}, {}) is not a valid range of the source text",
                    r.start, r.end
                )));
            }
            last_end = r.end;
        }
        Ok(())
    }
}

/// Plans replacements for an entity map plus the topic swap. Returns the
/// plan and a warning for every entity key absent from the source text.
pub fn plan_infill(
    source_text: &str,
    entity_map: &EntityMap,
    source_topic: &str,
    target_topic: &str,
) -> (InfillPlan, Vec<String>) {
    plan_replacements(source_text, &entity_map.replacements(), source_topic, target_topic)
}

/// Conflict policy among overlapping matches: the longer match wins; on
/// equal length an entity beats the topic; otherwise the leftmost wins.
///
/// A key mapped to itself keeps the matched bytes as they are, whatever
/// their case, so identity maps leave the text unchanged.
pub fn plan_replacements(
    source_text: &str,
    entities: &[(String, String)],
    source_topic: &str,
    target_topic: &str,
) -> (InfillPlan, Vec<String>) {
    let mut warnings = Vec::new();
    let mut candidates = Vec::new();
    for (key, answer) in entities {
        match find_occurrences(source_text, key) {
            Ok(occ) if !occ.is_empty() => {
                candidates.extend(occ.into_iter().map(|(start, end)| Replacement {
                    start,
                    end,
                    replacement: if answer == key {
                        source_text[start..end].to_string()
                    } else {
                        answer.clone()
                    },
                    origin: ReplacementOrigin::Entity,
                    matched: key.clone(),
                }))
            }
            _ => warnings.push(format!("entity {key:?} does not occur in the source text")),
        }
    }
    if let Ok(occ) = find_occurrences(source_text, source_topic) {
        candidates.extend(occ.into_iter().map(|(start, end)| Replacement {
            start,
            end,
            replacement: if source_topic == target_topic {
                source_text[start..end].to_string()
            } else {
                target_topic.to_string()
            },
            origin: ReplacementOrigin::Topic,
            matched: source_topic.to_string(),
        }));
    }

    candidates.sort_by(|a, b| {
        (b.end - b.start)
            .cmp(&(a.end - a.start))
            .then(a.origin.cmp(&b.origin))
            .then(a.start.cmp(&b.start))
            .then_with(|| a.matched.cmp(&b.matched))
    });
    let mut accepted: Vec<Replacement> = Vec::new();
    for c in candidates {
        if accepted.iter().all(|a| c.end <= a.start || c.start >= a.end) {
            accepted.push(c);
        }
    }
    accepted.sort_by_key(|r| r.start);
    (
        InfillPlan {
            replacements: accepted,
        },
        warnings,
    )
}

/// Splices the plan into the source, right to left. Bytes outside every
/// span are preserved.
pub fn apply_infill(source_text: &str, plan: &InfillPlan) -> Result<String> {
    plan.validate(source_text)?;
    let mut out = source_text.to_string();
    for r in plan.replacements.iter().rev() {
        out.replace_range(r.start..r.end, &r.replacement);
    }
    Ok(out)
}
