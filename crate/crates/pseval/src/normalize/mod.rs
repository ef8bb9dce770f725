//! Converts platform-native output into unified-schema person records.
//!
//! Two parser kinds cover every platform we have seen: `structured` payloads
//! (JSON with a per-platform field mapping) and `markdown_report` free text
//! (heuristic extraction, see [`markdown`]). After conversion, records are
//! deduplicated by normalized name + company, keeping the most complete
//! profile per identity.

pub mod markdown;

pub use markdown::parse_markdown_report;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{PersonRecord, SCHEMA_FIELDS};

/// Honorific tokens stripped from name edges before comparison.
pub const HONORIFICS: [&str; 9] = ["dr", "prof", "professor", "mr", "mrs", "ms", "phd", "md", "eng"];

/// Errors raised while ingesting platform output.
#[derive(Debug, Error)]
pub enum NormalizeError {
    #[error("payload is not parseable at byte {offset} (line {line}, column {column}): {message}")]
    Unparseable { offset: usize, line: usize, column: usize, message: String },
    #[error("payload holds no entity list (expected a top-level array or a list under one of {expected:?})")]
    NoEntityList { expected: Vec<&'static str> },
    #[error("mapping for {platform_id:?} targets unknown schema field {target:?}")]
    UnknownTarget { platform_id: String, target: String },
}

/// How one platform's raw output should be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParserKind {
    Structured,
    MarkdownReport,
}

/// Per-platform rules for reading native output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMapping {
    pub platform_id: String,
    pub parser_kind: ParserKind,
    /// Native field path (dot-separated) → unified schema field name.
    #[serde(default)]
    pub map: HashMap<String, String>,
}

impl FieldMapping {
    /// Rejects mappings that target anything outside the unified schema.
    pub fn validate(&self) -> Result<(), NormalizeError> {
        for target in self.map.values() {
            if !SCHEMA_FIELDS.contains(&target.as_str()) {
                return Err(NormalizeError::UnknownTarget {
                    platform_id: self.platform_id.clone(),
                    target: target.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Identity key for deduplication.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DedupKey {
    pub normalized_name: String,
    /// Empty when the record has no company.
    pub normalized_company: String,
}

impl DedupKey {
    pub fn for_record(record: &PersonRecord) -> DedupKey {
        DedupKey {
            normalized_name: normalize_name(&record.name),
            normalized_company: record
                .company
                .as_deref()
                .map(collapse_lowercase)
                .unwrap_or_default(),
        }
    }
}

/// Output of a structured-payload conversion, including what was dropped.
#[derive(Debug, Clone, Default)]
pub struct NormalizeOutcome {
    pub records: Vec<PersonRecord>,
    /// One short message per skipped entity.
    pub skipped: Vec<String>,
}

/// Lowercases and collapses internal whitespace.
fn collapse_lowercase(raw: &str) -> String {
    raw.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Canonical form of a person name: casefold, strip edge honorifics,
/// collapse whitespace. Idempotent.
pub fn normalize_name(raw: &str) -> String {
    let lowered = collapse_lowercase(raw);
    let mut tokens: Vec<&str> = lowered.split(' ').filter(|t| !t.is_empty()).collect();
    let is_honorific = |t: &str| {
        let bare = t.trim_matches(|c: char| !c.is_alphanumeric());
        HONORIFICS.contains(&bare)
    };
    while tokens.first().is_some_and(|t| is_honorific(t)) {
        tokens.remove(0);
    }
    while tokens.last().is_some_and(|t| is_honorific(t)) {
        tokens.pop();
    }
    tokens.join(" ")
}

/// Fraction of the 14 schema fields that carry a value.
pub fn completeness(record: &PersonRecord) -> f64 {
    let text = |v: &Option<String>| v.as_deref().is_some_and(|s| !s.trim().is_empty());
    let list = |v: &Option<Vec<String>>| v.as_deref().is_some_and(|l| !l.is_empty());
    let present = [
        !record.person_id.trim().is_empty(),
        !record.name.trim().is_empty(),
        text(&record.title),
        text(&record.company),
        text(&record.location),
        text(&record.linkedin_url),
        text(&record.twitter_url),
        text(&record.email),
        text(&record.bio),
        list(&record.experience),
        list(&record.education),
        list(&record.skills),
        text(&record.match_explanation),
        list(&record.source_urls),
    ];
    present.iter().filter(|p| **p).count() as f64 / SCHEMA_FIELDS.len() as f64
}

/// Stable fallback identifier for records without a profile URL.
pub fn content_hash_id(name: &str, company: Option<&str>) -> String {
    let mut hasher = Sha256::new();
    hasher.update(collapse_lowercase(name).as_bytes());
    hasher.update([0x1f]);
    hasher.update(collapse_lowercase(company.unwrap_or_default()).as_bytes());
    format!("hash:{}", hex::encode(&hasher.finalize()[..8]))
}

/// Keys under which structured payloads commonly nest their entity list.
const ENTITY_LIST_KEYS: [&str; 6] = ["results", "people", "persons", "profiles", "matches", "data"];

/// Parses a structured payload and maps each entity into a [`PersonRecord`].
///
/// Entities without a usable name are skipped and logged, never fabricated.
/// Duplicate entities pass through untouched; dedup is a separate step.
pub fn normalize_structured(payload: &str, mapping: &FieldMapping) -> Result<NormalizeOutcome, NormalizeError> {
    mapping.validate()?;
    let value: Value = serde_json::from_str(payload).map_err(|e| {
        let offset = byte_offset(payload, e.line(), e.column());
        NormalizeError::Unparseable { offset, line: e.line(), column: e.column(), message: e.to_string() }
    })?;
    let entities = entity_list(&value)?;

    let mut outcome = NormalizeOutcome::default();
    for (index, entity) in entities.iter().enumerate() {
        match map_entity(entity, mapping) {
            Some(record) => outcome.records.push(record),
            None => {
                log::warn!("{}: entity {index} has no name; skipped", mapping.platform_id);
                outcome.skipped.push(format!("entity {index}: missing name"));
            }
        }
    }
    Ok(outcome)
}

/// Translates a parser line/column (1-based) into a byte offset.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let mut remaining = line.saturating_sub(1);
    let mut offset = 0usize;
    for l in text.split_inclusive('\n') {
        if remaining == 0 {
            break;
        }
        offset += l.len();
        remaining -= 1;
    }
    offset + column.saturating_sub(1)
}

fn entity_list(value: &Value) -> Result<&Vec<Value>, NormalizeError> {
    if let Some(list) = value.as_array() {
        return Ok(list);
    }
    if let Some(object) = value.as_object() {
        for key in ENTITY_LIST_KEYS {
            if let Some(list) = object.get(key).and_then(Value::as_array) {
                return Ok(list);
            }
        }
    }
    Err(NormalizeError::NoEntityList { expected: ENTITY_LIST_KEYS.to_vec() })
}

/// Follows a dot-separated path through nested objects.
fn lookup<'v>(entity: &'v Value, path: &str) -> Option<&'v Value> {
    let mut cursor = entity;
    for part in path.split('.') {
        cursor = cursor.as_object()?.get(part)?;
    }
    Some(cursor)
}

/// Renders a native value as scalar text.
fn as_text(value: &Value) -> Option<String> {
    match value {
        Value::String(s) => {
            let trimmed = s.trim();
            (!trimmed.is_empty()).then(|| trimmed.to_string())
        }
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Array(items) => {
            let parts: Vec<String> = items.iter().filter_map(as_text).collect();
            (!parts.is_empty()).then(|| parts.join("; "))
        }
        Value::Null | Value::Object(_) => None,
    }
}

/// Renders a native value as a list of text items.
fn as_list(value: &Value) -> Option<Vec<String>> {
    match value {
        Value::Array(items) => {
            let parts: Vec<String> = items
                .iter()
                .filter_map(|item| match item {
                    // Object entries (e.g. an experience stint) keep their
                    // full content as compact JSON so nothing is lost.
                    Value::Object(_) => serde_json::to_string(item).ok(),
                    other => as_text(other),
                })
                .collect();
            (!parts.is_empty()).then_some(parts)
        }
        other => as_text(other).map(|s| vec![s]),
    }
}

fn map_entity(entity: &Value, mapping: &FieldMapping) -> Option<PersonRecord> {
    let mut record = PersonRecord::minimal("", "");
    for (path, target) in &mapping.map {
        let Some(value) = lookup(entity, path) else { continue };
        match target.as_str() {
            "person_id" => record.person_id = as_text(value).unwrap_or_default(),
            "name" => record.name = as_text(value).unwrap_or_default(),
            "title" => record.title = as_text(value),
            "company" => record.company = as_text(value),
            "location" => record.location = as_text(value),
            "linkedin_url" => record.linkedin_url = as_text(value),
            "twitter_url" => record.twitter_url = as_text(value),
            "email" => record.email = as_text(value),
            "bio" => record.bio = as_text(value),
            "experience" => record.experience = as_list(value),
            "education" => record.education = as_list(value),
            "skills" => record.skills = as_list(value),
            "match_explanation" => record.match_explanation = as_text(value),
            "source_urls" => record.source_urls = as_list(value),
            _ => unreachable!("validated against SCHEMA_FIELDS"),
        }
    }
    if record.name.trim().is_empty() {
        return None;
    }
    if record.person_id.trim().is_empty() {
        record.person_id = record
            .linkedin_url
            .clone()
            .unwrap_or_else(|| content_hash_id(&record.name, record.company.as_deref()));
    }
    Some(record)
}

/// Collapses duplicate identities, keeping the most complete profile.
///
/// Records group by [`DedupKey`]; within a group the highest-completeness
/// record survives (earliest position wins ties), and the survivor sits at
/// the group's first position in the original order.
pub fn dedup(records: &[PersonRecord]) -> Vec<PersonRecord> {
    struct Group {
        first_index: usize,
        best_index: usize,
        best_completeness: f64,
    }

    let mut groups: HashMap<DedupKey, Group> = HashMap::new();
    let mut order: Vec<DedupKey> = Vec::new();
    for (index, record) in records.iter().enumerate() {
        let key = DedupKey::for_record(record);
        let score = completeness(record);
        match groups.get_mut(&key) {
            None => {
                groups.insert(
                    key.clone(),
                    Group { first_index: index, best_index: index, best_completeness: score },
                );
                order.push(key);
            }
            Some(group) => {
                if score > group.best_completeness {
                    group.best_index = index;
                    group.best_completeness = score;
                }
            }
        }
    }

    order.sort_by_key(|key| groups[key].first_index);
    order.iter().map(|key| records[groups[key].best_index].clone()).collect()
}
