//! Deterministic offline backends.
//!
//! [`MockJudgeClient`] answers the three judge operations from a declarative
//! [`MockRuleset`]: criteria come from query-matching rules, verdicts from
//! per-criterion field expectations checked against the (blinded) record, and
//! utility scores from field-weight tables. [`MockSearchClient`] fabricates
//! one stable hit per query. Same inputs always produce the same bytes, which
//! is what makes end-to-end runs reproducible and network-free.

pub mod corpus;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::gateway::{GatewayError, JudgeClient, JudgeRequest, JudgeOp, SearchClient, SearchHit};
use crate::model::{PersonRecord, Verdict, MAX_CRITERIA, MIN_CRITERIA, SCHEMA_FIELDS};

/// How an expectation compares a record field to its reference value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    Equals,
    Contains,
    Present,
}

/// A checkable condition on one record field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub field: String,
    pub mode: MatchMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    /// Weaker fallback: matching it (when the primary check fails) yields a
    /// partially_met verdict instead of not_met.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partial_value: Option<String>,
}

/// One criterion a rule emits, plus how the mock judge should verify it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionRule {
    pub description: String,
    #[serde(rename = "type", alias = "kind")]
    pub kind: String,
    pub expect: Expectation,
}

/// Criteria to emit for queries whose text contains a marker phrase.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriteriaRule {
    pub query_contains: String,
    pub criteria: Vec<CriterionRule>,
}

/// One field's contribution to a utility sub-dimension.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldWeight {
    pub field: String,
    pub score: f64,
}

/// Field-weight tables for the judged utility dimensions. Structural
/// completeness is always the filled-field fraction and needs no table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtilityRules {
    #[serde(default = "UtilityRules::default_evidence")]
    pub evidence: Vec<FieldWeight>,
    #[serde(default = "UtilityRules::default_actionability")]
    pub actionability: Vec<FieldWeight>,
}

impl UtilityRules {
    fn default_evidence() -> Vec<FieldWeight> {
        vec![
            FieldWeight { field: "match_explanation".into(), score: 0.6 },
            FieldWeight { field: "source_urls".into(), score: 0.4 },
        ]
    }

    fn default_actionability() -> Vec<FieldWeight> {
        vec![
            FieldWeight { field: "email".into(), score: 0.5 },
            FieldWeight { field: "linkedin_url".into(), score: 0.3 },
            FieldWeight { field: "twitter_url".into(), score: 0.2 },
        ]
    }
}

impl Default for UtilityRules {
    fn default() -> Self {
        UtilityRules {
            evidence: Self::default_evidence(),
            actionability: Self::default_actionability(),
        }
    }
}

/// Complete behavior description for the mock backends.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockRuleset {
    pub schema_version: u32,
    pub criteria_rules: Vec<CriteriaRule>,
    /// Criteria for queries no rule matches; absent means such queries fail
    /// extraction loudly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_criteria: Option<Vec<CriterionRule>>,
    #[serde(default)]
    pub utility_rules: UtilityRules,
}

impl MockRuleset {
    pub fn from_json(text: &str) -> anyhow::Result<MockRuleset> {
        let ruleset: MockRuleset = serde_json::from_str(text)?;
        ruleset.validate()?;
        Ok(ruleset)
    }

    pub fn from_file(path: &std::path::Path) -> anyhow::Result<MockRuleset> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read ruleset {}: {e}", path.display()))?;
        Self::from_json(&text)
    }

    /// Rejects rule gaps at load time so they cannot surface mid-run.
    pub fn validate(&self) -> anyhow::Result<()> {
        let mut seen: HashMap<&str, &Expectation> = HashMap::new();
        let all_rules = self
            .criteria_rules
            .iter()
            .flat_map(|rule| rule.criteria.iter())
            .chain(self.default_criteria.iter().flatten());
        let mut any = false;
        for criterion in all_rules {
            any = true;
            if criterion.description.trim().is_empty() {
                anyhow::bail!("criterion rule with empty description");
            }
            let expect = &criterion.expect;
            if !SCHEMA_FIELDS.contains(&expect.field.as_str()) {
                anyhow::bail!("expectation targets unknown field {:?}", expect.field);
            }
            if expect.mode != MatchMode::Present && expect.value.is_none() {
                anyhow::bail!(
                    "expectation on {:?} needs a value for its match mode",
                    criterion.description
                );
            }
            match seen.get(criterion.description.as_str()) {
                Some(previous) if *previous != expect => {
                    anyhow::bail!(
                        "criterion {:?} has conflicting expectations across rules",
                        criterion.description
                    );
                }
                _ => {
                    seen.insert(&criterion.description, expect);
                }
            }
        }
        if !any {
            anyhow::bail!("ruleset defines no criteria");
        }
        for rule in &self.criteria_rules {
            if rule.query_contains.trim().is_empty() {
                anyhow::bail!("criteria rule with empty query_contains marker");
            }
            if !(MIN_CRITERIA..=MAX_CRITERIA).contains(&rule.criteria.len()) {
                anyhow::bail!(
                    "rule {:?} emits {} criteria; expected {MIN_CRITERIA}..={MAX_CRITERIA}",
                    rule.query_contains,
                    rule.criteria.len()
                );
            }
        }
        for weight in self.utility_rules.evidence.iter().chain(&self.utility_rules.actionability) {
            if !SCHEMA_FIELDS.contains(&weight.field.as_str()) {
                anyhow::bail!("utility weight targets unknown field {:?}", weight.field);
            }
            if !(weight.score > 0.0 && weight.score <= 1.0) {
                anyhow::bail!("utility weight for {:?} must be in (0, 1]", weight.field);
            }
        }
        Ok(())
    }
}

/// A small built-in ruleset for unit tests and smoke runs.
pub fn default_ruleset() -> MockRuleset {
    let ruleset = MockRuleset {
        schema_version: 1,
        criteria_rules: vec![CriteriaRule {
            query_contains: "machine learning".into(),
            criteria: vec![
                CriterionRule {
                    description: "Holds a senior machine learning engineering role".into(),
                    kind: "role".into(),
                    expect: Expectation {
                        field: "title".into(),
                        mode: MatchMode::Contains,
                        value: Some("senior machine learning engineer".into()),
                        partial_value: Some("machine learning".into()),
                    },
                },
                CriterionRule {
                    description: "Currently works at Google".into(),
                    kind: "company".into(),
                    expect: Expectation {
                        field: "company".into(),
                        mode: MatchMode::Equals,
                        value: Some("Google".into()),
                        partial_value: None,
                    },
                },
                CriterionRule {
                    description: "Based in the San Francisco Bay Area".into(),
                    kind: "location".into(),
                    expect: Expectation {
                        field: "location".into(),
                        mode: MatchMode::Contains,
                        value: Some("san francisco".into()),
                        partial_value: Some("california".into()),
                    },
                },
            ],
        }],
        default_criteria: None,
        utility_rules: UtilityRules::default(),
    };
    ruleset.validate().expect("built-in ruleset is valid");
    ruleset
}

fn sha8(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(&digest[..4])
}

/// Reads a record field as comparable text; list fields join their items.
fn field_text(person: &Value, field: &str) -> String {
    match person.get(field) {
        Some(Value::String(s)) => s.trim().to_string(),
        Some(Value::Array(items)) => items
            .iter()
            .filter_map(Value::as_str)
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join("\n"),
        _ => String::new(),
    }
}

impl Expectation {
    /// Evaluates this expectation against a record, yielding a verdict.
    fn judge(&self, person: &Value) -> Verdict {
        let actual = field_text(person, &self.field);
        let primary = match self.mode {
            MatchMode::Present => !actual.is_empty(),
            MatchMode::Equals => {
                let expected = self.value.as_deref().unwrap_or("");
                !actual.is_empty() && actual.eq_ignore_ascii_case(expected.trim())
            }
            MatchMode::Contains => {
                let expected = self.value.as_deref().unwrap_or("").to_lowercase();
                !expected.is_empty() && actual.to_lowercase().contains(&expected)
            }
        };
        if primary {
            return Verdict::Met;
        }
        if let Some(partial) = &self.partial_value {
            if !partial.is_empty() && actual.to_lowercase().contains(&partial.to_lowercase()) {
                return Verdict::PartiallyMet;
            }
        }
        Verdict::NotMet
    }
}

/// Rule-driven judge backend; same request, same response bytes, forever.
pub struct MockJudgeClient {
    ruleset: MockRuleset,
    expectations: HashMap<String, Expectation>,
}

impl MockJudgeClient {
    pub fn new(ruleset: MockRuleset) -> MockJudgeClient {
        let mut expectations = HashMap::new();
        for criterion in ruleset
            .criteria_rules
            .iter()
            .flat_map(|rule| rule.criteria.iter())
            .chain(ruleset.default_criteria.iter().flatten())
        {
            expectations.insert(criterion.description.clone(), criterion.expect.clone());
        }
        MockJudgeClient { ruleset, expectations }
    }

    fn answer_extraction(&self, payload: &Value) -> Result<String, GatewayError> {
        let query_text = payload
            .get("query_text")
            .and_then(Value::as_str)
            .ok_or_else(|| GatewayError::Backend("extraction payload lacks query_text".into()))?;
        let lowered = query_text.to_lowercase();
        let matches: Vec<&CriteriaRule> = self
            .ruleset
            .criteria_rules
            .iter()
            .filter(|rule| lowered.contains(&rule.query_contains.to_lowercase()))
            .collect();
        if matches.len() > 1 {
            return Err(GatewayError::Backend(format!(
                "query {query_text:?} matches {} criteria rules; markers must be unambiguous",
                matches.len()
            )));
        }
        let criteria: &[CriterionRule] = match matches.first() {
            Some(rule) => &rule.criteria,
            None => match &self.ruleset.default_criteria {
                Some(defaults) => defaults,
                // No rule and no default: reply with an empty list so the
                // caller hits its criteria-count check, not a backend crash.
                None => &[],
            },
        };
        let items: Vec<Value> = criteria
            .iter()
            .enumerate()
            .map(|(index, criterion)| {
                serde_json::json!({
                    "id": format!("c{}", index + 1),
                    "description": criterion.description,
                    "type": criterion.kind,
                })
            })
            .collect();
        Ok(serde_json::json!({ "criteria": items }).to_string())
    }

    fn answer_verification(&self, payload: &Value) -> Result<String, GatewayError> {
        let description = payload
            .pointer("/criterion/description")
            .and_then(Value::as_str)
            .ok_or_else(|| GatewayError::Backend("verification payload lacks criterion".into()))?;
        let person = payload
            .get("person")
            .ok_or_else(|| GatewayError::Backend("verification payload lacks person".into()))?;
        let expect = self.expectations.get(description).ok_or_else(|| {
            GatewayError::Backend(format!("no expectation for criterion {description:?}"))
        })?;
        let verdict = expect.judge(person);
        let sources: Vec<String> = if verdict == Verdict::NotMet {
            Vec::new()
        } else {
            let from_evidence: Vec<String> = payload
                .get("evidence")
                .and_then(Value::as_array)
                .map(|hits| {
                    hits.iter()
                        .filter_map(|hit| hit.get("url").and_then(Value::as_str))
                        .map(String::from)
                        .collect()
                })
                .unwrap_or_default();
            if from_evidence.is_empty() {
                vec![format!("mock://rule/{}", sha8(description))]
            } else {
                from_evidence
            }
        };
        let justification = format!(
            "mock check: field {:?} ({:?}) -> {}",
            expect.field,
            expect.mode,
            verdict.as_str()
        );
        Ok(serde_json::json!({
            "judgment": verdict.as_str(),
            "justification": justification,
            "sources": sources,
        })
        .to_string())
    }

    fn answer_utility(&self, payload: &Value) -> Result<String, GatewayError> {
        let person_value = payload
            .get("person")
            .ok_or_else(|| GatewayError::Backend("utility payload lacks person".into()))?;
        let person: PersonRecord = serde_json::from_value(person_value.clone())
            .map_err(|e| GatewayError::Backend(format!("utility payload person unreadable: {e}")))?;
        let structural = crate::normalize::completeness(&person);
        let weighted = |weights: &[FieldWeight]| -> f64 {
            let total: f64 = weights
                .iter()
                .filter(|w| !field_text(person_value, &w.field).is_empty())
                .map(|w| w.score)
                .sum();
            total.min(1.0)
        };
        let evidence = weighted(&self.ruleset.utility_rules.evidence);
        let actionability = weighted(&self.ruleset.utility_rules.actionability);
        Ok(serde_json::json!({
            "structural_completeness": structural,
            "query_specific_evidence": evidence,
            "actionability": actionability,
            "utility": (structural + evidence + actionability) / 3.0,
        })
        .to_string())
    }
}

impl JudgeClient for MockJudgeClient {
    fn id(&self) -> &str {
        "mock"
    }

    fn complete(&self, request: &JudgeRequest) -> Result<String, GatewayError> {
        // Repair requests wrap the original payload; the mock never emits
        // malformed output itself, but answering the unwrapped request keeps
        // the repair path exercisable with hybrid test judges.
        let payload = request.payload.get("repair_of").unwrap_or(&request.payload);
        match request.operation {
            JudgeOp::Extract => self.answer_extraction(payload),
            JudgeOp::Verify => self.answer_verification(payload),
            JudgeOp::Utility => self.answer_utility(payload),
        }
    }
}

/// Fabricated search backend: one stable hit per distinct query.
pub struct MockSearchClient;

impl SearchClient for MockSearchClient {
    fn id(&self) -> &str {
        "mock"
    }

    fn rate_limit(&self) -> f64 {
        // Effectively unlimited; deterministic runs must never stall.
        1.0e9
    }

    fn depth(&self) -> &str {
        "basic"
    }

    fn search(&self, query: &str, _depth: &str) -> Result<Vec<SearchHit>, GatewayError> {
        Ok(vec![SearchHit {
            url: format!("mock://evidence/{}", sha8(query)),
            snippet: format!("Mock snippet for: {query}"),
        }])
    }
}
