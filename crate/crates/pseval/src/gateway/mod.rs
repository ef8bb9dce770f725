//! Single access point to the judge and web search.
//!
//! Every judge call (criteria extraction, criterion verification, utility
//! assessment) and every search flows through [`Gateway`], which adds disk
//! caching, per-source rate limiting, person blinding, malformed-output
//! repair, and call accounting. Backends are pluggable via [`JudgeClient`]
//! and [`SearchClient`]; the deterministic implementations live in
//! [`crate::mock`], the live HTTP adapters in [`http`].

pub mod cache;
pub mod http;
pub mod limiter;
pub mod prompts;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use chrono::Utc;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{
    Criterion, CriterionJudgment, PersonRecord, QuerySpec, RunConfig, UtilityScores, Verdict,
    MAX_CRITERIA, MIN_CRITERIA,
};
use cache::{request_key, DiskCache};
use limiter::RateLimiter;
use prompts::PromptSet;

/// Errors crossing the gateway boundary.
#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("prompt template error: {0}")]
    Prompt(String),
    #[error("cache error: {0}")]
    Cache(String),
    #[error("backend error: {0}")]
    Backend(String),
    #[error("network error ({}retryable): {message}", if *.retryable { "" } else { "not " })]
    Network { message: String, retryable: bool },
    #[error("search failed after retries: {0}")]
    SearchFailed(String),
    #[error("judge output for {operation} unusable after repair: {message}")]
    MalformedJudgeOutput { operation: String, message: String },
    #[error("judge extracted {count} criteria; expected {MIN_CRITERIA}..={MAX_CRITERIA}")]
    CriteriaBounds { count: usize },
}

/// The three judge operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeOp {
    Extract,
    Verify,
    Utility,
}

impl JudgeOp {
    pub fn as_str(&self) -> &'static str {
        match self {
            JudgeOp::Extract => "extract_criteria",
            JudgeOp::Verify => "verify_criterion",
            JudgeOp::Utility => "assess_utility",
        }
    }
}

/// One fully rendered judge request.
///
/// `prompt` is what a live model sees; `payload` is the structured view the
/// deterministic mock reads. Both feed the cache key, so any content change
/// yields a fresh entry.
#[derive(Debug, Clone)]
pub struct JudgeRequest {
    pub operation: JudgeOp,
    pub prompt: String,
    pub temperature: f64,
    /// Distinguishes repeated probe runs that would otherwise collide.
    pub salt: Option<u64>,
    pub payload: Value,
}

impl JudgeRequest {
    fn cache_payload(&self) -> Value {
        serde_json::json!({
            "prompt": self.prompt,
            "temperature": self.temperature,
            "salt": self.salt,
            "payload": self.payload,
        })
    }
}

/// One search result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub url: String,
    pub snippet: String,
}

/// A judge backend: takes a rendered request, returns raw response text.
pub trait JudgeClient: Send + Sync {
    /// Stable identifier; part of every cache key.
    fn id(&self) -> &str;
    fn complete(&self, request: &JudgeRequest) -> Result<String, GatewayError>;
}

/// A web-search backend.
pub trait SearchClient: Send + Sync {
    /// Stable identifier; part of every cache key and the rate-limit source.
    fn id(&self) -> &str;
    /// Requests per second this source tolerates.
    fn rate_limit(&self) -> f64;
    /// Search depth setting passed through to the provider.
    fn depth(&self) -> &str;
    fn search(&self, query: &str, depth: &str) -> Result<Vec<SearchHit>, GatewayError>;
}

/// Monotonic call counters, shared across workers.
#[derive(Default)]
struct CallCounters {
    ops: AtomicUsize,
    judge_backend_calls: AtomicUsize,
    judge_cache_hits: AtomicUsize,
    search_backend_calls: AtomicUsize,
    search_cache_hits: AtomicUsize,
    repairs: AtomicUsize,
}

/// Point-in-time view of the gateway counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterSnapshot {
    /// Public gateway operations invoked (extract/verify/utility/search).
    pub ops: usize,
    pub judge_backend_calls: usize,
    pub judge_cache_hits: usize,
    pub search_backend_calls: usize,
    pub search_cache_hits: usize,
    pub repairs: usize,
}

/// One line of the run log: a single gateway call with its timing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CallEvent {
    pub timestamp: String,
    pub operation: String,
    pub backend: String,
    /// First 12 hex chars of the cache key; enough to find the entry.
    pub key_prefix: String,
    pub cache_hit: bool,
    pub duration_ms: u64,
}

/// Returns a copy with platform-identifying metadata removed: the run-level
/// platform tag and a matching `"<tag>:"` prefix on the person id. Content
/// fields are untouched. Idempotent.
pub fn blind_person(person: &PersonRecord) -> PersonRecord {
    let mut out = person.clone();
    if let Some(tag) = out.platform.take() {
        let prefix = format!("{tag}:");
        if let Some(rest) = out.person_id.strip_prefix(&prefix) {
            out.person_id = rest.to_string();
        }
    }
    out
}

/// The shared judge/search access point.
pub struct Gateway {
    judge: Arc<dyn JudgeClient>,
    search: Arc<dyn SearchClient>,
    cache: DiskCache,
    limiter: RateLimiter,
    prompts: PromptSet,
    config: RunConfig,
    counters: CallCounters,
    trace: Mutex<Vec<CallEvent>>,
}

impl Gateway {
    pub fn new(
        judge: Arc<dyn JudgeClient>,
        search: Arc<dyn SearchClient>,
        cache_dir: impl Into<std::path::PathBuf>,
        prompts: PromptSet,
        config: RunConfig,
    ) -> Gateway {
        let limiter = RateLimiter::new(search.rate_limit());
        Gateway {
            judge,
            search,
            cache: DiskCache::new(cache_dir),
            limiter,
            prompts,
            config,
            counters: CallCounters::default(),
            trace: Mutex::new(Vec::new()),
        }
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn counters(&self) -> CounterSnapshot {
        CounterSnapshot {
            ops: self.counters.ops.load(Ordering::SeqCst),
            judge_backend_calls: self.counters.judge_backend_calls.load(Ordering::SeqCst),
            judge_cache_hits: self.counters.judge_cache_hits.load(Ordering::SeqCst),
            search_backend_calls: self.counters.search_backend_calls.load(Ordering::SeqCst),
            search_cache_hits: self.counters.search_cache_hits.load(Ordering::SeqCst),
            repairs: self.counters.repairs.load(Ordering::SeqCst),
        }
    }

    /// Removes and returns every recorded call event.
    pub fn drain_trace(&self) -> Vec<CallEvent> {
        std::mem::take(&mut *self.trace.lock().expect("trace lock"))
    }

    fn record_event(&self, operation: &str, backend: &str, key: &str, cache_hit: bool, started: Instant) {
        let event = CallEvent {
            timestamp: Utc::now().to_rfc3339(),
            operation: operation.to_string(),
            backend: backend.to_string(),
            key_prefix: key[..12].to_string(),
            cache_hit,
            duration_ms: started.elapsed().as_millis() as u64,
        };
        self.trace.lock().expect("trace lock").push(event);
    }

    /// Runs one judge request through the cache.
    fn judge_call(&self, request: &JudgeRequest) -> Result<String, GatewayError> {
        let key = request_key(self.judge.id(), request.operation.as_str(), &request.cache_payload());
        let started = Instant::now();
        let (value, hit) = self.cache.get_or_compute(self.judge.id(), &key, || {
            self.counters.judge_backend_calls.fetch_add(1, Ordering::SeqCst);
            self.judge.complete(request)
        })?;
        if hit {
            self.counters.judge_cache_hits.fetch_add(1, Ordering::SeqCst);
        }
        self.record_event(request.operation.as_str(), self.judge.id(), &key, hit, started);
        Ok(value)
    }

    /// Parses a judge response, retrying once with a repair prompt on
    /// malformed output. Never coerces failures into verdicts.
    fn judge_with_repair<T>(
        &self,
        request: JudgeRequest,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<T, GatewayError> {
        let raw = self.judge_call(&request)?;
        match parse(&raw) {
            Ok(parsed) => Ok(parsed),
            Err(parse_error) => {
                self.counters.repairs.fetch_add(1, Ordering::SeqCst);
                log::warn!("{} output malformed ({parse_error}); retrying once", request.operation.as_str());
                let mut repair = request.clone();
                repair.prompt = format!(
                    "{}\n\nYour previous response could not be parsed: {parse_error}\n\
                     Respond with exactly the JSON object described in the output format, \
                     with no surrounding text.",
                    request.prompt
                );
                repair.payload = serde_json::json!({
                    "repair_of": request.payload,
                    "attempt": 2,
                });
                let raw = self.judge_call(&repair)?;
                parse(&raw).map_err(|message| GatewayError::MalformedJudgeOutput {
                    operation: request.operation.as_str().to_string(),
                    message,
                })
            }
        }
    }

    /// Stage 1: decompose a query into checkable criteria.
    pub fn extract_criteria(&self, query: &QuerySpec) -> Result<Vec<Criterion>, GatewayError> {
        self.extract_criteria_probe(query, None, self.config.temperature)
    }

    /// Extraction with an explicit probe salt and temperature; stability
    /// probes use the salt to force distinct cache entries per repetition.
    pub fn extract_criteria_probe(
        &self,
        query: &QuerySpec,
        salt: Option<u64>,
        temperature: f64,
    ) -> Result<Vec<Criterion>, GatewayError> {
        self.counters.ops.fetch_add(1, Ordering::SeqCst);
        let request = JudgeRequest {
            operation: JudgeOp::Extract,
            prompt: self.prompts.render_extraction(&query.text),
            temperature,
            salt,
            payload: serde_json::json!({
                "query_id": query.query_id,
                "query_text": query.text,
            }),
        };
        let drafts = self.judge_with_repair(request, parse_extraction)?;
        if !(MIN_CRITERIA..=MAX_CRITERIA).contains(&drafts.len()) {
            return Err(GatewayError::CriteriaBounds { count: drafts.len() });
        }
        Ok(drafts
            .into_iter()
            .enumerate()
            .map(|(index, (description, kind))| Criterion {
                criterion_id: format!("c{}", index + 1),
                description,
                kind,
            })
            .collect())
    }

    /// Stage 2: verify one criterion for one person with web evidence.
    ///
    /// The person is blinded before anything reaches the judge; evidence is
    /// fetched through the search cache and embedded in the person payload.
    pub fn verify_criterion(
        &self,
        person: &PersonRecord,
        criterion: &Criterion,
    ) -> Result<CriterionJudgment, GatewayError> {
        self.counters.ops.fetch_add(1, Ordering::SeqCst);
        let blinded = blind_person(person);
        let evidence = self.criterion_evidence(&blinded, criterion)?;
        let person_value = serde_json::to_value(&blinded).expect("record serializes");
        let evidence_value = serde_json::to_value(&evidence).expect("hits serialize");
        let person_data = serde_json::to_string(&serde_json::json!({
            "person": person_value,
            "web_evidence": evidence_value,
        }))
        .expect("person data serializes");

        let request = JudgeRequest {
            operation: JudgeOp::Verify,
            prompt: self.prompts.render_verification(&person_data, &criterion.description),
            temperature: 0.0,
            salt: None,
            payload: serde_json::json!({
                "person": person_value,
                "criterion": {
                    "id": criterion.criterion_id,
                    "description": criterion.description,
                    "kind": criterion.kind,
                },
                "evidence": evidence_value,
            }),
        };
        let (verdict, justification, sources) = self.judge_with_repair(request, parse_verification)?;
        Ok(CriterionJudgment { criterion_id: criterion.criterion_id.clone(), verdict, justification, sources })
    }

    /// Stage 3: judge the record's usefulness for the query.
    pub fn assess_utility(
        &self,
        person: &PersonRecord,
        query: &QuerySpec,
    ) -> Result<UtilityScores, GatewayError> {
        self.counters.ops.fetch_add(1, Ordering::SeqCst);
        let blinded = blind_person(person);
        let person_value = serde_json::to_value(&blinded).expect("record serializes");
        let person_data = serde_json::to_string(&person_value).expect("person data serializes");
        let request = JudgeRequest {
            operation: JudgeOp::Utility,
            prompt: self.prompts.render_utility(&person_data, &query.text),
            temperature: 0.0,
            salt: None,
            payload: serde_json::json!({
                "person": person_value,
                "query_id": query.query_id,
                "query_text": query.text,
            }),
        };
        let raw = self.judge_with_repair(request, parse_utility)?;
        let (scores, moved) = raw.clamped();
        if moved {
            log::warn!("utility scores out of range, clamped: {raw:?}");
        }
        Ok(scores)
    }

    /// Cache-through web search with rate limiting and bounded retries.
    pub fn cached_search(&self, query: &str) -> Result<Vec<SearchHit>, GatewayError> {
        self.counters.ops.fetch_add(1, Ordering::SeqCst);
        let depth = self.search.depth().to_string();
        let key = request_key(self.search.id(), "search", &serde_json::json!({
            "query": query,
            "depth": depth,
        }));
        let started = Instant::now();
        let (value, hit) = self.cache.get_or_compute(self.search.id(), &key, || {
            self.counters.search_backend_calls.fetch_add(1, Ordering::SeqCst);
            self.limiter.acquire(self.search.id());
            let hits = self.search_with_retries(query, &depth)?;
            serde_json::to_string(&hits).map_err(|e| GatewayError::Cache(e.to_string()))
        })?;
        self.record_event("search", self.search.id(), &key, hit, started);
        serde_json::from_str(&value).map_err(|e| GatewayError::Cache(format!("cached hits unreadable: {e}")))
    }

    fn search_with_retries(&self, query: &str, depth: &str) -> Result<Vec<SearchHit>, GatewayError> {
        let mut attempt = 0usize;
        loop {
            match self.search.search(query, depth) {
                Ok(hits) => return Ok(hits),
                Err(GatewayError::Network { message, retryable }) if retryable && attempt < 2 => {
                    let backoff = std::time::Duration::from_millis(100 << attempt);
                    log::warn!("search attempt {} failed ({message}); backing off {backoff:?}", attempt + 1);
                    std::thread::sleep(backoff);
                    attempt += 1;
                }
                Err(GatewayError::Network { message, .. }) => {
                    return Err(GatewayError::SearchFailed(message));
                }
                Err(other) => return Err(other),
            }
        }
    }

    /// Builds and runs the evidence search for one (person, criterion) pair.
    fn criterion_evidence(
        &self,
        blinded: &PersonRecord,
        criterion: &Criterion,
    ) -> Result<Vec<SearchHit>, GatewayError> {
        if self.config.search_budget == 0 {
            return Ok(Vec::new());
        }
        let mut terms = vec![blinded.name.clone()];
        if let Some(company) = &blinded.company {
            terms.push(company.clone());
        }
        terms.push(criterion.description.clone());
        let query = terms.join(" ").split_whitespace().collect::<Vec<_>>().join(" ");
        self.cached_search(&query)
    }
}

/// Finds the JSON document inside possibly sloppy judge output.
fn locate_json(text: &str) -> Result<Value, String> {
    let trimmed = text.trim();
    if let Ok(value) = serde_json::from_str::<Value>(trimmed) {
        return Ok(value);
    }
    // Code fences are the most common wrapper.
    if let Some(inner) = trimmed.strip_prefix("```json").or_else(|| trimmed.strip_prefix("```")) {
        if let Some(body) = inner.strip_suffix("```") {
            if let Ok(value) = serde_json::from_str::<Value>(body.trim()) {
                return Ok(value);
            }
        }
    }
    // Last resort: the widest braced span.
    if let (Some(open), Some(close)) = (trimmed.find('{'), trimmed.rfind('}')) {
        if open < close {
            if let Ok(value) = serde_json::from_str::<Value>(&trimmed[open..=close]) {
                return Ok(value);
            }
        }
    }
    Err(format!("no parseable JSON in response ({} bytes)", text.len()))
}

/// Parses extraction output: `{"criteria": [{"id", "description", "type"}]}`.
/// Returns (description, kind) pairs; ids are reassigned deterministically.
fn parse_extraction(text: &str) -> Result<Vec<(String, String)>, String> {
    let value = locate_json(text)?;
    let items = value
        .get("criteria")
        .and_then(Value::as_array)
        .or_else(|| value.as_array())
        .ok_or_else(|| "expected a \"criteria\" array".to_string())?;
    let mut out = Vec::with_capacity(items.len());
    for (index, item) in items.iter().enumerate() {
        let description = item
            .get("description")
            .and_then(Value::as_str)
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| format!("criterion {index} lacks a description"))?;
        let kind = item
            .get("type")
            .or_else(|| item.get("kind"))
            .and_then(Value::as_str)
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .unwrap_or("other");
        out.push((description.to_string(), kind.to_string()));
    }
    Ok(out)
}

/// Parses verification output: `{"judgment", "justification", "sources"}`.
fn parse_verification(text: &str) -> Result<(Verdict, String, Vec<String>), String> {
    let value = locate_json(text)?;
    let verdict_text = value
        .get("judgment")
        .or_else(|| value.get("verdict"))
        .and_then(Value::as_str)
        .ok_or_else(|| "missing \"judgment\" field".to_string())?;
    let verdict = Verdict::parse(verdict_text).ok_or_else(|| format!("unknown verdict {verdict_text:?}"))?;
    let justification = value.get("justification").and_then(Value::as_str).unwrap_or("").to_string();
    let sources: Vec<String> = value
        .get("sources")
        .and_then(Value::as_array)
        .map(|items| items.iter().filter_map(Value::as_str).map(String::from).collect())
        .unwrap_or_default();
    if verdict != Verdict::NotMet && sources.is_empty() {
        return Err(format!("verdict {} requires at least one source", verdict.as_str()));
    }
    Ok((verdict, justification, sources))
}

/// Parses utility output: the three sub-dimension fields.
fn parse_utility(text: &str) -> Result<UtilityScores, String> {
    let value = locate_json(text)?;
    let field = |name: &str| {
        value
            .get(name)
            .and_then(Value::as_f64)
            .ok_or_else(|| format!("missing or non-numeric \"{name}\" field"))
    };
    Ok(UtilityScores {
        structural: field("structural_completeness")?,
        evidence: field("query_specific_evidence")?,
        actionability: field("actionability")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blinding_strips_tag_and_prefix_idempotently() {
        let mut person = PersonRecord::minimal("beta:profile-9", "Jane Doe");
        person.platform = Some("beta".into());
        person.company = Some("Google".into());

        let blinded = blind_person(&person);
        assert_eq!(blinded.platform, None);
        assert_eq!(blinded.person_id, "profile-9");
        assert_eq!(blinded.company.as_deref(), Some("Google"));

        // Idempotent: a second pass changes nothing.
        assert_eq!(blind_person(&blinded), blinded);

        // Untagged record with a colon in its id is left alone.
        let untagged = PersonRecord::minimal("https://linkedin.com/in/x", "X");
        assert_eq!(blind_person(&untagged), untagged);
    }

    #[test]
    fn extraction_parser_accepts_the_documented_shape() {
        let response = r#"{
            "criteria": [
                {"id": "c1", "description": "Role is Senior ML Engineer or equivalent", "type": "role"},
                {"id": "c2", "description": "Currently employed at Google", "type": "company"},
                {"id": "c3", "description": "Located in San Francisco Bay Area", "type": "location"}
            ]
        }"#;
        let parsed = parse_extraction(response).unwrap();
        assert_eq!(parsed.len(), 3);
        assert_eq!(parsed[0].0, "Role is Senior ML Engineer or equivalent");
        assert_eq!(parsed[1].1, "company");
    }

    #[test]
    fn extraction_parser_tolerates_fences_and_chatter() {
        let fenced = "```json\n{\"criteria\": [{\"description\": \"d\", \"type\": \"role\"}]}\n```";
        assert_eq!(parse_extraction(fenced).unwrap().len(), 1);

        let chatty = "Sure! Here are the criteria:\n{\"criteria\": [{\"description\": \"d\"}]}\nHope that helps.";
        let parsed = parse_extraction(chatty).unwrap();
        assert_eq!(parsed[0].1, "other");

        assert!(parse_extraction("no json here").is_err());
        assert!(parse_extraction("{\"criteria\": [{\"type\": \"role\"}]}").is_err());
    }

    #[test]
    fn verification_parser_enforces_the_source_invariant() {
        let met = r#"{"judgment": "met", "justification": "j", "sources": ["https://a"]}"#;
        let (verdict, justification, sources) = parse_verification(met).unwrap();
        assert_eq!(verdict, Verdict::Met);
        assert_eq!(justification, "j");
        assert_eq!(sources.len(), 1);

        // A positive verdict without sources is malformed, not not_met.
        let sourceless = r#"{"judgment": "met", "justification": "j", "sources": []}"#;
        assert!(parse_verification(sourceless).is_err());

        let not_met = r#"{"judgment": "not_met", "justification": "no evidence"}"#;
        let (verdict, _, sources) = parse_verification(not_met).unwrap();
        assert_eq!(verdict, Verdict::NotMet);
        assert!(sources.is_empty());

        assert!(parse_verification(r#"{"judgment": "maybe"}"#).is_err());
    }

    #[test]
    fn utility_parser_reads_the_three_dimensions() {
        let response = r#"{
            "structural_completeness": 0.9,
            "query_specific_evidence": 0.6,
            "actionability": 0.3,
            "utility": 0.6
        }"#;
        let scores = parse_utility(response).unwrap();
        assert_eq!(scores, UtilityScores { structural: 0.9, evidence: 0.6, actionability: 0.3 });
        assert!(parse_utility(r#"{"structural_completeness": 0.9}"#).is_err());
    }
}
