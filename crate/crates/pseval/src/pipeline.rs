//! The three-stage evaluation pipeline over a fixture corpus.
//!
//! [`run_benchmark`] takes queries plus per-platform raw outputs, normalizes
//! each cell into unified records, extracts criteria once per query, then
//! verifies every (person, criterion) pair and judges per-person utility
//! through the gateway. Work is spread over a worker pool whose scheduling
//! cannot affect results: cells land in preassigned slots, and the gateway's
//! in-flight cache locks make call counts worker-independent too.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{CounterSnapshot, Gateway, GatewayError};
use crate::model::{
    validate_query_spec, Criterion, ModelError, PersonEvaluation, PersonRecord, QueryEvaluation,
    QuerySpec, RunConfig,
};
use crate::normalize::{self, FieldMapping, NormalizeError, NormalizeOutcome, ParserKind};

/// Errors that abort an evaluation run.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("normalization failed for {platform}/{query_id}: {source}")]
    Normalize {
        platform: String,
        query_id: String,
        #[source]
        source: NormalizeError,
    },
    #[error("query {query_id} is invalid: {details}")]
    InvalidQuery { query_id: String, details: String },
    #[error("duplicate query id {0}")]
    DuplicateQuery(String),
    #[error("platform {platform} has output for unknown query {query_id}")]
    UnknownQuery { platform: String, query_id: String },
    #[error(
        "{failed} of {total} person evaluations failed, over the {budget} budget; first: {first}"
    )]
    EvaluationBudget { failed: usize, total: usize, budget: f64, first: String },
}

/// One platform's raw outputs plus the rules for reading them.
#[derive(Debug, Clone)]
pub struct PlatformFixtures {
    pub platform_id: String,
    pub mapping: FieldMapping,
    /// query_id -> raw payload text. Missing entries evaluate as empty
    /// ranked lists rather than aborting the run.
    pub outputs: HashMap<String, String>,
}

/// A full run's input: the query set and every platform's outputs.
#[derive(Debug, Clone)]
pub struct FixtureSet {
    pub queries: Vec<QuerySpec>,
    pub platforms: Vec<PlatformFixtures>,
}

/// Everything a finished evaluation produced, before aggregation.
///
/// Maps are ordered so serialization is canonical; per-platform evaluation
/// vectors follow the fixture query order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawEvaluationSet {
    pub run_id: String,
    pub config: RunConfig,
    /// query_id -> criteria extracted once and shared across platforms.
    pub criteria: BTreeMap<String, Vec<Criterion>>,
    /// platform_id -> one evaluation per query, in query order.
    pub platforms: BTreeMap<String, Vec<QueryEvaluation>>,
    /// platform_id -> normalization skip notes (records dropped on ingest).
    pub skipped: BTreeMap<String, Vec<String>>,
    /// Person evaluations the judge could not complete, within budget.
    pub failures: Vec<String>,
    pub counters: CounterSnapshot,
}

impl RawEvaluationSet {
    /// Evaluations for one platform, in query order.
    pub fn platform(&self, platform_id: &str) -> Option<&[QueryEvaluation]> {
        self.platforms.get(platform_id).map(Vec::as_slice)
    }
}

/// Normalizes one (platform, query) cell into ranked unified records.
fn normalize_cell(
    platform: &PlatformFixtures,
    query_id: &str,
    config: &RunConfig,
) -> Result<(Vec<PersonRecord>, Vec<String>), PipelineError> {
    let Some(payload) = platform.outputs.get(query_id) else {
        return Ok((Vec::new(), Vec::new()));
    };
    let outcome = match platform.mapping.parser_kind {
        ParserKind::Structured => normalize::normalize_structured(payload, &platform.mapping)
            .map_err(|source| PipelineError::Normalize {
                platform: platform.platform_id.clone(),
                query_id: query_id.to_string(),
                source,
            })?,
        ParserKind::MarkdownReport => NormalizeOutcome {
            records: normalize::parse_markdown_report(payload),
            skipped: Vec::new(),
        },
    };
    let mut records = normalize::dedup(&outcome.records);
    records.truncate(config.max_results);
    let prefix = format!("{}:", platform.platform_id);
    for record in &mut records {
        record.platform = Some(platform.platform_id.clone());
        if !record.person_id.starts_with(&prefix) {
            record.person_id = format!("{prefix}{}", record.person_id);
        }
    }
    let skipped = outcome
        .skipped
        .into_iter()
        .map(|note| format!("{query_id}: {note}"))
        .collect();
    Ok((records, skipped))
}

/// Judges one person against every criterion, then scores utility.
fn evaluate_person(
    gateway: &Gateway,
    record: &PersonRecord,
    criteria: &[Criterion],
    query: &QuerySpec,
    config: &RunConfig,
) -> Result<PersonEvaluation, PipelineError> {
    let mut judgments = Vec::with_capacity(criteria.len());
    for criterion in criteria {
        judgments.push(gateway.verify_criterion(record, criterion)?);
    }
    let utility = gateway.assess_utility(record, query)?;
    Ok(PersonEvaluation::new(record.clone(), judgments, utility, config)?)
}

/// Evaluates one (platform, query) cell. Judge outputs that stay malformed
/// after repair fail only that person; anything else aborts the cell.
fn evaluate_cell(
    gateway: &Gateway,
    query: &QuerySpec,
    criteria: &[Criterion],
    records: &[PersonRecord],
    config: &RunConfig,
) -> Result<(QueryEvaluation, Vec<String>), PipelineError> {
    let mut persons = Vec::with_capacity(records.len());
    let mut failures = Vec::new();
    for record in records {
        match evaluate_person(gateway, record, criteria, query, config) {
            Ok(evaluated) => persons.push(evaluated),
            Err(PipelineError::Gateway(GatewayError::MalformedJudgeOutput { operation, message })) => {
                failures.push(format!(
                    "{}/{}: {operation}: {message}",
                    query.query_id, record.person_id
                ));
            }
            Err(fatal) => return Err(fatal),
        }
    }
    Ok((QueryEvaluation::new(query.clone(), persons, config), failures))
}

/// Runs the full pipeline over a fixture set.
pub fn run_benchmark(gateway: &Gateway, fixtures: &FixtureSet) -> Result<RawEvaluationSet, PipelineError> {
    let config = gateway.config().clone();
    config.validate()?;

    let mut seen: HashSet<&str> = HashSet::new();
    for query in &fixtures.queries {
        let violations = validate_query_spec(query);
        if !violations.is_empty() {
            let details = violations
                .iter()
                .map(|v| format!("{}: {}", v.field, v.message))
                .collect::<Vec<_>>()
                .join("; ");
            return Err(PipelineError::InvalidQuery { query_id: query.query_id.clone(), details });
        }
        if !seen.insert(&query.query_id) {
            return Err(PipelineError::DuplicateQuery(query.query_id.clone()));
        }
    }
    for platform in &fixtures.platforms {
        for query_id in platform.outputs.keys() {
            if !seen.contains(query_id.as_str()) {
                return Err(PipelineError::UnknownQuery {
                    platform: platform.platform_id.clone(),
                    query_id: query_id.clone(),
                });
            }
        }
    }

    // Normalization first: it is cheap and catches bad input before any
    // judge spend. cells[platform][query] holds the ranked records.
    let mut cells: Vec<Vec<Vec<PersonRecord>>> = Vec::with_capacity(fixtures.platforms.len());
    let mut skipped: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for platform in &fixtures.platforms {
        let mut rows = Vec::with_capacity(fixtures.queries.len());
        let mut notes = Vec::new();
        for query in &fixtures.queries {
            let (records, mut cell_notes) = normalize_cell(platform, &query.query_id, &config)?;
            rows.push(records);
            notes.append(&mut cell_notes);
        }
        cells.push(rows);
        skipped.insert(platform.platform_id.clone(), notes);
    }

    // Criteria are extracted once per query and shared across platforms, so
    // every platform is scored against the same yardstick.
    let mut criteria: BTreeMap<String, Vec<Criterion>> = BTreeMap::new();
    for query in &fixtures.queries {
        criteria.insert(query.query_id.clone(), gateway.extract_criteria(query)?);
    }

    // Verification and utility, fanned out over (platform, query) cells.
    // Each unit writes into its own slot, so worker scheduling cannot change
    // the assembled result.
    let units: Vec<(usize, usize)> = (0..fixtures.platforms.len())
        .flat_map(|pi| (0..fixtures.queries.len()).map(move |qi| (pi, qi)))
        .collect();
    type CellResult = Result<(QueryEvaluation, Vec<String>), PipelineError>;
    let slots: Vec<Mutex<Option<CellResult>>> = units.iter().map(|_| Mutex::new(None)).collect();
    let cursor = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let workers = config.workers.min(units.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = cursor.fetch_add(1, Ordering::SeqCst);
                if index >= units.len() || abort.load(Ordering::SeqCst) {
                    break;
                }
                let (pi, qi) = units[index];
                let query = &fixtures.queries[qi];
                let outcome = evaluate_cell(
                    gateway,
                    query,
                    &criteria[&query.query_id],
                    &cells[pi][qi],
                    &config,
                );
                if outcome.is_err() {
                    abort.store(true, Ordering::SeqCst);
                }
                *slots[index].lock().expect("slot lock") = Some(outcome);
            });
        }
    });

    let mut platforms: BTreeMap<String, Vec<QueryEvaluation>> = BTreeMap::new();
    let mut failures: Vec<String> = Vec::new();
    let mut attempted = 0usize;
    for (index, (pi, _)) in units.iter().enumerate() {
        let slot = slots[index].lock().expect("slot lock").take();
        match slot {
            Some(Ok((evaluation, mut cell_failures))) => {
                attempted += evaluation.ranked_persons.len() + cell_failures.len();
                failures.append(&mut cell_failures);
                platforms
                    .entry(fixtures.platforms[*pi].platform_id.clone())
                    .or_default()
                    .push(evaluation);
            }
            Some(Err(error)) => return Err(error),
            // Unreached units after an abort; the error above returns first.
            None => {}
        }
    }

    if !failures.is_empty() {
        let fraction = failures.len() as f64 / attempted.max(1) as f64;
        for failure in &failures {
            log::warn!("person evaluation failed: {failure}");
        }
        if fraction > config.incompleteness_budget {
            return Err(PipelineError::EvaluationBudget {
                failed: failures.len(),
                total: attempted,
                budget: config.incompleteness_budget,
                first: failures[0].clone(),
            });
        }
    }

    let stamp = config
        .run_stamp
        .clone()
        .unwrap_or_else(|| chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string());
    Ok(RawEvaluationSet {
        run_id: format!("{stamp}-{}", config.hash()),
        config,
        criteria,
        platforms,
        skipped,
        failures,
        counters: gateway.counters(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{JudgeClient, JudgeRequest};
    use crate::mock::corpus::{generate_corpus, SyntheticCorpusSpec};
    use crate::mock::{MockJudgeClient, MockSearchClient};
    use std::sync::Arc;

    fn mock_gateway(corpus_ruleset: crate::mock::MockRuleset, config: RunConfig, dir: &std::path::Path) -> Gateway {
        Gateway::new(
            Arc::new(MockJudgeClient::new(corpus_ruleset)),
            Arc::new(MockSearchClient),
            dir.join("cache"),
            crate::gateway::prompts::PromptSet::builtin().unwrap(),
            config,
        )
    }

    fn pinned_config(workers: usize) -> RunConfig {
        RunConfig { workers, run_stamp: Some("test".into()), ..RunConfig::default() }
    }

    #[test]
    fn benchmark_reproduces_planted_qualification_counts() {
        let corpus = generate_corpus(&SyntheticCorpusSpec::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let gateway = mock_gateway(corpus.ruleset.clone(), pinned_config(4), dir.path());
        let raw = run_benchmark(&gateway, &corpus.fixtures).unwrap();

        assert_eq!(raw.platforms.len(), 4);
        for (platform_id, evaluations) in &raw.platforms {
            assert_eq!(evaluations.len(), 12);
            for evaluation in evaluations {
                let expected = corpus.truth.qualified[platform_id][&evaluation.query.query_id];
                assert_eq!(
                    evaluation.qualified_count, expected,
                    "{platform_id}/{}",
                    evaluation.query.query_id
                );
            }
        }
        // Criteria extracted once per query, shared across platforms.
        assert_eq!(raw.criteria.len(), 12);
        assert!(raw.criteria.values().all(|c| c.len() == 3));
        assert!(raw.failures.is_empty());
    }

    #[test]
    fn results_are_identical_across_worker_counts() {
        let corpus = generate_corpus(&SyntheticCorpusSpec::default()).unwrap();
        let mut serialized = Vec::new();
        for workers in [1, 8] {
            let dir = tempfile::tempdir().unwrap();
            let gateway = mock_gateway(corpus.ruleset.clone(), pinned_config(workers), dir.path());
            let mut raw = run_benchmark(&gateway, &corpus.fixtures).unwrap();
            // The config snapshot records the worker count; the results must
            // not otherwise depend on it.
            raw.config.workers = 0;
            raw.run_id = "normalized".into();
            serialized.push(serde_json::to_string(&raw).unwrap());
        }
        assert_eq!(serialized[0], serialized[1]);
    }

    #[test]
    fn missing_cells_become_empty_ranked_lists() {
        let mut corpus = generate_corpus(&SyntheticCorpusSpec::default()).unwrap();
        corpus.fixtures.platforms[0].outputs.remove("q-expert-01");
        let dir = tempfile::tempdir().unwrap();
        let gateway = mock_gateway(corpus.ruleset.clone(), pinned_config(4), dir.path());
        let raw = run_benchmark(&gateway, &corpus.fixtures).unwrap();

        let evaluations = raw.platform("alpha").unwrap();
        let empty = evaluations.iter().find(|e| e.query.query_id == "q-expert-01").unwrap();
        assert!(empty.ranked_persons.is_empty());
        assert!(!empty.task_success);
        // Other platforms keep their full lists for the same query.
        let full = raw.platform("beta").unwrap().iter().find(|e| e.query.query_id == "q-expert-01").unwrap();
        assert!(!full.ranked_persons.is_empty());
    }

    #[test]
    fn unknown_query_output_fails_fast() {
        let mut corpus = generate_corpus(&SyntheticCorpusSpec::default()).unwrap();
        let payload = corpus.fixtures.platforms[1].outputs["q-b2b-01"].clone();
        corpus.fixtures.platforms[1].outputs.insert("q-nonexistent".into(), payload);
        let dir = tempfile::tempdir().unwrap();
        let gateway = mock_gateway(corpus.ruleset.clone(), pinned_config(2), dir.path());
        match run_benchmark(&gateway, &corpus.fixtures) {
            Err(PipelineError::UnknownQuery { platform, query_id }) => {
                assert_eq!(platform, "beta");
                assert_eq!(query_id, "q-nonexistent");
            }
            other => panic!("expected UnknownQuery, got {other:?}"),
        }
    }

    #[test]
    fn records_carry_platform_tag_and_namespaced_id() {
        let corpus = generate_corpus(&SyntheticCorpusSpec::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let gateway = mock_gateway(corpus.ruleset.clone(), pinned_config(2), dir.path());
        let raw = run_benchmark(&gateway, &corpus.fixtures).unwrap();
        let person = &raw.platform("gamma").unwrap()[0].ranked_persons[0].person;
        assert_eq!(person.platform.as_deref(), Some("gamma"));
        assert!(person.person_id.starts_with("gamma:"));
    }

    /// Judge that answers normally except for one sabotaged person, for whom
    /// every verification response is unparseable garbage.
    struct SabotagedJudge {
        inner: MockJudgeClient,
        victim: String,
    }

    impl JudgeClient for SabotagedJudge {
        fn id(&self) -> &str {
            "mock"
        }

        fn complete(&self, request: &JudgeRequest) -> Result<String, GatewayError> {
            let payload = request.payload.get("repair_of").unwrap_or(&request.payload);
            let is_victim = payload
                .pointer("/person/person_id")
                .and_then(serde_json::Value::as_str)
                .is_some_and(|id| id == self.victim);
            if is_victim && request.operation == crate::gateway::JudgeOp::Verify {
                return Ok("sorry, I cannot respond in JSON today".into());
            }
            self.inner.complete(request)
        }
    }

    #[test]
    fn persistent_malformed_output_consumes_budget_not_verdicts() {
        let corpus = generate_corpus(&SyntheticCorpusSpec::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        // 4 platforms x 12 queries x 12 people = 576 attempts; one blinded
        // person failing on all 4 platforms is 4/576, inside the 2% budget.
        let config = RunConfig { workers: 4, run_stamp: Some("test".into()), ..RunConfig::default() };
        let gateway = Gateway::new(
            Arc::new(SabotagedJudge {
                inner: MockJudgeClient::new(corpus.ruleset.clone()),
                victim: "p-000-03".into(),
            }),
            Arc::new(MockSearchClient),
            dir.path().join("cache"),
            crate::gateway::prompts::PromptSet::builtin().unwrap(),
            config,
        );
        let raw = run_benchmark(&gateway, &corpus.fixtures).unwrap();
        assert_eq!(raw.failures.len(), 4);
        assert!(raw.failures.iter().all(|f| f.contains("p-000-03")));
        // The victim is excluded from the list, never coerced to a verdict.
        let list = &raw.platform("alpha").unwrap()[0].ranked_persons;
        assert_eq!(list.len(), 11);
        assert!(list.iter().all(|p| !p.person.person_id.ends_with("p-000-03")));
        assert!(raw.counters.repairs >= 1);

        // A tiny budget turns the same situation into a run failure.
        let dir2 = tempfile::tempdir().unwrap();
        let strict = RunConfig {
            workers: 4,
            incompleteness_budget: 0.0,
            run_stamp: Some("test".into()),
            ..RunConfig::default()
        };
        let gateway = Gateway::new(
            Arc::new(SabotagedJudge {
                inner: MockJudgeClient::new(corpus.ruleset.clone()),
                victim: "p-000-03".into(),
            }),
            Arc::new(MockSearchClient),
            dir2.path().join("cache"),
            crate::gateway::prompts::PromptSet::builtin().unwrap(),
            strict,
        );
        match run_benchmark(&gateway, &corpus.fixtures) {
            Err(PipelineError::EvaluationBudget { failed, .. }) => assert_eq!(failed, 4),
            other => panic!("expected EvaluationBudget, got {other:?}"),
        }
    }

    #[test]
    fn verification_is_shared_across_platforms_through_the_cache() {
        let corpus = generate_corpus(&SyntheticCorpusSpec::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let gateway = mock_gateway(corpus.ruleset.clone(), pinned_config(4), dir.path());
        let raw = run_benchmark(&gateway, &corpus.fixtures).unwrap();
        // Blinded, the four platforms' copies of a person are identical, so
        // each (person, criterion) pair hits the judge exactly once:
        // 12 queries x 12 people x (3 verifications + 1 utility) + 12
        // extractions. The remaining ops are cache hits.
        let backend = raw.counters.judge_backend_calls;
        assert_eq!(backend, 12 * 12 * 4 + 12);
        assert!(raw.counters.judge_cache_hits > 0);
        assert_eq!(raw.counters.search_backend_calls, 12 * 12 * 3);
    }
}
