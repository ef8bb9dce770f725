//! Run orchestration: fixtures in, artifacts out.
//!
//! A run executes normalize → evaluate → score → statistics and writes one
//! append-only directory named by the run id:
//!
//! ```text
//! <out>/<run_id>/
//!   eval.json       full evaluation set (verdicts, utilities, counters)
//!   scores.json     per-platform score reports with bootstrap intervals
//!   stats.json      pairwise comparisons and scenario dispersion
//!   summary.md      human-readable headline table
//!   meta/           non-deterministic byproducts: timing ledger, call log
//! <out>/cache/      shared response cache (reused across runs)
//! ```
//!
//! Everything outside `meta/` is byte-deterministic for a fixed config and
//! seed on mock backends: wall-clock time lives only in the ledger, and the
//! per-platform `wall_seconds` field in score reports is left at zero there.
//! Cost units in score reports are computed from logical call counts, so
//! cache hits do not make a platform look cheaper.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsio::{self, FsError};
use crate::gateway::http::{HttpJudgeClient, HttpSearchClient};
use crate::gateway::prompts::PromptSet;
use crate::gateway::{CallEvent, Gateway, GatewayError, JudgeClient, SearchClient};
use crate::mock::{default_ruleset, MockJudgeClient, MockRuleset, MockSearchClient};
use crate::model::{
    ModelError, PlatformReport, QueryEvaluation, RunConfig, ScoreWithCi, CATEGORIES,
};
use crate::pipeline::{run_benchmark, PipelineError, RawEvaluationSet};
use crate::scoring::{compute_dimensions, per_query_scores, scenario_rows};
use crate::stats::{
    bootstrap_ci, bootstrap_ci_stat, coefficient_of_variation, mix_seed, win_tie_loss,
    PairwiseComparison, StatsError,
};

/// Errors that abort run orchestration.
#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Fs(#[from] FsError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("unknown {role} backend {name:?}; expected \"mock\" or \"http\"")]
    UnknownBackend { role: &'static str, name: String },
    #[error("mock ruleset: {0}")]
    Ruleset(#[from] anyhow::Error),
    #[error("run directory already exists: {0} (runs are append-only; pick a new stamp or out dir)")]
    RunDirExists(PathBuf),
}

/// The four accounting stages, in pipeline order.
pub const STAGES: [&str; 4] =
    ["extraction", "web_verification", "llm_verification", "normalization"];

/// One stage's accounting row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct StageEntry {
    /// Gateway calls routed to this stage (records processed, for normalization).
    pub calls: usize,
    /// Request units billed (equals calls for judge/search stages).
    pub units: f64,
    pub unit_cost: f64,
    pub cost_units: f64,
    pub wall_seconds: f64,
}

/// Sums across stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct LedgerTotals {
    pub calls: usize,
    pub units: f64,
    pub cost_units: f64,
    pub wall_seconds: f64,
}

/// Cost and latency accounting for one run.
///
/// Stage wall times come from the gateway call log; the normalization wall
/// is the run's non-gateway residual, floored at zero (with parallel workers
/// the traced stage times can exceed the wall clock).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostLatencyLedger {
    pub config_hash: String,
    pub seed: u64,
    pub queries: usize,
    pub stages: BTreeMap<String, StageEntry>,
    pub totals: LedgerTotals,
}

impl CostLatencyLedger {
    /// Recomputes totals from the stage rows.
    pub fn sum_stages(stages: &BTreeMap<String, StageEntry>) -> LedgerTotals {
        let mut totals = LedgerTotals::default();
        for entry in stages.values() {
            totals.calls += entry.calls;
            totals.units += entry.units;
            totals.cost_units += entry.cost_units;
            totals.wall_seconds += entry.wall_seconds;
        }
        totals
    }
}

/// Account view over a ledger: grand totals plus per-query averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccountSummary {
    pub totals: LedgerTotals,
    pub queries: usize,
    pub cost_per_query: f64,
    pub wall_per_query: f64,
}

/// Summarizes a ledger; an empty ledger yields zero totals and averages.
pub fn account(ledger: &CostLatencyLedger) -> AccountSummary {
    let totals = CostLatencyLedger::sum_stages(&ledger.stages);
    let q = ledger.queries as f64;
    AccountSummary {
        totals,
        queries: ledger.queries,
        cost_per_query: if ledger.queries == 0 { 0.0 } else { totals.cost_units / q },
        wall_per_query: if ledger.queries == 0 { 0.0 } else { totals.wall_seconds / q },
    }
}

/// Builds the ledger from the gateway call log plus normalization counts.
///
/// Every logged gateway call lands in exactly one stage: criteria extraction
/// in `extraction`, searches in `web_verification`, verification and utility
/// judgments in `llm_verification`.
pub fn build_ledger(
    config: &RunConfig,
    queries: usize,
    trace: &[CallEvent],
    normalized_records: usize,
    total_wall_seconds: f64,
) -> CostLatencyLedger {
    let mut stages: BTreeMap<String, StageEntry> =
        STAGES.iter().map(|s| (s.to_string(), StageEntry::default())).collect();
    let mut traced_wall = 0.0;
    for event in trace {
        let stage = match event.operation.as_str() {
            "extract_criteria" => "extraction",
            "search" => "web_verification",
            "verify_criterion" | "assess_utility" => "llm_verification",
            other => {
                log::warn!("unaccounted gateway operation {other:?}");
                continue;
            }
        };
        let entry = stages.get_mut(stage).expect("stage preseeded");
        entry.calls += 1;
        entry.units += 1.0;
        entry.wall_seconds += event.duration_ms as f64 / 1000.0;
        traced_wall += event.duration_ms as f64 / 1000.0;
    }
    let costs = &config.unit_costs;
    for (stage, unit_cost) in [
        ("extraction", costs.extraction),
        ("web_verification", costs.web_verification),
        ("llm_verification", costs.llm_verification),
        ("normalization", costs.normalization),
    ] {
        let entry = stages.get_mut(stage).expect("stage preseeded");
        entry.unit_cost = unit_cost;
        entry.cost_units = entry.units * unit_cost;
    }
    {
        let normalization = stages.get_mut("normalization").expect("stage preseeded");
        normalization.calls = normalized_records;
        normalization.units = normalized_records as f64;
        normalization.cost_units = normalization.units * costs.normalization;
        normalization.wall_seconds = (total_wall_seconds - traced_wall).max(0.0);
    }
    let totals = CostLatencyLedger::sum_stages(&stages);
    CostLatencyLedger { config_hash: config.hash(), seed: config.seed, queries, stages, totals }
}

/// Logical cost of one platform's evaluation, independent of cache hits.
///
/// Extraction is shared across platforms and amortized equally; verification
/// bills one search and one judgment per criterion check, plus one utility
/// judgment per person.
fn platform_cost(set: &RawEvaluationSet, evals: &[QueryEvaluation]) -> f64 {
    let costs = &set.config.unit_costs;
    let verify_calls: usize =
        evals.iter().map(|e| e.ranked_persons.iter().map(|p| p.judgments.len()).sum::<usize>()).sum();
    let utility_calls: usize = evals.iter().map(|e| e.ranked_persons.len()).sum();
    let searches = if set.config.search_budget > 0 { verify_calls } else { 0 };
    let extraction_share = if set.platforms.is_empty() {
        0.0
    } else {
        set.criteria.len() as f64 / set.platforms.len() as f64
    };
    extraction_share * costs.extraction
        + searches as f64 * costs.web_verification
        + (verify_calls + utility_calls) as f64 * costs.llm_verification
}

fn interval(ci: &crate::stats::ConfidenceInterval, value: f64) -> ScoreWithCi {
    ScoreWithCi { value, lower: ci.lower.min(value), upper: ci.upper.max(value) }
}

/// Builds the per-platform score reports with bootstrap intervals.
///
/// Precision and utility intervals bootstrap their per-query means; coverage
/// and overall intervals bootstrap the full aggregate formula (TCR times
/// mean yield), since those are not per-query means.
pub fn build_reports(set: &RawEvaluationSet) -> Result<BTreeMap<String, PlatformReport>, RunnerError> {
    let config = &set.config;
    let mut reports = BTreeMap::new();
    for (platform_index, (platform_id, evals)) in set.platforms.iter().enumerate() {
        let dims = compute_dimensions(evals, config);
        let report = if evals.is_empty() {
            PlatformReport {
                platform_id: platform_id.clone(),
                relevance_precision: ScoreWithCi::point(dims.relevance_precision),
                effective_coverage: ScoreWithCi::point(dims.effective_coverage),
                information_utility: ScoreWithCi::point(dims.information_utility),
                overall: ScoreWithCi::point(dims.overall),
                tcr: dims.tcr,
                mean_qualified: dims.mean_qualified,
                per_scenario: Vec::new(),
                cost_units: 0.0,
                wall_seconds: 0.0,
            }
        } else {
            let per_query = per_query_scores(evals, config);
            let success: Vec<f64> =
                evals.iter().map(|e| if e.task_success { 1.0 } else { 0.0 }).collect();
            let n = evals.len();
            let iters = config.bootstrap_iters;
            let level = config.confidence_level;
            let sub_seed = |dim: u64| mix_seed(config.seed, platform_index as u64 * 8 + dim);
            let weights = config.dimension_weights;

            let precision_ci = bootstrap_ci(&per_query.precision, iters, level, sub_seed(0))?;
            let coverage_ci =
                bootstrap_ci_stat(n, dims.effective_coverage, iters, level, sub_seed(1), |idx| {
                    let tcr = idx.iter().map(|i| success[*i]).sum::<f64>() / idx.len() as f64;
                    let yield_pct = idx.iter().map(|i| per_query.coverage_yield[*i]).sum::<f64>()
                        / idx.len() as f64;
                    tcr * yield_pct
                })?;
            let utility_ci = bootstrap_ci(&per_query.utility, iters, level, sub_seed(2))?;
            let overall_ci =
                bootstrap_ci_stat(n, dims.overall, iters, level, sub_seed(3), |idx| {
                    let inv = 1.0 / idx.len() as f64;
                    let precision = idx.iter().map(|i| per_query.precision[*i]).sum::<f64>() * inv;
                    let tcr = idx.iter().map(|i| success[*i]).sum::<f64>() * inv;
                    let yield_pct =
                        idx.iter().map(|i| per_query.coverage_yield[*i]).sum::<f64>() * inv;
                    let utility = idx.iter().map(|i| per_query.utility[*i]).sum::<f64>() * inv;
                    weights[0] * precision + weights[1] * tcr * yield_pct + weights[2] * utility
                })?;

            PlatformReport {
                platform_id: platform_id.clone(),
                relevance_precision: interval(&precision_ci, dims.relevance_precision),
                effective_coverage: interval(&coverage_ci, dims.effective_coverage),
                information_utility: interval(&utility_ci, dims.information_utility),
                overall: interval(&overall_ci, dims.overall),
                tcr: dims.tcr,
                mean_qualified: dims.mean_qualified,
                per_scenario: scenario_rows(evals, config),
                cost_units: platform_cost(set, evals),
                wall_seconds: 0.0,
            }
        };
        reports.insert(platform_id.clone(), report);
    }
    Ok(reports)
}

/// Pairwise comparisons and per-platform scenario dispersion for one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunStatistics {
    /// Every ordered platform pair: wins/ties/losses over per-query overall
    /// scores, plus the paired bootstrap p-value.
    pub comparisons: Vec<PairwiseComparison>,
    /// platform -> coefficient of variation (fraction) across its
    /// per-scenario relevance precisions; absent with fewer than two
    /// scenarios or a zero mean.
    pub scenario_cv: BTreeMap<String, Option<f64>>,
}

/// Computes comparisons and dispersion from a stored evaluation set.
pub fn build_statistics(set: &RawEvaluationSet) -> Result<RunStatistics, RunnerError> {
    let config = &set.config;
    let per_platform: Vec<(String, Vec<f64>)> = set
        .platforms
        .iter()
        .map(|(id, evals)| (id.clone(), per_query_scores(evals, config).overall))
        .collect();
    let comparisons = if per_platform.iter().all(|(_, v)| !v.is_empty()) && per_platform.len() > 1 {
        win_tie_loss(&per_platform, config.bootstrap_iters, mix_seed(config.seed, 0x7e57))?
    } else {
        Vec::new()
    };
    let mut scenario_cv = BTreeMap::new();
    for (platform_id, evals) in &set.platforms {
        let precisions: Vec<f64> =
            scenario_rows(evals, config).iter().map(|r| r.relevance_precision).collect();
        let cv = if precisions.len() < 2 {
            None
        } else {
            coefficient_of_variation(&precisions).ok()
        };
        scenario_cv.insert(platform_id.clone(), cv);
    }
    Ok(RunStatistics { comparisons, scenario_cv })
}

/// One sampled (query, person) pair with everything an annotator needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampledPair {
    pub category: String,
    pub query_id: String,
    pub query_text: String,
    pub platform_id: String,
    pub person_id: String,
    pub person_name: String,
}

/// Draws a stratified annotation sample: `per_stratum` person-query pairs
/// from each query category, pooled over all platforms, seeded.
pub fn sample_pairs(
    set: &RawEvaluationSet,
    per_stratum: usize,
    seed: u64,
) -> Result<Vec<SampledPair>, RunnerError> {
    let mut pool: Vec<(String, SampledPair)> = Vec::new();
    for (platform_id, evals) in &set.platforms {
        for eval in evals {
            for person in &eval.ranked_persons {
                pool.push((
                    eval.query.category.to_lowercase(),
                    SampledPair {
                        category: eval.query.category.to_lowercase(),
                        query_id: eval.query.query_id.clone(),
                        query_text: eval.query.text.clone(),
                        platform_id: platform_id.clone(),
                        person_id: person.person.person_id.clone(),
                        person_name: person.person.name.clone(),
                    },
                ));
            }
        }
    }
    let strata: Vec<String> = CATEGORIES.iter().map(|c| c.to_string()).collect();
    Ok(crate::stats::stratified_sample(&pool, &strata, per_stratum, seed)?)
}

/// Renders a stratified sample as a tab-separated annotation worksheet.
///
/// One row per (pair, criterion): the judge's verdict sits beside an empty
/// annotator column. The first line names the config hash and seed.
pub fn sample_worksheet(
    set: &RawEvaluationSet,
    per_stratum: usize,
    seed: u64,
) -> Result<String, RunnerError> {
    let pairs = sample_pairs(set, per_stratum, seed)?;
    let mut out = format!("# config={} seed={}\n", set.config.hash(), set.config.seed);
    out.push_str(
        "category\tquery_id\tplatform\tperson_id\tperson_name\tcriterion_id\t\
         criterion\tjudge_verdict\tjudge_justification\tannotator_verdict\n",
    );
    let clean = |s: &str| s.replace(['\t', '\n'], " ");
    for pair in &pairs {
        let evals = &set.platforms[&pair.platform_id];
        let eval = evals
            .iter()
            .find(|e| e.query.query_id == pair.query_id)
            .expect("sampled pair spans a stored query");
        let person = eval
            .ranked_persons
            .iter()
            .find(|p| p.person.person_id == pair.person_id)
            .expect("sampled pair spans a stored person");
        let criteria = set.criteria.get(&pair.query_id);
        for judgment in &person.judgments {
            let description = criteria
                .and_then(|list| list.iter().find(|c| c.criterion_id == judgment.criterion_id))
                .map(|c| c.description.as_str())
                .unwrap_or("");
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t\n",
                pair.category,
                pair.query_id,
                pair.platform_id,
                clean(&pair.person_id),
                clean(&pair.person_name),
                judgment.criterion_id,
                clean(description),
                judgment.verdict.as_str(),
                clean(&judgment.justification),
            ));
        }
    }
    Ok(out)
}

fn build_judge(config: &RunConfig, fixtures_dir: &Path) -> Result<Arc<dyn JudgeClient>, RunnerError> {
    match config.judge_backend.as_str() {
        "mock" => {
            let ruleset_path = fixtures_dir.join("ruleset.json");
            let ruleset = if ruleset_path.is_file() {
                MockRuleset::from_file(&ruleset_path)?
            } else {
                default_ruleset()
            };
            Ok(Arc::new(MockJudgeClient::new(ruleset)))
        }
        "http" => Ok(Arc::new(HttpJudgeClient::from_env("http-judge")?)),
        other => Err(RunnerError::UnknownBackend { role: "judge", name: other.to_string() }),
    }
}

fn build_search(config: &RunConfig) -> Result<Arc<dyn SearchClient>, RunnerError> {
    match config.search_backend.as_str() {
        "mock" => Ok(Arc::new(MockSearchClient)),
        "http" => Ok(Arc::new(HttpSearchClient::from_env("http-search", 1.0)?)),
        other => Err(RunnerError::UnknownBackend { role: "search", name: other.to_string() }),
    }
}

/// Builds the gateway for a run: backends by name, prompts from a directory
/// override or the built-in set, cache under the out root by default.
pub fn build_gateway(
    config: &RunConfig,
    fixtures_dir: &Path,
    cache_dir: PathBuf,
    prompts_dir: Option<&Path>,
) -> Result<Gateway, RunnerError> {
    let prompts = match prompts_dir {
        Some(dir) => PromptSet::from_dir(dir)?,
        None => PromptSet::builtin()?,
    };
    Ok(Gateway::new(
        build_judge(config, fixtures_dir)?,
        build_search(config)?,
        cache_dir,
        prompts,
        config.clone(),
    ))
}

/// What a finished (or invalidated) run left on disk.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_id: String,
    pub run_dir: PathBuf,
    /// False when the run exceeded the incompleteness budget.
    pub valid: bool,
    pub failed_persons: usize,
    /// The headline table, for printing to the terminal.
    pub summary: String,
}

fn run_id_for(config: &RunConfig) -> String {
    let stamp = config
        .run_stamp
        .clone()
        .unwrap_or_else(|| chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string());
    format!("{stamp}-{}", config.hash())
}

fn write_meta(
    run_dir: &Path,
    config: &RunConfig,
    ledger: &CostLatencyLedger,
    trace: &[CallEvent],
) -> Result<(), FsError> {
    fsio::write_json(&run_dir.join("meta").join("ledger.json"), ledger)?;
    let mut log = format!(
        "{}\n",
        serde_json::json!({"config_hash": config.hash(), "seed": config.seed})
    );
    for event in trace {
        log.push_str(&serde_json::to_string(event).expect("event serializes"));
        log.push('\n');
    }
    fsio::write_text(&run_dir.join("meta").join("run_log.jsonl"), &log)
}

/// Executes a full benchmark run and writes its artifact directory.
///
/// Returns `Ok` with `valid: false` (after writing an `INVALID` summary)
/// when judge failures exceed the incompleteness budget; other errors abort
/// with nothing written.
pub fn execute_run(
    config: RunConfig,
    fixtures_dir: &Path,
    out_root: &Path,
    cache_dir: Option<PathBuf>,
    prompts_dir: Option<&Path>,
) -> Result<RunOutcome, RunnerError> {
    config.validate()?;
    let fixtures = fsio::load_fixtures(fixtures_dir)?;
    let cache = cache_dir.unwrap_or_else(|| out_root.join("cache"));
    let gateway = build_gateway(&config, fixtures_dir, cache, prompts_dir)?;
    execute_prepared(&gateway, &fixtures, out_root)
}

/// Runs an already-assembled gateway against in-memory fixtures.
///
/// The run configuration is the gateway's; this is the injection point for
/// tests that need a custom judge or search client.
pub fn execute_prepared(
    gateway: &Gateway,
    fixtures: &crate::pipeline::FixtureSet,
    out_root: &Path,
) -> Result<RunOutcome, RunnerError> {
    let config = gateway.config().clone();
    let started = Instant::now();
    let run_id = run_id_for(&config);
    let run_dir = out_root.join(&run_id);
    if run_dir.exists() {
        return Err(RunnerError::RunDirExists(run_dir));
    }

    let set = match run_benchmark(gateway, fixtures) {
        Ok(set) => set,
        Err(PipelineError::EvaluationBudget { failed, total, budget, first }) => {
            // Mark the run invalid rather than vanish: the summary names the
            // budget breach, and the call log is preserved for diagnosis.
            let wall = started.elapsed().as_secs_f64();
            let trace = gateway.drain_trace();
            let ledger = build_ledger(&config, fixtures.queries.len(), &trace, 0, wall);
            let summary = format!(
                "# Evaluation Summary\n\n- run: {run_id}\n- status: **INVALID** — {failed} of \
                 {total} person-evaluations failed the judge, over the {:.1}% incompleteness \
                 budget\n- first failure: {first}\n\n_config {}, seed {}_\n",
                budget * 100.0,
                config.hash(),
                config.seed,
            );
            fsio::write_text(&run_dir.join("summary.md"), &summary)?;
            write_meta(&run_dir, &config, &ledger, &trace)?;
            return Ok(RunOutcome {
                run_id,
                run_dir,
                valid: false,
                failed_persons: failed,
                summary,
            });
        }
        Err(error) => return Err(error.into()),
    };

    let reports = build_reports(&set)?;
    let statistics = build_statistics(&set)?;
    let wall = started.elapsed().as_secs_f64();
    let trace = gateway.drain_trace();
    let normalized_records: usize = set
        .platforms
        .values()
        .flat_map(|evals| evals.iter().map(|e| e.ranked_persons.len()))
        .sum();
    let ledger = build_ledger(&config, set.criteria.len(), &trace, normalized_records, wall);

    let summary = render_run_summary(&set, &reports);
    fsio::write_artifact(&run_dir.join("eval.json"), &config, &set)?;
    fsio::write_artifact(&run_dir.join("scores.json"), &config, &reports)?;
    fsio::write_artifact(&run_dir.join("stats.json"), &config, &statistics)?;
    fsio::write_text(&run_dir.join("summary.md"), &summary)?;
    write_meta(&run_dir, &config, &ledger, &trace)?;

    Ok(RunOutcome {
        run_id,
        run_dir,
        valid: true,
        failed_persons: set.failures.len(),
        summary,
    })
}

/// The headline markdown summary: status, counts, and the main score table.
fn render_run_summary(
    set: &RawEvaluationSet,
    reports: &BTreeMap<String, PlatformReport>,
) -> String {
    let config = &set.config;
    let mut out = String::from("# Evaluation Summary\n\n");
    out.push_str(&format!("- run: {}\n", set.run_id));
    out.push_str("- status: VALID\n");
    out.push_str(&format!(
        "- queries: {}, platforms: {}\n",
        set.criteria.len(),
        set.platforms.len()
    ));
    if !set.failures.is_empty() {
        out.push_str(&format!(
            "- judge failures within budget: {} (see eval.json)\n",
            set.failures.len()
        ));
    }
    out.push('\n');
    out.push_str(&crate::report::render_summary(reports, crate::report::ReportFormat::Markdown));
    out.push_str(&format!("\n_config {}, seed {}_\n", config.hash(), config.seed));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mock::corpus::{generate_corpus, SyntheticCorpusSpec};

    fn corpus_dir(spec: &SyntheticCorpusSpec) -> (tempfile::TempDir, crate::mock::corpus::GeneratedCorpus) {
        let corpus = generate_corpus(spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        fsio::write_fixtures(dir.path(), &corpus.fixtures).unwrap();
        fsio::write_json(&dir.path().join("ruleset.json"), &corpus.ruleset).unwrap();
        (dir, corpus)
    }

    fn pinned_config() -> RunConfig {
        RunConfig { workers: 4, run_stamp: Some("test".into()), ..RunConfig::default() }
    }

    #[test]
    fn full_run_writes_the_artifact_directory() {
        let (fixtures, corpus) = corpus_dir(&SyntheticCorpusSpec {
            dropout_rate: 0.1,
            ..Default::default()
        });
        let out = tempfile::tempdir().unwrap();
        let outcome =
            execute_run(pinned_config(), fixtures.path(), out.path(), None, None).unwrap();
        assert!(outcome.valid);
        assert_eq!(outcome.failed_persons, 0);
        for name in ["eval.json", "scores.json", "stats.json", "summary.md"] {
            assert!(outcome.run_dir.join(name).is_file(), "{name} missing");
        }
        assert!(outcome.run_dir.join("meta").join("ledger.json").is_file());
        assert!(outcome.run_dir.join("meta").join("run_log.jsonl").is_file());

        // The evaluation set round-trips and matches the planted truth.
        let eval: fsio::Artifact<RawEvaluationSet> =
            fsio::read_artifact(&outcome.run_dir.join("eval.json")).unwrap();
        assert_eq!(eval.data.platforms.len(), 4);
        for (platform, per_query) in &corpus.truth.qualified {
            let evals = eval.data.platform(platform).unwrap();
            for eval in evals {
                assert_eq!(
                    eval.qualified_count, per_query[&eval.query.query_id],
                    "{platform}/{}",
                    eval.query.query_id
                );
            }
        }

        // Dropout strictly orders the platforms in the reports.
        let scores: fsio::Artifact<BTreeMap<String, PlatformReport>> =
            fsio::read_artifact(&outcome.run_dir.join("scores.json")).unwrap();
        let overalls: Vec<f64> =
            ["alpha", "beta", "gamma", "delta"].iter().map(|p| scores.data[*p].overall.value).collect();
        assert!(overalls.windows(2).all(|w| w[0] > w[1]), "{overalls:?}");
        // Intervals bracket their values.
        for report in scores.data.values() {
            for ci in [
                &report.relevance_precision,
                &report.effective_coverage,
                &report.information_utility,
                &report.overall,
            ] {
                assert!(ci.lower <= ci.value && ci.value <= ci.upper);
            }
            report.check_overall(eval.data.config.dimension_weights).unwrap();
            assert!(report.cost_units > 0.0);
            assert_eq!(report.wall_seconds, 0.0);
        }

        // Rerunning with the same stamp refuses to overwrite.
        match execute_run(pinned_config(), fixtures.path(), out.path(), None, None) {
            Err(RunnerError::RunDirExists(_)) => {}
            other => panic!("expected RunDirExists, got {other:?}"),
        }
    }

    #[test]
    fn ledger_accounts_every_gateway_call_once() {
        let (fixtures, _corpus) = corpus_dir(&SyntheticCorpusSpec::default());
        let out = tempfile::tempdir().unwrap();
        let outcome =
            execute_run(pinned_config(), fixtures.path(), out.path(), None, None).unwrap();
        let ledger: CostLatencyLedger =
            fsio::read_json(&outcome.run_dir.join("meta").join("ledger.json")).unwrap();
        let eval: fsio::Artifact<RawEvaluationSet> =
            fsio::read_artifact(&outcome.run_dir.join("eval.json")).unwrap();

        // Stage calls reconcile with the gateway counters: judge + search ops
        // all land in exactly one stage.
        let judge_and_search_calls = ledger.stages["extraction"].calls
            + ledger.stages["web_verification"].calls
            + ledger.stages["llm_verification"].calls;
        let counters = eval.data.counters;
        assert_eq!(judge_and_search_calls, counters.ops, "{counters:?}");

        // 12 queries × 12 persons × (3 verifications + 1 utility) + 12 extractions.
        assert_eq!(ledger.stages["extraction"].calls, 12);
        assert_eq!(ledger.stages["llm_verification"].calls, 4 * 12 * 12 * 4);
        assert_eq!(ledger.stages["web_verification"].calls, 4 * 12 * 12 * 3);
        assert_eq!(ledger.queries, 12);

        let totals = CostLatencyLedger::sum_stages(&ledger.stages);
        assert_eq!(ledger.totals.calls, totals.calls);
        assert!((ledger.totals.units - totals.units).abs() < 1e-9);
        assert!((ledger.totals.cost_units - totals.cost_units).abs() < 1e-9);
        assert!((ledger.totals.wall_seconds - totals.wall_seconds).abs() < 1e-9);
        let summary = account(&ledger);
        assert!((summary.cost_per_query - totals.cost_units / 12.0).abs() < 1e-12);
        assert!(totals.cost_units > 0.0);

        // Empty ledger degenerates to zeros.
        let empty = CostLatencyLedger {
            config_hash: "0".into(),
            seed: 0,
            queries: 0,
            stages: BTreeMap::new(),
            totals: LedgerTotals::default(),
        };
        let zero = account(&empty);
        assert_eq!(zero.cost_per_query, 0.0);
        assert_eq!(zero.wall_per_query, 0.0);
    }

    #[test]
    fn statistics_pair_counts_cover_the_query_set() {
        let (fixtures, _corpus) = corpus_dir(&SyntheticCorpusSpec {
            dropout_rate: 0.1,
            ..Default::default()
        });
        let out = tempfile::tempdir().unwrap();
        let outcome =
            execute_run(pinned_config(), fixtures.path(), out.path(), None, None).unwrap();
        let stats: fsio::Artifact<RunStatistics> =
            fsio::read_artifact(&outcome.run_dir.join("stats.json")).unwrap();
        // 4 platforms → 12 ordered pairs, each summing to the query count.
        assert_eq!(stats.data.comparisons.len(), 12);
        for pair in &stats.data.comparisons {
            assert_eq!(pair.wins + pair.ties + pair.losses, 12);
            assert!((0.0..=1.0).contains(&pair.p_value));
        }
        // alpha strictly dominates delta on per-query overalls.
        let alpha_delta = stats
            .data
            .comparisons
            .iter()
            .find(|c| c.platform_a == "alpha" && c.platform_b == "delta")
            .unwrap();
        assert!(alpha_delta.wins > alpha_delta.losses);
        assert_eq!(stats.data.scenario_cv.len(), 4);
    }

    #[test]
    fn sample_worksheet_is_stratified_and_seeded() {
        let (fixtures, _corpus) = corpus_dir(&SyntheticCorpusSpec::default());
        let out = tempfile::tempdir().unwrap();
        let outcome =
            execute_run(pinned_config(), fixtures.path(), out.path(), None, None).unwrap();
        let eval: fsio::Artifact<RawEvaluationSet> =
            fsio::read_artifact(&outcome.run_dir.join("eval.json")).unwrap();

        let pairs = sample_pairs(&eval.data, 5, 7).unwrap();
        assert_eq!(pairs.len(), 20);
        for category in CATEGORIES {
            assert_eq!(pairs.iter().filter(|p| p.category == category).count(), 5);
        }
        let again = sample_pairs(&eval.data, 5, 7).unwrap();
        assert_eq!(
            serde_json::to_string(&pairs).unwrap(),
            serde_json::to_string(&again).unwrap()
        );

        let sheet = sample_worksheet(&eval.data, 5, 7).unwrap();
        let lines: Vec<&str> = sheet.lines().collect();
        assert!(lines[0].starts_with("# config="));
        assert!(lines[1].starts_with("category\tquery_id"));
        // 20 pairs × 3 criteria each.
        assert_eq!(lines.len(), 2 + 60);

        // Oversized request names the stratum.
        match sample_pairs(&eval.data, 100_000, 7) {
            Err(RunnerError::Stats(StatsError::UndersizedStratum { .. })) => {}
            other => panic!("expected undersized stratum, got {other:?}"),
        }
    }

    /// Wraps the mock judge; answers garbage whenever asked to verify the
    /// victim person, so exactly those evaluations fail.
    struct SabotagedJudge {
        inner: MockJudgeClient,
        victim: String,
    }

    impl crate::gateway::JudgeClient for SabotagedJudge {
        fn id(&self) -> &str {
            "sabotaged"
        }

        fn complete(&self, request: &crate::gateway::JudgeRequest) -> Result<String, GatewayError> {
            let payload = request.payload.get("repair_of").unwrap_or(&request.payload);
            let is_victim = payload
                .pointer("/person/person_id")
                .and_then(|v| v.as_str())
                .is_some_and(|id| id.ends_with(&self.victim));
            if request.operation == crate::gateway::JudgeOp::Verify && is_victim {
                return Ok("sorry, I cannot respond in JSON today".into());
            }
            self.inner.complete(request)
        }
    }

    #[test]
    fn budget_breach_marks_the_run_invalid() {
        let (_fixtures, corpus) = corpus_dir(&SyntheticCorpusSpec::default());
        let out = tempfile::tempdir().unwrap();
        let cache = tempfile::tempdir().unwrap();
        let config = RunConfig { incompleteness_budget: 0.0, ..pinned_config() };
        let gateway = Gateway::new(
            Arc::new(SabotagedJudge {
                inner: MockJudgeClient::new(corpus.ruleset.clone()),
                victim: "p-000-03".into(),
            }),
            Arc::new(MockSearchClient),
            cache.path().join("cache"),
            PromptSet::builtin().unwrap(),
            config,
        );
        let outcome = execute_prepared(&gateway, &corpus.fixtures, out.path()).unwrap();
        assert!(!outcome.valid);
        assert_eq!(outcome.failed_persons, 4);
        assert!(outcome.summary.contains("INVALID"));

        let summary =
            std::fs::read_to_string(outcome.run_dir.join("summary.md")).unwrap();
        assert!(summary.contains("INVALID"), "{summary}");
        assert!(summary.contains("p-000-03"), "{summary}");
        // No score artifacts for an invalid run, but the call log survives.
        assert!(!outcome.run_dir.join("eval.json").exists());
        assert!(!outcome.run_dir.join("scores.json").exists());
        assert!(outcome.run_dir.join("meta").join("run_log.jsonl").is_file());
        assert!(outcome.run_dir.join("meta").join("ledger.json").is_file());
    }
}
