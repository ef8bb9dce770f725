//! Core domain types shared by every other module.
//!
//! Everything here is an immutable value record: queries, extracted criteria,
//! per-criterion judgments, normalized person records, per-person and
//! per-query evaluations, and the run configuration. The verdict→score map
//! and the relevance-grade mean live here too, since scoring, ablation, and
//! the pipeline all need the same arithmetic.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Version stamp embedded in every on-disk container this tool writes.
pub const SCHEMA_VERSION: u32 = 1;

/// Closed set of query languages accepted by the benchmark.
pub const LANGUAGES: [&str; 4] = ["en", "pt", "es", "nl"];

/// Closed set of query categories (also the sampling strata).
pub const CATEGORIES: [&str; 4] = ["recruiting", "b2b", "expert", "influencer"];

/// Inclusive bounds on how many criteria one query may extract to.
pub const MIN_CRITERIA: usize = 1;
pub const MAX_CRITERIA: usize = 8;

/// Errors produced by core-model operations.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("relevance grade requires at least one judgment")]
    EmptyJudgments,
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error("stored relevance grade {stored} disagrees with recomputed {recomputed}")]
    GradeMismatch { stored: f64, recomputed: f64 },
}

/// One benchmark query with its manifest metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub query_id: String,
    pub text: String,
    /// Lowercase language code; validated against [`LANGUAGES`].
    pub language: String,
    /// Query category; validated against [`CATEGORIES`].
    pub category: String,
    /// Whether the query has an (approximately) closed answer set.
    #[serde(default)]
    pub deterministic: bool,
}

/// A single violated invariant found by [`validate_query_spec`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Name of the offending field.
    pub field: String,
    pub message: String,
}

/// Checks a query against the manifest invariants.
///
/// Violations are data, not failures: an empty list means the query is valid.
pub fn validate_query_spec(spec: &QuerySpec) -> Vec<Violation> {
    let mut out = Vec::new();
    if spec.query_id.trim().is_empty() {
        out.push(Violation {
            field: "query_id".into(),
            message: "query_id must be non-empty".into(),
        });
    }
    if spec.text.trim().is_empty() {
        out.push(Violation {
            field: "text".into(),
            message: "query text must be non-empty".into(),
        });
    }
    if !LANGUAGES.contains(&spec.language.to_lowercase().as_str()) {
        out.push(Violation {
            field: "language".into(),
            message: format!("unknown language {:?}; expected one of {:?}", spec.language, LANGUAGES),
        });
    }
    if !CATEGORIES.contains(&spec.category.to_lowercase().as_str()) {
        out.push(Violation {
            field: "category".into(),
            message: format!("unknown category {:?}; expected one of {:?}", spec.category, CATEGORIES),
        });
    }
    out
}

/// One independently checkable condition extracted from a query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Criterion {
    /// Short identifier unique within its query (c1, c2, ...).
    pub criterion_id: String,
    /// The checkable condition text.
    pub description: String,
    /// Coarse label such as role, company, location, skill, follower-count, platform.
    pub kind: String,
}

/// Three-valued verdict for one (person, criterion) check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Met,
    PartiallyMet,
    NotMet,
}

impl Verdict {
    /// Parses the wire form used in judge output.
    pub fn parse(s: &str) -> Option<Verdict> {
        match s.trim() {
            "met" => Some(Verdict::Met),
            "partially_met" => Some(Verdict::PartiallyMet),
            "not_met" => Some(Verdict::NotMet),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Met => "met",
            Verdict::PartiallyMet => "partially_met",
            Verdict::NotMet => "not_met",
        }
    }
}

/// Verdict on one criterion for one person, with the judge's evidence trail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionJudgment {
    pub criterion_id: String,
    pub verdict: Verdict,
    pub justification: String,
    /// Evidence URLs; may be empty only when the verdict is not_met.
    pub sources: Vec<String>,
}

impl CriterionJudgment {
    /// True when the evidence invariant holds (positive verdicts cite sources).
    pub fn evidence_ok(&self) -> bool {
        self.verdict == Verdict::NotMet || !self.sources.is_empty()
    }
}

/// Maps a verdict to its numeric score under the given config.
///
/// met → 1.0, partially_met → `config.partial_credit`, not_met → 0.0.
/// Setting `partial_credit` to 0.0 turns scoring binary without a code change.
pub fn judgment_score(verdict: Verdict, config: &RunConfig) -> f64 {
    match verdict {
        Verdict::Met => 1.0,
        Verdict::PartiallyMet => config.partial_credit,
        Verdict::NotMet => 0.0,
    }
}

/// Mean of the judgment scores; the person's relevance grade.
pub fn relevance_grade(judgments: &[CriterionJudgment], config: &RunConfig) -> Result<f64, ModelError> {
    if judgments.is_empty() {
        return Err(ModelError::EmptyJudgments);
    }
    let sum: f64 = judgments.iter().map(|j| judgment_score(j.verdict, config)).sum();
    Ok(sum / judgments.len() as f64)
}

/// A person record under the unified 14-field schema.
///
/// `person_id` and `name` are always present; everything else is nullable.
/// The `platform` tag is run metadata, not part of the schema, and is omitted
/// from serialized output when absent so blinded records carry no trace of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonRecord {
    /// Profile URL, or a stable content hash when no URL exists.
    pub person_id: String,
    pub name: String,
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default)]
    pub company: Option<String>,
    #[serde(default)]
    pub location: Option<String>,
    #[serde(default)]
    pub linkedin_url: Option<String>,
    #[serde(default)]
    pub twitter_url: Option<String>,
    #[serde(default)]
    pub email: Option<String>,
    #[serde(default)]
    pub bio: Option<String>,
    #[serde(default)]
    pub experience: Option<Vec<String>>,
    #[serde(default)]
    pub education: Option<Vec<String>>,
    #[serde(default)]
    pub skills: Option<Vec<String>>,
    #[serde(default)]
    pub match_explanation: Option<String>,
    #[serde(default)]
    pub source_urls: Option<Vec<String>>,
    /// Which platform produced the record. Stripped before any judge call.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub platform: Option<String>,
}

impl PersonRecord {
    /// A record carrying only the two required fields.
    pub fn minimal(person_id: impl Into<String>, name: impl Into<String>) -> Self {
        PersonRecord {
            person_id: person_id.into(),
            name: name.into(),
            title: None,
            company: None,
            location: None,
            linkedin_url: None,
            twitter_url: None,
            email: None,
            bio: None,
            experience: None,
            education: None,
            skills: None,
            match_explanation: None,
            source_urls: None,
            platform: None,
        }
    }
}

/// Names of the 14 unified-schema fields, in canonical order.
pub const SCHEMA_FIELDS: [&str; 14] = [
    "person_id",
    "name",
    "title",
    "company",
    "location",
    "linkedin_url",
    "twitter_url",
    "email",
    "bio",
    "experience",
    "education",
    "skills",
    "match_explanation",
    "source_urls",
];

/// The three utility sub-scores, each a fraction in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityScores {
    pub structural: f64,
    pub evidence: f64,
    pub actionability: f64,
}

impl UtilityScores {
    /// Equal-weight mean of the three sub-scores.
    pub fn mean(&self) -> f64 {
        (self.structural + self.evidence + self.actionability) / 3.0
    }

    /// Clamps each component into [0, 1], reporting whether anything moved.
    pub fn clamped(&self) -> (UtilityScores, bool) {
        let clamp = |v: f64| v.clamp(0.0, 1.0);
        let out = UtilityScores {
            structural: clamp(self.structural),
            evidence: clamp(self.evidence),
            actionability: clamp(self.actionability),
        };
        let moved = out != *self;
        (out, moved)
    }
}

/// Fully judged person: verdicts, grade, and utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonEvaluation {
    pub person: PersonRecord,
    /// One judgment per extracted criterion, in criterion order.
    pub judgments: Vec<CriterionJudgment>,
    /// Mean judgment score; always recomputable from `judgments`.
    pub relevance_grade: f64,
    pub utility: UtilityScores,
}

impl PersonEvaluation {
    /// Builds an evaluation, computing the grade from the judgments.
    pub fn new(
        person: PersonRecord,
        judgments: Vec<CriterionJudgment>,
        utility: UtilityScores,
        config: &RunConfig,
    ) -> Result<Self, ModelError> {
        let relevance_grade = relevance_grade(&judgments, config)?;
        Ok(PersonEvaluation { person, judgments, relevance_grade, utility })
    }

    /// Verifies the stored grade against a recomputation, to 1e-12.
    pub fn check_grade(&self, config: &RunConfig) -> Result<(), ModelError> {
        let recomputed = relevance_grade(&self.judgments, config)?;
        if (recomputed - self.relevance_grade).abs() > 1e-12 {
            return Err(ModelError::GradeMismatch { stored: self.relevance_grade, recomputed });
        }
        Ok(())
    }
}

/// One platform's judged output for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEvaluation {
    pub query: QuerySpec,
    /// Evaluated persons in platform rank order, truncated to `max_results`.
    pub ranked_persons: Vec<PersonEvaluation>,
    /// Persons whose grade met the qualified threshold.
    pub qualified_count: usize,
    /// True iff at least one person qualified.
    pub task_success: bool,
}

impl QueryEvaluation {
    /// Builds the evaluation, deriving qualified count and task success.
    pub fn new(query: QuerySpec, ranked_persons: Vec<PersonEvaluation>, config: &RunConfig) -> Self {
        let qualified_count = ranked_persons
            .iter()
            .filter(|p| p.relevance_grade >= config.qualified_threshold)
            .count();
        QueryEvaluation { query, ranked_persons, qualified_count, task_success: qualified_count >= 1 }
    }

    /// Relevance grades in rank order, the input to ranked-list metrics.
    pub fn grades(&self) -> Vec<f64> {
        self.ranked_persons.iter().map(|p| p.relevance_grade).collect()
    }
}

/// Per-call cost units for the ledger, one entry per pipeline stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitCosts {
    pub extraction: f64,
    pub web_verification: f64,
    pub llm_verification: f64,
    pub normalization: f64,
}

impl Default for UnitCosts {
    fn default() -> Self {
        // Preset calibrated so a ~119-query run lands near real-world spend;
        // override in the config file when prices drift.
        UnitCosts { extraction: 0.018, web_verification: 0.010, llm_verification: 0.004, normalization: 0.0 }
    }
}

/// Every knob a run depends on. The serialized form covers evaluation
/// semantics only (execution knobs are skipped), and its hash names the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Rank cutoff for ranked-list metrics.
    pub k: usize,
    /// Hard cap on evaluated results per query.
    pub max_results: usize,
    /// Inclusive grade threshold for a person to count as qualified.
    pub qualified_threshold: f64,
    /// Score assigned to partially_met verdicts.
    pub partial_credit: f64,
    /// Weights for (precision, coverage, utility); must sum to 1.
    pub dimension_weights: [f64; 3],
    pub seed: u64,
    pub bootstrap_iters: usize,
    pub confidence_level: f64,
    /// Parallel person-evaluation workers. Execution mechanics, not
    /// evaluation semantics: never serialized, so artifacts and the config
    /// hash are identical no matter how many workers computed them.
    #[serde(skip_serializing, default = "default_workers")]
    pub workers: usize,
    /// Judge backend selector: "mock" or "http".
    pub judge_backend: String,
    /// Search backend selector: "mock" or "http".
    pub search_backend: String,
    /// Sampling temperature for criteria extraction (stability probes raise it).
    pub temperature: f64,
    /// Max search calls the judge may spend per criterion.
    pub search_budget: usize,
    /// Fraction of person-evaluations allowed to fail before a run is invalid.
    pub incompleteness_budget: f64,
    /// Per-call cost units for ledger accounting.
    #[serde(default)]
    pub unit_costs: UnitCosts,
    /// Fixed stamp for the run id; defaults to wall-clock UTC when absent.
    /// Pin it when byte-identical output directories matter. Naming only,
    /// so it is excluded from serialization and the config hash.
    #[serde(skip_serializing, default)]
    pub run_stamp: Option<String>,
}

fn default_workers() -> usize {
    RunConfig::default().workers
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: 10,
            max_results: 15,
            qualified_threshold: 0.5,
            partial_credit: 0.5,
            dimension_weights: [1.0 / 3.0; 3],
            seed: 42,
            bootstrap_iters: 1000,
            confidence_level: 0.95,
            workers: 8,
            judge_backend: "mock".into(),
            search_backend: "mock".into(),
            temperature: 0.0,
            search_budget: 3,
            incompleteness_budget: 0.02,
            unit_costs: UnitCosts::default(),
            run_stamp: None,
        }
    }
}

impl RunConfig {
    /// Checks every config invariant, returning the first violation found.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.k == 0 {
            return Err(ModelError::InvalidConfig("K must be positive".into()));
        }
        if self.k > self.max_results {
            return Err(ModelError::InvalidConfig(format!(
                "K ({}) must not exceed max_results ({})",
                self.k, self.max_results
            )));
        }
        if !(self.qualified_threshold > 0.0 && self.qualified_threshold <= 1.0) {
            return Err(ModelError::InvalidConfig("qualified_threshold must lie in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.partial_credit) {
            return Err(ModelError::InvalidConfig("partial_credit must lie in [0, 1]".into()));
        }
        if self.dimension_weights.iter().any(|w| *w < 0.0) {
            return Err(ModelError::InvalidConfig("dimension weights must be non-negative".into()));
        }
        let sum: f64 = self.dimension_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ModelError::InvalidConfig(format!("dimension weights sum to {sum}, expected 1")));
        }
        if !(self.confidence_level > 0.0 && self.confidence_level < 1.0) {
            return Err(ModelError::InvalidConfig("confidence_level must lie in (0, 1)".into()));
        }
        if self.bootstrap_iters == 0 {
            return Err(ModelError::InvalidConfig("bootstrap_iters must be positive".into()));
        }
        if self.workers == 0 {
            return Err(ModelError::InvalidConfig("workers must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.incompleteness_budget) {
            return Err(ModelError::InvalidConfig("incompleteness_budget must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Short content hash naming this configuration in run ids and artifacts.
    pub fn hash(&self) -> String {
        // serde_json's map type keeps keys ordered, so this is canonical.
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        hex::encode(&digest[..6])
    }
}

/// A dimension score together with its bootstrap interval bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWithCi {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ScoreWithCi {
    /// A score with a degenerate (zero-width) interval.
    pub fn point(value: f64) -> Self {
        ScoreWithCi { value, lower: value, upper: value }
    }
}

/// Per-category score breakdown inside a platform report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub category: String,
    pub queries: usize,
    pub relevance_precision: f64,
    pub effective_coverage: f64,
    pub information_utility: f64,
    pub overall: f64,
}

/// Everything reported about one platform in one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformReport {
    pub platform_id: String,
    pub relevance_precision: ScoreWithCi,
    pub effective_coverage: ScoreWithCi,
    pub information_utility: ScoreWithCi,
    pub overall: ScoreWithCi,
    /// Fraction of queries with at least one qualified result.
    pub tcr: f64,
    pub mean_qualified: f64,
    pub per_scenario: Vec<ScenarioRow>,
    pub cost_units: f64,
    pub wall_seconds: f64,
}

impl PlatformReport {
    /// Verifies that the overall score is the weighted dimension combination.
    ///
    /// Tolerance 0.05 absorbs the one-decimal rounding applied at emission.
    pub fn check_overall(&self, weights: [f64; 3]) -> Result<(), ModelError> {
        let expect = weights[0] * self.relevance_precision.value
            + weights[1] * self.effective_coverage.value
            + weights[2] * self.information_utility.value;
        if (expect - self.overall.value).abs() > 0.05 {
            return Err(ModelError::InvalidConfig(format!(
                "overall {} does not match weighted dimensions {expect}",
                self.overall.value
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn judgment(verdict: Verdict) -> CriterionJudgment {
        CriterionJudgment {
            criterion_id: "c1".into(),
            verdict,
            justification: "test".into(),
            sources: if verdict == Verdict::NotMet { vec![] } else { vec!["https://example.com".into()] },
        }
    }

    #[test]
    fn judgment_score_maps_the_three_verdicts() {
        let config = RunConfig::default();
        assert_eq!(judgment_score(Verdict::Met, &config), 1.0);
        assert_eq!(judgment_score(Verdict::PartiallyMet, &config), 0.5);
        assert_eq!(judgment_score(Verdict::NotMet, &config), 0.0);
    }

    #[test]
    fn binary_partial_credit_zeroes_partial_verdicts() {
        let config = RunConfig { partial_credit: 0.0, ..RunConfig::default() };
        assert_eq!(judgment_score(Verdict::PartiallyMet, &config), 0.0);
    }

    #[test]
    fn relevance_grade_is_the_mean() {
        let config = RunConfig::default();
        let all_met = vec![judgment(Verdict::Met); 3];
        assert_eq!(relevance_grade(&all_met, &config).unwrap(), 1.0);

        let mixed = vec![judgment(Verdict::Met), judgment(Verdict::PartiallyMet), judgment(Verdict::NotMet)];
        assert!((relevance_grade(&mixed, &config).unwrap() - 0.5).abs() < 1e-12);

        // Grade exactly at the default threshold counts as qualified (inclusive).
        let half = vec![judgment(Verdict::Met), judgment(Verdict::NotMet)];
        let grade = relevance_grade(&half, &config).unwrap();
        assert_eq!(grade, 0.5);
        assert!(grade >= config.qualified_threshold);
    }

    #[test]
    fn relevance_grade_rejects_empty_input() {
        assert!(matches!(relevance_grade(&[], &RunConfig::default()), Err(ModelError::EmptyJudgments)));
    }

    #[test]
    fn query_validation_flags_each_bad_field() {
        let good = QuerySpec {
            query_id: "q1".into(),
            text: "Find senior ML engineers at Google in Bay Area".into(),
            language: "en".into(),
            category: "recruiting".into(),
            deterministic: false,
        };
        assert!(validate_query_spec(&good).is_empty());

        let empty_text = QuerySpec { text: "  ".into(), ..good.clone() };
        let violations = validate_query_spec(&empty_text);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].field, "text");

        let bad_language = QuerySpec { language: "FR".into(), ..good.clone() };
        let violations = validate_query_spec(&bad_language);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].field, "language");

        let bad_category = QuerySpec { category: "sales".into(), ..good };
        assert_eq!(validate_query_spec(&bad_category)[0].field, "category");
    }

    #[test]
    fn uppercase_language_codes_are_accepted() {
        let spec = QuerySpec {
            query_id: "q1".into(),
            text: "anyone".into(),
            language: "EN".into(),
            category: "Recruiting".into(),
            deterministic: false,
        };
        assert!(validate_query_spec(&spec).is_empty());
    }

    #[test]
    fn default_config_is_valid_and_hash_is_stable() {
        let config = RunConfig::default();
        config.validate().unwrap();
        assert_eq!(config.hash(), config.hash());

        let reseeded = RunConfig { seed: 43, ..RunConfig::default() };
        assert_ne!(config.hash(), reseeded.hash());

        // Execution knobs name how a run is computed, not what it computes:
        // they must not move the hash or leak into serialized artifacts.
        let reworked = RunConfig {
            workers: 1,
            run_stamp: Some("pinned".into()),
            ..RunConfig::default()
        };
        assert_eq!(config.hash(), reworked.hash());
        let json = serde_json::to_string(&reworked).unwrap();
        assert!(!json.contains("workers"));
        assert!(!json.contains("run_stamp"));
    }

    #[test]
    fn config_validation_catches_bad_weights_and_thresholds() {
        let bad_weights = RunConfig { dimension_weights: [0.5, 0.5, 0.5], ..RunConfig::default() };
        assert!(bad_weights.validate().is_err());

        let zero_threshold = RunConfig { qualified_threshold: 0.0, ..RunConfig::default() };
        assert!(zero_threshold.validate().is_err());

        let k_over_max = RunConfig { k: 20, max_results: 15, ..RunConfig::default() };
        assert!(k_over_max.validate().is_err());
    }

    #[test]
    fn person_record_serializes_the_schema_field_names() {
        let record = PersonRecord::minimal("https://linkedin.com/in/x", "X");
        let value = serde_json::to_value(&record).unwrap();
        let mut keys: Vec<&str> = value.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        keys.sort_unstable();
        let mut expected = SCHEMA_FIELDS.to_vec();
        expected.sort_unstable();
        assert_eq!(keys, expected);
    }

    #[test]
    fn platform_tag_is_omitted_when_absent() {
        let mut record = PersonRecord::minimal("id", "Name");
        record.platform = Some("beta".into());
        let tagged = serde_json::to_string(&record).unwrap();
        assert!(tagged.contains("\"platform\""));
        record.platform = None;
        let untagged = serde_json::to_string(&record).unwrap();
        assert!(!untagged.contains("\"platform\""));
    }

    #[test]
    fn person_evaluation_checks_its_grade_invariant() {
        let config = RunConfig::default();
        let judgments = vec![judgment(Verdict::Met), judgment(Verdict::NotMet)];
        let utility = UtilityScores { structural: 0.5, evidence: 0.5, actionability: 0.5 };
        let eval =
            PersonEvaluation::new(PersonRecord::minimal("id", "Name"), judgments, utility, &config).unwrap();
        eval.check_grade(&config).unwrap();

        let mut corrupted = eval;
        corrupted.relevance_grade = 0.9;
        assert!(corrupted.check_grade(&config).is_err());
    }

    #[test]
    fn query_evaluation_counts_qualified_and_task_success() {
        let config = RunConfig::default();
        let query = QuerySpec {
            query_id: "q1".into(),
            text: "t".into(),
            language: "en".into(),
            category: "b2b".into(),
            deterministic: false,
        };
        let person = |verdicts: &[Verdict]| {
            let judgments: Vec<_> = verdicts.iter().map(|v| judgment(*v)).collect();
            PersonEvaluation::new(
                PersonRecord::minimal("id", "Name"),
                judgments,
                UtilityScores { structural: 1.0, evidence: 1.0, actionability: 1.0 },
                &config,
            )
            .unwrap()
        };
        let eval = QueryEvaluation::new(
            query.clone(),
            vec![person(&[Verdict::Met]), person(&[Verdict::NotMet]), person(&[Verdict::Met, Verdict::NotMet])],
            &config,
        );
        assert_eq!(eval.qualified_count, 2);
        assert!(eval.task_success);

        let empty = QueryEvaluation::new(query, vec![], &config);
        assert_eq!(empty.qualified_count, 0);
        assert!(!empty.task_success);
    }

    #[test]
    fn utility_clamp_reports_out_of_range_components() {
        let raw = UtilityScores { structural: 1.2, evidence: -0.1, actionability: 0.5 };
        let (clamped, moved) = raw.clamped();
        assert!(moved);
        assert_eq!(clamped.structural, 1.0);
        assert_eq!(clamped.evidence, 0.0);

        let fine = UtilityScores { structural: 0.9, evidence: 0.6, actionability: 0.3 };
        let (same, moved) = fine.clamped();
        assert!(!moved);
        assert!((same.mean() - 0.6).abs() < 1e-12);
    }

    proptest! {
        /// met ≥ partially_met ≥ not_met for every partial credit setting.
        #[test]
        fn judgment_score_is_monotone(partial in 0.0f64..=1.0) {
            let config = RunConfig { partial_credit: partial, ..RunConfig::default() };
            let met = judgment_score(Verdict::Met, &config);
            let partially = judgment_score(Verdict::PartiallyMet, &config);
            let not = judgment_score(Verdict::NotMet, &config);
            prop_assert!(met >= partially && partially >= not);
        }

        /// The grade never leaves [0, 1] and ignores judgment order.
        #[test]
        fn relevance_grade_bounded_and_permutation_invariant(
            verdicts in proptest::collection::vec(0usize..3, 1..20),
            rotation in 0usize..20,
        ) {
            let config = RunConfig::default();
            let as_judgment = |i: &usize| judgment(match i {
                0 => Verdict::Met,
                1 => Verdict::PartiallyMet,
                _ => Verdict::NotMet,
            });
            let judgments: Vec<_> = verdicts.iter().map(as_judgment).collect();
            let grade = relevance_grade(&judgments, &config).unwrap();
            prop_assert!((0.0..=1.0).contains(&grade));

            let mut rotated = judgments.clone();
            rotated.rotate_left(rotation % judgments.len().max(1));
            let rotated_grade = relevance_grade(&rotated, &config).unwrap();
            prop_assert!((grade - rotated_grade).abs() < 1e-12);
        }

        /// Qualified status can only switch off as the threshold rises.
        #[test]
        fn qualified_is_monotone_in_threshold(
            grade in 0.0f64..=1.0,
            t_low in 0.01f64..=1.0,
            t_high in 0.01f64..=1.0,
        ) {
            let (lo, hi) = if t_low <= t_high { (t_low, t_high) } else { (t_high, t_low) };
            let qualified_at = |t: f64| grade >= t;
            prop_assert!(qualified_at(hi) <= qualified_at(lo));
        }
    }
}
