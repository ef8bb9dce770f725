//! Synthetic fixture generation with planted ground truth.
//!
//! [`generate_corpus`] builds queries, per-platform ranked outputs, and a
//! matching mock ruleset in one stroke, planting a known mix of full,
//! partial, near-miss, and failing people. Because the truth is planted,
//! tests can assert exact downstream effects: an injected task-failure rate
//! must surface as exactly that completion-rate drop, injected false
//! positives must strictly lower precision, and so on.

use std::collections::HashMap;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mock::{CriteriaRule, CriterionRule, Expectation, MatchMode, MockRuleset, UtilityRules};
use crate::model::{PersonRecord, QuerySpec, CATEGORIES};
use crate::normalize::{FieldMapping, ParserKind};
use crate::pipeline::{FixtureSet, PlatformFixtures};
use crate::stats::mix_seed;

const FIRST_NAMES: [&str; 20] = [
    "Avery", "Blake", "Carmen", "Diego", "Elena", "Farid", "Grace", "Hiro", "Ines", "Jonas",
    "Kira", "Liam", "Mara", "Noor", "Owen", "Priya", "Quinn", "Rosa", "Sven", "Tara",
];

const LAST_NAMES: [&str; 20] = [
    "Stone", "Alvarez", "Okafor", "Lindqvist", "Tanaka", "Moreau", "Silva", "Novak", "Reyes",
    "Haugen", "Petrov", "Keller", "Marsh", "Iversen", "Duarte", "Varga", "Boateng", "Whitfield",
    "Castellanos", "Brandt",
];

/// (full title, weaker title that still earns partial credit)
const ROLES: [(&str, &str); 12] = [
    ("Senior Machine Learning Engineer", "Machine Learning Engineer"),
    ("Staff Data Platform Engineer", "Data Platform Engineer"),
    ("Principal Product Designer", "Product Designer"),
    ("Backend Infrastructure Architect", "Infrastructure Architect"),
    ("Growth Marketing Director", "Marketing Director"),
    ("Quantitative Research Analyst", "Research Analyst"),
    ("Clinical Data Scientist", "Data Scientist"),
    ("Embedded Firmware Developer", "Firmware Developer"),
    ("Security Operations Manager", "Operations Manager"),
    ("Developer Relations Advocate", "Relations Advocate"),
    ("Site Reliability Engineer", "Reliability Engineer"),
    ("Technical Program Manager", "Program Manager"),
];

const COMPANIES: [&str; 12] = [
    "Northwind Analytics", "Vertex Dynamics", "Harborline Systems", "Quantar Labs",
    "BlueFern Robotics", "Atlas Grid", "Meridian Health Tech", "Copperleaf AI",
    "Solstice Software", "Ridgeline Data", "Pinewave Security", "Orbital Metrics",
];

const CITIES: [(&str, &str); 12] = [
    ("Berlin", "Germany"), ("Austin", "United States"), ("Toronto", "Canada"),
    ("Amsterdam", "Netherlands"), ("Lisbon", "Portugal"), ("Singapore", "Singapore"),
    ("Copenhagen", "Denmark"), ("Zurich", "Switzerland"), ("Dublin", "Ireland"),
    ("Seattle", "United States"), ("Melbourne", "Australia"), ("Oslo", "Norway"),
];

const SKILLS: [&str; 20] = [
    "Python", "Rust", "SQL", "Kubernetes", "TensorFlow", "Figma", "Go", "React", "Terraform",
    "Spark", "Snowflake", "C++", "AWS", "GCP", "Product Strategy", "A/B Testing",
    "Threat Modeling", "Embedded C", "CUDA", "dbt",
];

/// Knobs for [`generate_corpus`]. All rates are fractions of
/// `people_per_query` (or of total queries for `task_failure_rate`),
/// rounded to exact counts at generation time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticCorpusSpec {
    pub platforms: Vec<String>,
    pub queries_per_category: usize,
    pub people_per_query: usize,
    /// People whose title only partially satisfies the role criterion.
    pub partial_rate: f64,
    /// People failing exactly one criterion (still above a 0.5 threshold).
    pub near_miss_rate: f64,
    /// People failing two criteria (below a 0.5 threshold).
    pub far_miss_rate: f64,
    /// Full matches silently replaced by confident-looking failures.
    pub false_positive_rate: f64,
    /// Full matches stripped down to five identity fields.
    pub incomplete_rate: f64,
    /// Full matches the platform misses; platform i drops i times this many.
    pub dropout_rate: f64,
    /// Fraction of queries where no returned person qualifies.
    pub task_failure_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticCorpusSpec {
    fn default() -> Self {
        SyntheticCorpusSpec {
            platforms: vec!["alpha".into(), "beta".into(), "gamma".into(), "delta".into()],
            queries_per_category: 3,
            people_per_query: 12,
            partial_rate: 0.2,
            near_miss_rate: 0.2,
            far_miss_rate: 0.1,
            false_positive_rate: 0.0,
            incomplete_rate: 0.0,
            dropout_rate: 0.0,
            task_failure_rate: 0.0,
            seed: 42,
        }
    }
}

/// Exact per-query person counts derived from the corpus-spec rates.
#[derive(Debug, Clone, Copy)]
struct Mix {
    full: usize,
    partial: usize,
    near: usize,
    far: usize,
    false_positive: usize,
    incomplete: usize,
    base_drop: usize,
}

impl SyntheticCorpusSpec {
    pub fn total_queries(&self) -> usize {
        self.queries_per_category * CATEGORIES.len()
    }

    fn count(&self, rate: f64) -> usize {
        (rate * self.people_per_query as f64).round() as usize
    }

    fn mix(&self) -> anyhow::Result<Mix> {
        let partial = self.count(self.partial_rate);
        let near = self.count(self.near_miss_rate);
        let far = self.count(self.far_miss_rate);
        let special = partial + near + far;
        if special > self.people_per_query {
            anyhow::bail!("partial/near/far rates exceed one person list");
        }
        let full = self.people_per_query - special;
        let false_positive = self.count(self.false_positive_rate);
        let incomplete = self.count(self.incomplete_rate);
        if false_positive + incomplete > full {
            anyhow::bail!("false-positive and incomplete injections exceed the full matches");
        }
        let base_drop = self.count(self.dropout_rate);
        let max_drop = base_drop * self.platforms.len().saturating_sub(1);
        if full - false_positive < max_drop + 1 {
            anyhow::bail!("dropout leaves some platform without a single qualified person");
        }
        Ok(Mix { full, partial, near, far, false_positive, incomplete, base_drop })
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.platforms.is_empty() {
            anyhow::bail!("at least one platform is required");
        }
        let mut seen = std::collections::HashSet::new();
        for platform in &self.platforms {
            if !seen.insert(platform.as_str()) {
                anyhow::bail!("duplicate platform id {platform:?}");
            }
        }
        if self.queries_per_category == 0 {
            anyhow::bail!("queries_per_category must be positive");
        }
        if self.people_per_query == 0 || self.people_per_query > 20 {
            anyhow::bail!("people_per_query must be in 1..=20");
        }
        for (name, rate) in [
            ("partial_rate", self.partial_rate),
            ("near_miss_rate", self.near_miss_rate),
            ("far_miss_rate", self.far_miss_rate),
            ("false_positive_rate", self.false_positive_rate),
            ("incomplete_rate", self.incomplete_rate),
            ("dropout_rate", self.dropout_rate),
            ("task_failure_rate", self.task_failure_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                anyhow::bail!("{name} must be in [0, 1], got {rate}");
            }
        }
        self.mix()?;
        Ok(())
    }
}

/// What was planted, for tests to assert against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusTruth {
    pub total_queries: usize,
    pub failure_query_ids: Vec<String>,
    /// Exactly 1 minus the injected failure fraction.
    pub expected_tcr: f64,
    /// platform -> query -> number of people at or above a 0.5 threshold.
    pub qualified: HashMap<String, HashMap<String, usize>>,
}

/// Everything one evaluation run needs, generated in memory.
#[derive(Debug, Clone)]
pub struct GeneratedCorpus {
    pub fixtures: FixtureSet,
    pub ruleset: MockRuleset,
    pub truth: CorpusTruth,
}

/// The archetypes a generated person can embody.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PersonKind {
    /// Meets all three criteria, fully populated record.
    Full,
    /// Full, but stripped to five identity fields.
    Incomplete,
    /// Title earns only partial credit.
    Partial,
    /// Wrong company; other criteria met.
    NearMiss,
    /// Wrong company and location.
    FarMiss,
    /// Wrong company and location behind a confident record.
    FalsePositive,
}

impl PersonKind {
    fn qualified(self) -> bool {
        // Grades at the default 0.5 threshold: Full/Incomplete 1.0,
        // Partial 5/6, NearMiss 2/3, FarMiss/FalsePositive 1/3.
        !matches!(self, PersonKind::FarMiss | PersonKind::FalsePositive)
    }
}

struct QueryPlan {
    spec: QuerySpec,
    role: (&'static str, &'static str),
    company: &'static str,
    city: (&'static str, &'static str),
    failure: bool,
}

fn query_plan(index: usize, category: &str, within: usize, failure: bool) -> QueryPlan {
    let role = ROLES[index % ROLES.len()];
    let company = COMPANIES[(index + index / COMPANIES.len()) % COMPANIES.len()];
    let city = CITIES[index % CITIES.len()];
    let marker = format!("{} at {}", role.0, company);
    let place = format!("{}, {}", city.0, city.1);
    let text = match category {
        "recruiting" => format!("Find a {marker} based in {place}."),
        "b2b" => format!("Identify a decision maker working as {marker} near {place}."),
        "expert" => format!("Locate a recognized expert serving as {marker} in {place}."),
        _ => format!("Find an influential {marker} speaking from {place}."),
    };
    QueryPlan {
        spec: QuerySpec {
            query_id: format!("q-{category}-{:02}", within + 1),
            text,
            language: "EN".into(),
            category: category.into(),
            deterministic: true,
        },
        role,
        company,
        city,
        failure,
    }
}

fn criteria_rule_for(plan: &QueryPlan) -> CriteriaRule {
    CriteriaRule {
        query_contains: format!("{} at {}", plan.role.0, plan.company),
        criteria: vec![
            CriterionRule {
                description: format!("Holds the role of {}", plan.role.0),
                kind: "role".into(),
                expect: Expectation {
                    field: "title".into(),
                    mode: MatchMode::Contains,
                    value: Some(plan.role.0.to_string()),
                    partial_value: Some(plan.role.1.to_string()),
                },
            },
            CriterionRule {
                description: format!("Currently works at {}", plan.company),
                kind: "company".into(),
                expect: Expectation {
                    field: "company".into(),
                    mode: MatchMode::Equals,
                    value: Some(plan.company.to_string()),
                    partial_value: None,
                },
            },
            CriterionRule {
                description: format!("Based in {}, {}", plan.city.0, plan.city.1),
                kind: "location".into(),
                expect: Expectation {
                    field: "location".into(),
                    mode: MatchMode::Contains,
                    value: Some(plan.city.0.to_string()),
                    partial_value: None,
                },
            },
        ],
    }
}

fn build_person(plan: &QueryPlan, query_index: usize, position: usize, kind: PersonKind) -> PersonRecord {
    let first = FIRST_NAMES[(query_index * 7 + position * 3) % FIRST_NAMES.len()];
    let last = LAST_NAMES[(query_index * 11 + position) % LAST_NAMES.len()];
    let slug = format!("{}-{}-{}{}", first.to_lowercase(), last.to_lowercase(), query_index, position);
    let company_index = COMPANIES.iter().position(|c| *c == plan.company).unwrap_or(0);
    let city_index = CITIES.iter().position(|c| c.0 == plan.city.0).unwrap_or(0);

    let title = match kind {
        PersonKind::Partial => plan.role.1,
        _ => plan.role.0,
    };
    let company = match kind {
        PersonKind::NearMiss | PersonKind::FarMiss | PersonKind::FalsePositive => {
            COMPANIES[(company_index + 5) % COMPANIES.len()]
        }
        _ => plan.company,
    };
    let (city, country) = match kind {
        PersonKind::FarMiss | PersonKind::FalsePositive => CITIES[(city_index + 5) % CITIES.len()],
        _ => plan.city,
    };

    let mut person = PersonRecord::minimal(&format!("p-{query_index:03}-{position:02}"), &format!("{first} {last}"));
    person.title = Some(title.to_string());
    person.company = Some(company.to_string());
    person.location = Some(format!("{city}, {country}"));
    if kind == PersonKind::Incomplete {
        return person;
    }

    let role_index = ROLES.iter().position(|r| r.0 == plan.role.0).unwrap_or(0);
    let previous_company = COMPANIES[(company_index + 3) % COMPANIES.len()];
    person.email = Some(format!("{slug}@example.com"));
    person.linkedin_url = Some(format!("https://linkedin.com/in/{slug}"));
    person.twitter_url = Some(format!("https://twitter.com/{slug}"));
    person.bio = Some(format!("{first} {last} is a {title} at {company} in {city}."));
    person.experience = Some(vec![
        format!("{title} — {company} (2019–present)"),
        format!("{} — {previous_company} (2015–2019)", plan.role.1),
    ]);
    person.education = Some(vec![format!("MSc, {city} Institute of Technology")]);
    person.skills = Some(vec![
        SKILLS[role_index % SKILLS.len()].to_string(),
        SKILLS[(role_index + 7) % SKILLS.len()].to_string(),
        SKILLS[(role_index + 13) % SKILLS.len()].to_string(),
    ]);
    person.match_explanation = Some(
        match kind {
            PersonKind::Full => "Matches the requested role, company, and location.",
            PersonKind::Partial => "Close role match at the requested company and location.",
            PersonKind::NearMiss => "Strong role match; company differs from the request.",
            PersonKind::FarMiss => "Role match only.",
            PersonKind::FalsePositive => "Verified match for role, company, and location.",
            PersonKind::Incomplete => unreachable!(),
        }
        .to_string(),
    );
    let company_slug = company.to_lowercase().replace(' ', "-");
    person.source_urls = Some(vec![
        format!("https://linkedin.com/in/{slug}"),
        format!("https://{company_slug}.example.com/team"),
    ]);
    person
}

/// Lays out one query's person archetypes in ranked order: qualified people
/// first, injections converting the head of the full segment in place.
fn layout(mix: Mix, failure: bool, platform_index: usize) -> Vec<PersonKind> {
    let total = mix.full + mix.partial + mix.near + mix.far;
    if failure {
        return vec![PersonKind::FarMiss; total];
    }
    let mut kinds = Vec::with_capacity(total);
    for i in 0..mix.full {
        if i < mix.false_positive {
            kinds.push(PersonKind::FalsePositive);
        } else if i >= mix.full - mix.incomplete {
            kinds.push(PersonKind::Incomplete);
        } else {
            kinds.push(PersonKind::Full);
        }
    }
    kinds.extend(std::iter::repeat(PersonKind::Partial).take(mix.partial));
    kinds.extend(std::iter::repeat(PersonKind::NearMiss).take(mix.near));
    kinds.extend(std::iter::repeat(PersonKind::FarMiss).take(mix.far));

    // Platform i misses i*base_drop of its qualified people: remove from the
    // tail of the full segment so earlier platforms strictly dominate.
    let drop = mix.base_drop * platform_index;
    if drop > 0 {
        let mut removed = 0;
        let mut index = mix.full;
        while removed < drop && index > 0 {
            index -= 1;
            if matches!(kinds[index], PersonKind::Full | PersonKind::Incomplete) {
                kinds.remove(index);
                removed += 1;
            }
        }
    }
    kinds
}

/// Picks which queries fail outright, deterministically from the seed.
fn pick_failures(total: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..total).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0xFA11));
    use rand::Rng;
    for i in 0..count.min(total) {
        let j = rng.random_range(i..total);
        indices.swap(i, j);
    }
    let mut chosen: Vec<usize> = indices.into_iter().take(count.min(total)).collect();
    chosen.sort_unstable();
    chosen
}

/// Generates queries, platform outputs, mock rules, and planted truth.
pub fn generate_corpus(spec: &SyntheticCorpusSpec) -> anyhow::Result<GeneratedCorpus> {
    spec.validate()?;
    let mix = spec.mix()?;
    let total_queries = spec.total_queries();
    let failure_count = (spec.task_failure_rate * total_queries as f64).round() as usize;
    let failure_indices = pick_failures(total_queries, failure_count, spec.seed);

    let mut plans = Vec::with_capacity(total_queries);
    for (qi, category) in (0..total_queries).map(|qi| (qi, CATEGORIES[qi / spec.queries_per_category])) {
        let failure = failure_indices.binary_search(&qi).is_ok();
        plans.push(query_plan(qi, category, qi % spec.queries_per_category, failure));
    }

    let mut criteria_rules = Vec::with_capacity(total_queries);
    for plan in &plans {
        criteria_rules.push(criteria_rule_for(plan));
    }
    let ruleset = MockRuleset {
        schema_version: 1,
        criteria_rules,
        default_criteria: None,
        utility_rules: UtilityRules::default(),
    };
    ruleset.validate()?;

    let identity_map: HashMap<String, String> = crate::model::SCHEMA_FIELDS
        .iter()
        .map(|field| (field.to_string(), field.to_string()))
        .collect();

    let mut platforms = Vec::with_capacity(spec.platforms.len());
    let mut qualified: HashMap<String, HashMap<String, usize>> = HashMap::new();
    for (pi, platform_id) in spec.platforms.iter().enumerate() {
        let mut outputs = HashMap::new();
        let mut counts = HashMap::new();
        for (qi, plan) in plans.iter().enumerate() {
            let kinds = layout(mix, plan.failure, pi);
            let people: Vec<serde_json::Value> = kinds
                .iter()
                .enumerate()
                .map(|(position, kind)| {
                    serde_json::to_value(build_person(plan, qi, position, *kind))
                        .expect("person serializes")
                })
                .collect();
            counts.insert(
                plan.spec.query_id.clone(),
                kinds.iter().filter(|kind| kind.qualified()).count(),
            );
            let payload = serde_json::json!({ "results": people });
            outputs.insert(
                plan.spec.query_id.clone(),
                serde_json::to_string_pretty(&payload).expect("payload serializes"),
            );
        }
        qualified.insert(platform_id.clone(), counts);
        platforms.push(PlatformFixtures {
            platform_id: platform_id.clone(),
            mapping: FieldMapping {
                platform_id: platform_id.clone(),
                parser_kind: ParserKind::Structured,
                map: identity_map.clone(),
            },
            outputs,
        });
    }

    let truth = CorpusTruth {
        total_queries,
        failure_query_ids: failure_indices.iter().map(|qi| plans[*qi].spec.query_id.clone()).collect(),
        expected_tcr: (total_queries - failure_count) as f64 / total_queries as f64,
        qualified,
    };

    Ok(GeneratedCorpus {
        fixtures: FixtureSet {
            queries: plans.into_iter().map(|plan| plan.spec).collect(),
            platforms,
        },
        ruleset,
        truth,
    })
}
