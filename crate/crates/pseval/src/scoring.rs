//! Pure metric computation over judged query evaluations.
//!
//! Three dimensions are reported per platform on a 0–100 scale: relevance
//! precision (padded nDCG), effective coverage (task completion rate times
//! capped qualified yield), and information utility (macro-averaged judge
//! utility). The overall score is their weighted combination.
//!
//! Everything here is a pure function of the evaluation set and the config;
//! nothing touches the gateway.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{QueryEvaluation, RunConfig, ScenarioRow, CATEGORIES};

/// Errors for malformed metric arguments.
#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("rank cutoff K must be positive")]
    ZeroK,
    #[error("dimension weights sum to {0}, expected 1")]
    WeightSum(f64),
}

/// How the ideal DCG is padded.
///
/// The headline metric always pads the ideal to ten perfect results, so a
/// platform returning three perfect people scores well under 0.5. Rank-cutoff
/// sweeps may instead pad to K so the ideal matches the cutoff; reports record
/// which policy produced each number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaddingPolicy {
    FixedTen,
    PerK,
}

/// Discount sum of `n` perfectly relevant results: Σ 1/log2(i+1).
fn ideal_dcg(n: usize) -> f64 {
    (1..=n).map(|i| 1.0 / ((i + 1) as f64).log2()).sum()
}

/// The fixed ideal: ten perfect results.
pub fn idcg_at_10() -> f64 {
    ideal_dcg(10)
}

/// Padded nDCG at cutoff `k` with the headline fixed-ten ideal.
pub fn padded_ndcg(grades: &[f64], k: usize) -> Result<f64, ScoringError> {
    padded_ndcg_with_policy(grades, k, PaddingPolicy::FixedTen)
}

/// Padded nDCG at cutoff `k` under an explicit padding policy.
pub fn padded_ndcg_with_policy(grades: &[f64], k: usize, policy: PaddingPolicy) -> Result<f64, ScoringError> {
    if k == 0 {
        return Err(ScoringError::ZeroK);
    }
    let dcg: f64 = grades
        .iter()
        .take(k)
        .enumerate()
        .map(|(index, grade)| grade / ((index + 2) as f64).log2())
        .sum();
    let ideal = match policy {
        PaddingPolicy::FixedTen => ideal_dcg(10),
        PaddingPolicy::PerK => ideal_dcg(k),
    };
    Ok(dcg / ideal)
}

/// Fraction of queries with at least one qualified result.
pub fn tcr(evals: &[QueryEvaluation]) -> f64 {
    if evals.is_empty() {
        return 0.0;
    }
    evals.iter().filter(|e| e.task_success).count() as f64 / evals.len() as f64
}

/// Capped qualified yield for one query: min(qualified / K, 1).
pub fn qualified_yield(eval: &QueryEvaluation, k: usize) -> f64 {
    (eval.qualified_count as f64 / k as f64).min(1.0)
}

/// Mean padded nDCG × 100 over all queries (failed queries contribute 0).
pub fn relevance_precision(evals: &[QueryEvaluation], config: &RunConfig) -> f64 {
    if evals.is_empty() {
        return 0.0;
    }
    let sum: f64 = evals.iter().map(|e| padded_ndcg(&e.grades(), config.k).unwrap_or(0.0)).sum();
    sum / evals.len() as f64 * 100.0
}

/// TCR × mean capped qualified yield × 100.
pub fn effective_coverage(evals: &[QueryEvaluation], config: &RunConfig) -> f64 {
    if evals.is_empty() {
        return 0.0;
    }
    let mean_yield: f64 =
        evals.iter().map(|e| qualified_yield(e, config.k)).sum::<f64>() / evals.len() as f64;
    tcr(evals) * mean_yield * 100.0
}

/// Mean judge utility for one query's evaluated persons (0 when empty).
pub fn query_utility(eval: &QueryEvaluation) -> f64 {
    if eval.ranked_persons.is_empty() {
        return 0.0;
    }
    eval.ranked_persons.iter().map(|p| p.utility.mean()).sum::<f64>() / eval.ranked_persons.len() as f64
}

/// Macro-averaged information utility × 100: per-query mean, then query mean.
pub fn information_utility(evals: &[QueryEvaluation]) -> f64 {
    if evals.is_empty() {
        return 0.0;
    }
    evals.iter().map(query_utility).sum::<f64>() / evals.len() as f64 * 100.0
}

/// Micro-averaged utility × 100 (per-person pooling), exposed as a
/// diagnostic only; the reported dimension is the macro average.
pub fn information_utility_micro(evals: &[QueryEvaluation]) -> f64 {
    let persons: Vec<f64> =
        evals.iter().flat_map(|e| e.ranked_persons.iter().map(|p| p.utility.mean())).collect();
    if persons.is_empty() {
        return 0.0;
    }
    persons.iter().sum::<f64>() / persons.len() as f64 * 100.0
}

/// Arithmetic mean of qualified counts over all queries.
pub fn mean_qualified(evals: &[QueryEvaluation]) -> f64 {
    if evals.is_empty() {
        return 0.0;
    }
    evals.iter().map(|e| e.qualified_count as f64).sum::<f64>() / evals.len() as f64
}

/// Weighted combination of the three dimension scores.
pub fn overall_score(dimensions: [f64; 3], weights: [f64; 3]) -> Result<f64, ScoringError> {
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(ScoringError::WeightSum(sum));
    }
    Ok(dimensions.iter().zip(weights).map(|(d, w)| d * w).sum())
}

/// All platform-level scores derived from one platform's evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionScores {
    pub relevance_precision: f64,
    pub effective_coverage: f64,
    pub information_utility: f64,
    pub overall: f64,
    pub tcr: f64,
    pub mean_qualified: f64,
}

/// Computes every dimension for one platform.
pub fn compute_dimensions(evals: &[QueryEvaluation], config: &RunConfig) -> DimensionScores {
    let relevance = relevance_precision(evals, config);
    let coverage = effective_coverage(evals, config);
    let utility = information_utility(evals);
    let overall = overall_score([relevance, coverage, utility], config.dimension_weights)
        .expect("config weights validated upstream");
    DimensionScores {
        relevance_precision: relevance,
        effective_coverage: coverage,
        information_utility: utility,
        overall,
        tcr: tcr(evals),
        mean_qualified: mean_qualified(evals),
    }
}

/// Per-category breakdown in the canonical category order.
pub fn scenario_rows(evals: &[QueryEvaluation], config: &RunConfig) -> Vec<ScenarioRow> {
    CATEGORIES
        .iter()
        .filter_map(|category| {
            let subset: Vec<QueryEvaluation> =
                evals.iter().filter(|e| e.query.category.eq_ignore_ascii_case(category)).cloned().collect();
            if subset.is_empty() {
                return None;
            }
            let dims = compute_dimensions(&subset, config);
            Some(ScenarioRow {
                category: category.to_string(),
                queries: subset.len(),
                relevance_precision: dims.relevance_precision,
                effective_coverage: dims.effective_coverage,
                information_utility: dims.information_utility,
                overall: dims.overall,
            })
        })
        .collect()
}

/// Per-query score vectors, aligned to the query order of `evals`.
///
/// The per-query coverage term is the capped qualified yield; the run-level
/// TCR factor is a set property and only applies to the aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerQueryScores {
    pub query_ids: Vec<String>,
    pub precision: Vec<f64>,
    pub coverage_yield: Vec<f64>,
    pub utility: Vec<f64>,
    pub overall: Vec<f64>,
}

/// Computes the per-query vectors used by pairwise tests and bootstrap CIs.
pub fn per_query_scores(evals: &[QueryEvaluation], config: &RunConfig) -> PerQueryScores {
    let mut out = PerQueryScores {
        query_ids: Vec::with_capacity(evals.len()),
        precision: Vec::with_capacity(evals.len()),
        coverage_yield: Vec::with_capacity(evals.len()),
        utility: Vec::with_capacity(evals.len()),
        overall: Vec::with_capacity(evals.len()),
    };
    let weights = config.dimension_weights;
    for eval in evals {
        let precision = padded_ndcg(&eval.grades(), config.k).unwrap_or(0.0) * 100.0;
        let coverage = qualified_yield(eval, config.k) * 100.0;
        let utility = query_utility(eval) * 100.0;
        out.query_ids.push(eval.query.query_id.clone());
        out.precision.push(precision);
        out.coverage_yield.push(coverage);
        out.utility.push(utility);
        out.overall.push(weights[0] * precision + weights[1] * coverage + weights[2] * utility);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PersonEvaluation, PersonRecord, QuerySpec, UtilityScores};
    use proptest::prelude::*;

    fn query(id: &str) -> QuerySpec {
        QuerySpec {
            query_id: id.into(),
            text: "find people".into(),
            language: "en".into(),
            category: "recruiting".into(),
            deterministic: false,
        }
    }

    /// Builds an evaluation whose persons carry the given grades; judgments
    /// are synthesized to be consistent with each grade where possible.
    fn eval_with_grades(grades: &[f64], utility: f64, config: &RunConfig) -> QueryEvaluation {
        let persons: Vec<PersonEvaluation> = grades
            .iter()
            .enumerate()
            .map(|(i, grade)| PersonEvaluation {
                person: PersonRecord::minimal(format!("id{i}"), format!("P {i}")),
                judgments: vec![],
                relevance_grade: *grade,
                utility: UtilityScores { structural: utility, evidence: utility, actionability: utility },
            })
            .collect();
        let qualified = persons.iter().filter(|p| p.relevance_grade >= config.qualified_threshold).count();
        QueryEvaluation {
            query: query("q"),
            ranked_persons: persons,
            qualified_count: qualified,
            task_success: qualified >= 1,
        }
    }

    /// Brute-force restatement of the metric, kept deliberately separate
    /// from the implementation above.
    fn ndcg_oracle(grades: &[f64], k: usize, ideal_terms: usize) -> f64 {
        let mut dcg = 0.0;
        for i in 1..=k.min(grades.len()) {
            dcg += grades[i - 1] / ((i as f64) + 1.0).log2();
        }
        let mut idcg = 0.0;
        for i in 1..=ideal_terms {
            idcg += 1.0 / ((i as f64) + 1.0).log2();
        }
        dcg / idcg
    }

    #[test]
    fn idcg_constant_matches_the_brute_force_sum() {
        assert!((idcg_at_10() - 4.54357).abs() < 1e-4);
        assert!((idcg_at_10() - ideal_dcg(10)).abs() < 1e-12);
    }

    #[test]
    fn padded_ndcg_known_values() {
        let perfect = vec![1.0; 10];
        assert!((padded_ndcg(&perfect, 10).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(padded_ndcg(&[], 10).unwrap(), 0.0);

        // Three perfect results against the ten-result ideal.
        let three = vec![1.0, 1.0, 1.0];
        assert!((padded_ndcg(&three, 10).unwrap() - 0.4690).abs() < 1e-4);
    }

    #[test]
    fn padded_ndcg_rejects_zero_k() {
        assert!(matches!(padded_ndcg(&[1.0], 0), Err(ScoringError::ZeroK)));
    }

    #[test]
    fn per_k_padding_uses_k_ideal_terms() {
        let grades = vec![1.0, 0.5, 1.0, 0.0, 0.5, 1.0, 0.5];
        for k in [5, 10, 15] {
            let got = padded_ndcg_with_policy(&grades, k, PaddingPolicy::PerK).unwrap();
            assert!((got - ndcg_oracle(&grades, k, k)).abs() < 1e-12);
        }
        // A full perfect list is 1.0 under per-K padding at any cutoff.
        let perfect = vec![1.0; 15];
        for k in [5, 10, 15] {
            let got = padded_ndcg_with_policy(&perfect, k, PaddingPolicy::PerK).unwrap();
            assert!((got - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn coverage_formula_hand_example() {
        let config = RunConfig::default();
        let five = eval_with_grades(&[1.0; 5], 1.0, &config);
        let none = eval_with_grades(&[0.0; 3], 1.0, &config);
        let evals = vec![five, none];
        // TCR 0.5 × mean yield 0.25 × 100.
        assert!((effective_coverage(&evals, &config) - 12.5).abs() < 1e-12);
        assert!((tcr(&evals) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn coverage_caps_per_query_yield() {
        let config = RunConfig::default();
        let fifteen = eval_with_grades(&[1.0; 15], 1.0, &config);
        assert!((qualified_yield(&fifteen, config.k) - 1.0).abs() < 1e-12);
        assert!((effective_coverage(&[fifteen], &config) - 100.0).abs() < 1e-12);
    }

    #[test]
    fn utility_is_macro_averaged() {
        let config = RunConfig::default();
        let high = eval_with_grades(&[1.0; 8], 0.8, &config);
        let low = eval_with_grades(&[1.0; 2], 0.4, &config);
        let evals = vec![high, low];
        // Macro: (0.8 + 0.4)/2 = 0.6 regardless of person counts.
        assert!((information_utility(&evals) - 60.0).abs() < 1e-9);
        // Micro pools persons: (8×0.8 + 2×0.4)/10 = 0.72.
        assert!((information_utility_micro(&evals) - 72.0).abs() < 1e-9);
    }

    #[test]
    fn utility_mean_hand_example() {
        let scores = UtilityScores { structural: 0.9, evidence: 0.6, actionability: 0.3 };
        assert!((scores.mean() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn overall_reproduces_published_aggregates() {
        let rows = [
            ([70.2, 69.1, 56.4], 65.2),
            ([53.8, 58.1, 53.1], 55.0),
            ([54.3, 41.1, 42.7], 46.0),
            ([44.7, 41.8, 50.9], 45.8),
        ];
        let equal = [1.0 / 3.0; 3];
        for (dims, expected) in rows {
            let got = overall_score(dims, equal).unwrap();
            assert!((got - expected).abs() <= 0.05 + 1e-9, "{dims:?} → {got}, expected ≈{expected}");
        }
    }

    #[test]
    fn overall_rejects_bad_weights() {
        assert!(matches!(overall_score([1.0, 1.0, 1.0], [0.5, 0.4, 0.2]), Err(ScoringError::WeightSum(_))));
    }

    #[test]
    fn mean_qualified_counts() {
        let config = RunConfig::default();
        let evals = vec![
            eval_with_grades(&[1.0; 15], 1.0, &config),
            eval_with_grades(&[1.0; 5], 1.0, &config),
            eval_with_grades(&[], 1.0, &config),
            eval_with_grades(&[0.0; 4], 1.0, &config),
        ];
        assert!((mean_qualified(&evals) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn precision_mixes_perfect_and_empty_queries() {
        let config = RunConfig::default();
        let evals = vec![eval_with_grades(&[1.0; 10], 1.0, &config), eval_with_grades(&[], 1.0, &config)];
        assert!((relevance_precision(&evals, &config) - 50.0).abs() < 1e-9);
    }

    #[test]
    fn scenario_rows_group_by_category() {
        let config = RunConfig::default();
        let mut recruiting = eval_with_grades(&[1.0; 10], 1.0, &config);
        recruiting.query.category = "recruiting".into();
        let mut b2b = eval_with_grades(&[], 0.0, &config);
        b2b.query.category = "b2b".into();
        let rows = scenario_rows(&[recruiting, b2b], &config);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].category, "recruiting");
        assert!((rows[0].overall - 100.0).abs() < 1e-9);
        assert_eq!(rows[1].queries, 1);
        assert!(rows[1].overall.abs() < 1e-9);
    }

    proptest! {
        /// Implementation matches the brute-force oracle on random lists.
        #[test]
        fn ndcg_matches_oracle(
            grades in proptest::collection::vec(0.0f64..=1.0, 0..=15),
            k in 1usize..=15,
        ) {
            let got = padded_ndcg(&grades, k).unwrap();
            prop_assert!((got - ndcg_oracle(&grades, k, 10)).abs() < 1e-9);
        }

        /// Raising a grade never lowers the score; truncation never raises it.
        #[test]
        fn ndcg_is_monotone(
            grades in proptest::collection::vec(0.0f64..=1.0, 1..=15),
            position in 0usize..15,
            bump in 0.0f64..=1.0,
        ) {
            let k = 10;
            let base = padded_ndcg(&grades, k).unwrap();

            let mut raised = grades.clone();
            let slot = position % raised.len();
            raised[slot] = (raised[slot] + bump).min(1.0);
            prop_assert!(padded_ndcg(&raised, k).unwrap() >= base - 1e-12);

            let mut prepended = vec![1.0];
            prepended.extend_from_slice(&grades);
            prop_assert!(padded_ndcg(&prepended, k).unwrap() >= base - 1e-12);

            let truncated = &grades[..grades.len() - 1];
            prop_assert!(padded_ndcg(truncated, k).unwrap() <= base + 1e-12);
        }

        /// The score stays in [0, 1] and only a ten-perfect prefix reaches 1.
        #[test]
        fn ndcg_is_bounded(grades in proptest::collection::vec(0.0f64..=1.0, 0..=15)) {
            let got = padded_ndcg(&grades, 10).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&got));
            let perfect_prefix = grades.len() >= 10 && grades[..10].iter().all(|g| *g == 1.0);
            if got >= 1.0 - 1e-12 {
                prop_assert!(perfect_prefix);
            }
        }

        /// Coverage never exceeds 100 × TCR, and is bounded by 100.
        #[test]
        fn coverage_bounded_by_tcr(
            qualified in proptest::collection::vec(0usize..=15, 1..=25),
        ) {
            let config = RunConfig::default();
            let evals: Vec<QueryEvaluation> = qualified
                .iter()
                .map(|q| eval_with_grades(&vec![1.0; *q], 1.0, &config))
                .collect();
            let coverage = effective_coverage(&evals, &config);
            prop_assert!(coverage <= 100.0 * tcr(&evals) + 1e-9);
            prop_assert!(coverage <= 100.0 + 1e-9);
        }
    }
}
