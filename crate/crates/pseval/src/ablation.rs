//! Configuration sweeps over a stored evaluation set.
//!
//! Every sweep here is a pure re-aggregation: it rescores the verdicts and
//! utilities already in a [`RawEvaluationSet`] under alternative thresholds,
//! rank cutoffs, weights, or credit rules. None of them can reach the judge
//! or search backends — they never see a gateway. The one live operation is
//! [`criteria_stability_probe`], which deliberately re-runs extraction to
//! measure its repeatability.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::Gateway;
use crate::model::{ModelError, PersonEvaluation, QueryEvaluation, QuerySpec, RunConfig};
use crate::pipeline::RawEvaluationSet;
use crate::scoring::{compute_dimensions, padded_ndcg_with_policy, DimensionScores, PaddingPolicy};
use crate::stats::{spearman_rho, StatsError};

/// Errors from sweep configuration.
#[derive(Debug, Error)]
pub enum AblationError {
    #[error("threshold {0} outside (0, 1]")]
    BadThreshold(f64),
    #[error("rank cutoff K={k} exceeds max_results={max}")]
    KTooLarge { k: usize, max: usize },
    #[error("rank cutoff K must be positive")]
    ZeroK,
    #[error("weight scheme {name:?} sums to {sum}, expected 1")]
    BadScheme { name: String, sum: f64 },
    #[error("no settings supplied for the sweep")]
    NoSettings,
    #[error("grid search requested without a preference table")]
    MissingPreferences,
    #[error("every candidate weighting ranked the platforms as a constant; nothing to match")]
    DegenerateGrid,
    #[error("preference table lacks platform {0:?}")]
    MissingPreferenceFor(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Scores and ranking for one setting of a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSetting {
    /// Human-readable setting value, e.g. "threshold=0.30" or "Prec-heavy".
    pub label: String,
    /// platform -> full dimension scores under this setting.
    pub scores: BTreeMap<String, DimensionScores>,
    /// Platforms ordered best-to-worst by overall (ties break by id).
    pub ranking: Vec<String>,
}

/// Result of one sweep: score tables per setting plus rank stability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    /// Which knob was swept: "threshold", "top_k", "weights", "partial_credit".
    pub kind: String,
    /// The nDCG padding policy in force, recorded for top-K sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub padding_policy: Option<String>,
    pub settings: Vec<SweepSetting>,
    /// True iff every setting produced the same platform ranking.
    pub rank_stable: bool,
}

/// Orders platforms by descending overall score, ids breaking ties.
fn ranking(scores: &BTreeMap<String, DimensionScores>) -> Vec<String> {
    let mut ids: Vec<&String> = scores.keys().collect();
    ids.sort_by(|a, b| {
        scores[*b]
            .overall
            .partial_cmp(&scores[*a].overall)
            .expect("finite scores")
            .then_with(|| a.cmp(b))
    });
    ids.into_iter().cloned().collect()
}

fn finish_report(kind: &str, padding_policy: Option<String>, settings: Vec<SweepSetting>) -> SweepReport {
    let rank_stable = settings.windows(2).all(|pair| pair[0].ranking == pair[1].ranking);
    SweepReport { kind: kind.to_string(), padding_policy, settings, rank_stable }
}

/// Rebuilds every platform's evaluations under a different config and
/// recomputes the dimensions. The stored verdicts and utilities are reused;
/// only derived quantities change.
fn rescore(set: &RawEvaluationSet, config: &RunConfig) -> Result<BTreeMap<String, DimensionScores>, ModelError> {
    let mut out = BTreeMap::new();
    for (platform_id, evaluations) in &set.platforms {
        let rebuilt: Vec<QueryEvaluation> = evaluations
            .iter()
            .map(|evaluation| {
                let persons = evaluation
                    .ranked_persons
                    .iter()
                    .map(|person| {
                        PersonEvaluation::new(
                            person.person.clone(),
                            person.judgments.clone(),
                            person.utility,
                            config,
                        )
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(QueryEvaluation::new(evaluation.query.clone(), persons, config))
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        out.insert(platform_id.clone(), compute_dimensions(&rebuilt, config));
    }
    Ok(out)
}

/// Rescores under each qualified threshold. Precision is unaffected by the
/// threshold; coverage, TCR, and overall move.
pub fn threshold_sweep(set: &RawEvaluationSet, thresholds: &[f64]) -> Result<SweepReport, AblationError> {
    if thresholds.is_empty() {
        return Err(AblationError::NoSettings);
    }
    let mut settings = Vec::with_capacity(thresholds.len());
    for &threshold in thresholds {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(AblationError::BadThreshold(threshold));
        }
        let config = RunConfig { qualified_threshold: threshold, ..set.config.clone() };
        let scores = rescore(set, &config)?;
        let order = ranking(&scores);
        settings.push(SweepSetting {
            label: format!("threshold={threshold:.2}"),
            scores,
            ranking: order,
        });
    }
    Ok(finish_report("threshold", None, settings))
}

/// Rescores relevance precision at each rank cutoff, padding the ideal to K
/// so the columns stay comparable across K values. Coverage yields are
/// capped at the same K.
pub fn topk_sweep(set: &RawEvaluationSet, ks: &[usize]) -> Result<SweepReport, AblationError> {
    if ks.is_empty() {
        return Err(AblationError::NoSettings);
    }
    let mut settings = Vec::with_capacity(ks.len());
    for &k in ks {
        if k == 0 {
            return Err(AblationError::ZeroK);
        }
        if k > set.config.max_results {
            return Err(AblationError::KTooLarge { k, max: set.config.max_results });
        }
        let config = RunConfig { k, ..set.config.clone() };
        let mut scores = rescore(set, &config)?;
        // Replace the fixed-ten precision with the per-K-padded variant and
        // fold it back into the overall.
        for (platform_id, dims) in scores.iter_mut() {
            let evaluations = &set.platforms[platform_id];
            let per_k: f64 = evaluations
                .iter()
                .map(|e| {
                    padded_ndcg_with_policy(&e.grades(), k, PaddingPolicy::PerK)
                        .expect("K validated above")
                })
                .sum::<f64>()
                / evaluations.len().max(1) as f64
                * 100.0;
            dims.relevance_precision = per_k;
            dims.overall = crate::scoring::overall_score(
                [per_k, dims.effective_coverage, dims.information_utility],
                config.dimension_weights,
            )
            .expect("stored config weights are valid");
        }
        let order = ranking(&scores);
        settings.push(SweepSetting { label: format!("K={k}"), scores, ranking: order });
    }
    Ok(finish_report("top_k", Some("per_k".into()), settings))
}

/// A named (precision, coverage, utility) weight triple.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightScheme {
    pub name: String,
    pub weights: [f64; 3],
}

/// The four standard emphasis schemes reported side by side.
pub fn named_schemes() -> Vec<WeightScheme> {
    vec![
        WeightScheme { name: "Equal".into(), weights: [1.0 / 3.0; 3] },
        WeightScheme { name: "Prec-heavy".into(), weights: [0.5, 0.25, 0.25] },
        WeightScheme { name: "Cov-heavy".into(), weights: [0.25, 0.5, 0.25] },
        WeightScheme { name: "Util-heavy".into(), weights: [0.25, 0.25, 0.5] },
    ]
}

fn apply_weights(
    dims: &BTreeMap<String, DimensionScores>,
    weights: [f64; 3],
) -> BTreeMap<String, DimensionScores> {
    dims.iter()
        .map(|(platform_id, d)| {
            let mut scored = *d;
            scored.overall = crate::scoring::overall_score(
                [d.relevance_precision, d.effective_coverage, d.information_utility],
                weights,
            )
            .expect("scheme validated upstream");
            (platform_id.clone(), scored)
        })
        .collect()
}

/// Reweights fixed dimension scores under each scheme. When `grid_search` is
/// set, also finds the simplex point (step 0.05) whose overall ranking best
/// rank-correlates with the supplied preference scores.
pub fn weight_sweep(
    dims: &BTreeMap<String, DimensionScores>,
    schemes: &[WeightScheme],
    grid_search: bool,
    preferences: Option<&BTreeMap<String, f64>>,
) -> Result<SweepReport, AblationError> {
    if schemes.is_empty() && !grid_search {
        return Err(AblationError::NoSettings);
    }
    let mut settings = Vec::with_capacity(schemes.len() + 1);
    for scheme in schemes {
        let sum: f64 = scheme.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(AblationError::BadScheme { name: scheme.name.clone(), sum });
        }
        let scores = apply_weights(dims, scheme.weights);
        let order = ranking(&scores);
        settings.push(SweepSetting { label: scheme.name.clone(), scores, ranking: order });
    }

    if grid_search {
        let preferences = preferences.ok_or(AblationError::MissingPreferences)?;
        let platform_ids: Vec<&String> = dims.keys().collect();
        let preference_vector: Vec<f64> = platform_ids
            .iter()
            .map(|id| {
                preferences
                    .get(*id)
                    .copied()
                    .ok_or_else(|| AblationError::MissingPreferenceFor((*id).clone()))
            })
            .collect::<Result<_, _>>()?;
        // Walk the weight simplex in 1/20 steps; track the best correlation.
        let mut best: Option<([f64; 3], f64)> = None;
        for p in 0..=20u32 {
            for c in 0..=(20 - p) {
                let u = 20 - p - c;
                let weights = [p as f64 / 20.0, c as f64 / 20.0, u as f64 / 20.0];
                let scored = apply_weights(dims, weights);
                let overalls: Vec<f64> =
                    platform_ids.iter().map(|id| scored[*id].overall).collect();
                // A weighting that ties every platform carries no ranking
                // signal; skip it rather than crown or reject it.
                let rho = match spearman_rho(&overalls, &preference_vector) {
                    Ok(rho) => rho,
                    Err(StatsError::ZeroVariance) => continue,
                    Err(error) => return Err(error.into()),
                };
                if best.is_none() || rho > best.unwrap().1 {
                    best = Some((weights, rho));
                }
            }
        }
        let (weights, rho) = best.ok_or(AblationError::DegenerateGrid)?;
        let scores = apply_weights(dims, weights);
        let order = ranking(&scores);
        settings.push(SweepSetting {
            label: format!(
                "Grid-search ({:.2}, {:.2}, {:.2}; rho={rho:.2})",
                weights[0], weights[1], weights[2]
            ),
            scores,
            ranking: order,
        });
    }
    Ok(finish_report("weights", None, settings))
}

/// Compares default partial credit against the binary remap
/// (partially_met scored as 0) across every dimension.
pub fn partial_credit_ablation(set: &RawEvaluationSet) -> Result<SweepReport, AblationError> {
    let mut settings = Vec::with_capacity(2);
    for (label, partial_credit) in [
        (format!("partial_credit={:.2}", set.config.partial_credit), set.config.partial_credit),
        ("binary".to_string(), 0.0),
    ] {
        let config = RunConfig { partial_credit, ..set.config.clone() };
        let scores = rescore(set, &config)?;
        let order = ranking(&scores);
        settings.push(SweepSetting { label, scores, ranking: order });
    }
    Ok(finish_report("partial_credit", None, settings))
}

/// One query's extraction repeatability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryStability {
    pub query_id: String,
    /// Criteria counts from the successful runs.
    pub counts: Vec<usize>,
    pub mean_count: f64,
    pub std_count: f64,
    pub min_count: usize,
    pub max_count: usize,
    /// True iff every run produced byte-identical criteria, with no errors.
    pub exact_match: bool,
    pub errors: usize,
}

/// Aggregate extraction-stability measurements.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub runs: usize,
    pub temperature: f64,
    pub queries: Vec<QueryStability>,
    /// Mean criteria count pooled over every successful extraction.
    pub mean_count: f64,
    /// Population standard deviation over the same pool.
    pub std_count: f64,
    /// Fraction of queries whose runs all agreed exactly.
    pub exact_match_rate: f64,
    pub total_extractions: usize,
    pub total_errors: usize,
}

/// Re-runs criteria extraction `runs` times per query and measures drift.
///
/// Each repetition carries a distinct cache salt, so a live judge is truly
/// re-sampled (and a rerun of the probe replays its own cache). Extraction
/// failures are counted per query, never fatal.
pub fn criteria_stability_probe(
    gateway: &Gateway,
    queries: &[QuerySpec],
    runs: usize,
    temperature: f64,
) -> StabilityReport {
    let mut per_query = Vec::with_capacity(queries.len());
    let mut pooled: Vec<usize> = Vec::new();
    let mut total_errors = 0usize;
    for query in queries {
        let mut signatures: Vec<Vec<(String, String)>> = Vec::with_capacity(runs);
        let mut errors = 0usize;
        for run in 0..runs {
            match gateway.extract_criteria_probe(query, Some(run as u64), temperature) {
                Ok(criteria) => signatures.push(
                    criteria
                        .into_iter()
                        .map(|c| (c.description, c.kind))
                        .collect(),
                ),
                Err(error) => {
                    log::warn!("probe extraction failed for {} run {run}: {error}", query.query_id);
                    errors += 1;
                }
            }
        }
        let counts: Vec<usize> = signatures.iter().map(Vec::len).collect();
        let mean = if counts.is_empty() {
            0.0
        } else {
            counts.iter().sum::<usize>() as f64 / counts.len() as f64
        };
        let variance = if counts.is_empty() {
            0.0
        } else {
            counts.iter().map(|c| (*c as f64 - mean).powi(2)).sum::<f64>() / counts.len() as f64
        };
        let exact_match =
            errors == 0 && !signatures.is_empty() && signatures.iter().all(|s| *s == signatures[0]);
        pooled.extend(&counts);
        total_errors += errors;
        per_query.push(QueryStability {
            query_id: query.query_id.clone(),
            mean_count: mean,
            std_count: variance.sqrt(),
            min_count: counts.iter().copied().min().unwrap_or(0),
            max_count: counts.iter().copied().max().unwrap_or(0),
            counts,
            exact_match,
            errors,
        });
    }
    let mean_count = if pooled.is_empty() {
        0.0
    } else {
        pooled.iter().sum::<usize>() as f64 / pooled.len() as f64
    };
    let variance = if pooled.is_empty() {
        0.0
    } else {
        pooled.iter().map(|c| (*c as f64 - mean_count).powi(2)).sum::<f64>() / pooled.len() as f64
    };
    let exact_matches = per_query.iter().filter(|q| q.exact_match).count();
    StabilityReport {
        runs,
        temperature,
        mean_count,
        std_count: variance.sqrt(),
        exact_match_rate: if per_query.is_empty() {
            0.0
        } else {
            exact_matches as f64 / per_query.len() as f64
        },
        total_extractions: pooled.len(),
        total_errors,
        queries: per_query,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::prompts::PromptSet;
    use crate::mock::corpus::{generate_corpus, SyntheticCorpusSpec};
    use crate::mock::{MockJudgeClient, MockSearchClient};
    use crate::pipeline::run_benchmark;
    use std::sync::Arc;

    fn evaluated_corpus() -> (RawEvaluationSet, Gateway, tempfile::TempDir) {
        let corpus = generate_corpus(&SyntheticCorpusSpec {
            dropout_rate: 0.1,
            ..Default::default()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig { workers: 4, run_stamp: Some("test".into()), ..RunConfig::default() };
        let gateway = Gateway::new(
            Arc::new(MockJudgeClient::new(corpus.ruleset.clone())),
            Arc::new(MockSearchClient),
            dir.path().join("cache"),
            PromptSet::builtin().unwrap(),
            config,
        );
        let raw = run_benchmark(&gateway, &corpus.fixtures).unwrap();
        (raw, gateway, dir)
    }

    #[test]
    fn threshold_sweep_is_monotone_and_gateway_free() {
        let (raw, gateway, _dir) = evaluated_corpus();
        let before = gateway.counters();
        let report = threshold_sweep(&raw, &[0.3, 0.5, 0.7]).unwrap();
        // Pure re-aggregation: the gateway saw nothing.
        assert_eq!(gateway.counters(), before);

        assert_eq!(report.kind, "threshold");
        assert_eq!(report.settings.len(), 3);
        for platform in raw.platforms.keys() {
            let coverages: Vec<f64> = report
                .settings
                .iter()
                .map(|s| s.scores[platform].effective_coverage)
                .collect();
            assert!(
                coverages.windows(2).all(|w| w[0] >= w[1] - 1e-12),
                "{platform}: {coverages:?}"
            );
            // Precision never moves with the threshold.
            let precisions: Vec<f64> = report
                .settings
                .iter()
                .map(|s| s.scores[platform].relevance_precision)
                .collect();
            assert!(precisions.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-12));
        }
        // Rankings are permutations of the platform list.
        for setting in &report.settings {
            let mut sorted = setting.ranking.clone();
            sorted.sort();
            let platforms: Vec<String> = raw.platforms.keys().cloned().collect();
            assert_eq!(sorted, platforms);
        }
        assert!(threshold_sweep(&raw, &[0.0]).is_err());
        assert!(threshold_sweep(&raw, &[1.1]).is_err());
        assert!(threshold_sweep(&raw, &[]).is_err());
    }

    #[test]
    fn binary_remap_never_beats_partial_credit() {
        let (raw, _gateway, _dir) = evaluated_corpus();
        let report = partial_credit_ablation(&raw).unwrap();
        assert_eq!(report.settings.len(), 2);
        let partial = &report.settings[0];
        let binary = &report.settings[1];
        for platform in raw.platforms.keys() {
            let p = &partial.scores[platform];
            let b = &binary.scores[platform];
            assert!(b.relevance_precision <= p.relevance_precision + 1e-12);
            assert!(b.effective_coverage <= p.effective_coverage + 1e-12);
            assert!(b.overall <= p.overall + 1e-12);
            // The planted corpus has partially-met verdicts, so the drop is real.
            assert!(b.relevance_precision < p.relevance_precision);
        }
    }

    #[test]
    fn topk_sweep_records_per_k_padding() {
        let (raw, _gateway, _dir) = evaluated_corpus();
        let report = topk_sweep(&raw, &[5, 10, 15]).unwrap();
        assert_eq!(report.padding_policy.as_deref(), Some("per_k"));
        assert_eq!(report.settings.len(), 3);
        // With imperfect grades beyond the early ranks, smaller K scores
        // at least as high under per-K padding.
        for platform in raw.platforms.keys() {
            let precisions: Vec<f64> = report
                .settings
                .iter()
                .map(|s| s.scores[platform].relevance_precision)
                .collect();
            assert!(
                precisions.windows(2).all(|w| w[0] >= w[1] - 1e-12),
                "{platform}: {precisions:?}"
            );
        }
        assert!(matches!(
            topk_sweep(&raw, &[16]),
            Err(AblationError::KTooLarge { k: 16, max: 15 })
        ));
        assert!(matches!(topk_sweep(&raw, &[0]), Err(AblationError::ZeroK)));
    }

    #[test]
    fn weight_sweep_reweights_fixed_dimensions() {
        let (raw, _gateway, _dir) = evaluated_corpus();
        let config = &raw.config;
        let dims: BTreeMap<String, DimensionScores> = raw
            .platforms
            .iter()
            .map(|(id, evals)| (id.clone(), compute_dimensions(evals, config)))
            .collect();
        let report = weight_sweep(&dims, &named_schemes(), false, None).unwrap();
        assert_eq!(report.settings.len(), 4);
        // Equal weights must agree with the stored overall.
        for (platform, dims_value) in &dims {
            let equal = &report.settings[0].scores[platform];
            assert!((equal.overall - dims_value.overall).abs() < 1e-9);
        }

        // A pure-precision projection ranks platforms by precision alone.
        let projection = weight_sweep(
            &dims,
            &[WeightScheme { name: "prec-only".into(), weights: [1.0, 0.0, 0.0] }],
            false,
            None,
        )
        .unwrap();
        let mut by_precision: Vec<&String> = dims.keys().collect();
        by_precision.sort_by(|a, b| {
            dims[*b]
                .relevance_precision
                .partial_cmp(&dims[*a].relevance_precision)
                .unwrap()
                .then_with(|| a.cmp(b))
        });
        let expected: Vec<String> = by_precision.into_iter().cloned().collect();
        assert_eq!(projection.settings[0].ranking, expected);

        // Bad scheme and missing-preferences errors.
        assert!(weight_sweep(
            &dims,
            &[WeightScheme { name: "bad".into(), weights: [0.5, 0.5, 0.5] }],
            false,
            None
        )
        .is_err());
        assert!(matches!(
            weight_sweep(&dims, &[], true, None),
            Err(AblationError::MissingPreferences)
        ));
    }

    #[test]
    fn grid_search_recovers_a_preference_ordering() {
        let (raw, _gateway, _dir) = evaluated_corpus();
        let config = &raw.config;
        let dims: BTreeMap<String, DimensionScores> = raw
            .platforms
            .iter()
            .map(|(id, evals)| (id.clone(), compute_dimensions(evals, config)))
            .collect();
        // Prefer platforms exactly as the equal-weight overall orders them;
        // the grid search must then find a perfectly correlated scheme.
        let preferences: BTreeMap<String, f64> =
            dims.iter().map(|(id, d)| (id.clone(), d.overall)).collect();
        let report = weight_sweep(&dims, &[], true, Some(&preferences)).unwrap();
        let grid = report.settings.last().unwrap();
        assert!(grid.label.contains("rho=1.00"), "{}", grid.label);

        let incomplete: BTreeMap<String, f64> =
            preferences.iter().take(2).map(|(k, v)| (k.clone(), *v)).collect();
        assert!(matches!(
            weight_sweep(&dims, &[], true, Some(&incomplete)),
            Err(AblationError::MissingPreferenceFor(_))
        ));
    }

    #[test]
    fn stability_probe_on_mock_judge_is_exact() {
        let (raw, gateway, _dir) = evaluated_corpus();
        let queries: Vec<QuerySpec> =
            raw.platforms.values().next().unwrap().iter().map(|e| e.query.clone()).collect();
        let report = criteria_stability_probe(&gateway, &queries, 5, 0.7);
        assert_eq!(report.runs, 5);
        assert_eq!(report.total_extractions, queries.len() * 5);
        assert_eq!(report.total_errors, 0);
        assert_eq!(report.exact_match_rate, 1.0);
        assert_eq!(report.std_count, 0.0);
        assert!((report.mean_count - 3.0).abs() < 1e-12);
        assert!(report.queries.iter().all(|q| q.exact_match && q.std_count == 0.0));
    }

    #[test]
    fn repeated_sweeps_are_identical() {
        let (raw, _gateway, _dir) = evaluated_corpus();
        let a = serde_json::to_string(&threshold_sweep(&raw, &[0.3, 0.5, 0.7]).unwrap()).unwrap();
        let b = serde_json::to_string(&threshold_sweep(&raw, &[0.3, 0.5, 0.7]).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
