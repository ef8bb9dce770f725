//! Bootstrap uncertainty, significance tests, pairwise comparisons, and
//! agreement metrics over per-query score vectors.
//!
//! All randomized routines are seeded and derive an independent sub-seed per
//! bootstrap iteration, so results depend only on (inputs, seed) — never on
//! scheduling or iteration order.

use std::collections::HashMap;
use std::hash::Hash;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors for malformed statistical inputs.
#[derive(Debug, Error)]
pub enum StatsError {
    #[error("input must be non-empty")]
    EmptyInput,
    #[error("length mismatch: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("need at least {need} paired observations, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("correlation undefined: an argument has zero variance")]
    ZeroVariance,
    #[error("coefficient of variation undefined: mean is zero")]
    ZeroMean,
    #[error("kappa undefined: expected agreement is 1 while observed is not")]
    DegenerateAgreement,
    #[error("stratum {stratum:?} holds {have} pairs, need {need}")]
    UndersizedStratum { stratum: String, have: usize, need: usize },
}

/// Percentile-bootstrap interval around a sample statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    /// The full-sample statistic (the mean, for mean-type metrics).
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub iterations: usize,
    pub seed: u64,
}

/// One cell of the pairwise comparison matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub platform_a: String,
    pub platform_b: String,
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
    pub p_value: f64,
}

/// Judge-vs-human agreement summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub kappa: f64,
    pub kappa_ci: ConfidenceInterval,
    /// Plain fraction of identical labels.
    pub raw_agreement: f64,
    /// Present only when paired numeric scores were supplied.
    pub pearson_r: Option<f64>,
}

/// Scores at or below this distance count as tied in pairwise comparisons.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// splitmix64 — mixes a seed and an iteration index into a sub-seed.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Percentile bootstrap for an arbitrary statistic over `n` observations.
///
/// `stat` receives a resampled index multiset each iteration. `observed` is
/// the full-sample statistic reported as the interval's center.
pub fn bootstrap_ci_stat(
    n: usize,
    observed: f64,
    iters: usize,
    level: f64,
    seed: u64,
    stat: impl Fn(&[usize]) -> f64,
) -> Result<ConfidenceInterval, StatsError> {
    if n == 0 || iters == 0 {
        return Err(StatsError::EmptyInput);
    }
    let mut resampled = Vec::with_capacity(iters);
    let mut indices = vec![0usize; n];
    for iteration in 0..iters {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, iteration as u64));
        for slot in indices.iter_mut() {
            *slot = rng.random_range(0..n);
        }
        resampled.push(stat(&indices));
    }
    resampled.sort_by(|a, b| a.total_cmp(b));
    let alpha = (1.0 - level) / 2.0;
    let lower = quantile(&resampled, alpha);
    let upper = quantile(&resampled, 1.0 - alpha);
    // With very few iterations the empirical quantiles can miss the sample
    // statistic; widen so the documented bracket invariant always holds.
    Ok(ConfidenceInterval {
        mean: observed,
        lower: lower.min(observed),
        upper: upper.max(observed),
        level,
        iterations: iters,
        seed,
    })
}

/// Percentile-bootstrap CI for the mean of `values`.
pub fn bootstrap_ci(values: &[f64], iters: usize, level: f64, seed: u64) -> Result<ConfidenceInterval, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    bootstrap_ci_stat(values.len(), mean, iters, level, seed, |indices| {
        indices.iter().map(|i| values[*i]).sum::<f64>() / indices.len() as f64
    })
}

/// Two-sided paired bootstrap test on per-query differences.
///
/// Resamples the difference vector, then p = 2 × min(frac(mean* ≤ 0),
/// frac(mean* ≥ 0)), clamped to [0, 1]. Symmetric in argument order.
pub fn paired_bootstrap_test(a: &[f64], b: &[f64], iters: usize, seed: u64) -> Result<f64, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch { a: a.len(), b: b.len() });
    }
    if a.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len();
    let mut at_or_below = 0usize;
    let mut at_or_above = 0usize;
    for iteration in 0..iters {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, iteration as u64));
        let mut sum = 0.0;
        for _ in 0..n {
            sum += diffs[rng.random_range(0..n)];
        }
        let mean = sum / n as f64;
        if mean <= 0.0 {
            at_or_below += 1;
        }
        if mean >= 0.0 {
            at_or_above += 1;
        }
    }
    let frac_below = at_or_below as f64 / iters as f64;
    let frac_above = at_or_above as f64 / iters as f64;
    Ok((2.0 * frac_below.min(frac_above)).clamp(0.0, 1.0))
}

/// Pairwise win/tie/loss counts (plus paired-test p-values) for every
/// ordered platform pair. Platforms must share one query order.
pub fn win_tie_loss(
    platforms: &[(String, Vec<f64>)],
    iters: usize,
    seed: u64,
) -> Result<Vec<PairwiseComparison>, StatsError> {
    if let Some(((_, first), rest)) = platforms.split_first() {
        for (_, scores) in rest {
            if scores.len() != first.len() {
                return Err(StatsError::LengthMismatch { a: first.len(), b: scores.len() });
            }
        }
    }
    let mut out = Vec::new();
    for (name_a, scores_a) in platforms {
        for (name_b, scores_b) in platforms {
            if name_a == name_b {
                continue;
            }
            let mut wins = 0;
            let mut ties = 0;
            let mut losses = 0;
            for (x, y) in scores_a.iter().zip(scores_b) {
                if (x - y).abs() < TIE_TOLERANCE {
                    ties += 1;
                } else if x > y {
                    wins += 1;
                } else {
                    losses += 1;
                }
            }
            out.push(PairwiseComparison {
                platform_a: name_a.clone(),
                platform_b: name_b.clone(),
                wins,
                ties,
                losses,
                p_value: paired_bootstrap_test(scores_a, scores_b, iters, seed)?,
            });
        }
    }
    Ok(out)
}

/// Cohen's κ over the resampled-index view; degenerate marginals fall back
/// to 0 (used only inside the bootstrap loop, where erroring would bias).
fn kappa_on_indices<T: Eq + Hash>(a: &[T], b: &[T], indices: &[usize]) -> f64 {
    let n = indices.len() as f64;
    let mut agree = 0usize;
    let mut count_a: HashMap<&T, usize> = HashMap::new();
    let mut count_b: HashMap<&T, usize> = HashMap::new();
    for &i in indices {
        if a[i] == b[i] {
            agree += 1;
        }
        *count_a.entry(&a[i]).or_default() += 1;
        *count_b.entry(&b[i]).or_default() += 1;
    }
    let p_o = agree as f64 / n;
    let p_e: f64 = count_a
        .iter()
        .map(|(label, ca)| {
            let cb = count_b.get(label).copied().unwrap_or(0);
            (*ca as f64 / n) * (cb as f64 / n)
        })
        .sum();
    if (1.0 - p_e).abs() < 1e-12 {
        return if (p_o - 1.0).abs() < 1e-12 { 1.0 } else { 0.0 };
    }
    (p_o - p_e) / (1.0 - p_e)
}

/// Cohen's κ between two label sequences.
pub fn cohens_kappa<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<f64, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch { a: a.len(), b: b.len() });
    }
    if a.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let n = a.len() as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64;
    let p_o = agree / n;
    let mut count_a: HashMap<&T, usize> = HashMap::new();
    let mut count_b: HashMap<&T, usize> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *count_a.entry(x).or_default() += 1;
        *count_b.entry(y).or_default() += 1;
    }
    let p_e: f64 = count_a
        .iter()
        .map(|(label, ca)| {
            let cb = count_b.get(*label).copied().unwrap_or(0);
            (*ca as f64 / n) * (cb as f64 / n)
        })
        .sum();
    if (1.0 - p_e).abs() < 1e-12 {
        // Both annotators used a single identical label: perfect agreement.
        // A single label pair with disagreement has p_e < 1, so the only
        // remaining case is genuinely undefined.
        return if (p_o - 1.0).abs() < 1e-12 { Ok(1.0) } else { Err(StatsError::DegenerateAgreement) };
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Sample Pearson correlation coefficient.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { a: x.len(), b: y.len() });
    }
    if x.len() < 2 {
        return Err(StatsError::TooFew { need: 2, got: x.len() });
    }
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x <= 0.0 || var_y <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok(cov / (var_x.sqrt() * var_y.sqrt()))
}

/// Fractional ranks (1-based), with ties sharing their average rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|a, b| values[*a].partial_cmp(&values[*b]).expect("comparable values"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j hold equal values; all get the average rank.
        let rank = (i + 1 + j + 1) as f64 / 2.0;
        for position in i..=j {
            ranks[order[position]] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    pearson_r(&average_ranks(x), &average_ranks(y))
}

/// Population standard deviation divided by the mean.
pub fn coefficient_of_variation(values: &[f64]) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean.abs() < 1e-12 {
        return Err(StatsError::ZeroMean);
    }
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(variance.sqrt() / mean)
}

/// Judge-vs-annotator agreement: κ with a bootstrap CI, raw agreement, and
/// (when paired numeric scores exist) Pearson's r.
pub fn agreement_report<T: Eq + Hash>(
    labels_a: &[T],
    labels_b: &[T],
    scores: Option<(&[f64], &[f64])>,
    iters: usize,
    level: f64,
    seed: u64,
) -> Result<AgreementReport, StatsError> {
    let kappa = cohens_kappa(labels_a, labels_b)?;
    let raw_agreement =
        labels_a.iter().zip(labels_b).filter(|(x, y)| x == y).count() as f64 / labels_a.len() as f64;
    let kappa_ci = bootstrap_ci_stat(labels_a.len(), kappa, iters, level, seed, |indices| {
        kappa_on_indices(labels_a, labels_b, indices)
    })?;
    let pearson = scores.map(|(x, y)| pearson_r(x, y)).transpose()?;
    Ok(AgreementReport { kappa, kappa_ci, raw_agreement, pearson_r: pearson })
}

/// Draws exactly `per_stratum` items uniformly without replacement from each
/// named stratum, in the given stratum order. Deterministic for a seed.
pub fn stratified_sample<T: Clone>(
    items: &[(String, T)],
    strata: &[String],
    per_stratum: usize,
    seed: u64,
) -> Result<Vec<T>, StatsError> {
    if per_stratum == 0 {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(strata.len() * per_stratum);
    for (stratum_index, stratum) in strata.iter().enumerate() {
        let mut pool: Vec<&T> =
            items.iter().filter(|(category, _)| category == stratum).map(|(_, item)| item).collect();
        if pool.len() < per_stratum {
            return Err(StatsError::UndersizedStratum {
                stratum: stratum.clone(),
                have: pool.len(),
                need: per_stratum,
            });
        }
        // Partial Fisher–Yates: the first per_stratum slots become the draw.
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, stratum_index as u64));
        for i in 0..per_stratum {
            let j = rng.random_range(i..pool.len());
            pool.swap(i, j);
        }
        out.extend(pool[..per_stratum].iter().map(|item| (*item).clone()));
    }
    Ok(out)
}
