//! Tabular rendering of run results.
//!
//! Every table renders in three formats: comma-separated for machines,
//! markdown for docs, and aligned plain text for terminals. Scores print
//! with one decimal; bootstrap intervals print as "value ± half-width".
//! Empty inputs render headers only.

use std::collections::BTreeMap;
use std::str::FromStr;

use thiserror::Error;

use crate::ablation::{StabilityReport, SweepReport};
use crate::model::PlatformReport;
use crate::runner::{account, CostLatencyLedger, RunStatistics, STAGES};
use crate::stats::PairwiseComparison;

/// Errors from report rendering.
#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown report format {0:?}; expected csv, markdown, or plain")]
    UnknownFormat(String),
}

/// Output encodings for rendered tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
    Plain,
}

impl FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<ReportFormat, ReportError> {
        match s.to_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "plain" | "text" | "txt" => Ok(ReportFormat::Plain),
            other => Err(ReportError::UnknownFormat(other.to_string())),
        }
    }
}

/// The line appended to report files naming their configuration.
pub fn stamp_line(format: ReportFormat, config_hash: &str, seed: u64) -> String {
    match format {
        ReportFormat::Csv => format!("# config={config_hash} seed={seed}\n"),
        ReportFormat::Markdown => format!("\n_config {config_hash}, seed {seed}_\n"),
        ReportFormat::Plain => format!("\nconfig {config_hash}, seed {seed}\n"),
    }
}

struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(headers: &[&str]) -> Table {
        Table { headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.headers.len());
        self.rows.push(cells);
    }

    fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Csv => self.render_csv(),
            ReportFormat::Markdown => self.render_markdown(),
            ReportFormat::Plain => self.render_plain(),
        }
    }

    fn render_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(&self.headers).expect("in-memory write");
        for row in &self.rows {
            writer.write_record(row).expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf8 table")
    }

    fn render_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("| {} |\n", self.headers.join(" | ")));
        out.push_str(&format!("|{}\n", " --- |".repeat(self.headers.len())));
        for row in &self.rows {
            out.push_str(&format!("| {} |\n", row.join(" | ")));
        }
        out
    }

    fn render_plain(&self) -> String {
        let mut widths: Vec<usize> = self.headers.iter().map(String::len).collect();
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                widths[i] = widths[i].max(cell.len());
            }
        }
        let line = |cells: &[String]| {
            cells
                .iter()
                .enumerate()
                .map(|(i, c)| format!("{c:<width$}", width = widths[i]))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = line(&self.headers);
        out.push('\n');
        out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&line(row));
            out.push('\n');
        }
        out
    }
}

fn fmt1(v: f64) -> String {
    format!("{v:.1}")
}

/// "65.2" for a point value, "65.2 ± 1.3" when the interval has width.
fn fmt_ci(score: &crate::model::ScoreWithCi) -> String {
    let half = (score.upper - score.lower) / 2.0;
    if half >= 0.05 {
        format!("{:.1} ± {half:.1}", score.value)
    } else {
        fmt1(score.value)
    }
}

/// The headline score table, platforms ordered best-first by overall.
pub fn render_summary(
    reports: &BTreeMap<String, PlatformReport>,
    format: ReportFormat,
) -> String {
    let mut table = Table::new(&[
        "Platform",
        "Relevance Precision",
        "Effective Coverage",
        "Information Utility",
        "Overall",
        "TCR %",
        "Mean Qualified",
    ]);
    let mut order: Vec<&PlatformReport> = reports.values().collect();
    order.sort_by(|a, b| {
        b.overall
            .value
            .partial_cmp(&a.overall.value)
            .expect("finite scores")
            .then_with(|| a.platform_id.cmp(&b.platform_id))
    });
    for report in order {
        table.row(vec![
            report.platform_id.clone(),
            fmt_ci(&report.relevance_precision),
            fmt_ci(&report.effective_coverage),
            fmt_ci(&report.information_utility),
            fmt_ci(&report.overall),
            fmt1(report.tcr * 100.0),
            fmt1(report.mean_qualified),
        ]);
    }
    table.render(format)
}

/// Per-category score breakdown, one row per platform × category.
pub fn render_scenarios(
    reports: &BTreeMap<String, PlatformReport>,
    format: ReportFormat,
) -> String {
    let mut table = Table::new(&[
        "Platform",
        "Category",
        "Queries",
        "Relevance Precision",
        "Effective Coverage",
        "Information Utility",
        "Overall",
    ]);
    for report in reports.values() {
        for row in &report.per_scenario {
            table.row(vec![
                report.platform_id.clone(),
                row.category.clone(),
                row.queries.to_string(),
                fmt1(row.relevance_precision),
                fmt1(row.effective_coverage),
                fmt1(row.information_utility),
                fmt1(row.overall),
            ]);
        }
    }
    table.render(format)
}

/// One win/tie/loss cell: "89/18/12".
pub fn wtl_cell(c: &PairwiseComparison) -> String {
    format!("{}/{}/{}", c.wins, c.ties, c.losses)
}

/// The pairwise matrix: each cell is the row platform's W/T/L vs the column.
pub fn render_wtl_matrix(comparisons: &[PairwiseComparison], format: ReportFormat) -> String {
    let mut ids: Vec<&str> = comparisons
        .iter()
        .flat_map(|c| [c.platform_a.as_str(), c.platform_b.as_str()])
        .collect();
    ids.sort();
    ids.dedup();
    let mut headers = vec!["Platform"];
    headers.extend(ids.iter().copied());
    let mut table = Table::new(&headers);
    for a in &ids {
        let mut cells = vec![a.to_string()];
        for b in &ids {
            if a == b {
                cells.push("-".into());
            } else {
                let cell = comparisons
                    .iter()
                    .find(|c| c.platform_a == *a && c.platform_b == *b)
                    .map(wtl_cell)
                    .unwrap_or_default();
                cells.push(cell);
            }
        }
        table.row(cells);
    }
    table.render(format)
}

/// The comparison list: W/T/L plus paired bootstrap p-values, and each
/// platform's scenario dispersion underneath.
pub fn render_statistics(statistics: &RunStatistics, format: ReportFormat) -> String {
    let mut table = Table::new(&["Platform A", "Platform B", "W/T/L", "p-value"]);
    for c in &statistics.comparisons {
        table.row(vec![
            c.platform_a.clone(),
            c.platform_b.clone(),
            wtl_cell(c),
            format!("{:.3}", c.p_value),
        ]);
    }
    let mut cv_table = Table::new(&["Platform", "Scenario CV %"]);
    for (platform, cv) in &statistics.scenario_cv {
        cv_table.row(vec![
            platform.clone(),
            cv.map(|v| fmt1(v * 100.0)).unwrap_or_else(|| "-".into()),
        ]);
    }
    format!("{}\n{}", table.render(format), cv_table.render(format))
}

/// Cost/latency account: one row per stage, then totals and per-query averages.
pub fn render_account(ledger: &CostLatencyLedger, format: ReportFormat) -> String {
    let mut table = Table::new(&[
        "Stage",
        "Calls",
        "Units",
        "Unit Cost",
        "Cost Units",
        "Wall s",
    ]);
    for stage in STAGES {
        let Some(entry) = ledger.stages.get(stage) else { continue };
        table.row(vec![
            stage.to_string(),
            entry.calls.to_string(),
            fmt1(entry.units),
            format!("{:.3}", entry.unit_cost),
            format!("{:.2}", entry.cost_units),
            format!("{:.2}", entry.wall_seconds),
        ]);
    }
    let summary = account(ledger);
    table.row(vec![
        "total".into(),
        summary.totals.calls.to_string(),
        fmt1(summary.totals.units),
        String::new(),
        format!("{:.2}", summary.totals.cost_units),
        format!("{:.2}", summary.totals.wall_seconds),
    ]);
    table.row(vec![
        "per-query average".into(),
        String::new(),
        String::new(),
        String::new(),
        format!("{:.2}", summary.cost_per_query),
        format!("{:.2}", summary.wall_per_query),
    ]);
    table.render(format)
}

/// A sweep: per-setting, per-platform scores plus the ranking position.
pub fn render_sweep(report: &SweepReport, format: ReportFormat) -> String {
    let mut table = Table::new(&[
        "Setting",
        "Platform",
        "Relevance Precision",
        "Effective Coverage",
        "Information Utility",
        "Overall",
        "Rank",
    ]);
    for setting in &report.settings {
        for (platform, dims) in &setting.scores {
            let rank = setting.ranking.iter().position(|p| p == platform).map_or(0, |i| i + 1);
            table.row(vec![
                setting.label.clone(),
                platform.clone(),
                fmt1(dims.relevance_precision),
                fmt1(dims.effective_coverage),
                fmt1(dims.information_utility),
                fmt1(dims.overall),
                rank.to_string(),
            ]);
        }
    }
    let mut out = table.render(format);
    let stability = format!(
        "rank stable across settings: {}",
        if report.rank_stable { "yes" } else { "no" }
    );
    let note = match &report.padding_policy {
        Some(policy) => format!("{} sweep ({stability}; padding: {policy})", report.kind),
        None => format!("{} sweep ({stability})", report.kind),
    };
    match format {
        ReportFormat::Csv => out = format!("# {note}\n{out}"),
        ReportFormat::Markdown => out.push_str(&format!("\n_{note}_\n")),
        ReportFormat::Plain => out.push_str(&format!("\n{note}\n")),
    }
    out
}

/// Criteria-stability probe: one row per query plus the pooled summary.
pub fn render_probe(report: &StabilityReport, format: ReportFormat) -> String {
    let mut table = Table::new(&[
        "Query",
        "Mean Criteria",
        "Std",
        "Min",
        "Max",
        "Exact Match",
        "Errors",
    ]);
    for q in &report.queries {
        table.row(vec![
            q.query_id.clone(),
            format!("{:.2}", q.mean_count),
            format!("{:.2}", q.std_count),
            q.min_count.to_string(),
            q.max_count.to_string(),
            if q.exact_match { "yes" } else { "no" }.to_string(),
            q.errors.to_string(),
        ]);
    }
    table.row(vec![
        "ALL".into(),
        format!("{:.2}", report.mean_count),
        format!("{:.2}", report.std_count),
        String::new(),
        String::new(),
        format!("{:.1}%", report.exact_match_rate * 100.0),
        report.total_errors.to_string(),
    ]);
    let mut out = table.render(format);
    let note = format!(
        "{} runs per query at temperature {:.2}; {} extractions total",
        report.runs, report.temperature, report.total_extractions
    );
    match format {
        ReportFormat::Csv => out = format!("# {note}\n{out}"),
        ReportFormat::Markdown => out.push_str(&format!("\n_{note}_\n")),
        ReportFormat::Plain => out.push_str(&format!("\n{note}\n")),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ScoreWithCi, ScenarioRow};

    fn report(id: &str, triple: [f64; 3], overall: f64) -> PlatformReport {
        PlatformReport {
            platform_id: id.into(),
            relevance_precision: ScoreWithCi::point(triple[0]),
            effective_coverage: ScoreWithCi::point(triple[1]),
            information_utility: ScoreWithCi::point(triple[2]),
            overall: ScoreWithCi::point(overall),
            tcr: 0.933,
            mean_qualified: 5.2,
            per_scenario: vec![ScenarioRow {
                category: "recruiting".into(),
                queries: 30,
                relevance_precision: triple[0],
                effective_coverage: triple[1],
                information_utility: triple[2],
                overall,
            }],
            cost_units: 1.0,
            wall_seconds: 0.0,
        }
    }

    #[test]
    fn summary_renders_one_decimal_scores_best_first() {
        let mut reports = BTreeMap::new();
        reports.insert("omega".to_string(), report("omega", [70.2, 69.1, 56.4], 65.233));
        reports.insert("alpha".to_string(), report("alpha", [53.8, 58.1, 53.1], 55.0));
        let csv = render_summary(&reports, ReportFormat::Csv);
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("Platform,Relevance Precision"));
        assert!(lines[1].starts_with("omega,70.2,69.1,56.4,65.2,"), "{}", lines[1]);
        assert!(lines[2].starts_with("alpha,"), "best-first ordering");

        let md = render_summary(&reports, ReportFormat::Markdown);
        assert!(md.contains("| omega | 70.2 | 69.1 | 56.4 | 65.2 |"), "{md}");

        let plain = render_summary(&reports, ReportFormat::Plain);
        assert!(plain.lines().count() >= 4);
    }

    #[test]
    fn intervals_render_as_half_width() {
        let mut reports = BTreeMap::new();
        let mut r = report("x", [70.0, 60.0, 50.0], 60.0);
        r.overall = ScoreWithCi { value: 60.0, lower: 58.7, upper: 61.3 };
        reports.insert("x".to_string(), r);
        let csv = render_summary(&reports, ReportFormat::Csv);
        assert!(csv.contains("60.0 ± 1.3"), "{csv}");
    }

    #[test]
    fn empty_tables_render_headers_only() {
        let empty = BTreeMap::new();
        let csv = render_summary(&empty, ReportFormat::Csv);
        assert_eq!(csv.lines().count(), 1);
        assert!(csv.starts_with("Platform,"));

        let stats = RunStatistics { comparisons: vec![], scenario_cv: BTreeMap::new() };
        let rendered = render_statistics(&stats, ReportFormat::Csv);
        assert!(rendered.contains("Platform A,Platform B"));
    }

    #[test]
    fn wtl_matrix_shows_slash_cells() {
        let comparisons = vec![
            PairwiseComparison {
                platform_a: "beta".into(),
                platform_b: "alpha".into(),
                wins: 89,
                ties: 18,
                losses: 12,
                p_value: 0.001,
            },
            PairwiseComparison {
                platform_a: "alpha".into(),
                platform_b: "beta".into(),
                wins: 12,
                ties: 18,
                losses: 89,
                p_value: 0.001,
            },
        ];
        let matrix = render_wtl_matrix(&comparisons, ReportFormat::Plain);
        assert!(matrix.contains("89/18/12"), "{matrix}");
        assert!(matrix.contains("12/18/89"), "{matrix}");
        // Alphabetical row order: alpha first (12/18/89), beta second.
        let csv = render_wtl_matrix(&comparisons, ReportFormat::Csv);
        assert!(csv.lines().nth(1).unwrap().contains("12/18/89"));
        assert!(csv.lines().nth(2).unwrap().contains("89/18/12"));
    }

    #[test]
    fn format_parsing_accepts_known_names_only() {
        assert_eq!("csv".parse::<ReportFormat>().unwrap(), ReportFormat::Csv);
        assert_eq!("md".parse::<ReportFormat>().unwrap(), ReportFormat::Markdown);
        assert_eq!("text".parse::<ReportFormat>().unwrap(), ReportFormat::Plain);
        assert!("yaml".parse::<ReportFormat>().is_err());
    }
}
