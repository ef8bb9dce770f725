//! Command-line benchmark runner.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use pseval::ablation;
use pseval::fsio;
use pseval::model::RunConfig;
use pseval::pipeline::RawEvaluationSet;
use pseval::report::{self, ReportFormat};
use pseval::runner::{self, CostLatencyLedger};
use pseval::scoring::compute_dimensions;

#[derive(Parser)]
#[command(
    name = "pseval",
    version,
    about = "Criteria-grounded evaluation for people-search systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Configuration source plus command-line overrides.
#[derive(Args)]
struct ConfigArgs {
    /// Run configuration file (JSON); built-in defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the evaluation worker count.
    #[arg(long)]
    workers: Option<usize>,
    /// Override the run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Judge backend: "mock" or "http" (credentials come from PSEVAL_JUDGE_* env vars).
    #[arg(long = "backend-judge")]
    backend_judge: Option<String>,
    /// Search backend: "mock" or "http" (credentials come from PSEVAL_SEARCH_* env vars).
    #[arg(long = "backend-search")]
    backend_search: Option<String>,
    /// Pin the run timestamp so run ids (and artifacts) are reproducible.
    #[arg(long)]
    stamp: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut config: RunConfig = match &self.config {
            Some(path) => fsio::read_json(path).context("reading --config")?,
            None => RunConfig::default(),
        };
        if let Some(workers) = self.workers {
            config.workers = workers;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(judge) = &self.backend_judge {
            config.judge_backend = judge.clone();
        }
        if let Some(search) = &self.backend_search {
            config.search_backend = search.clone();
        }
        if let Some(stamp) = &self.stamp {
            config.run_stamp = Some(stamp.clone());
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Execute a full evaluation over a fixture directory.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Fixture directory (queries.json, mappings.json, per-platform outputs).
        #[arg(long)]
        fixtures: PathBuf,
        /// Output root; each run writes an append-only subdirectory.
        #[arg(long)]
        out: PathBuf,
        /// Response cache directory (default: <out>/cache, shared across runs).
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Prompt template directory overriding the built-in prompts.
        #[arg(long)]
        prompts: Option<PathBuf>,
    },
    /// Recompute score reports from a stored evaluation set.
    Score {
        /// A run's eval.json.
        #[arg(long)]
        eval: PathBuf,
        #[arg(long, default_value = "plain")]
        format: String,
        /// Write here instead of stdout (JSON artifact for .json paths).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pairwise win/tie/loss, p-values, and scenario dispersion.
    Stats {
        #[arg(long)]
        eval: PathBuf,
        #[arg(long, default_value = "plain")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-aggregate a stored evaluation set under alternative settings.
    Sweep {
        #[arg(long)]
        eval: PathBuf,
        /// One of: threshold, topk, weights, partial.
        #[arg(long)]
        kind: String,
        /// Comma-separated settings (thresholds or K values), e.g. "0.3,0.5,0.7".
        #[arg(long)]
        values: Option<String>,
        /// For --kind weights: also grid-search the weight simplex (step 0.05).
        #[arg(long)]
        grid: bool,
        /// For --grid: JSON file mapping platform id to a preference score.
        #[arg(long)]
        preferences: Option<PathBuf>,
        #[arg(long, default_value = "plain")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run criteria extraction repeatedly to measure drift.
    Probe {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        fixtures: PathBuf,
        /// Extractions per query.
        #[arg(long, default_value_t = 5)]
        runs: usize,
        /// Sampling temperature for the probe.
        #[arg(long, default_value_t = 0.7)]
        temperature: f64,
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        prompts: Option<PathBuf>,
        #[arg(long, default_value = "plain")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export a stratified annotation worksheet from a stored run.
    Sample {
        #[arg(long)]
        eval: PathBuf,
        /// Person-query pairs to draw from each query category.
        #[arg(long, default_value_t = 50)]
        per_stratum: usize,
        /// Sampling seed (default: the run's seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Write the worksheet here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render the headline, scenario, and comparison tables from a run.
    Report {
        #[arg(long)]
        eval: PathBuf,
        #[arg(long, default_value = "plain")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a run ledger: per-stage costs, totals, per-query averages.
    Account {
        /// A run's meta/ledger.json.
        #[arg(long)]
        ledger: PathBuf,
        #[arg(long, default_value = "plain")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic fixture corpus with planted ground truth.
    GenCorpus {
        /// Directory to create the fixture corpus in.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        queries_per_category: usize,
        #[arg(long, default_value_t = 12)]
        people_per_query: usize,
        /// Comma-separated platform ids.
        #[arg(long, default_value = "alpha,beta,gamma,delta")]
        platforms: String,
        #[arg(long, default_value_t = 0.2)]
        partial_rate: f64,
        #[arg(long, default_value_t = 0.2)]
        near_miss_rate: f64,
        #[arg(long, default_value_t = 0.1)]
        far_miss_rate: f64,
        #[arg(long, default_value_t = 0.0)]
        false_positive_rate: f64,
        #[arg(long, default_value_t = 0.0)]
        incomplete_rate: f64,
        #[arg(long, default_value_t = 0.0)]
        dropout_rate: f64,
        #[arg(long, default_value_t = 0.0)]
        task_failure_rate: f64,
    },
}

fn parse_format(s: &str) -> anyhow::Result<ReportFormat> {
    Ok(ReportFormat::from_str(s)?)
}

fn parse_list<T: FromStr>(input: &str, what: &str) -> anyhow::Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    input
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| anyhow::anyhow!("bad {what} value {s:?}: {e}")))
        .collect()
}

fn load_eval(path: &Path) -> anyhow::Result<RawEvaluationSet> {
    let artifact: fsio::Artifact<RawEvaluationSet> =
        fsio::read_artifact(path).context("reading --eval")?;
    Ok(artifact.data)
}

/// Prints a line to stdout, exiting quietly if the reader hung up
/// (e.g. `pseval report | head`).
fn print_stdout(body: &str) {
    let mut out = std::io::stdout().lock();
    if let Err(error) = writeln!(out, "{body}") {
        if error.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: writing to stdout: {error}");
        std::process::exit(1);
    }
}

/// Prints to stdout, or writes to a file with the config stamp appended.
fn emit(
    out: &Option<PathBuf>,
    format: ReportFormat,
    body: &str,
    config_hash: &str,
    seed: u64,
) -> anyhow::Result<()> {
    match out {
        None => {
            print_stdout(body);
            Ok(())
        }
        Some(path) => {
            let stamped = match format {
                // The CSV stamp is a leading comment line; text formats
                // carry a trailing config line.
                ReportFormat::Csv => format!("{}{body}", report::stamp_line(format, config_hash, seed)),
                _ => format!("{body}{}", report::stamp_line(format, config_hash, seed)),
            };
            fsio::write_text(path, &stamped)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn run_command(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Run { config, fixtures, out, cache, prompts } => {
            let config = config.resolve()?;
            let outcome =
                runner::execute_run(config, &fixtures, &out, cache, prompts.as_deref())?;
            print_stdout(&outcome.summary);
            eprintln!("run {} -> {}", outcome.run_id, outcome.run_dir.display());
            if outcome.valid {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!(
                    "run INVALID: {} person-evaluations failed the judge (over budget)",
                    outcome.failed_persons
                );
                Ok(ExitCode::from(2))
            }
        }
        Command::Score { eval, format, out } => {
            let format = parse_format(&format)?;
            let set = load_eval(&eval)?;
            let reports = runner::build_reports(&set)?;
            if let Some(path) = &out {
                if path.extension().is_some_and(|e| e == "json") {
                    fsio::write_artifact(path, &set.config, &reports)?;
                    eprintln!("wrote {}", path.display());
                    return Ok(ExitCode::SUCCESS);
                }
            }
            let body = report::render_summary(&reports, format);
            emit(&out, format, &body, &set.config.hash(), set.config.seed)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Stats { eval, format, out } => {
            let format = parse_format(&format)?;
            let set = load_eval(&eval)?;
            let statistics = runner::build_statistics(&set)?;
            let body = format!(
                "{}\n{}",
                report::render_wtl_matrix(&statistics.comparisons, format),
                report::render_statistics(&statistics, format)
            );
            emit(&out, format, &body, &set.config.hash(), set.config.seed)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { eval, kind, values, grid, preferences, format, out } => {
            let format = parse_format(&format)?;
            let set = load_eval(&eval)?;
            let report_data = match kind.as_str() {
                "threshold" => {
                    let thresholds = match &values {
                        Some(list) => parse_list::<f64>(list, "threshold")?,
                        None => vec![0.3, 0.5, 0.7],
                    };
                    ablation::threshold_sweep(&set, &thresholds)?
                }
                "topk" | "top-k" | "top_k" => {
                    let ks = match &values {
                        Some(list) => parse_list::<usize>(list, "K")?,
                        None => vec![5, 10, 15],
                    };
                    ablation::topk_sweep(&set, &ks)?
                }
                "partial" | "partial-credit" | "partial_credit" => {
                    ablation::partial_credit_ablation(&set)?
                }
                "weights" => {
                    let dims: BTreeMap<String, pseval::scoring::DimensionScores> = set
                        .platforms
                        .iter()
                        .map(|(id, evals)| (id.clone(), compute_dimensions(evals, &set.config)))
                        .collect();
                    let prefs: Option<BTreeMap<String, f64>> = match &preferences {
                        Some(path) => Some(fsio::read_json(path).context("reading --preferences")?),
                        None => None,
                    };
                    ablation::weight_sweep(&dims, &ablation::named_schemes(), grid, prefs.as_ref())?
                }
                other => anyhow::bail!(
                    "unknown sweep kind {other:?}; expected threshold, topk, weights, or partial"
                ),
            };
            let body = report::render_sweep(&report_data, format);
            emit(&out, format, &body, &set.config.hash(), set.config.seed)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Probe { config, fixtures, runs, temperature, cache, prompts, format, out } => {
            let format = parse_format(&format)?;
            let config = config.resolve()?;
            let fixture_set = fsio::load_fixtures(&fixtures)?;
            let cache_dir = cache.unwrap_or_else(|| std::env::temp_dir().join("pseval-probe-cache"));
            let gateway =
                runner::build_gateway(&config, &fixtures, cache_dir, prompts.as_deref())?;
            let probe =
                ablation::criteria_stability_probe(&gateway, &fixture_set.queries, runs, temperature);
            let body = report::render_probe(&probe, format);
            emit(&out, format, &body, &config.hash(), config.seed)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sample { eval, per_stratum, seed, out } => {
            let set = load_eval(&eval)?;
            let seed = seed.unwrap_or(set.config.seed);
            let worksheet = runner::sample_worksheet(&set, per_stratum, seed)?;
            match &out {
                None => print_stdout(&worksheet),
                Some(path) => {
                    fsio::write_text(path, &worksheet)?;
                    eprintln!("wrote {}", path.display());
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { eval, format, out } => {
            let format = parse_format(&format)?;
            let set = load_eval(&eval)?;
            let reports = runner::build_reports(&set)?;
            let statistics = runner::build_statistics(&set)?;
            let body = format!(
                "{}\n{}\n{}",
                report::render_summary(&reports, format),
                report::render_scenarios(&reports, format),
                report::render_wtl_matrix(&statistics.comparisons, format)
            );
            emit(&out, format, &body, &set.config.hash(), set.config.seed)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Account { ledger, format, out } => {
            let format = parse_format(&format)?;
            let ledger: CostLatencyLedger = fsio::read_json(&ledger).context("reading --ledger")?;
            let body = report::render_account(&ledger, format);
            emit(&out, format, &body, &ledger.config_hash, ledger.seed)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::GenCorpus {
            out,
            seed,
            queries_per_category,
            people_per_query,
            platforms,
            partial_rate,
            near_miss_rate,
            far_miss_rate,
            false_positive_rate,
            incomplete_rate,
            dropout_rate,
            task_failure_rate,
        } => {
            let spec = pseval::mock::corpus::SyntheticCorpusSpec {
                platforms: parse_list::<String>(&platforms, "platform")?,
                queries_per_category,
                people_per_query,
                partial_rate,
                near_miss_rate,
                far_miss_rate,
                false_positive_rate,
                incomplete_rate,
                dropout_rate,
                task_failure_rate,
                seed,
            };
            let corpus = pseval::mock::corpus::generate_corpus(&spec)?;
            fsio::write_fixtures(&out, &corpus.fixtures)?;
            fsio::write_json(&out.join("ruleset.json"), &corpus.ruleset)?;
            fsio::write_json(&out.join("truth.json"), &corpus.truth)?;
            eprintln!(
                "generated {} queries x {} platforms -> {}",
                corpus.fixtures.queries.len(),
                corpus.fixtures.platforms.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run_command(cli.command) {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}
