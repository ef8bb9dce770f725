//! Fixture-directory and artifact file I/O.
//!
//! A fixture directory is the unit of benchmark input:
//!
//! ```text
//! fixtures/
//!   queries.json            query manifest (array of query specs)
//!   mappings.json           array of per-platform field mappings
//!   ruleset.json            optional mock-judge behavior rules
//!   truth.json              optional planted ground truth (generated corpora)
//!   <platform>/<query>.json raw platform output, one file per query
//!   <platform>/<query>.md   (markdown-report platforms use .md)
//! ```
//!
//! Artifacts written by a run are JSON files wrapped in an envelope carrying
//! the config hash and seed, so every emitted file names the configuration
//! that produced it.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{QuerySpec, RunConfig};
use crate::normalize::{FieldMapping, ParserKind};
use crate::pipeline::{FixtureSet, PlatformFixtures};

/// Errors from reading or writing benchmark files.
#[derive(Debug, Error)]
pub enum FsError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("fixtures incomplete: missing {what} ({path})")]
    MissingFixture { what: String, path: PathBuf },
    #[error("refusing to overwrite existing {0}")]
    AlreadyExists(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FsError + '_ {
    move |source| FsError::Io { path: path.to_path_buf(), source }
}

/// Reads and parses one JSON file.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FsError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| FsError::Json { path: path.to_path_buf(), source })
}

/// Writes pretty-printed JSON with a trailing newline, creating parents.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FsError> {
    let body = serde_json::to_string_pretty(value)
        .map_err(|source| FsError::Json { path: path.to_path_buf(), source })?;
    write_text(path, &format!("{body}\n"))
}

/// Writes a text file, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<(), FsError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    file.write_all(text.as_bytes()).map_err(io_err(path))?;
    Ok(())
}

/// Envelope for emitted JSON artifacts: every file names its configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub config_hash: String,
    pub seed: u64,
    pub data: T,
}

/// Writes `data` wrapped in the config-hash/seed envelope.
pub fn write_artifact<T: Serialize>(path: &Path, config: &RunConfig, data: &T) -> Result<(), FsError> {
    write_json(path, &Artifact { config_hash: config.hash(), seed: config.seed, data })
}

/// Reads an enveloped artifact back.
pub fn read_artifact<T: DeserializeOwned>(path: &Path) -> Result<Artifact<T>, FsError> {
    read_json(path)
}

fn extension(kind: ParserKind) -> &'static str {
    match kind {
        ParserKind::Structured => "json",
        ParserKind::MarkdownReport => "md",
    }
}

/// Loads a fixture directory into memory.
///
/// The query manifest and mapping manifest are required, as is one directory
/// per mapped platform. Individual query files may be absent — that platform
/// simply returned nothing for the query — but a missing platform directory
/// is a configuration error.
pub fn load_fixtures(dir: &Path) -> Result<FixtureSet, FsError> {
    let queries_path = dir.join("queries.json");
    if !queries_path.is_file() {
        return Err(FsError::MissingFixture { what: "query manifest".into(), path: queries_path });
    }
    let queries: Vec<QuerySpec> = read_json(&queries_path)?;

    let mappings_path = dir.join("mappings.json");
    if !mappings_path.is_file() {
        return Err(FsError::MissingFixture { what: "mapping manifest".into(), path: mappings_path });
    }
    let mappings: Vec<FieldMapping> = read_json(&mappings_path)?;

    let mut platforms = Vec::with_capacity(mappings.len());
    for mapping in mappings {
        let platform_dir = dir.join(&mapping.platform_id);
        if !platform_dir.is_dir() {
            return Err(FsError::MissingFixture {
                what: format!("output directory for platform {:?}", mapping.platform_id),
                path: platform_dir,
            });
        }
        let ext = extension(mapping.parser_kind);
        let mut outputs = std::collections::HashMap::new();
        for query in &queries {
            let path = platform_dir.join(format!("{}.{ext}", query.query_id));
            if path.is_file() {
                outputs.insert(query.query_id.clone(), fs::read_to_string(&path).map_err(io_err(&path))?);
            }
        }
        platforms.push(PlatformFixtures { platform_id: mapping.platform_id.clone(), mapping, outputs });
    }
    Ok(FixtureSet { queries, platforms })
}

/// Materializes a fixture set as a directory consumable by [`load_fixtures`].
///
/// Refuses to write over an existing manifest so generated corpora never
/// silently clobber each other.
pub fn write_fixtures(dir: &Path, fixtures: &FixtureSet) -> Result<(), FsError> {
    let queries_path = dir.join("queries.json");
    if queries_path.exists() {
        return Err(FsError::AlreadyExists(queries_path));
    }
    write_json(&queries_path, &fixtures.queries)?;
    let mappings: Vec<&FieldMapping> = fixtures.platforms.iter().map(|p| &p.mapping).collect();
    write_json(&dir.join("mappings.json"), &mappings)?;
    for platform in &fixtures.platforms {
        let ext = extension(platform.mapping.parser_kind);
        for (query_id, payload) in &platform.outputs {
            write_text(&dir.join(&platform.platform_id).join(format!("{query_id}.{ext}")), payload)?;
        }
    }
    Ok(())
}
