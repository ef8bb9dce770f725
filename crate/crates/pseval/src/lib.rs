//! Evaluation engine for people-search platforms.
//!
//! The engine grades search output in three stages: a judge model extracts
//! atomic criteria from each query, every returned person is verified against
//! every criterion with the evidence in hand, and a separate pass scores how
//! useful each record is to a recruiter. Aggregate metrics (padded nDCG,
//! relevance precision, effective coverage, information utility) and bootstrap
//! statistics are computed on top of the per-person verdicts.
//!
//! All judge and search traffic goes through [`gateway`], which caches
//! responses on disk and enforces per-source rate limits. Deterministic mock
//! backends in [`mock`] drive the test suite and the synthetic-corpus
//! calibration path; nothing in the test suite touches the network.

pub mod ablation;
pub mod fsio;
pub mod gateway;
pub mod mock;
pub mod model;
pub mod normalize;
pub mod pipeline;
pub mod report;
pub mod runner;
pub mod scoring;
pub mod stats;
