//! Toolkit for building a corpus of relational tables out of CSV files found
//! through a code-search API.
//!
//! The stages mirror the corpus lifecycle:
//!
//! - [`harvest`]: topic queries, size-range segmentation, pagination, downloads
//! - [`tableparse`]: dialect sniffing, preamble and bad-line handling, atomic types
//! - [`curate`]: license and table-quality filters, PII anonymization
//! - [`ontology`]: semantic type registries and label normalization
//! - [`embed`]: token and phrase vectors, cosine similarity
//! - [`annotate`]: syntactic and semantic column type annotation
//! - [`store`]: canonical CSV plus JSON sidecar persistence
//! - [`analyze`]: corpus statistics, bias profiles, column profiles, agreement
//! - [`complete`]: nearest schema completion and table search
//! - [`pipeline`] and [`cli`]: configuration and stage orchestration

pub mod analyze;
pub mod annotate;
pub mod cli;
pub mod complete;
pub mod config;
pub mod curate;
pub mod embed;
pub mod harvest;
pub mod ontology;
pub mod pipeline;
pub mod store;
pub mod tableparse;

/// Version string recorded in every sidecar and run report.
pub const PIPELINE_VERSION: &str = concat!("tableforge/", env!("CARGO_PKG_VERSION"));
