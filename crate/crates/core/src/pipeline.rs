//! Stage orchestration: harvest, parse, curate, annotate, store.
//!
//! Output layout under the configured `out` directory:
//!
//! ```text
//! harvest_plan.jsonl      refs selected for download
//! raw/                    downloaded files and their index
//! parse_failures.jsonl    files that did not yield a table
//! curation_report.jsonl   verdict per parsed table
//! annotations.jsonl       annotations of accepted tables
//! corpus/                 stored tables and manifest.jsonl
//! run_report.json
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{export_records, Annotator};
use crate::config::{BackendConfig, ConfigError, PipelineConfig};
use crate::curate::{anonymize_pii, curate, CurationVerdict, LicenseAllowlist, PiiPolicy};
use crate::harvest::{
    download_all, harvest_topic, merge_refs, write_plan, FileRef, GitHubBackend, HarvestError, RawEntry, RawStore,
    RetryPolicy, SearchBackend, SimulatedBackend, PAGE_CAP,
};
use crate::store::{rebuild_manifest, sha256_hex, table_id, write_table, StoreError, TableMetadata};
use crate::tableparse::parse_bytes;

pub const PLAN_FILE: &str = "harvest_plan.jsonl";
pub const RAW_DIR: &str = "raw";
pub const CORPUS_DIR: &str = "corpus";
pub const PARSE_FAILURES_FILE: &str = "parse_failures.jsonl";
pub const CURATION_REPORT_FILE: &str = "curation_report.jsonl";
pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";
pub const RUN_REPORT_FILE: &str = "run_report.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Harvest(#[from] HarvestError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("I/O error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Harvest,
    Parse,
    Curate,
    Annotate,
    Store,
}

/// Counts gathered over one run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCounts {
    pub topics: usize,
    pub topic_failures: usize,
    pub segments: usize,
    pub partial_segments: usize,
    pub refs: usize,
    pub downloaded: usize,
    pub download_failures: usize,
    pub parsed: usize,
    pub parse_failures: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub reject_reasons: BTreeMap<String, usize>,
    pub annotations: usize,
    pub anonymized_columns: usize,
    pub stored: usize,
    pub store_failures: usize,
}

/// Machine-readable summary written to `run_report.json`. Contains no
/// timestamps, so identical runs produce identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub pipeline_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub exit_code: i32,
    pub partial_failure: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<RunCounts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunReport {
    pub fn new(command: &str, cfg: &PipelineConfig) -> Self {
        Self {
            command: command.to_string(),
            pipeline_version: crate::PIPELINE_VERSION.to_string(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            exit_code: 0,
            partial_failure: false,
            counts: None,
            error: None,
        }
    }

    pub fn write(&self, out: &Path) -> Result<(), PipelineError> {
        let mut bytes = serde_json::to_vec_pretty(&serde_json::to_value(self).expect("report serializes"))
            .expect("report serializes");
        bytes.push(b'\n');
        write_atomic(&out.join(RUN_REPORT_FILE), &bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseFailure {
    pub repo_id: String,
    pub file_path: String,
    pub stored_as: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationRecord {
    pub table_id: String,
    pub repo_id: String,
    pub file_path: String,
    #[serde(flatten)]
    pub verdict: CurationVerdict,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| PipelineError::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), PipelineError> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("record serializes");
        out.push(b'\n');
    }
    write_atomic(path, &out)
}

pub fn open_backend(cfg: &PipelineConfig) -> Result<Box<dyn SearchBackend>, PipelineError> {
    Ok(match &cfg.backend {
        BackendConfig::Live => Box::new(GitHubBackend::from_env().map_err(HarvestError::from)?),
        BackendConfig::Simulated { path } => Box::new(SimulatedBackend::open(path)?),
    })
}

fn retry_policy(cfg: &PipelineConfig) -> RetryPolicy {
    match cfg.backend {
        BackendConfig::Live => RetryPolicy::default(),
        BackendConfig::Simulated { .. } => RetryPolicy::immediate(),
    }
}

/// Everything the per-table stages need, loaded once.
struct TableStages {
    allowlist: LicenseAllowlist,
    policy: PiiPolicy,
    annotator: Option<Annotator>,
    seed: u64,
    until: Stage,
    corpus: PathBuf,
}

enum FileOutcome {
    ParseFailed(ParseFailure),
    Processed {
        curation: CurationRecord,
        annotations: Vec<crate::annotate::AnnotationRecord>,
        anonymized: usize,
        stored: Option<Result<(), String>>,
    },
}

impl TableStages {
    fn process(&self, entry: &RawEntry, bytes: &[u8]) -> FileOutcome {
        let file = &entry.file;
        let (dialect, table) = match parse_bytes(bytes) {
            Ok(v) => v,
            Err(e) => {
                return FileOutcome::ParseFailed(ParseFailure {
                    repo_id: file.repo_id.clone(),
                    file_path: file.file_path.clone(),
                    stored_as: entry.stored_as.clone(),
                    error: e.code().to_string(),
                })
            }
        };
        let sha = sha256_hex(bytes);
        let id = table_id(&file.repo_id, &file.file_path, &sha);
        let verdict = if self.until >= Stage::Curate {
            curate(&table, file, &self.allowlist)
        } else {
            CurationVerdict { accepted: true, reasons: vec![] }
        };
        let curation = CurationRecord {
            table_id: id.clone(),
            repo_id: file.repo_id.clone(),
            file_path: file.file_path.clone(),
            verdict: verdict.clone(),
        };
        let mut out = FileOutcome::Processed { curation, annotations: vec![], anonymized: 0, stored: None };
        if !verdict.accepted || self.until < Stage::Annotate {
            return out;
        }
        let annotations = self.annotator.as_ref().map(|a| a.annotate_table(&table)).unwrap_or_default();
        let records = export_records(&id, &table.header, &annotations);
        let (table, faked) = match anonymize_pii(&table, &annotations, &self.policy, self.seed) {
            Ok(v) => v,
            Err(e) => {
                tracing::warn!(table_id = %id, error = %e, "anonymization failed; table not stored");
                if let FileOutcome::Processed { annotations: a, stored, .. } = &mut out {
                    *a = records;
                    *stored = Some(Err(e.to_string()));
                }
                return out;
            }
        };
        let n_faked = faked.len();
        let stored = (self.until >= Stage::Store).then(|| {
            let meta = TableMetadata::describe(&table, file, &sha, dialect.delimiter, annotations, faked, self.seed);
            write_table(&table, &meta, &self.corpus).map(|_| ()).map_err(|e| e.to_string())
        });
        if let FileOutcome::Processed { annotations: a, anonymized, stored: s, .. } = &mut out {
            *a = records;
            *anonymized = n_faked;
            *s = stored;
        }
        out
    }
}

/// Runs the stages up to and including `until`.
pub fn run_pipeline(cfg: &PipelineConfig, until: Stage) -> Result<RunCounts, PipelineError> {
    let out = &cfg.out;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut counts = RunCounts::default();

    // harvest
    let backend = open_backend(cfg)?;
    let retry = retry_policy(cfg);
    let topics = cfg.topics()?;
    counts.topics = topics.len();
    let mut plans = Vec::new();
    for topic in &topics {
        match harvest_topic(topic, backend.as_ref(), &retry, PAGE_CAP) {
            Ok(plan) => {
                counts.segments += plan.segments.len();
                counts.partial_segments += plan.partial_segments.len();
                plans.push(plan);
            }
            Err(e) => {
                tracing::error!(topic = topic.topic(), error = %e, "topic harvest failed");
                counts.topic_failures += 1;
            }
        }
    }
    let refs: Vec<FileRef> = merge_refs(&plans);
    counts.refs = refs.len();
    write_plan(&out.join(PLAN_FILE), &refs)?;

    let raw = RawStore::open(out.join(RAW_DIR))?;
    let outcomes = download_all(&refs, backend.as_ref(), &raw, &retry, cfg.workers)?;
    for o in &outcomes {
        match &o.result {
            Ok(_) => counts.downloaded += 1,
            Err(e) => {
                tracing::warn!(repo = %o.file.repo_id, path = %o.file.file_path, error = %e, "download failed");
                counts.download_failures += 1;
            }
        }
    }
    if until == Stage::Harvest {
        return Ok(counts);
    }

    // parse onwards, per file
    let stages = TableStages {
        allowlist: cfg.allowlist()?,
        policy: cfg.pii_policy()?,
        annotator: if until >= Stage::Annotate {
            Some(
                Annotator::new(cfg.load_registries()?, cfg.provider()?, cfg.threshold)
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?,
            )
        } else {
            None
        },
        seed: cfg.seed,
        until,
        corpus: out.join(CORPUS_DIR),
    };
    let wanted: std::collections::HashSet<(&str, &str)> = refs.iter().map(|r| r.key()).collect();
    let entries: Vec<RawEntry> = raw.entries().into_iter().filter(|e| wanted.contains(&e.file.key())).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| PipelineError::Io { path: out.clone(), source: std::io::Error::other(e) })?;
    let results: Vec<Result<FileOutcome, PipelineError>> = pool.install(|| {
        entries
            .par_iter()
            .map(|e| {
                let path = raw.path_of(e);
                let bytes = fs::read(&path).map_err(io_err(&path))?;
                Ok(stages.process(e, &bytes))
            })
            .collect()
    });

    let mut failures = Vec::new();
    let mut curation = Vec::new();
    let mut annotations = Vec::new();
    for r in results {
        match r? {
            FileOutcome::ParseFailed(f) => failures.push(f),
            FileOutcome::Processed { curation: c, annotations: a, anonymized, stored } => {
                counts.parsed += 1;
                if c.verdict.accepted {
                    counts.accepted += 1;
                } else {
                    counts.rejected += 1;
                    for reason in &c.verdict.reasons {
                        *counts.reject_reasons.entry(reason.to_string()).or_insert(0) += 1;
                    }
                }
                counts.annotations += a.len();
                counts.anonymized_columns += anonymized;
                match stored {
                    Some(Ok(())) => counts.stored += 1,
                    Some(Err(e)) => {
                        tracing::warn!(table_id = %c.table_id, error = %e, "table not stored");
                        counts.store_failures += 1;
                    }
                    None => {}
                }
                curation.push(c);
                annotations.extend(a);
            }
        }
    }
    counts.parse_failures = failures.len();
    write_jsonl(&out.join(PARSE_FAILURES_FILE), &failures)?;
    if until >= Stage::Curate {
        write_jsonl(&out.join(CURATION_REPORT_FILE), &curation)?;
    }
    if until >= Stage::Annotate {
        write_jsonl(&out.join(ANNOTATIONS_FILE), &annotations)?;
    }
    if until >= Stage::Store {
        rebuild_manifest(&out.join(CORPUS_DIR))?;
    }
    Ok(counts)
}

impl RunCounts {
    /// Some unit of work failed without aborting the run.
    pub fn is_partial(&self) -> bool {
        self.topic_failures > 0 || self.partial_segments > 0 || self.download_failures > 0 || self.store_failures > 0
    }
}
