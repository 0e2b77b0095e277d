//! On-disk corpus: one canonical CSV plus a JSON sidecar per table.
//!
//! ```text
//! <root>/<topic>/<table_id>.csv
//! <root>/<topic>/<table_id>.meta.json
//! <root>/manifest.jsonl
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::annotate::Annotation;
use crate::curate::AnonymizedColumn;
use crate::harvest::FileRef;
use crate::tableparse::{AtomicType, Delimiter, Table};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const DATA_EXT: &str = "csv";
pub const SIDECAR_EXT: &str = "meta.json";
const ID_HEX_LEN: usize = 16;

/// JSON schema for sidecar files.
pub const SIDECAR_SCHEMA: &str = include_str!("../schema/table_metadata.schema.json");

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("I/O error at {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("metadata disagrees with table: {0}")]
    MetadataMismatch(String),
    #[error("sidecar missing for table {0}")]
    MissingSidecar(String),
    #[error("data file missing for table {0}")]
    MissingData(String),
    #[error("corrupt sidecar for table {table_id}: {message}")]
    CorruptSidecar { table_id: String, message: String },
    #[error("table {0} not found")]
    NotFound(String),
    #[error("CSV error in {path}: {message}")]
    Csv { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Stable id from repository, path and content hash: the first 16 hex
/// digits of `sha256(repo_id \0 file_path \0 source_sha256)`.
pub fn table_id(repo_id: &str, file_path: &str, source_sha256: &str) -> String {
    let mut h = Sha256::new();
    h.update(repo_id.as_bytes());
    h.update([0]);
    h.update(file_path.as_bytes());
    h.update([0]);
    h.update(source_sha256.as_bytes());
    let mut id = hex::encode(h.finalize());
    id.truncate(ID_HEX_LEN);
    id
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub table_id: String,
    pub source_url: String,
    pub repo_id: String,
    pub file_path: String,
    pub source_sha256: String,
    pub license_id: Option<String>,
    pub topic: String,
    pub dialect: Delimiter,
    pub row_count: usize,
    pub column_count: usize,
    pub columns: Vec<String>,
    pub atomic_types: Vec<AtomicType>,
    pub annotations: Vec<Annotation>,
    pub anonymized_columns: Vec<AnonymizedColumn>,
    pub pipeline_version: String,
    pub seed: u64,
    /// Parse actions by name with their counts.
    pub parse_log: BTreeMap<String, usize>,
}

impl TableMetadata {
    /// Metadata for `table` as it will be stored.
    pub fn describe(
        table: &Table,
        source: &FileRef,
        source_sha256: &str,
        dialect: Delimiter,
        annotations: Vec<Annotation>,
        anonymized_columns: Vec<AnonymizedColumn>,
        seed: u64,
    ) -> Self {
        let mut parse_log = BTreeMap::new();
        for e in &table.parse_log {
            *parse_log.entry(e.action.name().to_string()).or_insert(0) += 1;
        }
        Self {
            table_id: table_id(&source.repo_id, &source.file_path, source_sha256),
            source_url: source.url.clone(),
            repo_id: source.repo_id.clone(),
            file_path: source.file_path.clone(),
            source_sha256: source_sha256.to_string(),
            license_id: source.license_id.clone(),
            topic: source.topic.clone(),
            dialect,
            row_count: table.row_count(),
            column_count: table.column_count(),
            columns: table.header.clone(),
            atomic_types: table.atomic_types.clone(),
            annotations,
            anonymized_columns,
            pipeline_version: crate::PIPELINE_VERSION.to_string(),
            seed,
            parse_log,
        }
    }

    fn topic_dir(&self) -> &str {
        if self.topic.is_empty() {
            "_"
        } else {
            &self.topic
        }
    }

    /// Checks the metadata against the table it describes.
    pub fn check_against(&self, table: &Table) -> Result<(), String> {
        if self.row_count != table.row_count() {
            return Err(format!("row_count {} but table has {} rows", self.row_count, table.row_count()));
        }
        if self.column_count != table.column_count() {
            return Err(format!("column_count {} but table has {} columns", self.column_count, table.column_count()));
        }
        if self.columns != table.header {
            return Err("column names differ from table header".into());
        }
        if self.atomic_types.len() != self.column_count {
            return Err("atomic_types length differs from column_count".into());
        }
        if let Some(a) = self.annotations.iter().find(|a| a.column_index >= self.column_count) {
            return Err(format!("annotation references column {}", a.column_index));
        }
        if let Some(a) = self.anonymized_columns.iter().find(|a| a.column_index >= self.column_count) {
            return Err(format!("anonymized column {} out of range", a.column_index));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredTable {
    pub table_id: String,
    pub data_path: PathBuf,
    pub meta: TableMetadata,
}

/// Serializes a table as comma-delimited CSV with LF line endings, quoting
/// only fields that need it.
pub fn table_to_csv(table: &Table) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(Vec::new());
    w.write_record(&table.header).expect("write to Vec");
    for row in &table.rows {
        w.write_record(row).expect("write to Vec");
    }
    w.into_inner().expect("flush to Vec")
}

/// Parses the canonical CSV produced by [`table_to_csv`].
pub fn csv_to_rows(bytes: &[u8]) -> Result<(Vec<String>, Vec<Vec<String>>), csv::Error> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(false).from_reader(bytes);
    let mut records = r.records();
    let header = match records.next() {
        Some(rec) => rec?.iter().map(String::from).collect(),
        None => Vec::new(),
    };
    let mut rows = Vec::new();
    for rec in records {
        rows.push(rec?.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

/// Canonical sidecar bytes: sorted keys, two-space indent, trailing newline.
pub fn sidecar_bytes(meta: &TableMetadata) -> Vec<u8> {
    // Value maps are ordered, which sorts the keys
    let value = serde_json::to_value(meta).expect("metadata serializes");
    let mut out = serde_json::to_vec_pretty(&value).expect("value serializes");
    out.push(b'\n');
    out
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().expect("store paths have a parent");
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| StoreError::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

pub fn data_path(root: &Path, meta: &TableMetadata) -> PathBuf {
    root.join(meta.topic_dir()).join(format!("{}.{DATA_EXT}", meta.table_id))
}

pub fn sidecar_path(root: &Path, meta: &TableMetadata) -> PathBuf {
    root.join(meta.topic_dir()).join(format!("{}.{SIDECAR_EXT}", meta.table_id))
}

/// Writes data and sidecar. Each file is replaced atomically; the data file
/// goes first so a visible sidecar always has its data next to it.
pub fn write_table(table: &Table, meta: &TableMetadata, root: &Path) -> Result<StoredTable, StoreError> {
    meta.check_against(table).map_err(StoreError::MetadataMismatch)?;
    let data = data_path(root, meta);
    let sidecar = sidecar_path(root, meta);
    if sidecar.exists() {
        tracing::debug!(table_id = %meta.table_id, "replacing stored table");
    }
    write_atomic(&data, &table_to_csv(table))?;
    write_atomic(&sidecar, &sidecar_bytes(meta))?;
    Ok(StoredTable { table_id: meta.table_id.clone(), data_path: data, meta: meta.clone() })
}

fn topic_dirs(root: &Path) -> Result<Vec<PathBuf>, StoreError> {
    if !root.exists() {
        return Ok(Vec::new());
    }
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root).map_err(io_err(root))? {
        let path = entry.map_err(io_err(root))?.path();
        if path.is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

fn corrupt(table_id: &str, message: impl Into<String>) -> StoreError {
    StoreError::CorruptSidecar { table_id: table_id.to_string(), message: message.into() }
}

/// Reads a stored table back. The table's atomic types come from the
/// sidecar; provenance and parse log are not part of the data file.
pub fn read_table(table_id: &str, root: &Path) -> Result<(Table, TableMetadata), StoreError> {
    for dir in topic_dirs(root)? {
        let data = dir.join(format!("{table_id}.{DATA_EXT}"));
        let sidecar = dir.join(format!("{table_id}.{SIDECAR_EXT}"));
        match (data.exists(), sidecar.exists()) {
            (false, false) => continue,
            (true, false) => return Err(StoreError::MissingSidecar(table_id.into())),
            (false, true) => return Err(StoreError::MissingData(table_id.into())),
            (true, true) => return read_pair(table_id, &data, &sidecar),
        }
    }
    Err(StoreError::NotFound(table_id.into()))
}

fn read_pair(table_id: &str, data: &Path, sidecar: &Path) -> Result<(Table, TableMetadata), StoreError> {
    let text = fs::read_to_string(sidecar).map_err(io_err(sidecar))?;
    let meta: TableMetadata = serde_json::from_str(&text).map_err(|e| corrupt(table_id, e.to_string()))?;
    if meta.table_id != table_id {
        return Err(corrupt(table_id, format!("sidecar records id {}", meta.table_id)));
    }
    let bytes = fs::read(data).map_err(io_err(data))?;
    let (header, rows) =
        csv_to_rows(&bytes).map_err(|e| StoreError::Csv { path: data.to_path_buf(), message: e.to_string() })?;
    let table =
        Table { header, rows, atomic_types: meta.atomic_types.clone(), provenance: None, parse_log: Vec::new() };
    meta.check_against(&table).map_err(|m| corrupt(table_id, m))?;
    Ok((table, meta))
}

/// One line of `manifest.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub table_id: String,
    pub topic: String,
    pub repo_id: String,
    pub file_path: String,
    pub source_url: String,
    pub license_id: Option<String>,
    pub row_count: usize,
    pub column_count: usize,
    /// Data file relative to the store root.
    pub data: String,
}

impl ManifestEntry {
    pub fn from_meta(meta: &TableMetadata) -> Self {
        Self {
            table_id: meta.table_id.clone(),
            topic: meta.topic.clone(),
            repo_id: meta.repo_id.clone(),
            file_path: meta.file_path.clone(),
            source_url: meta.source_url.clone(),
            license_id: meta.license_id.clone(),
            row_count: meta.row_count,
            column_count: meta.column_count,
            data: format!("{}/{}.{DATA_EXT}", meta.topic_dir(), meta.table_id),
        }
    }
}

/// Every sidecar under `root`, sorted by (topic, table_id).
pub fn scan_sidecars(root: &Path) -> Result<Vec<TableMetadata>, StoreError> {
    let mut metas = Vec::new();
    let suffix = format!(".{SIDECAR_EXT}");
    for dir in topic_dirs(root)? {
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let path = entry.map_err(io_err(&dir))?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
            let Some(id) = name.strip_suffix(&suffix) else { continue };
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let meta: TableMetadata = serde_json::from_str(&text).map_err(|e| corrupt(id, e.to_string()))?;
            metas.push(meta);
        }
    }
    metas.sort_by(|a, b| (&a.topic, &a.table_id).cmp(&(&b.topic, &b.table_id)));
    Ok(metas)
}

/// Rewrites `manifest.jsonl` from the sidecars on disk.
pub fn rebuild_manifest(root: &Path) -> Result<Vec<ManifestEntry>, StoreError> {
    let entries: Vec<ManifestEntry> = scan_sidecars(root)?.iter().map(ManifestEntry::from_meta).collect();
    let mut out = Vec::new();
    for e in &entries {
        serde_json::to_writer(&mut out, e).expect("manifest entry serializes");
        out.push(b'\n');
    }
    write_atomic(&root.join(MANIFEST_FILE), &out)?;
    Ok(entries)
}

pub fn read_manifest(root: &Path) -> Result<Vec<ManifestEntry>, StoreError> {
    let path = root.join(MANIFEST_FILE);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| corrupt(MANIFEST_FILE, e.to_string())))
        .collect()
}

/// Loads every table listed in the manifest.
pub fn load_corpus(root: &Path) -> Result<Vec<(Table, TableMetadata)>, StoreError> {
    read_manifest(root)?.iter().map(|e| read_table(&e.table_id, root)).collect()
}
