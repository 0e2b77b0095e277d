//! Harvesting CSV files from a code-search API.
//!
//! The search API serves at most [`PAGE_CAP`] hits per query and refuses
//! files above [`MAX_FILE_SIZE`] bytes. Topic queries are therefore split
//! into file-size segments by recursive bisection until every segment fits
//! under the cap, then each segment is paged through and its files
//! downloaded into a [`RawStore`].

mod live;
mod raw_store;
mod retry;
mod simulated;

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use live::{classify_status, parse_search_page, GitHubBackend, SearchItem, TOKEN_ENV};
pub use raw_store::{download, download_all, DownloadOutcome, RawEntry, RawStore};
pub use retry::RetryPolicy;
pub use simulated::{synthetic_entries, IndexEntry, SimulatedBackend, SimulatedIndex};

/// Largest file the search API will return, in bytes.
pub const MAX_FILE_SIZE: u64 = 438_000;
/// Maximum number of hits served for one query.
pub const PAGE_CAP: u64 = 1000;
/// Hits requested per page.
pub const PER_PAGE: u32 = 100;
/// File-format qualifier rendered into every query.
pub const FORMAT_QUALIFIER: &str = "csv";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("rate limited{}", .reset_after.map(|d| format!(" (reset in {}s)", d.as_secs())).unwrap_or_default())]
    RateLimited { reset_after: Option<Duration> },
    #[error("missing credentials: set {TOKEN_ENV}")]
    AuthMissing,
    #[error("not found: {0}")]
    NotFound(String),
    #[error("transient backend failure: {0}")]
    Transient(String),
    #[error("backend failure: {0}")]
    Fatal(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::RateLimited { .. } | BackendError::Transient(_))
    }
}

#[derive(Debug, Error)]
pub enum HarvestError {
    #[error("topic is empty")]
    EmptyTopic,
    #[error("topic `{0}` contains characters outside letters, digits, `-` and `_`")]
    InvalidTopicCharacters(String),
    #[error("page cap must be at least 1")]
    InvalidPageCap,
    #[error("count probe failed: {0}")]
    ProbeFailure(BackendError),
    #[error("rate limit not lifted after retries")]
    RateLimited,
    #[error("missing credentials: set {TOKEN_ENV}")]
    AuthMissing,
    #[error("not found: {0}")]
    NotFound(String),
    #[error("backend error: {0}")]
    Backend(BackendError),
    #[error("file of {size} bytes exceeds the {MAX_FILE_SIZE}-byte limit")]
    FileTooLarge { size: u64 },
    #[error("advertised {expected} bytes but received {actual}")]
    SizeMismatch { expected: u64, actual: u64 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed {what}: {message}")]
    Malformed { what: String, message: String },
}

impl From<BackendError> for HarvestError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::RateLimited { .. } => HarvestError::RateLimited,
            BackendError::AuthMissing => HarvestError::AuthMissing,
            BackendError::NotFound(what) => HarvestError::NotFound(what),
            other => HarvestError::Backend(other),
        }
    }
}

/// A search hit pointing at one CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FileRef {
    pub url: String,
    pub repo_id: String,
    pub file_path: String,
    pub size_bytes: u64,
    #[serde(default)]
    pub license_id: Option<String>,
    pub topic: String,
}

impl FileRef {
    /// Identity used for deduplication.
    pub fn key(&self) -> (&str, &str) {
        (&self.repo_id, &self.file_path)
    }
}

/// One topic word restricted to CSV files.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TopicQuery {
    topic: String,
    exclude_forks: bool,
}

impl TopicQuery {
    /// Validates and lowercases `topic`. Letters, digits, `-` and `_` are
    /// accepted; anything that could alter the query syntax is rejected.
    pub fn new(topic: &str) -> Result<Self, HarvestError> {
        if topic.is_empty() {
            return Err(HarvestError::EmptyTopic);
        }
        if !topic.chars().all(|c| c.is_alphanumeric() || c == '-' || c == '_') {
            return Err(HarvestError::InvalidTopicCharacters(topic.to_string()));
        }
        Ok(Self { topic: topic.to_lowercase(), exclude_forks: true })
    }

    pub fn topic(&self) -> &str {
        &self.topic
    }

    pub fn format_qualifier(&self) -> &'static str {
        FORMAT_QUALIFIER
    }

    pub fn exclude_forks(&self) -> bool {
        self.exclude_forks
    }

    /// Renders the query; `size` is an inclusive byte range.
    pub fn render(&self, size: Option<(u64, u64)>) -> String {
        let mut q = format!("\"{}\" extension:{}", self.topic, FORMAT_QUALIFIER);
        if let Some((lo, hi)) = size {
            q.push_str(&format!(" size:{lo}..{hi}"));
        }
        // code search leaves forks out unless asked for them
        if !self.exclude_forks {
            q.push_str(" fork:true");
        }
        q
    }
}

/// Renders a topic query, optionally restricted to an inclusive byte range.
pub fn build_query(topic: &str, size_range: Option<(u64, u64)>) -> Result<String, HarvestError> {
    Ok(TopicQuery::new(topic)?.render(size_range))
}

/// Half-open byte range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ByteRange {
    pub start: u64,
    pub end: u64,
}

impl ByteRange {
    /// Every size the API can serve: `[0, MAX_FILE_SIZE]`.
    pub fn full() -> Self {
        Self { start: 0, end: MAX_FILE_SIZE + 1 }
    }

    pub fn width(&self) -> u64 {
        self.end - self.start
    }

    pub fn contains(&self, size: u64) -> bool {
        (self.start..self.end).contains(&size)
    }
}

/// Query unit handed to a backend.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SearchRequest {
    pub query: TopicQuery,
    pub size: Option<ByteRange>,
}

impl SearchRequest {
    pub fn render(&self) -> String {
        self.query.render(self.size.map(|r| (r.start, r.end.saturating_sub(1))))
    }
}

/// One page of search results.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchPage {
    pub total_count: u64,
    pub items: Vec<FileRef>,
}

/// Source of search results and file bytes.
pub trait SearchBackend: Send + Sync {
    fn count(&self, request: &SearchRequest) -> Result<u64, BackendError>;
    /// `page` is 1-based.
    fn page(&self, request: &SearchRequest, page: u32, per_page: u32) -> Result<SearchPage, BackendError>;
    fn fetch(&self, file: &FileRef) -> Result<Vec<u8>, BackendError>;
}

/// Size-bounded sub-query of a topic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySegment {
    pub base: TopicQuery,
    pub size_min_bytes: u64,
    /// Exclusive upper bound.
    pub size_max_bytes: u64,
    pub estimated_count: u64,
    /// Width-1 range still above the page cap; cannot be split further.
    pub irreducible: bool,
}

impl QuerySegment {
    pub fn range(&self) -> ByteRange {
        ByteRange { start: self.size_min_bytes, end: self.size_max_bytes }
    }

    pub fn request(&self) -> SearchRequest {
        SearchRequest { query: self.base.clone(), size: Some(self.range()) }
    }
}

impl fmt::Display for QuerySegment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} hits)", self.request().render(), self.estimated_count)
    }
}

/// Splits the full byte range by midpoint bisection until each piece
/// probes at most `page_cap` results. Returns segments ordered by start.
pub fn plan_segments<F>(
    topic: &TopicQuery,
    mut count_probe: F,
    page_cap: u64,
) -> Result<Vec<QuerySegment>, HarvestError>
where
    F: FnMut(&SearchRequest) -> Result<u64, BackendError>,
{
    if page_cap == 0 {
        return Err(HarvestError::InvalidPageCap);
    }
    let mut pending = vec![ByteRange::full()];
    let mut done = Vec::new();
    while let Some(range) = pending.pop() {
        let request = SearchRequest { query: topic.clone(), size: Some(range) };
        let count = count_probe(&request).map_err(HarvestError::ProbeFailure)?;
        if count <= page_cap || range.width() == 1 {
            done.push(QuerySegment {
                base: topic.clone(),
                size_min_bytes: range.start,
                size_max_bytes: range.end,
                estimated_count: count,
                irreducible: count > page_cap,
            });
            continue;
        }
        let mid = range.start + range.width() / 2;
        // upper half first so the lower half is probed next
        pending.push(ByteRange { start: mid, end: range.end });
        pending.push(ByteRange { start: range.start, end: mid });
    }
    done.sort_by_key(|s| s.size_min_bytes);
    Ok(done)
}

/// Refs collected from one segment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FetchedRefs {
    pub refs: Vec<FileRef>,
    /// Backend served fewer hits than the segment advertised.
    pub partial: bool,
}

/// Pages through one segment, deduplicating by `(repo_id, file_path)` and
/// tagging each ref with the segment topic.
pub fn fetch_refs(
    segment: &QuerySegment,
    backend: &dyn SearchBackend,
    retry: &RetryPolicy,
    page_cap: u64,
) -> Result<FetchedRefs, HarvestError> {
    let expected = segment.estimated_count.min(page_cap);
    if expected == 0 {
        return Ok(FetchedRefs::default());
    }
    let request = segment.request();
    let pages = expected.div_ceil(u64::from(PER_PAGE)) as u32;
    let mut seen = HashSet::new();
    let mut refs = Vec::new();
    let mut served = 0u64;
    for page in 1..=pages {
        let result = retry.run(|| backend.page(&request, page, PER_PAGE))?;
        if result.items.is_empty() {
            break;
        }
        served += result.items.len() as u64;
        for mut item in result.items {
            if item.size_bytes > MAX_FILE_SIZE {
                continue;
            }
            if seen.insert((item.repo_id.clone(), item.file_path.clone())) {
                item.topic = segment.base.topic().to_string();
                refs.push(item);
            }
        }
    }
    let partial = served < expected;
    if partial {
        tracing::warn!(segment = %segment, served, expected, "segment truncated");
    }
    Ok(FetchedRefs { refs, partial })
}

/// Segments and deduplicated refs for one topic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HarvestPlan {
    pub topic: String,
    pub segments: Vec<QuerySegment>,
    pub refs: Vec<FileRef>,
    /// Indices of segments whose pagination came back short.
    pub partial_segments: Vec<usize>,
}

/// Plans and pages through one topic.
pub fn harvest_topic(
    topic: &TopicQuery,
    backend: &dyn SearchBackend,
    retry: &RetryPolicy,
    page_cap: u64,
) -> Result<HarvestPlan, HarvestError> {
    let segments = plan_segments(topic, |req| retry.run(|| backend.count(req)), page_cap)?;
    let mut seen = HashSet::new();
    let mut refs = Vec::new();
    let mut partial_segments = Vec::new();
    for (i, segment) in segments.iter().enumerate() {
        let fetched = fetch_refs(segment, backend, retry, page_cap)?;
        if fetched.partial {
            partial_segments.push(i);
        }
        for r in fetched.refs {
            if seen.insert((r.repo_id.clone(), r.file_path.clone())) {
                refs.push(r);
            }
        }
    }
    Ok(HarvestPlan { topic: topic.topic().to_string(), segments, refs, partial_segments })
}

/// Merges refs of several plans, keeping the first occurrence of each file.
pub fn merge_refs<'a>(plans: impl IntoIterator<Item = &'a HarvestPlan>) -> Vec<FileRef> {
    let mut seen = HashSet::new();
    plans
        .into_iter()
        .flat_map(|p| p.refs.iter())
        .filter(|r| seen.insert((r.repo_id.clone(), r.file_path.clone())))
        .cloned()
        .collect()
}

/// Writes refs as JSON lines.
pub fn write_plan(path: &Path, refs: &[FileRef]) -> Result<(), HarvestError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    for r in refs {
        serde_json::to_writer(&mut tmp, r).map_err(std::io::Error::from)?;
        tmp.write_all(b"\n")?;
    }
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn read_plan(path: &Path) -> Result<Vec<FileRef>, HarvestError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut refs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        refs.push(serde_json::from_str(&line).map_err(|e| HarvestError::Malformed {
            what: format!("{} line {}", path.display(), i + 1),
            message: e.to_string(),
        })?);
    }
    Ok(refs)
}
