use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{FileRef, HarvestError, RetryPolicy, SearchBackend, MAX_FILE_SIZE};

pub const RAW_INDEX_FILE: &str = "index.jsonl";

/// A downloaded (or reserved) file in the raw store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawEntry {
    #[serde(flatten)]
    pub file: FileRef,
    /// Path relative to the store root, `<topic>/<name>`.
    pub stored_as: String,
    #[serde(default)]
    pub sha256: Option<String>,
}

#[derive(Debug, Default)]
struct State {
    entries: BTreeMap<(String, String), RawEntry>,
    taken: HashSet<String>,
}

/// Directory of raw downloads keyed by `(repo_id, file_path)`.
///
/// Files land at `<root>/<topic>/<file name>`; a second file with the same
/// name from another repository becomes `<stem>_1.<ext>`, then `_2`, and so
/// on. The mapping is kept in `<root>/index.jsonl`.
#[derive(Debug)]
pub struct RawStore {
    root: PathBuf,
    state: Mutex<State>,
}

impl RawStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, HarvestError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        let mut state = State::default();
        let index = root.join(RAW_INDEX_FILE);
        if index.exists() {
            for (i, line) in fs::read_to_string(&index)?.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let entry: RawEntry = serde_json::from_str(line).map_err(|e| HarvestError::Malformed {
                    what: format!("{} line {}", index.display(), i + 1),
                    message: e.to_string(),
                })?;
                state.taken.insert(entry.stored_as.clone());
                let key = (entry.file.repo_id.clone(), entry.file.file_path.clone());
                state.entries.insert(key, entry);
            }
        }
        Ok(Self { root, state: Mutex::new(state) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Assigns (or returns the existing) storage path for a file.
    pub fn reserve(&self, file: &FileRef) -> String {
        let mut state = self.state.lock().expect("raw store lock poisoned");
        let key = (file.repo_id.clone(), file.file_path.clone());
        if let Some(e) = state.entries.get(&key) {
            return e.stored_as.clone();
        }
        let name = Path::new(&file.file_path)
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .filter(|n| n != "." && n != "..")
            .unwrap_or_else(|| "file.csv".to_string());
        let (stem, ext) = match name.rsplit_once('.') {
            Some((s, e)) if !s.is_empty() => (s.to_string(), format!(".{e}")),
            _ => (name.clone(), String::new()),
        };
        let topic = if file.topic.is_empty() { "_" } else { file.topic.as_str() };
        let mut candidate = format!("{topic}/{name}");
        let mut n = 1;
        while state.taken.contains(&candidate) {
            candidate = format!("{topic}/{stem}_{n}{ext}");
            n += 1;
        }
        state.taken.insert(candidate.clone());
        state.entries.insert(key, RawEntry { file: file.clone(), stored_as: candidate.clone(), sha256: None });
        candidate
    }

    fn mark_stored(&self, file: &FileRef, sha: String) {
        let mut state = self.state.lock().expect("raw store lock poisoned");
        if let Some(e) = state.entries.get_mut(&(file.repo_id.clone(), file.file_path.clone())) {
            e.sha256 = Some(sha);
        }
    }

    fn lookup(&self, file: &FileRef) -> Option<RawEntry> {
        let state = self.state.lock().expect("raw store lock poisoned");
        state.entries.get(&(file.repo_id.clone(), file.file_path.clone())).cloned()
    }

    /// Downloaded entries, ordered by storage path.
    pub fn entries(&self) -> Vec<RawEntry> {
        let state = self.state.lock().expect("raw store lock poisoned");
        let mut out: Vec<RawEntry> = state.entries.values().filter(|e| e.sha256.is_some()).cloned().collect();
        out.sort_by(|a, b| a.stored_as.cmp(&b.stored_as));
        out
    }

    pub fn path_of(&self, entry: &RawEntry) -> PathBuf {
        self.root.join(&entry.stored_as)
    }

    /// Rewrites the index file from the in-memory state.
    pub fn flush(&self) -> Result<(), HarvestError> {
        let entries = self.entries();
        let mut tmp = tempfile::NamedTempFile::new_in(&self.root)?;
        for e in &entries {
            serde_json::to_writer(&mut tmp, e).map_err(std::io::Error::from)?;
            tmp.write_all(b"\n")?;
        }
        tmp.persist(self.root.join(RAW_INDEX_FILE)).map_err(|e| e.error)?;
        Ok(())
    }

    fn download_one(
        &self,
        file: &FileRef,
        backend: &dyn SearchBackend,
        retry: &RetryPolicy,
    ) -> Result<(PathBuf, Vec<u8>), HarvestError> {
        if file.size_bytes > MAX_FILE_SIZE {
            return Err(HarvestError::FileTooLarge { size: file.size_bytes });
        }
        let stored_as = self.reserve(file);
        let path = self.root.join(&stored_as);
        if let Some(RawEntry { sha256: Some(sha), .. }) = self.lookup(file) {
            if let Ok(bytes) = fs::read(&path) {
                if hex::encode(Sha256::digest(&bytes)) == sha {
                    return Ok((path, bytes));
                }
            }
        }
        let bytes = retry.run(|| backend.fetch(file))?;
        if bytes.len() as u64 != file.size_bytes {
            return Err(HarvestError::SizeMismatch { expected: file.size_bytes, actual: bytes.len() as u64 });
        }
        let dir = path.parent().expect("stored path has a topic directory");
        fs::create_dir_all(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(&bytes)?;
        tmp.persist(&path).map_err(|e| e.error)?;
        self.mark_stored(file, hex::encode(Sha256::digest(&bytes)));
        Ok((path, bytes))
    }
}

/// Downloads one file into the store and returns its bytes. Files already
/// present with matching content are not fetched again.
pub fn download(
    file: &FileRef,
    backend: &dyn SearchBackend,
    store: &RawStore,
    retry: &RetryPolicy,
) -> Result<Vec<u8>, HarvestError> {
    let (_, bytes) = store.download_one(file, backend, retry)?;
    store.flush()?;
    Ok(bytes)
}

#[derive(Debug)]
pub struct DownloadOutcome {
    pub file: FileRef,
    pub result: Result<PathBuf, HarvestError>,
}

/// Downloads `files` on a pool of `workers` threads. Storage names are
/// assigned in input order before any transfer starts, so naming does not
/// depend on scheduling.
pub fn download_all(
    files: &[FileRef],
    backend: &dyn SearchBackend,
    store: &RawStore,
    retry: &RetryPolicy,
    workers: usize,
) -> Result<Vec<DownloadOutcome>, HarvestError> {
    for f in files.iter().filter(|f| f.size_bytes <= MAX_FILE_SIZE) {
        store.reserve(f);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarvestError::Io(std::io::Error::other(e)))?;
    let outcomes = pool.install(|| {
        files
            .par_iter()
            .map(|f| DownloadOutcome { file: f.clone(), result: store.download_one(f, backend, retry).map(|(p, _)| p) })
            .collect()
    });
    store.flush()?;
    Ok(outcomes)
}
