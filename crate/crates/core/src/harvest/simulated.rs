//! Local stand-in for the search API: a JSON index of files plus a
//! directory holding their bytes at `<dir>/<repo>/<path>`.
//!
//! ```json
//! {"files": [{"repo": "acme/data", "path": "x/y.csv", "size": 120,
//!             "license": "mit", "contains": ["id", "object"]}]}
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BackendError, FileRef, HarvestError, SearchBackend, SearchPage, SearchRequest, MAX_FILE_SIZE, PAGE_CAP};

pub const INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub repo: String,
    pub path: String,
    pub size: u64,
    #[serde(default)]
    pub license: Option<String>,
    #[serde(default)]
    pub contains: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulatedIndex {
    pub files: Vec<IndexEntry>,
}

impl SimulatedIndex {
    pub fn load(path: &Path) -> Result<Self, HarvestError> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| HarvestError::Malformed { what: path.display().to_string(), message: e.to_string() })
    }

    pub fn save(&self, path: &Path) -> Result<(), HarvestError> {
        let text = serde_json::to_string(self).map_err(std::io::Error::from)?;
        fs::write(path, text)?;
        Ok(())
    }
}

/// Search backend answering from a [`SimulatedIndex`].
#[derive(Debug, Clone)]
pub struct SimulatedBackend {
    dir: PathBuf,
    entries: Vec<IndexEntry>,
    // per topic: entry indices ordered by (size, repo, path)
    by_topic: HashMap<String, Vec<usize>>,
}

impl SimulatedBackend {
    /// Opens `<dir>/index.json`.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, HarvestError> {
        let dir = dir.into();
        let index = SimulatedIndex::load(&dir.join(INDEX_FILE))?;
        Ok(Self::from_index(dir, index))
    }

    pub fn from_index(dir: impl Into<PathBuf>, index: SimulatedIndex) -> Self {
        let entries = index.files;
        let mut by_topic: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            let mut words: Vec<String> = e.contains.iter().map(|w| w.to_lowercase()).collect();
            words.sort();
            words.dedup();
            for w in words {
                by_topic.entry(w).or_default().push(i);
            }
        }
        for list in by_topic.values_mut() {
            list.sort_by(|&a, &b| {
                let (ea, eb) = (&entries[a], &entries[b]);
                (ea.size, &ea.repo, &ea.path).cmp(&(eb.size, &eb.repo, &eb.path))
            });
        }
        Self { dir: dir.into(), entries, by_topic }
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    /// All index entries matching a request, in serving order.
    pub fn matching(&self, request: &SearchRequest) -> &[usize] {
        let Some(list) = self.by_topic.get(request.query.topic()) else {
            return &[];
        };
        match request.size {
            None => list,
            Some(range) => {
                let lo = list.partition_point(|&i| self.entries[i].size < range.start);
                let hi = list.partition_point(|&i| self.entries[i].size < range.end);
                &list[lo..hi]
            }
        }
    }

    pub fn file_ref(&self, entry: &IndexEntry, topic: &str) -> FileRef {
        FileRef {
            url: format!("https://raw.githubusercontent.com/{}/HEAD/{}", entry.repo, entry.path),
            repo_id: entry.repo.clone(),
            file_path: entry.path.clone(),
            size_bytes: entry.size,
            license_id: entry.license.clone(),
            topic: topic.to_string(),
        }
    }
}

impl SearchBackend for SimulatedBackend {
    fn count(&self, request: &SearchRequest) -> Result<u64, BackendError> {
        Ok(self.matching(request).len() as u64)
    }

    fn page(&self, request: &SearchRequest, page: u32, per_page: u32) -> Result<SearchPage, BackendError> {
        if page == 0 || per_page == 0 {
            return Err(BackendError::Fatal("page and per_page are 1-based".into()));
        }
        let hits = self.matching(request);
        let served = hits.len().min(PAGE_CAP as usize);
        let start = ((page - 1) as usize).saturating_mul(per_page as usize).min(served);
        let end = start.saturating_add(per_page as usize).min(served);
        let topic = request.query.topic();
        Ok(SearchPage {
            total_count: hits.len() as u64,
            items: hits[start..end].iter().map(|&i| self.file_ref(&self.entries[i], topic)).collect(),
        })
    }

    fn fetch(&self, file: &FileRef) -> Result<Vec<u8>, BackendError> {
        let path = self.dir.join(&file.repo_id).join(&file.file_path);
        fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => BackendError::NotFound(path.display().to_string()),
            _ => BackendError::Transient(e.to_string()),
        })
    }
}

/// Deterministic synthetic index entries: `n` files tagged with `topic`,
/// sizes uniform over `[0, MAX_FILE_SIZE]`, spread over `n / 20 + 1` repos.
pub fn synthetic_entries(n: usize, topic: &str, seed: u64) -> Vec<IndexEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let repos = n / 20 + 1;
    (0..n)
        .map(|i| IndexEntry {
            repo: format!("owner{}/repo{}", i % 97, i % repos),
            path: format!("data/{topic}_{i:06}.csv"),
            size: rng.gen_range(0..=MAX_FILE_SIZE),
            license: Some(if i % 3 == 0 { "mit" } else { "apache-2.0" }.to_string()),
            contains: vec![topic.to_string()],
        })
        .collect()
}
