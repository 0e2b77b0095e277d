//! GitHub code-search backend.

use std::collections::HashMap;
use std::io::Read;
use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::Deserialize;

use super::{BackendError, FileRef, SearchBackend, SearchPage, SearchRequest};

/// Environment variable holding the API token.
pub const TOKEN_ENV: &str = "TABLEFORGE_TOKEN";
const API_BASE: &str = "https://api.github.com";
const USER_AGENT: &str = concat!("tableforge/", env!("CARGO_PKG_VERSION"));

/// Code-search hit as returned by the API, before size and license lookup.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct SearchItem {
    pub path: String,
    /// Contents API URL of the file.
    pub url: String,
    pub repository: SearchRepository,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct SearchRepository {
    pub full_name: String,
}

#[derive(Deserialize)]
struct SearchResponse {
    total_count: u64,
    #[serde(default)]
    items: Vec<SearchItem>,
}

#[derive(Deserialize)]
struct ContentsResponse {
    size: u64,
    download_url: Option<String>,
}

#[derive(Deserialize)]
struct RepoResponse {
    license: Option<RepoLicense>,
}

#[derive(Deserialize)]
struct RepoLicense {
    spdx_id: Option<String>,
}

/// Parses a code-search response body into `(total_count, items)`.
pub fn parse_search_page(body: &str) -> Result<(u64, Vec<SearchItem>), BackendError> {
    let resp: SearchResponse =
        serde_json::from_str(body).map_err(|e| BackendError::Fatal(format!("bad search response: {e}")))?;
    Ok((resp.total_count, resp.items))
}

/// Maps an HTTP error status plus rate-limit headers to a backend error.
///
/// `reset_epoch` is the `x-ratelimit-reset` header (unix seconds) and
/// `retry_after` the `retry-after` header (seconds).
pub fn classify_status(
    status: u16,
    remaining: Option<u64>,
    reset_epoch: Option<u64>,
    retry_after: Option<u64>,
    now_epoch: u64,
) -> BackendError {
    match status {
        401 => BackendError::AuthMissing,
        403 | 429 if status == 429 || remaining == Some(0) || retry_after.is_some() => {
            let reset_after =
                retry_after.or_else(|| reset_epoch.map(|r| r.saturating_sub(now_epoch))).map(Duration::from_secs);
            BackendError::RateLimited { reset_after }
        }
        404 => BackendError::NotFound(format!("HTTP {status}")),
        500..=599 => BackendError::Transient(format!("HTTP {status}")),
        _ => BackendError::Fatal(format!("HTTP {status}")),
    }
}

/// Live backend talking to the GitHub REST API.
pub struct GitHubBackend {
    agent: ureq::Agent,
    token: String,
    api_base: String,
    licenses: Mutex<HashMap<String, Option<String>>>,
}

impl GitHubBackend {
    /// Reads the token from [`TOKEN_ENV`].
    pub fn from_env() -> Result<Self, BackendError> {
        match std::env::var(TOKEN_ENV) {
            Ok(token) if !token.trim().is_empty() => Ok(Self::new(token.trim().to_string())),
            _ => Err(BackendError::AuthMissing),
        }
    }

    pub fn new(token: String) -> Self {
        Self {
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(60)).user_agent(USER_AGENT).build(),
            token,
            api_base: API_BASE.to_string(),
            licenses: Mutex::new(HashMap::new()),
        }
    }

    fn get(&self, url: &str, query: &[(&str, &str)]) -> Result<ureq::Response, BackendError> {
        let mut req = self
            .agent
            .get(url)
            .set("Authorization", &format!("Bearer {}", self.token))
            .set("Accept", "application/vnd.github+json");
        for (k, v) in query {
            req = req.query(k, v);
        }
        match req.call() {
            Ok(resp) => Ok(resp),
            Err(ureq::Error::Status(code, resp)) => {
                let header = |name: &str| resp.header(name).and_then(|v| v.trim().parse::<u64>().ok());
                let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
                Err(classify_status(
                    code,
                    header("x-ratelimit-remaining"),
                    header("x-ratelimit-reset"),
                    header("retry-after"),
                    now,
                ))
            }
            Err(e) => Err(BackendError::Transient(e.to_string())),
        }
    }

    fn get_json<T: for<'de> Deserialize<'de>>(&self, url: &str, query: &[(&str, &str)]) -> Result<T, BackendError> {
        let body = self.get(url, query)?.into_string().map_err(|e| BackendError::Transient(e.to_string()))?;
        serde_json::from_str(&body).map_err(|e| BackendError::Fatal(format!("bad response from {url}: {e}")))
    }

    fn license_of(&self, repo: &str) -> Result<Option<String>, BackendError> {
        if let Some(hit) = self.licenses.lock().expect("license cache poisoned").get(repo) {
            return Ok(hit.clone());
        }
        let resp: RepoResponse = self.get_json(&format!("{}/repos/{repo}", self.api_base), &[])?;
        let license = resp.license.and_then(|l| l.spdx_id).filter(|id| id != "NOASSERTION").map(|id| id.to_lowercase());
        self.licenses.lock().expect("license cache poisoned").insert(repo.to_string(), license.clone());
        Ok(license)
    }
}

impl SearchBackend for GitHubBackend {
    fn count(&self, request: &SearchRequest) -> Result<u64, BackendError> {
        let q = request.render();
        let resp: SearchResponse =
            self.get_json(&format!("{}/search/code", self.api_base), &[("q", &q), ("per_page", "1")])?;
        Ok(resp.total_count)
    }

    fn page(&self, request: &SearchRequest, page: u32, per_page: u32) -> Result<SearchPage, BackendError> {
        let q = request.render();
        let (page_s, per_page_s) = (page.to_string(), per_page.to_string());
        let body = self
            .get(&format!("{}/search/code", self.api_base), &[("q", &q), ("page", &page_s), ("per_page", &per_page_s)])?
            .into_string()
            .map_err(|e| BackendError::Transient(e.to_string()))?;
        let (total_count, items) = parse_search_page(&body)?;
        let mut refs = Vec::with_capacity(items.len());
        for item in items {
            let contents: ContentsResponse = self.get_json(&item.url, &[])?;
            let Some(download_url) = contents.download_url else {
                continue;
            };
            refs.push(FileRef {
                url: download_url,
                license_id: self.license_of(&item.repository.full_name)?,
                repo_id: item.repository.full_name,
                file_path: item.path,
                size_bytes: contents.size,
                topic: request.query.topic().to_string(),
            });
        }
        Ok(SearchPage { total_count, items: refs })
    }

    fn fetch(&self, file: &FileRef) -> Result<Vec<u8>, BackendError> {
        let resp = self.get(&file.url, &[])?;
        let mut bytes = Vec::with_capacity(file.size_bytes as usize);
        resp.into_reader().read_to_end(&mut bytes).map_err(|e| BackendError::Transient(e.to_string()))?;
        Ok(bytes)
    }
}
