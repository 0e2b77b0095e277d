//! Schema completion by nearest prefixes, and schema-level table search.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{cosine_distance, cosine_similarity, EmbeddingProvider, Vector};
use crate::ontology::normalize_label;

pub const DEFAULT_K: usize = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompleteError {
    #[error("schema prefix is empty or has an empty attribute")]
    EmptyPrefix,
    #[error("no corpus schema is long enough for a prefix of {0} attributes")]
    NoEligibleSchemas(usize),
    #[error("schema is empty")]
    EmptySchema,
    #[error("query has no tokens")]
    EmptyQuery,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("k must be at least 1")]
    EmptyResultRequest,
}

/// First N attribute names of a schema to be completed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaPrefix {
    attributes: Vec<String>,
}

impl SchemaPrefix {
    pub fn new<S: Into<String>>(attributes: impl IntoIterator<Item = S>) -> Result<Self, CompleteError> {
        let attributes: Vec<String> = attributes.into_iter().map(Into::into).collect();
        if attributes.is_empty() || attributes.iter().any(|a| normalize_label(a).is_empty()) {
            return Err(CompleteError::EmptyPrefix);
        }
        Ok(Self { attributes })
    }

    /// Comma-separated attribute list, e.g. `emp_no,birth_date,first_name`.
    pub fn parse(text: &str) -> Result<Self, CompleteError> {
        Self::new(text.split(',').map(str::trim))
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }
}

fn embed_attribute(provider: &EmbeddingProvider, attr: &str) -> Option<Vector> {
    provider.embed_phrase(&normalize_label(attr)).ok()
}

/// Normalized attributes joined by single spaces.
pub fn schema_text<S: AsRef<str>>(schema: &[S]) -> String {
    schema.iter().map(|a| normalize_label(a.as_ref())).filter(|a| !a.is_empty()).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone)]
struct IndexedSchema {
    table_id: String,
    schema: Vec<String>,
    attributes: Vec<Option<Vector>>,
    whole: Option<Vector>,
}

/// Corpus schemas with attribute and whole-schema embeddings computed once.
#[derive(Debug, Clone)]
pub struct SchemaIndex {
    entries: Vec<IndexedSchema>,
}

impl SchemaIndex {
    pub fn build(schemas: Vec<(String, Vec<String>)>, provider: &EmbeddingProvider) -> Self {
        let entries = schemas
            .into_par_iter()
            .map(|(table_id, schema)| {
                let attributes = schema.iter().map(|a| embed_attribute(provider, a)).collect();
                let text = schema_text(&schema);
                let whole = if text.is_empty() { None } else { provider.embed_phrase(&text).ok() };
                IndexedSchema { table_id, schema, attributes, whole }
            })
            .collect();
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub table_id: String,
    pub full_schema: Vec<String>,
    /// Attributes after the prefix length.
    pub suffix: Vec<String>,
    pub avg_prefix_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completions {
    pub results: Vec<CompletionResult>,
    /// Schemas shorter than the prefix.
    pub skipped_short: usize,
    /// Schemas with a prefix attribute that could not be embedded.
    pub skipped_unembeddable: usize,
}

fn rank(a: (f64, &str, &[String]), b: (f64, &str, &[String])) -> Ordering {
    a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)).then_with(|| a.2.cmp(b.2))
}

/// The `k` corpus schemas whose first N attributes have the smallest mean
/// positional cosine distance to the prefix, ties ordered by table id.
pub fn nearest_completions(
    prefix: &SchemaPrefix,
    index: &SchemaIndex,
    k: usize,
    provider: &EmbeddingProvider,
) -> Result<Completions, CompleteError> {
    if k == 0 {
        return Err(CompleteError::EmptyResultRequest);
    }
    let n = prefix.len();
    let p: Vec<Vector> = prefix
        .attributes()
        .iter()
        .map(|a| embed_attribute(provider, a).ok_or(CompleteError::EmptyPrefix))
        .collect::<Result<_, _>>()?;

    enum Outcome {
        Short,
        Unembeddable,
        Scored(f64),
    }
    let scored: Vec<(usize, Outcome)> = index
        .entries
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            if s.schema.len() < n {
                return (i, Outcome::Short);
            }
            let mut total = 0.0;
            for (pv, sv) in p.iter().zip(&s.attributes[..n]) {
                match sv.as_ref().and_then(|sv| cosine_distance(pv, sv).ok()) {
                    Some(d) => total += d,
                    None => return (i, Outcome::Unembeddable),
                }
            }
            (i, Outcome::Scored(total / n as f64))
        })
        .collect();

    let (mut short, mut unembeddable) = (0, 0);
    let mut hits: Vec<(f64, usize)> = Vec::new();
    for (i, o) in scored {
        match o {
            Outcome::Short => short += 1,
            Outcome::Unembeddable => unembeddable += 1,
            Outcome::Scored(d) => hits.push((d, i)),
        }
    }
    if hits.is_empty() {
        return Err(CompleteError::NoEligibleSchemas(n));
    }
    let e = &index.entries;
    hits.par_sort_by(|a, b| rank((a.0, &e[a.1].table_id, &e[a.1].schema), (b.0, &e[b.1].table_id, &e[b.1].schema)));
    hits.truncate(k);
    Ok(Completions {
        results: hits
            .into_iter()
            .map(|(d, i)| CompletionResult {
                table_id: e[i].table_id.clone(),
                full_schema: e[i].schema.clone(),
                suffix: e[i].schema[n..].to_vec(),
                avg_prefix_distance: d,
            })
            .collect(),
        skipped_short: short,
        skipped_unembeddable: unembeddable,
    })
}

/// Cosine similarity of the phrase embeddings of two whole schemas.
pub fn schema_similarity<S: AsRef<str>>(a: &[S], b: &[S], provider: &EmbeddingProvider) -> Result<f64, CompleteError> {
    let (ta, tb) = (schema_text(a), schema_text(b));
    if ta.is_empty() || tb.is_empty() {
        return Err(CompleteError::EmptySchema);
    }
    let va = provider.embed_phrase(&ta).map_err(|_| CompleteError::EmptySchema)?;
    let vb = provider.embed_phrase(&tb).map_err(|_| CompleteError::EmptySchema)?;
    cosine_similarity(&va, &vb).map_err(|_| CompleteError::EmptySchema)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub table_id: String,
    pub schema: Vec<String>,
    pub score: f64,
}

/// Tables ranked by similarity of their schema to a free-text query.
pub fn search(
    query: &str,
    index: &SchemaIndex,
    k: usize,
    provider: &EmbeddingProvider,
) -> Result<Vec<SearchHit>, CompleteError> {
    if k == 0 {
        return Err(CompleteError::EmptyResultRequest);
    }
    let text = schema_text(&query.split_whitespace().collect::<Vec<_>>());
    if text.is_empty() {
        return Err(CompleteError::EmptyQuery);
    }
    if index.is_empty() {
        return Err(CompleteError::EmptyCorpus);
    }
    let q = provider.embed_phrase(&text).map_err(|_| CompleteError::EmptyQuery)?;
    let mut hits: Vec<(f64, usize)> = index
        .entries
        .par_iter()
        .enumerate()
        .filter_map(|(i, s)| s.whole.as_ref().and_then(|v| cosine_similarity(&q, v).ok()).map(|sim| (sim, i)))
        .collect();
    let e = &index.entries;
    hits.par_sort_by(|a, b| rank((b.0, &e[a.1].table_id, &e[a.1].schema), (a.0, &e[b.1].table_id, &e[b.1].schema)));
    hits.truncate(k);
    Ok(hits
        .into_iter()
        .map(|(score, i)| SearchHit { table_id: e[i].table_id.clone(), schema: e[i].schema.clone(), score })
        .collect())
}

/// One entry of the JSON output for completion and search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub table_id: String,
    pub score_or_distance: f64,
    pub schema: Vec<String>,
    pub suffix: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutput {
    pub query: String,
    pub k: usize,
    pub results: Vec<ResultRecord>,
}

impl QueryOutput {
    pub fn from_completions(prefix: &SchemaPrefix, k: usize, c: &Completions) -> Self {
        Self {
            query: prefix.attributes().join(","),
            k,
            results: c
                .results
                .iter()
                .map(|r| ResultRecord {
                    table_id: r.table_id.clone(),
                    score_or_distance: r.avg_prefix_distance,
                    schema: r.full_schema.clone(),
                    suffix: r.suffix.clone(),
                })
                .collect(),
        }
    }

    pub fn from_search(query: &str, k: usize, hits: &[SearchHit]) -> Self {
        Self {
            query: query.to_string(),
            k,
            results: hits
                .iter()
                .map(|h| ResultRecord {
                    table_id: h.table_id.clone(),
                    score_or_distance: h.score,
                    schema: h.schema.clone(),
                    suffix: Vec::new(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::NgramParams;
    use proptest::prelude::*;

    fn provider() -> EmbeddingProvider {
        EmbeddingProvider::hashed(32, NgramParams::default()).unwrap()
    }

    fn corpus() -> Vec<(String, Vec<String>)> {
        let raw: [(&str, &[&str]); 5] = [
            ("t01", &["emp_no", "birth_date", "first_name", "last_name", "gender"]),
            ("t02", &["id", "name", "email"]),
            ("t03", &["city", "country"]),
            ("t04", &["employee_id", "birthday", "given_name", "surname"]),
            ("t05", &["x"]),
        ];
        raw.iter().map(|(id, s)| (id.to_string(), s.iter().map(|a| a.to_string()).collect())).collect()
    }

    #[test]
    fn identical_prefix_ranks_first_at_zero() {
        let p = provider();
        let idx = SchemaIndex::build(corpus(), &p);
        let prefix = SchemaPrefix::parse("emp_no,birth_date,first_name").unwrap();
        let c = nearest_completions(&prefix, &idx, 10, &p).unwrap();
        assert_eq!(c.results[0].table_id, "t01");
        assert!(c.results[0].avg_prefix_distance.abs() < 1e-9);
        assert_eq!(c.results[0].suffix, vec!["last_name", "gender"]);
        assert_eq!(c.results.len(), 3);
        assert_eq!(c.skipped_short, 2);
    }

    #[test]
    fn error_cases() {
        let p = provider();
        let idx = SchemaIndex::build(corpus(), &p);
        assert_eq!(SchemaPrefix::parse("a,,b"), Err(CompleteError::EmptyPrefix));
        let long = SchemaPrefix::new((0..9).map(|i| format!("a{i}"))).unwrap();
        assert_eq!(nearest_completions(&long, &idx, 3, &p), Err(CompleteError::NoEligibleSchemas(9)));
        let one = SchemaPrefix::parse("id").unwrap();
        assert_eq!(nearest_completions(&one, &idx, 0, &p), Err(CompleteError::EmptyResultRequest));
        assert_eq!(search("id", &idx, 0, &p), Err(CompleteError::EmptyResultRequest));
        assert_eq!(search("  _ ", &idx, 3, &p), Err(CompleteError::EmptyQuery));
        assert_eq!(search("id", &SchemaIndex::build(vec![], &p), 3, &p), Err(CompleteError::EmptyCorpus));
        assert_eq!(schema_similarity::<&str>(&[], &["a"], &p), Err(CompleteError::EmptySchema));
    }

    #[test]
    fn schema_similarity_identities() {
        let p = provider();
        let a = ["first_name", "last_name"];
        assert!((schema_similarity(&a, &a, &p).unwrap() - 1.0).abs() < 1e-9);
        let b = ["last_name", "first_name"];
        assert!((schema_similarity(&a, &b, &p).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn search_finds_exact_header() {
        let p = provider();
        let idx = SchemaIndex::build(corpus(), &p);
        let hits = search("city country", &idx, 2, &p).unwrap();
        assert_eq!(hits[0].table_id, "t03");
        assert!((hits[0].score - 1.0).abs() < 1e-9);
        let out = QueryOutput::from_search("city country", 2, &hits);
        assert_eq!(out.results.len(), 2);
    }

    proptest! {
        #[test]
        fn results_for_k_prefix_results_for_k_plus_one(k in 1usize..6, n in 1usize..3) {
            let p = provider();
            let idx = SchemaIndex::build(corpus(), &p);
            let prefix = SchemaPrefix::new(["name", "date", "city"].into_iter().take(n)).unwrap();
            let a = nearest_completions(&prefix, &idx, k, &p).unwrap().results;
            let b = nearest_completions(&prefix, &idx, k + 1, &p).unwrap().results;
            prop_assert_eq!(&b[..a.len()], &a[..]);
            for r in &a {
                prop_assert!((0.0..=2.0).contains(&r.avg_prefix_distance));
            }
        }
    }
}
