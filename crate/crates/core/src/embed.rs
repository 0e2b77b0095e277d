//! Token and phrase embeddings with character n-gram fallback.
//!
//! Two providers share one interface. A vector-file provider serves vectors
//! read from a word-vector text file and falls back to n-gram vectors for
//! unknown words. A hashed provider derives every n-gram vector from a seeded
//! hash, which makes it a deterministic stand-in when no pretrained vectors
//! are available.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use thiserror::Error;

/// Seed for hashed n-gram vectors. Changing it changes every hashed embedding.
pub const HASH_SEED: u64 = 0x7AB1_EF0A_C0DE_5EED;
pub const DEFAULT_DIM: usize = 64;
pub const DEFAULT_MIN_N: usize = 3;
pub const DEFAULT_MAX_N: usize = 6;
pub const DEFAULT_BUCKETS: u64 = 2_000_000;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("cannot embed an empty token")]
    EmptyToken,
    #[error("cannot embed an empty phrase")]
    EmptyPhrase,
    #[error("cosine similarity is undefined for an all-zero vector")]
    ZeroVector,
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("vector contains a non-finite component")]
    NonFinite,
    #[error("invalid provider parameters: {0}")]
    InvalidParameters(String),
    #[error("cannot read vector file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed vector file at line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// Dense vector with finite components.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(components: Vec<f64>) -> Result<Self, EmbedError> {
        if components.is_empty() {
            return Err(EmbedError::InvalidParameters("vector dimension must be positive".into()));
        }
        if components.iter().any(|c| !c.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        Ok(Self(components))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Vector {
        Vector(self.0.iter().map(|c| c * factor).collect())
    }

    /// Unweighted mean; all vectors must share one dimension.
    pub fn mean<'a>(vectors: impl IntoIterator<Item = &'a Vector>) -> Result<Vector, EmbedError> {
        let mut iter = vectors.into_iter();
        let first = iter.next().ok_or(EmbedError::EmptyPhrase)?;
        let mut sum = first.0.clone();
        let mut n = 1usize;
        for v in iter {
            if v.dim() != sum.len() {
                return Err(EmbedError::DimMismatch { left: sum.len(), right: v.dim() });
            }
            for (s, c) in sum.iter_mut().zip(&v.0) {
                *s += c;
            }
            n += 1;
        }
        let n = n as f64;
        sum.iter_mut().for_each(|s| *s /= n);
        Ok(Vector(sum))
    }
}

/// Cosine of the angle between `u` and `v`, clamped to [-1, 1].
pub fn cosine_similarity(u: &Vector, v: &Vector) -> Result<f64, EmbedError> {
    if u.dim() != v.dim() {
        return Err(EmbedError::DimMismatch { left: u.dim(), right: v.dim() });
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.0.iter().zip(&v.0) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// `1 - cosine_similarity`, in [0, 2].
pub fn cosine_distance(u: &Vector, v: &Vector) -> Result<f64, EmbedError> {
    cosine_similarity(u, v).map(|s| 1.0 - s)
}

/// Character n-gram settings shared by both provider kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NgramParams {
    pub min_n: usize,
    pub max_n: usize,
    pub buckets: u64,
    pub seed: u64,
}

impl Default for NgramParams {
    fn default() -> Self {
        Self { min_n: DEFAULT_MIN_N, max_n: DEFAULT_MAX_N, buckets: DEFAULT_BUCKETS, seed: HASH_SEED }
    }
}

impl NgramParams {
    fn validate(&self) -> Result<(), EmbedError> {
        if self.min_n == 0 || self.min_n > self.max_n {
            return Err(EmbedError::InvalidParameters(format!(
                "n-gram range {}..={} is empty",
                self.min_n, self.max_n
            )));
        }
        if self.buckets == 0 {
            return Err(EmbedError::InvalidParameters("bucket count must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderKind {
    VectorFile,
    HashedNgram,
}

/// Immutable embedding provider; every method is a pure function of its
/// input and the provider's parameters.
#[derive(Debug, Clone)]
pub struct EmbeddingProvider {
    kind: ProviderKind,
    dim: usize,
    ngrams: NgramParams,
    vectors: HashMap<String, Vector>,
}

impl EmbeddingProvider {
    pub fn hashed(dim: usize, ngrams: NgramParams) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::InvalidParameters("dimension must be positive".into()));
        }
        ngrams.validate()?;
        Ok(Self { kind: ProviderKind::HashedNgram, dim, ngrams, vectors: HashMap::new() })
    }

    /// Builds a file-style provider from in-memory vectors.
    pub fn from_vectors(vectors: HashMap<String, Vector>, dim: usize, ngrams: NgramParams) -> Result<Self, EmbedError> {
        ngrams.validate()?;
        if dim == 0 {
            return Err(EmbedError::InvalidParameters("dimension must be positive".into()));
        }
        if let Some(v) = vectors.values().find(|v| v.dim() != dim) {
            return Err(EmbedError::DimMismatch { left: dim, right: v.dim() });
        }
        Ok(Self { kind: ProviderKind::VectorFile, dim, ngrams, vectors })
    }

    /// Loads a word-vector text file: a `<count> <dim>` header followed by
    /// one `word c1 .. cdim` line per entry.
    pub fn from_vector_file(path: impl AsRef<Path>, ngrams: NgramParams) -> Result<Self, EmbedError> {
        let reader = BufReader::new(File::open(path)?);
        let mut lines = reader.lines();
        let header = lines.next().ok_or(EmbedError::Malformed { line: 1, message: "missing header".into() })??;
        let mut parts = header.split_whitespace();
        let parse_usize = |s: Option<&str>| s.and_then(|s| s.parse::<usize>().ok());
        let (count, dim) = match (parse_usize(parts.next()), parse_usize(parts.next())) {
            (Some(c), Some(d)) if d > 0 && parts.next().is_none() => (c, d),
            _ => {
                return Err(EmbedError::Malformed {
                    line: 1,
                    message: format!("expected `<count> <dim>`, got `{header}`"),
                })
            }
        };
        let mut vectors = HashMap::with_capacity(count);
        let mut seen = 0usize;
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields.next().unwrap_or_default().to_string();
            let comps: Result<Vec<f64>, _> = fields.map(str::parse::<f64>).collect();
            let comps = comps.map_err(|e| EmbedError::Malformed { line: line_no, message: e.to_string() })?;
            if comps.len() != dim {
                return Err(EmbedError::Malformed {
                    line: line_no,
                    message: format!("expected {dim} components, found {}", comps.len()),
                });
            }
            let vector =
                Vector::new(comps).map_err(|e| EmbedError::Malformed { line: line_no, message: e.to_string() })?;
            seen += 1;
            vectors.entry(word).or_insert(vector);
        }
        if seen != count {
            return Err(EmbedError::Malformed {
                line: 1,
                message: format!("header announces {count} vectors, file has {seen}"),
            });
        }
        Self::from_vectors(vectors, dim, ngrams)
    }

    pub fn kind(&self) -> ProviderKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ngram_params(&self) -> NgramParams {
        self.ngrams
    }

    pub fn vocabulary_size(&self) -> usize {
        self.vectors.len()
    }

    /// Vector for a single token. Stored vectors win; otherwise the mean of
    /// the token's distinct boundary-marked character n-grams.
    pub fn embed_token(&self, word: &str) -> Result<Vector, EmbedError> {
        if word.is_empty() {
            return Err(EmbedError::EmptyToken);
        }
        if let Some(v) = self.vectors.get(word) {
            return Ok(v.clone());
        }
        let grams = char_ngrams(word, self.ngrams.min_n, self.ngrams.max_n);
        let vectors: Vec<Vector> = grams
            .iter()
            .map(|g| match self.vectors.get(g.as_str()) {
                Some(v) => v.clone(),
                None => self.bucket_vector(g),
            })
            .collect();
        Vector::mean(&vectors).map_err(|_| EmbedError::EmptyToken)
    }

    /// Mean of the token vectors of a whitespace-separated phrase.
    pub fn embed_phrase(&self, phrase: &str) -> Result<Vector, EmbedError> {
        let tokens: Vec<Vector> = phrase.split_whitespace().map(|t| self.embed_token(t)).collect::<Result<_, _>>()?;
        if tokens.is_empty() {
            return Err(EmbedError::EmptyPhrase);
        }
        Vector::mean(&tokens)
    }

    fn bucket_vector(&self, gram: &str) -> Vector {
        let bucket = fnv1a64(gram.as_bytes()) % self.ngrams.buckets;
        let mut state = self.ngrams.seed ^ bucket.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let comps = (0..self.dim)
            .map(|_| {
                let x = splitmix64(&mut state);
                ((x >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect();
        Vector(comps)
    }
}

/// Distinct character n-grams of `<word>` for n in `min_n..=max_n`, sorted.
pub fn char_ngrams(word: &str, min_n: usize, max_n: usize) -> BTreeSet<String> {
    let marked: Vec<char> = std::iter::once('<').chain(word.chars()).chain(std::iter::once('>')).collect();
    let mut grams = BTreeSet::new();
    for n in min_n..=max_n {
        if n > marked.len() {
            break;
        }
        for window in marked.windows(n) {
            grams.insert(window.iter().collect());
        }
    }
    if grams.is_empty() {
        grams.insert(marked.iter().collect());
    }
    grams
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
