//! Column type annotation: exact label matching and embedding argmax.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{cosine_similarity, EmbedError, EmbeddingProvider, Vector};
use crate::ontology::{normalize_label, Ontology, TypeRegistry};
use crate::tableparse::Table;

pub const DEFAULT_THRESHOLD: f64 = 0.50;

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("column name normalizes to an empty string")]
    EmptyName,
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Syntactic,
    Semantic,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Syntactic => "syntactic",
            Method::Semantic => "semantic",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "syntactic" => Ok(Method::Syntactic),
            "semantic" => Ok(Method::Semantic),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub column_index: usize,
    pub type_id: String,
    pub ontology: Ontology,
    pub method: Method,
    pub score: f64,
}

/// A registry with every type label embedded once.
#[derive(Debug, Clone)]
pub struct EmbeddedRegistry {
    registry: TypeRegistry,
    // None where the label could not be embedded
    labels: Vec<Option<Vector>>,
}

impl EmbeddedRegistry {
    pub fn new(registry: TypeRegistry, provider: &EmbeddingProvider) -> Self {
        let labels =
            registry.types().par_iter().map(|t| provider.embed_phrase(&normalize_label(&t.label)).ok()).collect();
        Self { registry, labels }
    }

    pub fn registry(&self) -> &TypeRegistry {
        &self.registry
    }

    pub fn label_vectors(&self) -> &[Option<Vector>] {
        &self.labels
    }

    /// Applies `f` to every label embedding.
    pub fn map_vectors(&self, f: impl Fn(&Vector) -> Vector) -> Self {
        Self { registry: self.registry.clone(), labels: self.labels.iter().map(|v| v.as_ref().map(&f)).collect() }
    }

    /// Cosine similarity of `query` to each label, in registry order.
    pub fn similarities(&self, query: &Vector) -> Vec<Option<f64>> {
        self.labels.iter().map(|v| v.as_ref().and_then(|v| cosine_similarity(query, v).ok())).collect()
    }
}

fn has_digit(s: &str) -> bool {
    s.chars().any(|c| c.is_ascii_digit())
}

/// Exact match of the normalized name against type labels. The returned
/// annotation has `column_index` 0.
pub fn annotate_syntactic(column_name: &str, registry: &TypeRegistry) -> Option<Annotation> {
    let name = normalize_label(column_name);
    if name.is_empty() || has_digit(&name) {
        return None;
    }
    registry.lookup_label(&name).next().map(|t| Annotation {
        column_index: 0,
        type_id: t.type_id.clone(),
        ontology: registry.ontology(),
        method: Method::Syntactic,
        score: 1.0,
    })
}

/// Most cosine-similar type label, or `None` below `threshold`. Ties keep the
/// earliest type in registry order. The returned annotation has
/// `column_index` 0.
pub fn annotate_semantic(
    column_name: &str,
    registry: &EmbeddedRegistry,
    provider: &EmbeddingProvider,
    threshold: f64,
) -> Result<Option<Annotation>, AnnotateError> {
    let name = normalize_label(column_name);
    if name.is_empty() {
        return Err(AnnotateError::EmptyName);
    }
    if has_digit(&name) {
        return Ok(None);
    }
    let query = provider.embed_phrase(&name)?;
    let mut best: Option<(usize, f64)> = None;
    for (i, sim) in registry.similarities(&query).into_iter().enumerate() {
        if let Some(sim) = sim {
            if best.is_none_or(|(_, b)| sim > b) {
                best = Some((i, sim));
            }
        }
    }
    Ok(best.filter(|&(_, sim)| sim >= threshold).map(|(i, sim)| Annotation {
        column_index: 0,
        type_id: registry.registry().types()[i].type_id.clone(),
        ontology: registry.registry().ontology(),
        method: Method::Semantic,
        score: sim.clamp(0.0, 1.0),
    }))
}

/// Registries plus provider and threshold, shared across tables.
#[derive(Debug, Clone)]
pub struct Annotator {
    registries: Vec<EmbeddedRegistry>,
    provider: EmbeddingProvider,
    threshold: f64,
}

impl Annotator {
    pub fn new(
        registries: Vec<TypeRegistry>,
        provider: EmbeddingProvider,
        threshold: f64,
    ) -> Result<Self, AnnotateError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(AnnotateError::InvalidThreshold(threshold));
        }
        let registries = registries.into_iter().map(|r| EmbeddedRegistry::new(r, &provider)).collect();
        Ok(Self { registries, provider, threshold })
    }

    pub fn registries(&self) -> &[EmbeddedRegistry] {
        &self.registries
    }

    pub fn provider(&self) -> &EmbeddingProvider {
        &self.provider
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn with_threshold(&self, threshold: f64) -> Result<Self, AnnotateError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(AnnotateError::InvalidThreshold(threshold));
        }
        Ok(Self { threshold, ..self.clone() })
    }

    pub fn registry(&self, ontology: Ontology) -> Option<&TypeRegistry> {
        self.registries.iter().map(|r| r.registry()).find(|r| r.ontology() == ontology)
    }

    /// All annotations for one column name.
    pub fn annotate_column(&self, column_index: usize, name: &str) -> Vec<Annotation> {
        let mut out = Vec::new();
        for reg in &self.registries {
            out.extend(annotate_syntactic(name, reg.registry()));
            match annotate_semantic(name, reg, &self.provider, self.threshold) {
                Ok(a) => out.extend(a),
                Err(AnnotateError::EmptyName) => {}
                Err(e) => tracing::warn!(column = column_index, name, error = %e, "semantic annotation failed"),
            }
        }
        for a in &mut out {
            a.column_index = column_index;
        }
        out
    }

    /// Annotations for every column, sorted by (column, ontology, method).
    pub fn annotate_table(&self, table: &Table) -> Vec<Annotation> {
        let mut out: Vec<Annotation> =
            table.header.par_iter().enumerate().flat_map_iter(|(i, name)| self.annotate_column(i, name)).collect();
        out.sort_by_key(|a| (a.column_index, a.ontology, a.method));
        out
    }
}

/// One line of the annotation export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub table_id: String,
    pub column_index: usize,
    pub column_name: String,
    pub ontology: Ontology,
    pub method: Method,
    pub type_id: String,
    pub score: f64,
}

pub fn export_records(table_id: &str, header: &[String], annotations: &[Annotation]) -> Vec<AnnotationRecord> {
    annotations
        .iter()
        .map(|a| AnnotationRecord {
            table_id: table_id.to_string(),
            column_index: a.column_index,
            column_name: header.get(a.column_index).cloned().unwrap_or_default(),
            ontology: a.ontology,
            method: a.method,
            type_id: a.type_id.clone(),
            score: a.score,
        })
        .collect()
}
