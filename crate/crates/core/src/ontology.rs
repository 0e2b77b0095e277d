//! Semantic type registries and the label normalization shared by every
//! matcher in the crate.
//!
//! Registries are read from JSON lines, one type per line:
//!
//! ```text
//! {"id":"productID","label":"product id","super":"identifier","atomic_type":"Text"}
//! ```
//!
//! Only `id` and `label` are required. A registry is immutable once loaded.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("cannot read registry {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record on line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("duplicate type id `{0}`")]
    DuplicateTypeId(String),
    #[error("type `{type_id}` has super `{super_id}` which is not in the registry")]
    DanglingSuper { type_id: String, super_id: String },
    #[error("super chain starting at `{0}` contains a cycle")]
    SuperCycle(String),
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("unknown ontology tag `{0}`")]
    UnknownOntology(String),
}

/// Source ontology of a semantic type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ontology {
    Dbpedia,
    Schemaorg,
    Custom,
}

impl Ontology {
    pub fn as_str(self) -> &'static str {
        match self {
            Ontology::Dbpedia => "dbpedia",
            Ontology::Schemaorg => "schemaorg",
            Ontology::Custom => "custom",
        }
    }
}

impl fmt::Display for Ontology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ontology {
    type Err = OntologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dbpedia" => Ok(Ontology::Dbpedia),
            "schemaorg" | "schema.org" => Ok(Ontology::Schemaorg),
            "custom" => Ok(Ontology::Custom),
            other => Err(OntologyError::UnknownOntology(other.to_string())),
        }
    }
}

/// One ontology property or class usable as a column type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticType {
    #[serde(rename = "id")]
    pub type_id: String,
    pub ontology: Ontology,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atomic_type: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub domains: Vec<String>,
    #[serde(rename = "super", default, skip_serializing_if = "Option::is_none")]
    pub super_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

// Intake record: `ontology` may be omitted and then defaults to the registry tag.
#[derive(Deserialize)]
struct TypeRecord {
    id: String,
    #[serde(default)]
    ontology: Option<Ontology>,
    label: String,
    #[serde(default)]
    atomic_type: Option<String>,
    #[serde(default)]
    domains: Vec<String>,
    #[serde(rename = "super", default)]
    super_type: Option<String>,
    #[serde(default)]
    description: Option<String>,
}

/// Validated collection of semantic types with a normalized-label index.
///
/// Types keep their file order; that order is the tie-breaker for every
/// lookup that can return more than one type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeRegistry {
    ontology: Ontology,
    types: Vec<SemanticType>,
    by_id: HashMap<String, usize>,
    label_index: BTreeMap<String, Vec<usize>>,
}

impl TypeRegistry {
    /// Builds and validates a registry: unique ids, resolvable supers,
    /// acyclic super chains and non-empty normalized labels.
    pub fn new(ontology: Ontology, types: Vec<SemanticType>) -> Result<Self, OntologyError> {
        let registry = Self::build_unchecked(ontology, types)?;
        for t in &registry.types {
            if let Some(sup) = &t.super_type {
                if !registry.by_id.contains_key(sup) {
                    return Err(OntologyError::DanglingSuper { type_id: t.type_id.clone(), super_id: sup.clone() });
                }
            }
        }
        for t in &registry.types {
            registry.ancestors(&t.type_id)?;
        }
        Ok(registry)
    }

    fn build_unchecked(ontology: Ontology, types: Vec<SemanticType>) -> Result<Self, OntologyError> {
        let mut by_id = HashMap::with_capacity(types.len());
        let mut label_index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (idx, t) in types.iter().enumerate() {
            if by_id.insert(t.type_id.clone(), idx).is_some() {
                return Err(OntologyError::DuplicateTypeId(t.type_id.clone()));
            }
            let norm = normalize_label(&t.label);
            if norm.is_empty() {
                return Err(OntologyError::MalformedRecord {
                    line: idx + 1,
                    message: format!("label of `{}` normalizes to an empty string", t.type_id),
                });
            }
            label_index.entry(norm).or_default().push(idx);
        }
        Ok(Self { ontology, types, by_id, label_index })
    }

    pub fn ontology(&self) -> Ontology {
        self.ontology
    }

    /// Types in registry order.
    pub fn types(&self) -> &[SemanticType] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn get(&self, type_id: &str) -> Option<&SemanticType> {
        self.by_id.get(type_id).map(|&i| &self.types[i])
    }

    /// Position of a type in registry order.
    pub fn position(&self, type_id: &str) -> Option<usize> {
        self.by_id.get(type_id).copied()
    }

    /// Types whose normalized label equals `normalized`, in registry order.
    pub fn lookup_label(&self, normalized: &str) -> impl Iterator<Item = &SemanticType> + '_ {
        self.label_index.get(normalized).into_iter().flatten().map(move |&i| &self.types[i])
    }

    /// Normalized label to type ids, sorted by label.
    pub fn label_index(&self) -> impl Iterator<Item = (&str, Vec<&str>)> + '_ {
        self.label_index
            .iter()
            .map(move |(label, ids)| (label.as_str(), ids.iter().map(|&i| self.types[i].type_id.as_str()).collect()))
    }

    /// Super chain of `type_id`, nearest first, excluding the type itself.
    pub fn ancestors(&self, type_id: &str) -> Result<Vec<String>, OntologyError> {
        let mut current = self.get(type_id).ok_or_else(|| OntologyError::UnknownType(type_id.to_string()))?;
        let mut seen: HashSet<&str> = HashSet::from([current.type_id.as_str()]);
        let mut chain = Vec::new();
        while let Some(sup) = &current.super_type {
            if !seen.insert(sup.as_str()) {
                return Err(OntologyError::SuperCycle(type_id.to_string()));
            }
            current = self.get(sup).ok_or_else(|| OntologyError::DanglingSuper {
                type_id: current.type_id.clone(),
                super_id: sup.clone(),
            })?;
            chain.push(sup.clone());
        }
        Ok(chain)
    }

    /// True when one type lies on the other's super chain (or they are equal).
    pub fn related(&self, a: &str, b: &str) -> bool {
        if a == b {
            return true;
        }
        let on_chain = |from: &str, target: &str| {
            self.ancestors(from).map(|chain| chain.iter().any(|t| t == target)).unwrap_or(false)
        };
        on_chain(a, b) || on_chain(b, a)
    }

    /// Serializes back to the JSONL intake format.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.types {
            out.push_str(&serde_json::to_string(t).expect("semantic type serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str, ontology: Ontology) -> Result<Self, OntologyError> {
        let mut types = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TypeRecord = serde_json::from_str(line)
                .map_err(|e| OntologyError::MalformedRecord { line: line_no, message: e.to_string() })?;
            if let Some(tag) = rec.ontology {
                if tag != ontology {
                    return Err(OntologyError::MalformedRecord {
                        line: line_no,
                        message: format!("record ontology `{tag}` differs from registry `{ontology}`"),
                    });
                }
            }
            if rec.id.trim().is_empty() {
                return Err(OntologyError::MalformedRecord { line: line_no, message: "empty id".into() });
            }
            if normalize_label(&rec.label).is_empty() {
                return Err(OntologyError::MalformedRecord {
                    line: line_no,
                    message: format!("label of `{}` normalizes to an empty string", rec.id),
                });
            }
            types.push(SemanticType {
                type_id: rec.id,
                ontology,
                label: rec.label,
                atomic_type: rec.atomic_type,
                domains: rec.domains,
                super_type: rec.super_type.filter(|s| !s.is_empty()),
                description: rec.description,
            });
        }
        Self::new(ontology, types)
    }
}

/// Reads a JSONL registry file.
pub fn load_registry(path: impl AsRef<Path>, ontology: Ontology) -> Result<TypeRegistry, OntologyError> {
    let path = path.as_ref();
    let text =
        fs::read_to_string(path).map_err(|source| OntologyError::Io { path: path.display().to_string(), source })?;
    TypeRegistry::from_jsonl(&text, ontology)
}

/// Lowercases a label and splits it into space-separated words.
///
/// Underscores and hyphens become spaces, camel case is split at each
/// lower-to-upper boundary and before the last capital of an uppercase run
/// that is followed by a lowercase letter (`HTTPStatus` -> `http status`),
/// and whitespace is collapsed. Digits are left untouched.
pub fn normalize_label(s: &str) -> String {
    let chars: Vec<char> = s.chars().map(|c| if c == '_' || c == '-' { ' ' } else { c }).collect();
    let mut spaced = String::with_capacity(s.len() + 4);
    for (i, &c) in chars.iter().enumerate() {
        if i > 0 && lowers(c) {
            let prev = chars[i - 1];
            let next_is_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            if prev.is_lowercase() || (lowers(prev) && next_is_lower) {
                spaced.push(' ');
            }
        }
        spaced.extend(c.to_lowercase());
    }
    spaced.split_whitespace().collect::<Vec<_>>().join(" ")
}

// uppercase letter that lowercasing actually changes
fn lowers(c: char) -> bool {
    c.is_uppercase() && !c.to_lowercase().eq(std::iter::once(c))
}
