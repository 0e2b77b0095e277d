//! Table-level filters and PII anonymization.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{Annotation, Method};
use crate::harvest::FileRef;
use crate::ontology::normalize_label;
use crate::tableparse::{infer_column_type, is_numeric, Table};

#[derive(Debug, Error)]
pub enum CurateError {
    #[error("PII type `{0}` has no generator")]
    UnknownPiiType(String),
    #[error("unknown generator category `{0}`")]
    UnknownCategory(String),
    #[error("license allowlist is empty")]
    EmptyAllowlist,
    #[error("malformed policy: {0}")]
    MalformedPolicy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RejectReason {
    NoLicense,
    TooSmall,
    UnnamedColumns,
    NonStringHeader,
    BlockedContent,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&format!("{self:?}"))
    }
}

/// Outcome of curation; `accepted` holds exactly when `reasons` is empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationVerdict {
    pub accepted: bool,
    pub reasons: Vec<RejectReason>,
}

impl CurationVerdict {
    fn from_reasons(reasons: BTreeSet<RejectReason>) -> Self {
        Self { accepted: reasons.is_empty(), reasons: reasons.into_iter().collect() }
    }
}

/// License identifiers that permit redistribution, compared case-insensitively.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LicenseAllowlist(BTreeSet<String>);

impl Default for LicenseAllowlist {
    fn default() -> Self {
        Self(
            ["mit", "apache-2.0", "bsd-2-clause", "bsd-3-clause", "bsd-3-clause-clear", "0bsd", "cc0-1.0", "cc-by-4.0"]
                .into_iter()
                .map(String::from)
                .collect(),
        )
    }
}

impl LicenseAllowlist {
    pub fn new<I: IntoIterator<Item = S>, S: AsRef<str>>(ids: I) -> Result<Self, CurateError> {
        let set: BTreeSet<String> =
            ids.into_iter().map(|s| s.as_ref().trim().to_lowercase()).filter(|s| !s.is_empty()).collect();
        if set.is_empty() {
            return Err(CurateError::EmptyAllowlist);
        }
        Ok(Self(set))
    }

    /// Newline-delimited ids; blank lines and `#` comments are ignored.
    pub fn from_text(text: &str) -> Result<Self, CurateError> {
        Self::new(text.lines().filter(|l| !l.trim_start().starts_with('#')))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.0.contains(&id.trim().to_lowercase())
    }
}

/// True iff the ref carries a license id present in the allowlist.
pub fn check_license(file: &FileRef, allowlist: &LicenseAllowlist) -> bool {
    file.license_id.as_deref().is_some_and(|id| allowlist.contains(id))
}

const BLOCKED_SUBSTRINGS: [&str; 4] = ["twitter", "tweet", "reddit", "facebook"];

static PLACEHOLDER_NAME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(unnamed(:\s*|_|\s+)?\d+|\.\.\.\d+)$").unwrap());

/// Empty, whitespace-only or auto-generated column name.
pub fn is_unspecified_name(name: &str) -> bool {
    let name = name.trim();
    name.is_empty() || PLACEHOLDER_NAME.is_match(name)
}

fn table_reasons(table: &Table) -> BTreeSet<RejectReason> {
    let mut reasons = BTreeSet::new();
    if table.row_count() < 2 || table.column_count() < 2 {
        reasons.insert(RejectReason::TooSmall);
    }
    let unnamed = table.header.iter().filter(|h| is_unspecified_name(h)).count();
    if unnamed * 2 > table.column_count() {
        reasons.insert(RejectReason::UnnamedColumns);
    }
    if table.header.iter().any(|h| is_numeric(h)) {
        reasons.insert(RejectReason::NonStringHeader);
    }
    if table.header.iter().any(|h| {
        let lower = h.to_lowercase();
        BLOCKED_SUBSTRINGS.iter().any(|b| lower.contains(b))
    }) {
        reasons.insert(RejectReason::BlockedContent);
    }
    reasons
}

/// Applies the size, naming, header-type and content rules.
pub fn filter_table(table: &Table) -> CurationVerdict {
    CurationVerdict::from_reasons(table_reasons(table))
}

/// License check plus [`filter_table`].
pub fn curate(table: &Table, file: &FileRef, allowlist: &LicenseAllowlist) -> CurationVerdict {
    let mut reasons = table_reasons(table);
    if !check_license(file, allowlist) {
        reasons.insert(RejectReason::NoLicense);
    }
    CurationVerdict::from_reasons(reasons)
}

/// Kind of synthetic value written into an anonymized column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorCategory {
    Name,
    Address,
    Email,
    Date,
    City,
    Postcode,
}

impl FromStr for GeneratorCategory {
    type Err = CurateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_lowercase();
        match s.strip_prefix("faker.").unwrap_or(&s) {
            "name" => Ok(Self::Name),
            "address" => Ok(Self::Address),
            "email" => Ok(Self::Email),
            "date" => Ok(Self::Date),
            "city" => Ok(Self::City),
            "postcode" => Ok(Self::Postcode),
            _ => Err(CurateError::UnknownCategory(s)),
        }
    }
}

/// Which semantic types count as PII and how each is faked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PiiPolicy {
    /// Normalized type labels.
    pub pii_types: BTreeSet<String>,
    pub generator_map: BTreeMap<String, GeneratorCategory>,
    /// `name` columns are faked only next to another PII column.
    pub name_needs_cooccurrence: bool,
}

impl Default for PiiPolicy {
    fn default() -> Self {
        use GeneratorCategory::*;
        let map: BTreeMap<String, GeneratorCategory> = [
            ("name", Name),
            ("address", Address),
            ("person", Name),
            ("email", Email),
            ("birth date", Date),
            ("home location", City),
            ("birth place", Postcode),
            ("postal code", City),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Self { pii_types: map.keys().cloned().collect(), generator_map: map, name_needs_cooccurrence: true }
    }
}

impl PiiPolicy {
    /// Parses a JSON object mapping type label to generator category.
    pub fn from_json(text: &str) -> Result<Self, CurateError> {
        let raw: BTreeMap<String, String> =
            serde_json::from_str(text).map_err(|e| CurateError::MalformedPolicy(e.to_string()))?;
        let mut map = BTreeMap::new();
        for (label, cat) in raw {
            map.insert(normalize_label(&label), cat.parse()?);
        }
        Ok(Self { pii_types: map.keys().cloned().collect(), generator_map: map, name_needs_cooccurrence: true })
    }
}

/// Column replaced with synthetic values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnonymizedColumn {
    pub column_index: usize,
    pub pii_type: String,
    pub category: GeneratorCategory,
}

const NAME_LABEL: &str = "name";

/// Replaces every value of PII-annotated columns with synthetic values.
///
/// Each column draws from its own stream seeded by `(seed, column index)`,
/// and no generated value equals an original value of any anonymized column.
pub fn anonymize_pii(
    table: &Table,
    annotations: &[Annotation],
    policy: &PiiPolicy,
    seed: u64,
) -> Result<(Table, Vec<AnonymizedColumn>), CurateError> {
    // column -> candidate pii labels as (is_name, method, -score, label)
    let mut per_column: BTreeMap<usize, Vec<(bool, Method, i64, String)>> = BTreeMap::new();
    for a in annotations.iter().filter(|a| a.column_index < table.column_count()) {
        let label = normalize_label(&a.type_id);
        if !policy.pii_types.contains(&label) {
            continue;
        }
        if !policy.generator_map.contains_key(&label) {
            return Err(CurateError::UnknownPiiType(label));
        }
        let score_key = -(a.score * 1e9).round() as i64;
        per_column.entry(a.column_index).or_default().push((label == NAME_LABEL, a.method, score_key, label));
    }

    let labels = per_column_labels(annotations, policy, table);
    let mut chosen: Vec<(usize, String)> = Vec::new();
    for (&col, candidates) in &mut per_column {
        candidates.sort();
        let label = candidates[0].3.clone();
        if label == NAME_LABEL && policy.name_needs_cooccurrence && !has_other_pii(&labels, col) {
            continue;
        }
        chosen.push((col, label));
    }

    // a fake must not reproduce a real value from any faked column
    let originals: HashSet<&str> = chosen.iter().flat_map(|(col, _)| table.column(*col)).collect();
    let mut out = table.clone();
    let mut faked = Vec::with_capacity(chosen.len());
    for (col, label) in chosen {
        let category = policy.generator_map[&label];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(col as u64);
        for row in out.rows.iter_mut() {
            row[col] = fresh_value(category, &mut rng, &originals);
        }
        out.atomic_types[col] = infer_column_type(out.rows.iter().map(|r| r[col].as_str()));
        faked.push(AnonymizedColumn { column_index: col, pii_type: label, category });
    }
    Ok((out, faked))
}

// column -> set of PII labels it carries
fn per_column_labels(
    annotations: &[Annotation],
    policy: &PiiPolicy,
    table: &Table,
) -> BTreeMap<usize, BTreeSet<String>> {
    let mut map: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
    for a in annotations.iter().filter(|a| a.column_index < table.column_count()) {
        let label = normalize_label(&a.type_id);
        if policy.pii_types.contains(&label) {
            map.entry(a.column_index).or_default().insert(label);
        }
    }
    map
}

fn has_other_pii(map: &BTreeMap<usize, BTreeSet<String>>, col: usize) -> bool {
    map.iter().any(|(&c, labels)| c != col && labels.iter().any(|l| l != NAME_LABEL))
}

fn fresh_value(category: GeneratorCategory, rng: &mut ChaCha8Rng, originals: &HashSet<&str>) -> String {
    for _ in 0..64 {
        let v = synthesize(category, rng);
        if !originals.contains(v.as_str()) {
            return v;
        }
    }
    // every draw collided; extend the last one until it is new
    let mut v = synthesize(category, rng);
    let mut n = 0u64;
    while originals.contains(v.as_str()) {
        n += 1;
        v = format!("{v}~{n}");
    }
    v
}

const FIRST_NAMES: [&str; 24] = [
    "Avery", "Blake", "Casey", "Dana", "Elliot", "Frankie", "Gale", "Harper", "Indy", "Jules", "Kai", "Lane", "Morgan",
    "Noel", "Oakley", "Parker", "Quinn", "Reese", "Sage", "Tatum", "Umber", "Vale", "Wren", "Yael",
];
const LAST_NAMES: [&str; 24] = [
    "Ashdown",
    "Brackley",
    "Corrow",
    "Dunmere",
    "Elsworth",
    "Fenwick",
    "Garrow",
    "Holloway",
    "Ilsley",
    "Jessop",
    "Kettering",
    "Larkham",
    "Merriman",
    "Norcott",
    "Oldacre",
    "Pennick",
    "Quarrie",
    "Rushworth",
    "Stanwick",
    "Thackray",
    "Underhill",
    "Vickery",
    "Wetherby",
    "Yelland",
];
const STREETS: [&str; 12] =
    ["Alder", "Birch", "Cedar", "Damson", "Elm", "Fir", "Hazel", "Juniper", "Larch", "Maple", "Rowan", "Willow"];
const STREET_KINDS: [&str; 6] = ["Street", "Lane", "Road", "Avenue", "Close", "Way"];
const CITIES: [&str; 16] = [
    "Ashford Vale",
    "Brookmere",
    "Coldharbour",
    "Dunwick",
    "Eastmarch",
    "Fairhollow",
    "Greywater",
    "Highcombe",
    "Ironbridge Cross",
    "Kingsmoor",
    "Lowfield",
    "Millbrook",
    "Northcliff",
    "Oakhaven",
    "Ravensholt",
    "Westerby",
];

fn pick<'a>(rng: &mut ChaCha8Rng, list: &[&'a str]) -> &'a str {
    list[rng.gen_range(0..list.len())]
}

fn synthesize(category: GeneratorCategory, rng: &mut ChaCha8Rng) -> String {
    match category {
        GeneratorCategory::Name => format!("{} {}", pick(rng, &FIRST_NAMES), pick(rng, &LAST_NAMES)),
        GeneratorCategory::Address => format!(
            "{} {} {}, {}",
            rng.gen_range(1..=999),
            pick(rng, &STREETS),
            pick(rng, &STREET_KINDS),
            pick(rng, &CITIES)
        ),
        GeneratorCategory::Email => format!(
            "{}.{}{}@example.invalid",
            pick(rng, &FIRST_NAMES).to_lowercase(),
            pick(rng, &LAST_NAMES).to_lowercase(),
            rng.gen_range(0..100)
        ),
        GeneratorCategory::Date => {
            let (y, m, d) = civil_from_days(rng.gen_range(-10_958..=12_783));
            format!("{y:04}-{m:02}-{d:02}")
        }
        GeneratorCategory::City => pick(rng, &CITIES).to_string(),
        GeneratorCategory::Postcode => format!("{:05}", rng.gen_range(0..100_000)),
    }
}

// days since 1970-01-01 to a proleptic Gregorian date
fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    let y = yoe + era * 400 + i64::from(m <= 2);
    (y, m, d)
}
