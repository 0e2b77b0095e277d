//! Corpus statistics, type distributions, bias profiles, column profiles
//! and agreement against gold labels.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::Method;
use crate::ontology::{normalize_label, Ontology, TypeRegistry};
use crate::store::TableMetadata;
use crate::tableparse::{is_numeric, AtomicType, Table};

/// Similarity histogram bin width.
pub const HIST_BIN_WIDTH: f64 = 0.05;
pub const HIST_BINS: usize = 20;
/// Threshold for the "frequent type" count in coverage rows.
pub const FREQUENT_TYPE_COLUMNS: usize = 1000;
const SAMPLE_VALUES: usize = 5;

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("gold label does not resolve: {0}")]
    UnresolvedGold(String),
}

/// Annotation coverage for one method, either per ontology or over all
/// ontologies (`ontology` is `None`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub method: Method,
    pub ontology: Option<Ontology>,
    pub tables_annotated: usize,
    pub columns_annotated: usize,
    pub table_fraction: f64,
    pub column_fraction: f64,
    pub unique_types: usize,
    pub frequent_types: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub table_count: usize,
    pub total_rows: usize,
    pub total_columns: usize,
    pub mean_rows: f64,
    pub mean_columns: f64,
    pub median_rows: f64,
    pub median_columns: f64,
    pub atomic_types: BTreeMap<AtomicType, usize>,
    pub repo_count: usize,
    /// Number of repositories contributing exactly n tables, keyed by n.
    pub tables_per_repo: BTreeMap<usize, usize>,
    pub coverage: Vec<Coverage>,
    /// Semantic annotation scores in bins of width 0.05 over [0, 1].
    pub similarity_histogram: Vec<usize>,
}

type CoverageKey = (Method, Option<Ontology>);

/// Per-table contribution to [`CorpusStats`]. Merging is associative and
/// commutative.
#[derive(Debug, Clone, Default)]
pub struct StatsPartial {
    rows: Vec<usize>,
    columns: Vec<usize>,
    atomic_types: BTreeMap<AtomicType, usize>,
    repos: BTreeMap<String, usize>,
    tables_annotated: BTreeMap<CoverageKey, usize>,
    columns_annotated: BTreeMap<CoverageKey, usize>,
    type_columns: BTreeMap<CoverageKey, BTreeMap<String, usize>>,
    histogram: Vec<usize>,
}

impl StatsPartial {
    pub fn from_table(meta: &TableMetadata) -> Self {
        let mut p = StatsPartial {
            rows: vec![meta.row_count],
            columns: vec![meta.column_count],
            histogram: vec![0; HIST_BINS],
            ..Default::default()
        };
        for t in &meta.atomic_types {
            *p.atomic_types.entry(*t).or_insert(0) += 1;
        }
        p.repos.insert(meta.repo_id.clone(), 1);

        let mut cols: BTreeMap<CoverageKey, BTreeSet<usize>> = BTreeMap::new();
        for a in &meta.annotations {
            for key in [(a.method, Some(a.ontology)), (a.method, None)] {
                cols.entry(key).or_default().insert(a.column_index);
            }
            *p.type_columns.entry((a.method, Some(a.ontology))).or_default().entry(a.type_id.clone()).or_insert(0) += 1;
            *p.type_columns
                .entry((a.method, None))
                .or_default()
                .entry(format!("{}:{}", a.ontology, a.type_id))
                .or_insert(0) += 1;
            if a.method == Method::Semantic {
                p.histogram[histogram_bin(a.score)] += 1;
            }
        }
        for (key, set) in cols {
            p.tables_annotated.insert(key, 1);
            p.columns_annotated.insert(key, set.len());
        }
        p
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.rows.extend(other.rows);
        self.columns.extend(other.columns);
        add_counts(&mut self.atomic_types, other.atomic_types);
        add_counts(&mut self.repos, other.repos);
        add_counts(&mut self.tables_annotated, other.tables_annotated);
        add_counts(&mut self.columns_annotated, other.columns_annotated);
        for (k, v) in other.type_columns {
            add_counts(self.type_columns.entry(k).or_default(), v);
        }
        if self.histogram.is_empty() {
            self.histogram = other.histogram;
        } else {
            for (a, b) in self.histogram.iter_mut().zip(other.histogram) {
                *a += b;
            }
        }
        self
    }

    pub fn finish(mut self) -> Result<CorpusStats, AnalyzeError> {
        let n = self.rows.len();
        if n == 0 {
            return Err(AnalyzeError::EmptyCorpus);
        }
        self.rows.sort_unstable();
        self.columns.sort_unstable();
        let total_rows: usize = self.rows.iter().sum();
        let total_columns: usize = self.columns.iter().sum();

        let mut tables_per_repo = BTreeMap::new();
        for &count in self.repos.values() {
            *tables_per_repo.entry(count).or_insert(0) += 1;
        }

        let mut keys: BTreeSet<CoverageKey> = self.tables_annotated.keys().copied().collect();
        keys.insert((Method::Syntactic, None));
        keys.insert((Method::Semantic, None));
        let coverage = keys
            .into_iter()
            .map(|key| {
                let tables = self.tables_annotated.get(&key).copied().unwrap_or(0);
                let columns = self.columns_annotated.get(&key).copied().unwrap_or(0);
                let types = self.type_columns.get(&key);
                Coverage {
                    method: key.0,
                    ontology: key.1,
                    tables_annotated: tables,
                    columns_annotated: columns,
                    table_fraction: tables as f64 / n as f64,
                    column_fraction: if total_columns == 0 { 0.0 } else { columns as f64 / total_columns as f64 },
                    unique_types: types.map_or(0, |t| t.len()),
                    frequent_types: types.map_or(0, |t| t.values().filter(|&&c| c > FREQUENT_TYPE_COLUMNS).count()),
                }
            })
            .collect();

        Ok(CorpusStats {
            table_count: n,
            total_rows,
            total_columns,
            mean_rows: total_rows as f64 / n as f64,
            mean_columns: total_columns as f64 / n as f64,
            median_rows: median(&self.rows),
            median_columns: median(&self.columns),
            atomic_types: self.atomic_types,
            repo_count: self.repos.len(),
            tables_per_repo,
            coverage,
            similarity_histogram: if self.histogram.is_empty() { vec![0; HIST_BINS] } else { self.histogram },
        })
    }
}

fn add_counts<K: Ord>(into: &mut BTreeMap<K, usize>, from: BTreeMap<K, usize>) {
    for (k, v) in from {
        *into.entry(k).or_insert(0) += v;
    }
}

// sorted input
fn median(xs: &[usize]) -> f64 {
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2] as f64
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) as f64 / 2.0
    }
}

/// Histogram bin of a score in [0, 1]; 1.0 falls in the last bin.
pub fn histogram_bin(score: f64) -> usize {
    ((score.clamp(0.0, 1.0) / HIST_BIN_WIDTH).floor() as usize).min(HIST_BINS - 1)
}

pub fn corpus_stats(metas: &[TableMetadata]) -> Result<CorpusStats, AnalyzeError> {
    metas.par_iter().map(StatsPartial::from_table).reduce(StatsPartial::default, StatsPartial::merge).finish()
}

impl CorpusStats {
    /// Plain-text report.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tables            {}", self.table_count);
        let _ = writeln!(s, "repositories      {}", self.repo_count);
        let _ = writeln!(
            s,
            "rows              {} (mean {:.2}, median {:.1})",
            self.total_rows, self.mean_rows, self.median_rows
        );
        let _ = writeln!(
            s,
            "columns           {} (mean {:.2}, median {:.1})",
            self.total_columns, self.mean_columns, self.median_columns
        );
        let _ = writeln!(s, "atomic types");
        for (t, c) in &self.atomic_types {
            let _ = writeln!(s, "  {t:<16}{c}");
        }
        let _ = writeln!(s, "annotation coverage");
        let _ = writeln!(
            s,
            "  {:<10} {:<10} {:>8} {:>8} {:>8} {:>8}",
            "method", "ontology", "tables", "columns", "types", ">1K"
        );
        for c in &self.coverage {
            let onto = c.ontology.map_or("all".to_string(), |o| o.to_string());
            let _ = writeln!(
                s,
                "  {:<10} {:<10} {:>8} {:>8} {:>8} {:>8}",
                c.method.as_str(),
                onto,
                c.tables_annotated,
                c.columns_annotated,
                c.unique_types,
                c.frequent_types
            );
        }
        s
    }
}

/// Most frequent types among annotations with the given method and
/// ontology; ties are ordered by type id.
pub fn top_types(metas: &[TableMetadata], k: usize, method: Method, ontology: Ontology) -> Vec<(String, usize)> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for a in metas.iter().flat_map(|m| &m.annotations) {
        if a.method == method && a.ontology == ontology {
            *counts.entry(&a.type_id).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().map(|(t, c)| (t.to_string(), c)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasEntry {
    pub type_id: String,
    pub columns: usize,
    /// Share of annotated columns that carry this type.
    pub column_fraction: f64,
    /// Most frequent values first, with counts.
    pub top_values: Vec<(String, usize)>,
}

type ValueSpellings = HashMap<String, HashMap<String, usize>>;

/// Value frequencies for columns annotated with each sensitive type.
///
/// Values are grouped case-insensitively after trimming; an optional alias
/// map (keys compared case-insensitively) folds variants into one group.
/// Each group is shown under its most frequent original spelling.
pub fn bias_profile(
    corpus: &[(Table, TableMetadata)],
    sensitive_types: &[String],
    aliases: Option<&BTreeMap<String, String>>,
    top_n: usize,
) -> Vec<BiasEntry> {
    let aliases: HashMap<String, String> =
        aliases.into_iter().flatten().map(|(k, v)| (k.trim().to_lowercase(), v.trim().to_string())).collect();
    let mut annotated_columns = 0usize;
    // per type: (columns, merge key -> spelling -> count)
    let mut per_type: Vec<(usize, ValueSpellings)> = sensitive_types.iter().map(|_| (0, HashMap::new())).collect();
    let wanted: Vec<String> = sensitive_types.iter().map(|t| normalize_label(t)).collect();

    for (table, meta) in corpus {
        let mut by_column: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
        for a in &meta.annotations {
            by_column.entry(a.column_index).or_default().insert(normalize_label(&a.type_id));
        }
        annotated_columns += by_column.len();
        for (col, labels) in by_column {
            for (i, w) in wanted.iter().enumerate() {
                if !labels.contains(w) {
                    continue;
                }
                per_type[i].0 += 1;
                for v in table.column(col) {
                    let v = v.trim();
                    if v.is_empty() {
                        continue;
                    }
                    let (key, shown) = match aliases.get(&v.to_lowercase()) {
                        Some(canon) => (canon.to_lowercase(), canon.clone()),
                        None => (v.to_lowercase(), v.to_string()),
                    };
                    *per_type[i].1.entry(key).or_default().entry(shown).or_insert(0) += 1;
                }
            }
        }
    }

    sensitive_types
        .iter()
        .zip(per_type)
        .map(|(type_id, (columns, groups))| {
            let mut values: Vec<(String, usize)> = groups
                .into_values()
                .map(|spellings| {
                    let total = spellings.values().sum();
                    let shown = spellings
                        .into_iter()
                        .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
                        .map(|(s, _)| s)
                        .unwrap_or_default();
                    (shown, total)
                })
                .collect();
            values.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            values.truncate(top_n);
            BiasEntry {
                type_id: type_id.clone(),
                columns,
                column_fraction: if annotated_columns == 0 { 0.0 } else { columns as f64 / annotated_columns as f64 },
                top_values: values,
            }
        })
        .collect()
}

/// Mean per-cell counts of a few telling characters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharMeans {
    pub digits: f64,
    pub at: f64,
    pub dot: f64,
    pub dash: f64,
    pub underscore: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub value_count: usize,
    pub distinct_ratio: f64,
    pub empty_fraction: f64,
    pub numeric_fraction: f64,
    pub mean_length: f64,
    pub std_length: f64,
    /// Shannon entropy of the value distribution, in nats.
    pub entropy: f64,
    pub char_means: CharMeans,
}

/// Shannon entropy (natural log) of a frequency table.
pub fn entropy<I: IntoIterator<Item = usize>>(counts: I) -> f64 {
    let counts: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let h = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum::<f64>();
    h.max(0.0)
}

pub fn column_profile<S: AsRef<str>>(values: &[S]) -> ColumnProfile {
    let n = values.len();
    if n == 0 {
        return ColumnProfile {
            value_count: 0,
            distinct_ratio: 0.0,
            empty_fraction: 0.0,
            numeric_fraction: 0.0,
            mean_length: 0.0,
            std_length: 0.0,
            entropy: 0.0,
            char_means: CharMeans { digits: 0.0, at: 0.0, dot: 0.0, dash: 0.0, underscore: 0.0 },
        };
    }
    let nf = n as f64;
    let mut freq: HashMap<&str, usize> = HashMap::new();
    let (mut empty, mut numeric) = (0usize, 0usize);
    let mut lengths = Vec::with_capacity(n);
    let mut chars = [0usize; 5];
    for v in values {
        let v = v.as_ref();
        *freq.entry(v).or_insert(0) += 1;
        if v.trim().is_empty() {
            empty += 1;
        }
        if is_numeric(v) {
            numeric += 1;
        }
        lengths.push(v.chars().count() as f64);
        for c in v.chars() {
            match c {
                '0'..='9' => chars[0] += 1,
                '@' => chars[1] += 1,
                '.' => chars[2] += 1,
                '-' => chars[3] += 1,
                '_' => chars[4] += 1,
                _ => {}
            }
        }
    }
    let mean_length = lengths.iter().sum::<f64>() / nf;
    let var = lengths.iter().map(|l| (l - mean_length).powi(2)).sum::<f64>() / nf;
    ColumnProfile {
        value_count: n,
        distinct_ratio: freq.len() as f64 / nf,
        empty_fraction: empty as f64 / nf,
        numeric_fraction: numeric as f64 / nf,
        mean_length,
        std_length: var.sqrt(),
        entropy: entropy(freq.values().copied()),
        char_means: CharMeans {
            digits: chars[0] as f64 / nf,
            at: chars[1] as f64 / nf,
            dot: chars[2] as f64 / nf,
            dash: chars[3] as f64 / nf,
            underscore: chars[4] as f64 / nf,
        },
    }
}

/// Human-assigned type for one column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabel {
    pub table_id: String,
    pub column_index: usize,
    pub gold_type_id: String,
    pub ontology: Ontology,
}

pub fn parse_gold_jsonl(text: &str) -> Result<Vec<GoldLabel>, AnalyzeError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| AnalyzeError::UnresolvedGold(format!("line {}: {e}", i + 1))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OntologyAgreement {
    pub ontology: Ontology,
    pub evaluated: usize,
    pub exact: usize,
    pub hierarchical: usize,
    pub exact_fraction: f64,
    pub hierarchical_fraction: f64,
}

/// A gold column whose prediction differs from the gold type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub table_id: String,
    pub column_index: usize,
    pub column_name: String,
    pub ontology: Ontology,
    pub sample_values: Vec<String>,
    pub gold: String,
    pub predicted: Option<String>,
    pub score: Option<f64>,
    /// Gold and prediction lie on one super-type chain.
    pub hierarchical_match: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub method: Method,
    pub per_ontology: Vec<OntologyAgreement>,
    pub disagreements: Vec<Disagreement>,
}

impl AgreementReport {
    pub fn disagreements_jsonl(&self) -> String {
        let mut s = String::new();
        for d in &self.disagreements {
            s.push_str(&serde_json::to_string(d).expect("disagreement serializes"));
            s.push('\n');
        }
        s
    }
}

/// Compares stored annotations of `method` with gold labels.
///
/// Exact agreement requires identical type ids. Hierarchical credit also
/// accepts a prediction that is an ancestor or descendant of the gold type
/// in the ontology's registry. Unannotated gold columns count as misses.
pub fn agreement_eval(
    corpus: &[(Table, TableMetadata)],
    gold: &[GoldLabel],
    method: Method,
    registries: &[TypeRegistry],
) -> Result<AgreementReport, AnalyzeError> {
    if gold.is_empty() {
        return Err(AnalyzeError::UnresolvedGold("gold set is empty".into()));
    }
    let by_id: HashMap<&str, &(Table, TableMetadata)> = corpus.iter().map(|e| (e.1.table_id.as_str(), e)).collect();
    let mut tallies: BTreeMap<Ontology, (usize, usize, usize)> = BTreeMap::new();
    let mut disagreements = Vec::new();

    for g in gold {
        let Some((table, meta)) = by_id.get(g.table_id.as_str()) else {
            return Err(AnalyzeError::UnresolvedGold(format!("unknown table {}", g.table_id)));
        };
        if g.column_index >= meta.column_count {
            return Err(AnalyzeError::UnresolvedGold(format!("table {} has no column {}", g.table_id, g.column_index)));
        }
        let pred = meta
            .annotations
            .iter()
            .find(|a| a.column_index == g.column_index && a.ontology == g.ontology && a.method == method);
        let registry = registries.iter().find(|r| r.ontology() == g.ontology);
        let exact = pred.is_some_and(|p| p.type_id == g.gold_type_id);
        let hier = exact || pred.is_some_and(|p| registry.is_some_and(|r| r.related(&p.type_id, &g.gold_type_id)));
        let t = tallies.entry(g.ontology).or_insert((0, 0, 0));
        t.0 += 1;
        t.1 += usize::from(exact);
        t.2 += usize::from(hier);
        if !exact {
            let mut seen = BTreeSet::new();
            let samples = table
                .column(g.column_index)
                .filter(|v| !v.trim().is_empty() && seen.insert(*v))
                .take(SAMPLE_VALUES)
                .map(String::from)
                .collect();
            disagreements.push(Disagreement {
                table_id: g.table_id.clone(),
                column_index: g.column_index,
                column_name: meta.columns[g.column_index].clone(),
                ontology: g.ontology,
                sample_values: samples,
                gold: g.gold_type_id.clone(),
                predicted: pred.map(|p| p.type_id.clone()),
                score: pred.map(|p| p.score),
                hierarchical_match: hier,
            });
        }
    }

    let per_ontology = tallies
        .into_iter()
        .map(|(ontology, (n, exact, hier))| OntologyAgreement {
            ontology,
            evaluated: n,
            exact,
            hierarchical: hier,
            exact_fraction: exact as f64 / n as f64,
            hierarchical_fraction: hier as f64 / n as f64,
        })
        .collect();
    Ok(AgreementReport { method, per_ontology, disagreements })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::Annotation;
    use crate::harvest::FileRef;
    use crate::ontology::SemanticType;
    use crate::tableparse::Delimiter;
    use proptest::prelude::*;

    fn table(header: &[&str], rows: &[&[&str]]) -> Table {
        Table::from_rows(
            header.iter().map(|s| s.to_string()).collect(),
            rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect(),
        )
        .unwrap()
    }

    fn meta(t: &Table, repo: &str, path: &str, anns: Vec<Annotation>) -> TableMetadata {
        let src = FileRef {
            url: format!("https://x/{repo}/{path}"),
            repo_id: repo.into(),
            file_path: path.into(),
            size_bytes: 1,
            license_id: Some("mit".into()),
            topic: "t".into(),
        };
        TableMetadata::describe(t, &src, "00", Delimiter::Comma, anns, vec![], 0)
    }

    fn ann(col: usize, ty: &str, method: Method, score: f64) -> Annotation {
        Annotation { column_index: col, type_id: ty.into(), ontology: Ontology::Dbpedia, method, score }
    }

    #[test]
    fn singleton_corpus_means() {
        let t = table(&["a", "b", "c"], &[&["1", "x", "y"], &["2", "z", "w"]]);
        let s = corpus_stats(&[meta(&t, "o/r", "a.csv", vec![])]).unwrap();
        assert_eq!((s.mean_rows, s.mean_columns, s.median_rows), (2.0, 3.0, 2.0));
        assert!(s.coverage.iter().all(|c| c.columns_annotated == 0 && c.table_fraction == 0.0));
        assert!(matches!(corpus_stats(&[]), Err(AnalyzeError::EmptyCorpus)));
    }

    #[test]
    fn coverage_and_histogram() {
        let t = table(&["a", "b"], &[&["1", "x"], &["2", "y"]]);
        let m1 = meta(
            &t,
            "o/r",
            "a.csv",
            vec![
                ann(0, "id", Method::Syntactic, 1.0),
                ann(0, "id", Method::Semantic, 1.0),
                ann(1, "name", Method::Semantic, 0.72),
            ],
        );
        let m2 = meta(&t, "o/r", "b.csv", vec![]);
        let s = corpus_stats(&[m1, m2]).unwrap();
        let sem = s.coverage.iter().find(|c| c.method == Method::Semantic && c.ontology.is_none()).unwrap();
        assert_eq!((sem.tables_annotated, sem.columns_annotated), (1, 2));
        assert_eq!(sem.table_fraction, 0.5);
        assert_eq!(sem.column_fraction, 0.5);
        assert_eq!(s.similarity_histogram[19], 1);
        assert_eq!(s.similarity_histogram[14], 1);
        assert_eq!(s.tables_per_repo, BTreeMap::from([(2, 1)]));
        assert_eq!(s.similarity_histogram.iter().sum::<usize>(), 2);
    }

    #[test]
    fn top_types_examples() {
        let t = table(&["a", "b"], &[&["1", "x"], &["2", "y"]]);
        let mut anns = vec![];
        for _ in 0..5 {
            anns.push(ann(0, "id", Method::Syntactic, 1.0));
        }
        for _ in 0..3 {
            anns.push(ann(1, "name", Method::Syntactic, 1.0));
        }
        let ms = vec![meta(&t, "o/r", "a.csv", anns)];
        assert_eq!(top_types(&ms, 2, Method::Syntactic, Ontology::Dbpedia), vec![("id".into(), 5), ("name".into(), 3)]);
        assert_eq!(top_types(&ms, 10, Method::Syntactic, Ontology::Dbpedia).len(), 2);
        assert!(top_types(&ms, 10, Method::Semantic, Ontology::Dbpedia).is_empty());
    }

    #[test]
    fn bias_values_and_aliases() {
        let rows: Vec<Vec<&str>> = (0..8)
            .map(|i| vec![if i < 6 { "United States" } else { "Canada" }, "x"])
            .chain([vec!["USA", "y"], vec!["usa", "z"]])
            .collect();
        let rows: Vec<&[&str]> = rows.iter().map(|r| r.as_slice()).collect();
        let t = table(&["country", "other"], &rows);
        let m = meta(&t, "o/r", "a.csv", vec![ann(0, "country", Method::Syntactic, 1.0)]);
        let corpus = vec![(t, m)];
        let p = bias_profile(&corpus, &["country".into(), "gender".into()], None, 10);
        assert_eq!(p[0].top_values, vec![("United States".into(), 6), ("Canada".into(), 2), ("USA".into(), 2)]);
        assert_eq!(p[0].column_fraction, 1.0);
        assert_eq!((p[1].columns, p[1].column_fraction), (0, 0.0));
        assert!(p[1].top_values.is_empty());
        let aliases = BTreeMap::from([("USA".to_string(), "United States".to_string())]);
        let p = bias_profile(&corpus, &["country".into()], Some(&aliases), 10);
        assert_eq!(p[0].top_values[0], ("United States".into(), 8));
    }

    #[test]
    fn profile_examples() {
        let p = column_profile(&["a", "a", "a"]);
        assert_eq!(p.entropy, 0.0);
        assert!((p.distinct_ratio - 1.0 / 3.0).abs() < 1e-12);
        assert!((column_profile(&["a", "b"]).entropy - 2f64.ln()).abs() < 1e-9);
        assert_eq!(column_profile(&["a@b", "c@d"]).char_means.at, 1.0);
    }

    #[test]
    fn uniform_entropy_is_ln_n() {
        for n in 1..=64usize {
            let h = entropy(std::iter::repeat_n(3, n));
            assert!((h - (n as f64).ln()).abs() < 1e-9, "n = {n}");
        }
    }

    fn registry() -> TypeRegistry {
        let ty = |id: &str, sup: Option<&str>| SemanticType {
            type_id: id.into(),
            ontology: Ontology::Dbpedia,
            label: id.into(),
            atomic_type: None,
            domains: vec![],
            super_type: sup.map(Into::into),
            description: None,
        };
        TypeRegistry::new(Ontology::Dbpedia, vec![ty("location", None), ty("city", Some("location")), ty("name", None)])
            .unwrap()
    }

    #[test]
    fn agreement_counts_hierarchy_separately() {
        let t = table(&["place", "who"], &[&["Paris", "Ann"], &["Oslo", "Bob"]]);
        let m = meta(
            &t,
            "o/r",
            "a.csv",
            vec![ann(0, "city", Method::Semantic, 0.8), ann(1, "name", Method::Semantic, 0.9)],
        );
        let id = m.table_id.clone();
        let corpus = vec![(t, m)];
        let gold = vec![
            GoldLabel {
                table_id: id.clone(),
                column_index: 0,
                gold_type_id: "location".into(),
                ontology: Ontology::Dbpedia,
            },
            GoldLabel {
                table_id: id.clone(),
                column_index: 1,
                gold_type_id: "name".into(),
                ontology: Ontology::Dbpedia,
            },
        ];
        let r = agreement_eval(&corpus, &gold, Method::Semantic, &[registry()]).unwrap();
        assert_eq!(r.per_ontology[0].exact, 1);
        assert_eq!(r.per_ontology[0].hierarchical, 2);
        assert_eq!(r.disagreements.len(), 1);
        assert_eq!(r.disagreements[0].sample_values, vec!["Paris", "Oslo"]);
        assert!(matches!(agreement_eval(&corpus, &[], Method::Semantic, &[]), Err(AnalyzeError::UnresolvedGold(_))));
        let bad = GoldLabel {
            table_id: "nope".into(),
            column_index: 0,
            gold_type_id: "x".into(),
            ontology: Ontology::Dbpedia,
        };
        assert!(agreement_eval(&corpus, &[bad], Method::Semantic, &[]).is_err());
    }

    proptest! {
        #[test]
        fn stats_ignore_order(dims in prop::collection::vec((0usize..6, 1usize..5, 0usize..3), 1..12), seed in any::<u64>()) {
            let metas: Vec<TableMetadata> = dims
                .iter()
                .enumerate()
                .map(|(i, &(r, c, repo))| {
                    let header: Vec<String> = (0..c).map(|j| format!("c{j}")).collect();
                    let rows = vec![vec!["1".to_string(); c]; r];
                    let t = Table::from_rows(header, rows).unwrap();
                    let anns = if r % 2 == 0 { vec![ann(0, "id", Method::Semantic, (i as f64) / 12.0)] } else { vec![] };
                    meta(&t, &format!("o/r{repo}"), &format!("{i}.csv"), anns)
                })
                .collect();
            let mut shuffled = metas.clone();
            use rand::{seq::SliceRandom, SeedableRng};
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = corpus_stats(&metas).unwrap();
            let b = corpus_stats(&shuffled).unwrap();
            prop_assert_eq!(a.total_rows, b.total_rows);
            prop_assert_eq!(a.median_rows, b.median_rows);
            prop_assert_eq!(&a.coverage, &b.coverage);
            prop_assert_eq!(&a.similarity_histogram, &b.similarity_histogram);
            prop_assert_eq!(&a.tables_per_repo, &b.tables_per_repo);
            prop_assert!((a.mean_rows - b.mean_rows).abs() < 1e-12);
        }

        #[test]
        fn entropy_is_nonnegative(counts in prop::collection::vec(0usize..50, 0..20)) {
            prop_assert!(entropy(counts) >= 0.0);
        }
    }
}
