//! Raw CSV bytes to rectangular tables.
//!
//! Parsing salvages what it can: leading comment and blank lines are
//! skipped, bad data lines are dropped and logged, and consistent trailing
//! delimiters are stripped so header and rows line up. Every such action is
//! recorded in the table's parse log.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harvest::FileRef;

/// Number of non-skipped records examined by the dialect sniffer.
pub const SNIFF_RECORDS: usize = 20;
/// Share of non-empty cells that must match for Numeric/Date/Boolean.
pub const TYPE_MATCH_RATIO: f64 = 0.95;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("no candidate delimiter yields two or more fields")]
    Undecidable,
    #[error("every line is blank or commented")]
    AllLinesSkipped,
    #[error("no header line")]
    HeaderMissing,
    #[error("every data line was dropped")]
    AllRowsBad,
}

impl ParseError {
    /// Stable reason code for failure listings.
    pub fn code(&self) -> &'static str {
        match self {
            ParseError::Undecidable => "undecidable_dialect",
            ParseError::AllLinesSkipped => "all_lines_skipped",
            ParseError::HeaderMissing => "header_missing",
            ParseError::AllRowsBad => "all_rows_bad",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Delimiter {
    Comma,
    Semicolon,
    Tab,
    Pipe,
}

impl Delimiter {
    /// Candidates in tie-breaking order.
    pub const CANDIDATES: [Delimiter; 4] = [Delimiter::Comma, Delimiter::Semicolon, Delimiter::Tab, Delimiter::Pipe];

    pub fn as_char(self) -> char {
        match self {
            Delimiter::Comma => ',',
            Delimiter::Semicolon => ';',
            Delimiter::Tab => '\t',
            Delimiter::Pipe => '|',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        Self::CANDIDATES.into_iter().find(|d| d.as_char() == c)
    }
}

/// Delimiter convention of a CSV file. The quote character is always `"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dialect {
    pub delimiter: Delimiter,
}

impl Dialect {
    pub const QUOTE: char = '"';

    pub fn new(delimiter: Delimiter) -> Self {
        Self { delimiter }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AtomicType {
    Numeric,
    String,
    Date,
    Boolean,
    Other,
}

impl AtomicType {
    pub const ALL: [AtomicType; 5] =
        [AtomicType::Numeric, AtomicType::String, AtomicType::Date, AtomicType::Boolean, AtomicType::Other];
}

impl fmt::Display for AtomicType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&format!("{self:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ParseAction {
    SkippedPreamble,
    DroppedEmpty,
    DroppedComment,
    DroppedExtraDelimiters,
    DroppedMissingFields,
    Realigned { from: usize, to: usize },
}

impl ParseAction {
    pub fn name(&self) -> &'static str {
        match self {
            ParseAction::SkippedPreamble => "skipped_preamble",
            ParseAction::DroppedEmpty => "dropped_empty",
            ParseAction::DroppedComment => "dropped_comment",
            ParseAction::DroppedExtraDelimiters => "dropped_extra_delimiters",
            ParseAction::DroppedMissingFields => "dropped_missing_fields",
            ParseAction::Realigned { .. } => "realigned",
        }
    }
}

/// One parse log record; `line` is the 1-based physical line number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseLogEntry {
    pub line: usize,
    #[serde(flatten)]
    pub action: ParseAction,
}

/// Rectangular table: every row has exactly `header.len()` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub atomic_types: Vec<AtomicType>,
    #[serde(default)]
    pub provenance: Option<FileRef>,
    #[serde(default)]
    pub parse_log: Vec<ParseLogEntry>,
}

impl Table {
    /// Builds a table from header and rows, inferring atomic types.
    /// Returns `None` when the rows are not rectangular or the header is empty.
    pub fn from_rows(header: Vec<String>, rows: Vec<Vec<String>>) -> Option<Table> {
        if header.is_empty() || rows.iter().any(|r| r.len() != header.len()) {
            return None;
        }
        Some(infer_atomic_types(Table {
            atomic_types: Vec::new(),
            header,
            rows,
            provenance: None,
            parse_log: Vec::new(),
        }))
    }

    pub fn column_count(&self) -> usize {
        self.header.len()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn column(&self, index: usize) -> impl Iterator<Item = &str> + '_ {
        self.rows.iter().map(move |r| r[index].as_str())
    }

    pub fn is_rectangular(&self) -> bool {
        !self.header.is_empty()
            && self.atomic_types.len() == self.header.len()
            && self.rows.iter().all(|r| r.len() == self.header.len())
    }
}

/// Decodes bytes as UTF-8 (lossy), dropping a leading byte-order mark.
pub fn decode(raw: &[u8]) -> String {
    let raw = raw.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(raw);
    String::from_utf8_lossy(raw).into_owned()
}

/// Splits text into physical lines, accepting LF, CRLF and bare CR endings.
fn physical_lines(text: &str) -> Vec<&str> {
    let sep = if !text.contains('\n') && text.contains('\r') { '\r' } else { '\n' };
    let mut lines: Vec<&str> = text.split(sep).map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
    if lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    lines
}

fn is_blank(line: &str) -> bool {
    line.trim().is_empty()
}

fn is_comment(line: &str) -> bool {
    line.trim_start().starts_with('#')
}

/// Drops leading blank lines and lines starting with `#`.
pub fn skip_preamble<S: AsRef<str>>(lines: &[S]) -> Result<(usize, &[S]), ParseError> {
    let skipped = lines.iter().take_while(|l| is_blank(l.as_ref()) || is_comment(l.as_ref())).count();
    if skipped == lines.len() {
        return Err(ParseError::AllLinesSkipped);
    }
    Ok((skipped, &lines[skipped..]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RecordKind {
    Blank,
    Comment,
    Data,
}

#[derive(Debug)]
struct Record {
    line: usize,
    kind: RecordKind,
    fields: Vec<String>,
}

/// Splits lines into records with quoted-field semantics. A quoted field may
/// span lines; blank and comment lines are classified before field parsing.
fn split_records(lines: &[&str], first_line_no: usize, delimiter: char) -> Vec<Record> {
    #[derive(PartialEq)]
    enum State {
        FieldStart,
        Unquoted,
        Quoted,
        AfterQuote,
    }

    let quote = Dialect::QUOTE;
    let mut records = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let line_no = first_line_no + i;
        let line = lines[i];
        if is_blank(line) {
            records.push(Record { line: line_no, kind: RecordKind::Blank, fields: vec![] });
            i += 1;
            continue;
        }
        if is_comment(line) {
            records.push(Record { line: line_no, kind: RecordKind::Comment, fields: vec![] });
            i += 1;
            continue;
        }

        let mut fields = Vec::new();
        let mut field = String::new();
        let mut state = State::FieldStart;
        loop {
            let mut chars = lines[i].chars().peekable();
            while let Some(c) = chars.next() {
                match state {
                    State::FieldStart if c == quote => state = State::Quoted,
                    State::FieldStart | State::Unquoted | State::AfterQuote if c == delimiter => {
                        fields.push(std::mem::take(&mut field));
                        state = State::FieldStart;
                    }
                    State::FieldStart | State::Unquoted | State::AfterQuote => {
                        field.push(c);
                        state = State::Unquoted;
                    }
                    State::Quoted if c == quote => {
                        if chars.peek() == Some(&quote) {
                            chars.next();
                            field.push(quote);
                        } else {
                            state = State::AfterQuote;
                        }
                    }
                    State::Quoted => field.push(c),
                }
            }
            i += 1;
            if state == State::Quoted && i < lines.len() {
                field.push('\n');
                continue;
            }
            break;
        }
        fields.push(field);
        records.push(Record { line: line_no, kind: RecordKind::Data, fields });
    }
    records
}

fn is_empty_cell(s: &str) -> bool {
    s.trim().is_empty()
}

/// Chooses the delimiter whose field counts over the first
/// [`SNIFF_RECORDS`] data records have the highest minimum, then the lowest
/// variance, then the earliest position in [`Delimiter::CANDIDATES`].
/// Candidates that never produce two fields are not eligible.
pub fn sniff_dialect(raw: &[u8]) -> Result<Dialect, ParseError> {
    let text = decode(raw);
    let lines = physical_lines(&text);
    let (skipped, rest) = skip_preamble(&lines).map_err(|_| ParseError::Undecidable)?;

    let mut best: Option<(Delimiter, usize, f64)> = None;
    for cand in Delimiter::CANDIDATES {
        let counts: Vec<usize> = split_records(rest, skipped + 1, cand.as_char())
            .into_iter()
            .filter(|r| r.kind == RecordKind::Data)
            .take(SNIFF_RECORDS)
            .map(|r| r.fields.len())
            .collect();
        let (Some(&min), Some(&max)) = (counts.iter().min(), counts.iter().max()) else {
            continue;
        };
        if max < 2 {
            continue;
        }
        let n = counts.len() as f64;
        let mean = counts.iter().sum::<usize>() as f64 / n;
        let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / n;
        let better = match best {
            None => true,
            Some((_, bmin, bvar)) => min > bmin || (min == bmin && var < bvar),
        };
        if better {
            best = Some((cand, min, var));
        }
    }
    best.map(|(d, _, _)| Dialect::new(d)).ok_or(ParseError::Undecidable)
}

/// Parses raw bytes with a known dialect. The first non-preamble line is
/// the header; atomic types are inferred on the result.
pub fn parse_table(raw: &[u8], dialect: Dialect) -> Result<Table, ParseError> {
    let text = decode(raw);
    let lines = physical_lines(&text);
    let (skipped, rest) = skip_preamble(&lines).map_err(|_| ParseError::HeaderMissing)?;
    let mut log: Vec<ParseLogEntry> =
        (1..=skipped).map(|line| ParseLogEntry { line, action: ParseAction::SkippedPreamble }).collect();

    let mut records = split_records(rest, skipped + 1, dialect.delimiter.as_char()).into_iter();
    let header_rec = records.next().ok_or(ParseError::HeaderMissing)?;
    let header_line = header_rec.line;
    let mut header = header_rec.fields;

    let mut data: Vec<(usize, Vec<String>)> = Vec::new();
    let mut saw_bad_nonblank = false;
    for rec in records {
        match rec.kind {
            RecordKind::Blank => log.push(ParseLogEntry { line: rec.line, action: ParseAction::DroppedEmpty }),
            RecordKind::Comment => {
                saw_bad_nonblank = true;
                log.push(ParseLogEntry { line: rec.line, action: ParseAction::DroppedComment });
            }
            RecordKind::Data => data.push((rec.line, rec.fields)),
        }
    }

    // Trailing-delimiter realignment: strip to the header's width without
    // trailing empty names, provided no row holds a value past that width.
    let core_width = header.iter().rposition(|h| !is_empty_cell(h)).map_or(1, |p| p + 1);
    let extras_empty = data.iter().all(|(_, f)| f.iter().skip(core_width).all(|c| is_empty_cell(c)));
    let widest = data.iter().map(|(_, f)| f.len()).max().unwrap_or(0).max(header.len());
    if extras_empty && widest > core_width {
        header.truncate(core_width);
        for (_, fields) in &mut data {
            fields.truncate(core_width);
        }
        log.push(ParseLogEntry { line: header_line, action: ParseAction::Realigned { from: widest, to: core_width } });
    }

    let width = header.len();
    let mut rows = Vec::with_capacity(data.len());
    for (line, fields) in data {
        if fields.len() == width {
            rows.push(fields);
            continue;
        }
        saw_bad_nonblank = true;
        let action =
            if fields.len() > width { ParseAction::DroppedExtraDelimiters } else { ParseAction::DroppedMissingFields };
        log.push(ParseLogEntry { line, action });
    }
    if rows.is_empty() && saw_bad_nonblank {
        return Err(ParseError::AllRowsBad);
    }
    log.sort_by_key(|e| e.line);

    Ok(infer_atomic_types(Table { header, rows, atomic_types: Vec::new(), provenance: None, parse_log: log }))
}

/// Sniffs the dialect, then parses.
pub fn parse_bytes(raw: &[u8]) -> Result<(Dialect, Table), ParseError> {
    let dialect = sniff_dialect(raw)?;
    parse_table(raw, dialect).map(|t| (dialect, t))
}

static NUMERIC: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$").unwrap());
static ISO_DATE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(\d{4})-(\d{2})-(\d{2})([T ]\d{2}:\d{2}(:\d{2}(\.\d+)?)?(Z|[+-]\d{2}:?\d{2})?)?$").unwrap()
});
static DMY_DATE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{1,2})[/.\-](\d{1,2})[/.\-](\d{4}|\d{2})$").unwrap());

/// Integer or decimal with optional sign and exponent.
pub fn is_numeric(s: &str) -> bool {
    NUMERIC.is_match(s.trim())
}

pub fn is_date(s: &str) -> bool {
    let s = s.trim();
    if let Some(c) = ISO_DATE.captures(s) {
        let month: u32 = c[2].parse().unwrap_or(0);
        let day: u32 = c[3].parse().unwrap_or(0);
        return (1..=12).contains(&month) && (1..=31).contains(&day);
    }
    if let Some(c) = DMY_DATE.captures(s) {
        let a: u32 = c[1].parse().unwrap_or(0);
        let b: u32 = c[2].parse().unwrap_or(0);
        return a >= 1 && b >= 1 && a <= 31 && b <= 31 && a.min(b) <= 12;
    }
    false
}

const BOOLEAN_TOKENS: [&str; 6] = ["true", "false", "0", "1", "yes", "no"];

pub fn is_boolean_token(s: &str) -> bool {
    let s = s.trim().to_lowercase();
    BOOLEAN_TOKENS.contains(&s.as_str())
}

/// Classifies one column from its cells.
pub fn infer_column_type<'a>(cells: impl IntoIterator<Item = &'a str>) -> AtomicType {
    let values: Vec<&str> = cells.into_iter().filter(|c| !is_empty_cell(c)).collect();
    if values.is_empty() {
        return AtomicType::Other;
    }
    let n = values.len() as f64;
    let share = |pred: fn(&str) -> bool| values.iter().filter(|v| pred(v)).count() as f64 / n;
    // the distinct-set condition makes the boolean share exactly 1
    if values.iter().all(|v| is_boolean_token(v)) {
        return AtomicType::Boolean;
    }
    if share(is_date) >= TYPE_MATCH_RATIO {
        return AtomicType::Date;
    }
    if share(is_numeric) >= TYPE_MATCH_RATIO {
        return AtomicType::Numeric;
    }
    AtomicType::String
}

/// Fills `atomic_types` for every column.
pub fn infer_atomic_types(mut table: Table) -> Table {
    table.atomic_types =
        (0..table.header.len()).map(|i| infer_column_type(table.rows.iter().map(|r| r[i].as_str()))).collect();
    table
}
