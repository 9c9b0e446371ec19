//! Articles, review reports and bibliographic records, with line-delimited
//! JSON ingestion.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use regex::Regex;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub enum StructureLabel {
    Introduction,
    Methods,
    Results,
    Discussion,
    #[default]
    Unknown,
}

impl StructureLabel {
    /// The four IMRaD classes in canonical order.
    pub const IMRAD: [StructureLabel; 4] = [
        StructureLabel::Introduction,
        StructureLabel::Methods,
        StructureLabel::Results,
        StructureLabel::Discussion,
    ];

    /// Class index in `IMRAD`, `None` for `Unknown`.
    pub fn index(self) -> Option<usize> {
        match self {
            StructureLabel::Introduction => Some(0),
            StructureLabel::Methods => Some(1),
            StructureLabel::Results => Some(2),
            StructureLabel::Discussion => Some(3),
            StructureLabel::Unknown => None,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::IMRAD.get(i).copied()
    }

    /// One-letter column code (I, M, R, D).
    pub fn code(self) -> &'static str {
        match self {
            StructureLabel::Introduction => "I",
            StructureLabel::Methods => "M",
            StructureLabel::Results => "R",
            StructureLabel::Discussion => "D",
            StructureLabel::Unknown => "U",
        }
    }
}

impl fmt::Display for StructureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StructureLabel::Introduction => "Introduction",
            StructureLabel::Methods => "Methods",
            StructureLabel::Results => "Results",
            StructureLabel::Discussion => "Discussion",
            StructureLabel::Unknown => "Unknown",
        };
        f.write_str(s)
    }
}

impl FromStr for StructureLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "introduction" | "i" => Ok(StructureLabel::Introduction),
            "methods" | "materials & methods" | "m" => Ok(StructureLabel::Methods),
            "results" | "r" => Ok(StructureLabel::Results),
            "discussion" | "d" => Ok(StructureLabel::Discussion),
            "unknown" | "u" => Ok(StructureLabel::Unknown),
            other => Err(Error::InvalidInput(format!(
                "unknown structure label `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub ordinal: u32,
    #[serde(default)]
    pub number_string: String,
    pub title: String,
    pub body: String,
    pub page_span: [u32; 2],
    #[serde(default)]
    pub line_span: Option<[u32; 2]>,
    #[serde(default)]
    pub label: StructureLabel,
}

impl Section {
    /// Top-level heading number: the leading integer of `number_string`,
    /// falling back to the ordinal when no number is printed.
    pub fn top_level_number(&self) -> u32 {
        self.number_string
            .split(|c: char| !c.is_ascii_digit())
            .find(|s| !s.is_empty())
            .and_then(|s| s.parse().ok())
            .unwrap_or(self.ordinal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub year: i32,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub sections: Vec<Section>,
    #[serde(default)]
    pub figure_registry: BTreeMap<String, u32>,
    #[serde(default)]
    pub table_registry: BTreeMap<String, u32>,
    #[serde(default)]
    pub equation_registry: BTreeMap<String, u32>,
}

impl Article {
    pub fn validate(&self) -> Result<()> {
        if self.sections.is_empty() {
            return Err(Error::Validation(format!(
                "article {} has no sections",
                self.id
            )));
        }
        let mut seen = HashSet::new();
        for s in &self.sections {
            if !seen.insert(s.ordinal) {
                return Err(Error::Validation(format!(
                    "article {}: duplicate section ordinal {}",
                    self.id, s.ordinal
                )));
            }
            if s.ordinal == 0 {
                return Err(Error::Validation(format!(
                    "article {}: ordinals are 1-based",
                    self.id
                )));
            }
            if s.page_span[0] > s.page_span[1] {
                return Err(Error::Validation(format!(
                    "article {} section {}: page span {:?} is reversed",
                    self.id, s.ordinal, s.page_span
                )));
            }
        }
        for (kind, registry) in [
            ("figure", &self.figure_registry),
            ("table", &self.table_registry),
            ("equation", &self.equation_registry),
        ] {
            for (label, ordinal) in registry {
                if !seen.contains(ordinal) {
                    return Err(Error::Validation(format!(
                        "article {}: {kind} {label} points at missing section ordinal {ordinal}",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }

    /// True when every section carries a line span, so page/line mentions
    /// resolve at line granularity.
    pub fn has_line_spans(&self) -> bool {
        self.sections.iter().all(|s| s.line_span.is_some())
    }

    pub fn section(&self, ordinal: u32) -> Option<&Section> {
        self.sections.iter().find(|s| s.ordinal == ordinal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewComment {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewReport {
    pub id: String,
    pub article_id: String,
    pub year: i32,
    pub raw_text: String,
    #[serde(default)]
    pub comments: Vec<ReviewComment>,
}

impl ReviewReport {
    pub fn validate(&self) -> Result<()> {
        for c in &self.comments {
            if c.text.trim().is_empty() {
                return Err(Error::Validation(format!(
                    "report {}: comment {} has empty text",
                    self.id, c.id
                )));
            }
        }
        Ok(())
    }

    /// Fills `comments` from `raw_text` when the record carried none.
    pub fn ensure_comments(&mut self, rules: &SplitterConfig) {
        if self.comments.is_empty() && !self.raw_text.trim().is_empty() {
            self.comments = split_report(&self.raw_text, rules)
                .into_iter()
                .enumerate()
                .map(|(i, text)| ReviewComment {
                    id: format!("{}-c{}", self.id, i + 1),
                    text,
                })
                .collect();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PaperType {
    Review,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BibRecord {
    pub article_id: String,
    pub citations: u64,
    pub paper_type: PaperType,
    pub title_length: u32,
    pub author_count: u32,
    pub page_count: u32,
    pub reference_count: u32,
    pub country_count: u32,
}

/// Wire form with signed counts so negative values surface as validation
/// errors rather than parse errors.
#[derive(Deserialize)]
struct RawBibRecord {
    article_id: String,
    citations: i64,
    paper_type: PaperType,
    title_length: i64,
    author_count: i64,
    page_count: i64,
    reference_count: i64,
    country_count: i64,
}

impl TryFrom<RawBibRecord> for BibRecord {
    type Error = Error;

    fn try_from(r: RawBibRecord) -> Result<Self> {
        let count = |name: &str, v: i64, min: i64| -> Result<u32> {
            if v < min {
                return Err(Error::Validation(format!(
                    "bib {}: {name} = {v} (must be >= {min})",
                    r.article_id
                )));
            }
            u32::try_from(v).map_err(|_| {
                Error::Validation(format!("bib {}: {name} out of range", r.article_id))
            })
        };
        if r.citations < 0 {
            return Err(Error::Validation(format!(
                "bib {}: citations = {} (must be >= 0)",
                r.article_id, r.citations
            )));
        }
        Ok(BibRecord {
            citations: r.citations as u64,
            paper_type: r.paper_type,
            title_length: count("title_length", r.title_length, 0)?,
            author_count: count("author_count", r.author_count, 1)?,
            page_count: count("page_count", r.page_count, 0)?,
            reference_count: count("reference_count", r.reference_count, 0)?,
            country_count: count("country_count", r.country_count, 1)?,
            article_id: r.article_id,
        })
    }
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let file = fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, rec));
    }
    Ok(out)
}

fn at_line(path: &Path, line: usize, e: Error) -> Error {
    match e {
        Error::Validation(m) => Error::Validation(format!("{}:{line}: {m}", path.display())),
        other => other,
    }
}

/// Loads and validates articles, returned in id order.
pub fn load_articles(path: impl AsRef<Path>) -> Result<Vec<Article>> {
    let path = path.as_ref();
    let mut articles = Vec::new();
    let mut ids = HashSet::new();
    for (line, a) in read_jsonl::<Article>(path)? {
        a.validate().map_err(|e| at_line(path, line, e))?;
        if !ids.insert(a.id.clone()) {
            return Err(Error::Validation(format!(
                "{}:{line}: duplicate article id {}",
                path.display(),
                a.id
            )));
        }
        if !a.has_line_spans() {
            log::warn!(
                "article {}: no line spans, page/line mentions resolve at page granularity",
                a.id
            );
        }
        articles.push(a);
    }
    articles.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(articles)
}

/// Loads and validates review reports in file order.
pub fn load_reviews(path: impl AsRef<Path>) -> Result<Vec<ReviewReport>> {
    let path = path.as_ref();
    read_jsonl::<ReviewReport>(path)?
        .into_iter()
        .map(|(line, r)| r.validate().map(|_| r).map_err(|e| at_line(path, line, e)))
        .collect()
}

pub fn load_bib(path: impl AsRef<Path>) -> Result<Vec<BibRecord>> {
    let path = path.as_ref();
    read_jsonl::<RawBibRecord>(path)?
        .into_iter()
        .map(|(line, r)| BibRecord::try_from(r).map_err(|e| at_line(path, line, e)))
        .collect()
}

/// Rejects any report whose `article_id` is not in `articles`.
pub fn check_references(articles: &[Article], reports: &[ReviewReport]) -> Result<()> {
    let ids: BTreeSet<&str> = articles.iter().map(|a| a.id.as_str()).collect();
    for r in reports {
        if !ids.contains(r.article_id.as_str()) {
            return Err(Error::Validation(format!(
                "report {} references unknown article {}",
                r.id, r.article_id
            )));
        }
    }
    Ok(())
}

/// Canonical one-record-per-line serialization.
pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(to_jsonl(records)?.as_bytes())?;
    Ok(())
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Numbered items when at least `min_numbered` are found, else paragraphs.
    #[default]
    Auto,
    Numbered,
    Paragraph,
    /// The whole report is one comment.
    Whole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitterConfig {
    pub mode: SplitMode,
    pub min_numbered: usize,
}

impl Default for SplitterConfig {
    fn default() -> Self {
        Self {
            mode: SplitMode::Auto,
            min_numbered: 2,
        }
    }
}

fn numbered_marker() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?im)^[ \t]*(?:(?:comment|point|remark|issue)[ \t]*)?\(?\d{1,3}[.):][ \t]*")
            .unwrap()
    })
}

fn paragraph_break() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\n[ \t]*\n\s*").unwrap())
}

fn pieces_between<'a>(text: &'a str, delims: &[(usize, usize)]) -> Vec<&'a str> {
    let mut out = Vec::with_capacity(delims.len() + 1);
    let mut pos = 0;
    for &(s, e) in delims {
        out.push(&text[pos..s]);
        pos = e;
    }
    out.push(&text[pos..]);
    out
}

/// Splits a referee report into comment texts.
///
/// Delimiters are numbered-item markers ("1.", "2)", "Comment 3:") at line
/// starts, or blank lines. Pieces are trimmed and empty pieces dropped; a
/// report with no delimiter yields itself.
pub fn split_report(raw_text: &str, rules: &SplitterConfig) -> Vec<String> {
    let numbered: Vec<(usize, usize)> = numbered_marker()
        .find_iter(raw_text)
        .map(|m| (m.start(), m.end()))
        .collect();
    let paragraphs: Vec<(usize, usize)> = paragraph_break()
        .find_iter(raw_text)
        .map(|m| (m.start(), m.end()))
        .collect();
    let delims = match rules.mode {
        SplitMode::Whole => Vec::new(),
        SplitMode::Numbered => numbered,
        SplitMode::Paragraph => paragraphs,
        SplitMode::Auto if numbered.len() >= rules.min_numbered.max(1) => numbered,
        SplitMode::Auto => paragraphs,
    };
    let pieces: Vec<String> = pieces_between(raw_text, &delims)
        .into_iter()
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    if pieces.is_empty() {
        vec![raw_text.trim().to_string()]
    } else {
        pieces
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn article_json(registry_target: u32) -> String {
        let sections: Vec<String> = (1..=4)
            .map(|i| {
                format!(
                    r#"{{"ordinal":{i},"number_string":"{i}","title":"S{i}","body":"b","page_span":[{i},{i}],"line_span":[1,30]}}"#
                )
            })
            .collect();
        format!(
            r#"{{"id":"a1","year":2009,"title":"t","abstract":"x","sections":[{}],"figure_registry":{{"5":{registry_target}}}}}"#,
            sections.join(",")
        )
    }

    fn tmp_with(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_four_section_article() {
        let f = tmp_with(&(article_json(4) + "\n"));
        let arts = load_articles(f.path()).unwrap();
        assert_eq!(arts.len(), 1);
        assert_eq!(arts[0].sections.len(), 4);
        assert_eq!(arts[0].sections[2].label, StructureLabel::Unknown);
        let canonical = to_jsonl(&arts).unwrap();
        let again = load_articles(tmp_with(&canonical).path()).unwrap();
        assert_eq!(again, arts);
        assert_eq!(to_jsonl(&again).unwrap(), canonical);
    }

    #[test]
    fn dangling_registry_is_rejected() {
        let f = tmp_with(&article_json(99));
        match load_articles(f.path()) {
            Err(Error::Validation(m)) => assert!(m.contains("99"), "{m}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let f = tmp_with(&format!("{}\n{{not json\n", article_json(4)));
        match load_articles(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_files_load_empty() {
        let f = tmp_with("");
        assert!(load_reviews(f.path()).unwrap().is_empty());
        assert!(load_bib(f.path()).unwrap().is_empty());
    }

    #[test]
    fn negative_citations_fail_validation() {
        let f = tmp_with(
            r#"{"article_id":"a","citations":-1,"paper_type":"Other","title_length":5,"author_count":2,"page_count":9,"reference_count":30,"country_count":1}"#,
        );
        assert!(matches!(load_bib(f.path()), Err(Error::Validation(_))));
    }

    #[test]
    fn unknown_article_reference_fails() {
        let report = ReviewReport {
            id: "r".into(),
            article_id: "missing".into(),
            year: 2009,
            raw_text: "x".into(),
            comments: vec![],
        };
        assert!(check_references(&[], &[report]).is_err());
    }

    #[test]
    fn numbered_items_split() {
        let got = split_report(
            "1. fix eq. (5)\n2. shorten title",
            &SplitterConfig::default(),
        );
        assert_eq!(got, vec!["fix eq. (5)", "shorten title"]);
    }

    #[test]
    fn mixed_marker_styles_split() {
        let got = split_report(
            "General remarks first.\n1) one\nComment 2: two\n3. three",
            &SplitterConfig::default(),
        );
        assert_eq!(got, vec!["General remarks first.", "one", "two", "three"]);
    }

    #[test]
    fn undelimited_text_is_one_comment() {
        let got = split_report("  The paper is fine as is. ", &SplitterConfig::default());
        assert_eq!(got, vec!["The paper is fine as is."]);
    }

    #[test]
    fn blank_line_paragraphs_split() {
        let text = "The introduction is long.\nIt repeats itself.\n\nFigure 3 lacks units.\n   \nPlease cite prior work.";
        let got = split_report(text, &SplitterConfig::default());
        // Hand segmentation of the fixture.
        assert_eq!(
            got,
            vec![
                "The introduction is long.\nIt repeats itself.",
                "Figure 3 lacks units.",
                "Please cite prior work."
            ]
        );
    }

    #[test]
    fn single_numbered_item_falls_back_to_paragraphs() {
        let got = split_report("1. only one\n\nsecond para", &SplitterConfig::default());
        assert_eq!(got, vec!["1. only one", "second para"]);
    }

    #[test]
    fn top_level_number_parses_heading() {
        let mut s = Section {
            ordinal: 7,
            number_string: "3.1".into(),
            title: String::new(),
            body: String::new(),
            page_span: [1, 1],
            line_span: None,
            label: StructureLabel::Unknown,
        };
        assert_eq!(s.top_level_number(), 3);
        s.number_string.clear();
        assert_eq!(s.top_level_number(), 7);
    }
}
