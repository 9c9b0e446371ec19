//! Explicit and implicit position extraction from review comments,
//! resolution against the manuscript, and per-structure aggregation.
//!
//! Explicit rules follow a keyword / lazy capture / terminator shape: the
//! keyword ("figure", "p.", "eq.") is followed by a short lazily matched
//! capture that ends at the first terminator character. Captures are then
//! cleaned by the filter list and validated against the payload grammar of
//! their kind, so a keyword without a usable locator ("the table of
//! contents") yields nothing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::corpus::{Article, ReviewComment, ReviewReport, StructureLabel};
use crate::error::{Error, Result};
use crate::structure::TitleRuleSet;
use crate::text::words;

/// Terminator after a lazy capture: a character that is not a digit, space
/// or opening parenthesis; a period only when no digit follows it; or the end
/// of the text.
pub const TERMINATOR: &str = r#"(?:[^0-9\s(.]|\.(?:[^0-9]|$)|$)"#;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MentionKind {
    PageLine,
    Equation,
    Table,
    Figure,
    SectionNumber,
    Implicit,
}

impl MentionKind {
    pub fn is_explicit(self) -> bool {
        self != MentionKind::Implicit
    }
}

impl fmt::Display for MentionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    PageLine { page: u32, line: Option<u32> },
    Label { id: String },
    Structure { label: StructureLabel },
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payload::PageLine {
                page,
                line: Some(l),
            } => write!(f, "page={page};line={l}"),
            Payload::PageLine { page, line: None } => write!(f, "page={page}"),
            Payload::Label { id } => f.write_str(id),
            Payload::Structure { label } => write!(f, "{label}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionMention {
    pub kind: MentionKind,
    pub payload: Payload,
    /// Character offsets `[start, end)` into the comment text.
    pub source_span: (usize, usize),
}

impl PositionMention {
    pub fn source_text<'a>(&self, comment: &'a str) -> &'a str {
        let (s, e) = self.source_span;
        let b = |ci: usize| {
            comment
                .char_indices()
                .nth(ci)
                .map(|(b, _)| b)
                .unwrap_or(comment.len())
        };
        &comment[b(s)..b(e)]
    }
}

/// One extraction rule. `pattern` has one capture group, or two for
/// page/line rules (page, then line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub kind: MentionKind,
    pub pattern: String,
    #[serde(default)]
    pub example: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleFile {
    pub version: String,
    pub rules: Vec<RuleSpec>,
    pub filters: Vec<String>,
}

#[derive(Debug, Clone)]
struct CompiledRule {
    kind: MentionKind,
    regex: Regex,
    order: usize,
}

/// Ordered explicit rules plus the payload filter list.
#[derive(Debug, Clone)]
pub struct ExtractionRuleSet {
    pub version: String,
    pub specs: Vec<RuleSpec>,
    pub filters: Vec<String>,
    compiled: Vec<CompiledRule>,
}

fn lazy_rule(keyword: &str, max: usize) -> String {
    format!(r"\b{keyword}([\s\S]{{1,{max}}}?){TERMINATOR}")
}

fn page_line_rule(page_kw: &str, line_kw: &str) -> String {
    format!(r"\b{page_kw}([\s\S]{{1,10}}?){line_kw}([\s\S]{{1,5}}?){TERMINATOR}")
}

impl ExtractionRuleSet {
    pub fn from_file(file: RuleFile) -> Result<Self> {
        let compiled = file
            .rules
            .iter()
            .enumerate()
            .map(|(order, r)| {
                if r.kind == MentionKind::Implicit {
                    return Err(Error::Validation(
                        "implicit mentions come from title rules, not patterns".into(),
                    ));
                }
                let regex = RegexBuilder::new(&r.pattern)
                    .case_insensitive(true)
                    .build()?;
                let want = if r.kind == MentionKind::PageLine {
                    1..=2
                } else {
                    1..=1
                };
                if !want.contains(&(regex.captures_len() - 1)) {
                    return Err(Error::Validation(format!(
                        "rule {order} ({}) has {} capture groups",
                        r.kind,
                        regex.captures_len() - 1
                    )));
                }
                Ok(CompiledRule {
                    kind: r.kind,
                    regex,
                    order,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            version: file.version,
            specs: file.rules,
            filters: file.filters,
            compiled,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: RuleFile = serde_json::from_str(&fs::read_to_string(path)?)?;
        Self::from_file(file)
    }

    pub fn to_file(&self) -> RuleFile {
        RuleFile {
            version: self.version.clone(),
            rules: self.specs.clone(),
            filters: self.filters.clone(),
        }
    }

    /// The bundled rule set: every pattern family of the published examples,
    /// with page/line rules ahead of the bare page rule and multi-character
    /// keywords ahead of their abbreviations.
    pub fn default_rules() -> &'static ExtractionRuleSet {
        static R: OnceLock<ExtractionRuleSet> = OnceLock::new();
        R.get_or_init(|| {
            use MentionKind::*;
            let rule = |kind, pattern: String, example: &str| RuleSpec {
                kind,
                pattern,
                example: (!example.is_empty()).then(|| example.to_string()),
            };
            let rules = vec![
                rule(PageLine, page_line_rule("page", "line"), "page 10, line 7"),
                rule(PageLine, page_line_rule(r"p[.]", "l[.n]"), "p.10, l.7"),
                rule(PageLine, page_line_rule(r"pg[.]", "l[.n]"), "pg. 10, ln 7"),
                rule(PageLine, page_line_rule("pg", "line"), "pg 10, line 7"),
                rule(PageLine, page_line_rule("p", "l"), "p 10, l 7"),
                rule(
                    PageLine,
                    format!(r"\bp[.]?\s*(\d{{1,4}})\s*/\s*(\d{{1,4}})\s*{TERMINATOR}"),
                    "p 10/ 7",
                ),
                rule(PageLine, lazy_rule("page", 5), "page 12"),
                rule(Equation, lazy_rule("equation", 5), "equation (5)"),
                rule(Equation, lazy_rule(r"eqs?[.]", 5), "eq. 5, eq. (5)"),
                rule(Equation, lazy_rule(r"eqn[.]?", 5), "eqn 4"),
                rule(Table, lazy_rule("table", 5), "table 5"),
                rule(Table, lazy_rule(r"tab[.]", 5), "tab. 2"),
                rule(Figure, lazy_rule(r"figs?[.]", 5), "fig.5"),
                rule(Figure, lazy_rule("figure", 5), "figure 5"),
                rule(SectionNumber, lazy_rule("section", 5), "section 3.1"),
                rule(SectionNumber, lazy_rule(r"sect?[.]", 5), "sect. 2"),
                rule(SectionNumber, r"\b([1-8][.][1-8])\b".to_string(), "3.1"),
            ];
            let filters = [
                ", ", "-", ".", "s", "(", ")", " ", ":", "[", "]", "\n", "\t",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect();
            ExtractionRuleSet::from_file(RuleFile {
                version: "imrad-positions/1.0".into(),
                rules,
                filters,
            })
            .expect("bundled rules compile")
        })
    }

    /// Applies the filter list. A period survives only between two digits so
    /// that dotted identifiers ("3.1") keep their structure.
    pub fn normalize(&self, raw: &str) -> String {
        let mut s = raw.to_lowercase();
        let mut strip_period = false;
        for f in &self.filters {
            if f == "." {
                strip_period = true;
            } else {
                s = s.replace(f.as_str(), "");
            }
        }
        if strip_period {
            let chars: Vec<char> = s.chars().collect();
            s = chars
                .iter()
                .enumerate()
                .filter(|&(i, &c)| {
                    c != '.'
                        || (i > 0
                            && chars[i - 1].is_ascii_digit()
                            && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit()))
                })
                .map(|(_, &c)| c)
                .collect();
        }
        s
    }

    fn payload(&self, kind: MentionKind, caps: &[&str]) -> Option<Payload> {
        let num = |raw: &str| -> Option<u32> {
            let n = self.normalize(raw);
            if n.is_empty() || n.len() > 4 || !n.chars().all(|c| c.is_ascii_digit()) {
                return None;
            }
            n.parse().ok()
        };
        match kind {
            MentionKind::PageLine => Some(Payload::PageLine {
                page: num(caps[0])?,
                line: match caps.get(1) {
                    Some(l) => Some(num(l)?),
                    None => None,
                },
            }),
            MentionKind::SectionNumber => {
                let id = self.normalize(caps[0]);
                section_grammar()
                    .is_match(&id)
                    .then_some(Payload::Label { id })
            }
            MentionKind::Equation | MentionKind::Table | MentionKind::Figure => {
                let id = self.normalize(caps[0]);
                label_grammar()
                    .is_match(&id)
                    .then_some(Payload::Label { id })
            }
            MentionKind::Implicit => None,
        }
    }

    /// Explicit mentions in `comment`, left to right. Overlapping matches are
    /// resolved leftmost-longest, earlier rules winning exact ties.
    pub fn extract_explicit(&self, comment: &str) -> Vec<PositionMention> {
        struct Hit {
            start: usize,
            end: usize,
            order: usize,
            kind: MentionKind,
            payload: Payload,
        }
        let mut hits = Vec::new();
        for rule in &self.compiled {
            let mut at = 0;
            while at <= comment.len() {
                let Some(c) = rule.regex.captures_at(comment, at) else {
                    break;
                };
                let whole = c.get(0).unwrap();
                let groups: Vec<regex::Match> = c.iter().skip(1).flatten().collect();
                let texts: Vec<&str> = groups.iter().map(|m| m.as_str()).collect();
                match self.payload(rule.kind, &texts) {
                    Some(payload) => {
                        let end = groups
                            .last()
                            .map(|m| m.start() + m.as_str().trim_end().len())
                            .unwrap_or(whole.end());
                        hits.push(Hit {
                            start: whole.start(),
                            end,
                            order: rule.order,
                            kind: rule.kind,
                            payload,
                        });
                        at = end.max(whole.start() + 1);
                    }
                    None => at = whole.start() + 1,
                }
                while at < comment.len() && !comment.is_char_boundary(at) {
                    at += 1;
                }
            }
        }
        hits.sort_by(|a, b| {
            a.start
                .cmp(&b.start)
                .then((b.end - b.start).cmp(&(a.end - a.start)))
                .then(a.order.cmp(&b.order))
        });
        let mut kept: Vec<Hit> = Vec::new();
        for h in hits {
            if kept.iter().all(|k| h.end <= k.start || h.start >= k.end) {
                kept.push(h);
            }
        }
        let char_at = |b: usize| comment[..b].chars().count();
        kept.into_iter()
            .map(|h| PositionMention {
                kind: h.kind,
                payload: h.payload,
                source_span: (char_at(h.start), char_at(h.end)),
            })
            .collect()
    }
}

fn section_grammar() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[1-8](\.[1-8])?$").unwrap())
}

fn label_grammar() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[0-9]{1,3}(\.[0-9]{1,3})*$").unwrap())
}

/// Structure feature words occurring in the comment, one mention per
/// distinct label.
pub fn extract_implicit(comment: &str, title_rules: &TitleRuleSet) -> Vec<PositionMention> {
    let tokens = words(comment);
    let n_chars = comment.chars().count();
    title_rules
        .matched_labels(&tokens)
        .into_iter()
        .map(|label| PositionMention {
            kind: MentionKind::Implicit,
            payload: Payload::Structure { label },
            source_span: (0, n_chars),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resolved {
    Structure(StructureLabel),
    Unresolved,
}

/// Maps a mention to the structure of the section it points at.
pub fn resolve(mention: &PositionMention, article: &Article) -> Resolved {
    let label_of = |ordinal: u32| -> Resolved {
        match article.section(ordinal).map(|s| s.label) {
            Some(l) if l != StructureLabel::Unknown => Resolved::Structure(l),
            _ => Resolved::Unresolved,
        }
    };
    let distinct = |labels: BTreeSet<StructureLabel>| -> Resolved {
        if labels.len() == 1 {
            let l = *labels.iter().next().unwrap();
            if l != StructureLabel::Unknown {
                return Resolved::Structure(l);
            }
        }
        Resolved::Unresolved
    };
    match (&mention.kind, &mention.payload) {
        (MentionKind::Implicit, Payload::Structure { label }) => Resolved::Structure(*label),
        (MentionKind::PageLine, Payload::PageLine { page, line }) => {
            let by_line = line.filter(|_| article.has_line_spans());
            let hits: BTreeSet<StructureLabel> = article
                .sections
                .iter()
                .filter(|s| match by_line {
                    Some(l) => {
                        let [p0, p1] = s.page_span;
                        let [l0, l1] = s.line_span.unwrap();
                        (p0, l0) <= (*page, l) && (*page, l) <= (p1, l1)
                    }
                    None => s.page_span[0] <= *page && *page <= s.page_span[1],
                })
                .map(|s| s.label)
                .collect();
            distinct(hits)
        }
        (
            kind @ (MentionKind::Equation | MentionKind::Table | MentionKind::Figure),
            Payload::Label { id },
        ) => {
            let registry = match kind {
                MentionKind::Equation => &article.equation_registry,
                MentionKind::Table => &article.table_registry,
                _ => &article.figure_registry,
            };
            registry
                .get(id)
                .map_or(Resolved::Unresolved, |&o| label_of(o))
        }
        (MentionKind::SectionNumber, Payload::Label { id }) => {
            let Some(top) = id.split('.').next().and_then(|t| t.parse::<u32>().ok()) else {
                return Resolved::Unresolved;
            };
            distinct(
                article
                    .sections
                    .iter()
                    .filter(|s| s.top_level_number() == top)
                    .map(|s| s.label)
                    .collect(),
            )
        }
        _ => Resolved::Unresolved,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Resolution {
    Explicit,
    Implicit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributionRecord {
    pub comment_id: String,
    pub mention: PositionMention,
    pub resolved: StructureLabel,
    pub resolution: Resolution,
}

/// Attribution of one comment plus the explicit mentions that failed to
/// resolve (reported, not counted).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentAttribution {
    pub records: Vec<AttributionRecord>,
    pub unresolved: Vec<PositionMention>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CountingUnit {
    /// Distinct (comment, structure) pairs.
    #[default]
    Comment,
    /// Every resolved mention.
    Mention,
}

/// Explicit mentions win: if any resolves, only explicit records are kept;
/// otherwise implicit feature words are used, unless the comment had explicit
/// mentions that all failed to resolve. With `CountingUnit::Comment` records
/// are deduplicated per structure.
pub fn attribute_comment_with(
    comment: &ReviewComment,
    article: &Article,
    rules: &ExtractionRuleSet,
    title_rules: &TitleRuleSet,
    unit: CountingUnit,
) -> CommentAttribution {
    let explicit = rules.extract_explicit(&comment.text);
    let mut out = CommentAttribution::default();
    let mut seen = BTreeSet::new();
    for m in &explicit {
        match resolve(m, article) {
            Resolved::Structure(label) => {
                if unit == CountingUnit::Mention || seen.insert(label) {
                    out.records.push(AttributionRecord {
                        comment_id: comment.id.clone(),
                        mention: m.clone(),
                        resolved: label,
                        resolution: Resolution::Explicit,
                    });
                }
            }
            Resolved::Unresolved => out.unresolved.push(m.clone()),
        }
    }
    if explicit.is_empty() {
        for m in extract_implicit(&comment.text, title_rules) {
            if let Resolved::Structure(label) = resolve(&m, article) {
                if unit == CountingUnit::Comment && !seen.insert(label) {
                    continue;
                }
                out.records.push(AttributionRecord {
                    comment_id: comment.id.clone(),
                    mention: m,
                    resolved: label,
                    resolution: Resolution::Implicit,
                });
            }
        }
    }
    out
}

pub fn attribute_comment(
    comment: &ReviewComment,
    article: &Article,
    rules: &ExtractionRuleSet,
    title_rules: &TitleRuleSet,
) -> Vec<AttributionRecord> {
    attribute_comment_with(comment, article, rules, title_rules, CountingUnit::Comment).records
}

/// Attributions for every comment of every report, keyed by comment id in
/// report/comment order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusAttribution {
    pub comments: Vec<AttributedComment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributedComment {
    pub report_id: String,
    pub article_id: String,
    pub year: i32,
    pub comment_id: String,
    pub text: String,
    pub attribution: CommentAttribution,
}

impl AttributedComment {
    pub fn structures(&self) -> BTreeSet<StructureLabel> {
        self.attribution
            .records
            .iter()
            .map(|r| r.resolved)
            .collect()
    }

    pub fn is_covered(&self) -> bool {
        !self.attribution.records.is_empty()
    }
}

pub fn attribute_corpus(
    articles: &[Article],
    reports: &[ReviewReport],
    rules: &ExtractionRuleSet,
    title_rules: &TitleRuleSet,
    unit: CountingUnit,
) -> Result<CorpusAttribution> {
    let by_id: BTreeMap<&str, &Article> = articles.iter().map(|a| (a.id.as_str(), a)).collect();
    let mut comments = Vec::new();
    for r in reports {
        let article = by_id.get(r.article_id.as_str()).ok_or_else(|| {
            Error::Validation(format!(
                "report {} references unknown article {}",
                r.id, r.article_id
            ))
        })?;
        for c in &r.comments {
            comments.push(AttributedComment {
                report_id: r.id.clone(),
                article_id: r.article_id.clone(),
                year: r.year,
                comment_id: c.id.clone(),
                text: c.text.clone(),
                attribution: attribute_comment_with(c, article, rules, title_rules, unit),
            });
        }
    }
    Ok(CorpusAttribution { comments })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scope {
    Article(String),
    Year(i32),
    Corpus,
}

impl Scope {
    fn contains(&self, c: &AttributedComment) -> bool {
        match self {
            Scope::Article(id) => &c.article_id == id,
            Scope::Year(y) => c.year == *y,
            Scope::Corpus => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureDistribution {
    pub scope: Scope,
    /// Counts in IMRaD order.
    pub counts: [usize; 4],
    pub total_comments: usize,
    pub covered_comments: usize,
}

impl StructureDistribution {
    pub fn coverage_rate(&self) -> f64 {
        self.covered_comments as f64 / self.total_comments as f64
    }
}

/// Per-structure record counts within `scope`.
pub fn distribution(attrs: &CorpusAttribution, scope: Scope) -> Result<StructureDistribution> {
    let mut d = StructureDistribution {
        scope,
        counts: [0; 4],
        total_comments: 0,
        covered_comments: 0,
    };
    for c in attrs.comments.iter().filter(|c| d.scope.contains(c)) {
        d.total_comments += 1;
        d.covered_comments += usize::from(c.is_covered());
        for r in &c.attribution.records {
            if let Some(i) = r.resolved.index() {
                d.counts[i] += 1;
            }
        }
    }
    if d.total_comments == 0 {
        return Err(Error::InvalidInput(format!(
            "no comments in scope {:?}",
            d.scope
        )));
    }
    Ok(d)
}

/// Share of comments in `year` with at least one attribution record.
pub fn coverage_rate(attrs: &CorpusAttribution, year: i32) -> Result<f64> {
    Ok(distribution(attrs, Scope::Year(year))?.coverage_rate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Section;
    use proptest::prelude::*;

    fn rules() -> &'static ExtractionRuleSet {
        ExtractionRuleSet::default_rules()
    }

    fn one(text: &str) -> (MentionKind, Payload) {
        let m = rules().extract_explicit(text);
        assert_eq!(m.len(), 1, "{text:?} -> {m:?}");
        (m[0].kind, m[0].payload.clone())
    }

    fn label(id: &str) -> Payload {
        Payload::Label { id: id.into() }
    }

    fn pl(page: u32, line: u32) -> Payload {
        Payload::PageLine {
            page,
            line: Some(line),
        }
    }

    #[test]
    fn published_examples() {
        use MentionKind::*;
        assert_eq!(one("page 10, line 7"), (PageLine, pl(10, 7)));
        assert_eq!(one("p.10, l.7"), (PageLine, pl(10, 7)));
        assert_eq!(one("pg. 10, ln 7"), (PageLine, pl(10, 7)));
        assert_eq!(one("pg 10, line 7"), (PageLine, pl(10, 7)));
        assert_eq!(one("p 10/ 7"), (PageLine, pl(10, 7)));
        assert_eq!(one("equation (5)"), (Equation, label("5")));
        assert_eq!(one("eq. 5"), (Equation, label("5")));
        assert_eq!(one("eq. (5)"), (Equation, label("5")));
        assert_eq!(one("table 5"), (Table, label("5")));
        assert_eq!(one("fig.5"), (Figure, label("5")));
        assert_eq!(one("figure 5"), (Figure, label("5")));
        assert_eq!(one("section 3.1"), (SectionNumber, label("3.1")));
        assert_eq!(one("3.1"), (SectionNumber, label("3.1")));
    }

    #[test]
    fn no_position_in_plain_praise() {
        assert!(rules()
            .extract_explicit("I recommend publication")
            .is_empty());
        assert!(rules()
            .extract_explicit("the table of contents is long")
            .is_empty());
    }

    #[test]
    fn both_equation_forms_in_one_comment() {
        let m = rules().extract_explicit("eq. 5, eq. (5)");
        assert_eq!(m.len(), 2);
        assert!(m.iter().all(|m| m.payload == label("5")));
    }

    #[test]
    fn figure_with_dotted_number_is_not_a_section() {
        let m = rules().extract_explicit("In figure 3.2 the axis is unlabeled");
        assert_eq!(m.len(), 1);
        assert_eq!(
            (m[0].kind, m[0].payload.clone()),
            (MentionKind::Figure, label("3.2"))
        );
    }

    #[test]
    fn plural_and_punctuation_forms() {
        assert_eq!(one("Figures 4 and"), (MentionKind::Figure, label("4")));
        assert_eq!(one("(Table: 2)"), (MentionKind::Table, label("2")));
        assert_eq!(
            one("page 3, lines 12-15"),
            (MentionKind::PageLine, pl(3, 12))
        );
    }

    #[test]
    fn page_without_line() {
        assert_eq!(
            one("on page 12 the"),
            (
                MentionKind::PageLine,
                Payload::PageLine {
                    page: 12,
                    line: None
                }
            )
        );
    }

    #[test]
    fn spans_are_char_offsets() {
        let c = "Über fig. 2 hinaus";
        let m = rules().extract_explicit(c);
        assert_eq!(m[0].source_text(c), "fig. 2");
    }

    #[test]
    fn normalization_is_idempotent_on_examples() {
        let r = rules();
        for raw in [" (5", " 10, ", "s 3.1", ": 7-", "3.1.", " (12)"] {
            let once = r.normalize(raw);
            assert_eq!(r.normalize(&once), once);
        }
        assert_eq!(r.normalize("s 3.1"), "3.1");
    }

    #[test]
    fn implicit_mentions() {
        let t = TitleRuleSet::default();
        let m = extract_implicit("the model underestimates AOD", &t);
        assert_eq!(m.len(), 1);
        assert_eq!(
            m[0].payload,
            Payload::Structure {
                label: StructureLabel::Methods
            }
        );
        let m = extract_implicit("see the discussion and conclusions", &t);
        assert_eq!(m.len(), 1);
        assert_eq!(
            m[0].payload,
            Payload::Structure {
                label: StructureLabel::Discussion
            }
        );
        assert!(extract_implicit("nice paper", &t).is_empty());
    }

    pub(crate) fn fixture_article() -> Article {
        let mk = |o: u32, num: &str, label, pages: [u32; 2], lines: [u32; 2]| Section {
            ordinal: o,
            number_string: num.into(),
            title: String::new(),
            body: String::new(),
            page_span: pages,
            line_span: Some(lines),
            label,
        };
        use StructureLabel::*;
        Article {
            id: "a".into(),
            year: 2009,
            title: "t".into(),
            abstract_text: "x".into(),
            sections: vec![
                mk(1, "1", Introduction, [1, 2], [1, 10]),
                mk(2, "2", Methods, [2, 4], [11, 20]),
                mk(3, "3", Methods, [4, 6], [21, 5]),
                mk(4, "4", Results, [6, 9], [6, 30]),
                mk(5, "5", Discussion, [10, 11], [1, 40]),
            ],
            figure_registry: [
                ("2".to_string(), 4),
                ("3".to_string(), 4),
                ("5".to_string(), 4),
                ("1".to_string(), 2),
            ]
            .into_iter()
            .collect(),
            table_registry: [("1".to_string(), 3)].into_iter().collect(),
            equation_registry: [("5".to_string(), 2)].into_iter().collect(),
        }
    }

    fn mention(text: &str) -> PositionMention {
        rules().extract_explicit(text).remove(0)
    }

    #[test]
    fn resolution_paths() {
        let a = fixture_article();
        use StructureLabel::*;
        assert_eq!(
            resolve(&mention("figure 5"), &a),
            Resolved::Structure(Results)
        );
        assert_eq!(
            resolve(&mention("section 3.1"), &a),
            Resolved::Structure(Methods)
        );
        assert_eq!(
            resolve(&mention("page 99, line 1"), &a),
            Resolved::Unresolved
        );
        assert_eq!(resolve(&mention("figure 9"), &a), Resolved::Unresolved);
        // Page 6 line 3 falls before section 4 starts at line 6.
        assert_eq!(
            resolve(&mention("page 6, line 3"), &a),
            Resolved::Structure(Methods)
        );
        assert_eq!(
            resolve(&mention("page 6, line 8"), &a),
            Resolved::Structure(Results)
        );
        // Page 2 without a line straddles Introduction and Methods.
        assert_eq!(resolve(&mention("page 2 is"), &a), Resolved::Unresolved);
        assert_eq!(
            resolve(&mention("page 3 is"), &a),
            Resolved::Structure(Methods)
        );
    }

    #[test]
    fn page_line_degrades_without_line_spans() {
        let mut a = fixture_article();
        for s in &mut a.sections {
            s.line_span = None;
        }
        assert_eq!(
            resolve(&mention("page 6, line 8"), &a),
            Resolved::Unresolved
        );
        assert_eq!(
            resolve(&mention("page 7, line 8"), &a),
            Resolved::Structure(StructureLabel::Results)
        );
    }

    fn comment(text: &str) -> ReviewComment {
        ReviewComment {
            id: "c1".into(),
            text: text.into(),
        }
    }

    #[test]
    fn explicit_wins_over_implicit() {
        let a = fixture_article();
        let recs = attribute_comment(
            &comment("The model in figure 5 is unclear"),
            &a,
            rules(),
            &TitleRuleSet::default(),
        );
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].resolved, StructureLabel::Results);
        assert_eq!(recs[0].resolution, Resolution::Explicit);
    }

    #[test]
    fn implicit_fallback() {
        let a = fixture_article();
        let recs = attribute_comment(
            &comment("the model is too coarse"),
            &a,
            rules(),
            &TitleRuleSet::default(),
        );
        assert_eq!(recs.len(), 1);
        assert_eq!(
            (recs[0].resolved, recs[0].resolution),
            (StructureLabel::Methods, Resolution::Implicit)
        );
    }

    #[test]
    fn same_structure_mentions_dedup() {
        let a = fixture_article();
        let c = comment("compare fig. 2 and fig. 3");
        let recs = attribute_comment(&c, &a, rules(), &TitleRuleSet::default());
        // Oracle: both figures are registered to ordinal 4 (Results).
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].resolved, StructureLabel::Results);
        let all = attribute_comment_with(
            &c,
            &a,
            rules(),
            &TitleRuleSet::default(),
            CountingUnit::Mention,
        );
        assert_eq!(all.records.len(), 2);
    }

    #[test]
    fn unresolved_explicit_does_not_fall_back() {
        let a = fixture_article();
        let out = attribute_comment_with(
            &comment("the model in figure 9"),
            &a,
            rules(),
            &TitleRuleSet::default(),
            CountingUnit::Comment,
        );
        assert!(out.records.is_empty());
        assert_eq!(out.unresolved.len(), 1);
    }

    fn attributed(year: i32, covered: bool, i: usize) -> AttributedComment {
        let records = if covered {
            vec![AttributionRecord {
                comment_id: format!("c{i}"),
                mention: PositionMention {
                    kind: MentionKind::Implicit,
                    payload: Payload::Structure {
                        label: StructureLabel::Results,
                    },
                    source_span: (0, 1),
                },
                resolved: StructureLabel::Results,
                resolution: Resolution::Implicit,
            }]
        } else {
            vec![]
        };
        AttributedComment {
            report_id: "r".into(),
            article_id: "a".into(),
            year,
            comment_id: format!("c{i}"),
            text: String::new(),
            attribution: CommentAttribution {
                records,
                unresolved: vec![],
            },
        }
    }

    #[test]
    fn coverage_arithmetic() {
        let attrs = CorpusAttribution {
            comments: (0..10).map(|i| attributed(2009, i < 8, i)).collect(),
        };
        assert_eq!(coverage_rate(&attrs, 2009).unwrap(), 0.8);
        assert!(coverage_rate(&attrs, 2010).is_err());
        let none = CorpusAttribution {
            comments: (0..4).map(|i| attributed(2011, false, i)).collect(),
        };
        assert_eq!(coverage_rate(&none, 2011).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn never_both_resolutions(text in "[a-z .,()0-9]{0,80}") {
            let a = fixture_article();
            let recs = attribute_comment(&comment(&text), &a, rules(), &TitleRuleSet::default());
            let kinds: BTreeSet<_> = recs.iter().map(|r| r.resolution).collect();
            prop_assert!(kinds.len() <= 1);
        }

        #[test]
        fn spans_rematch_their_rule(prefix in "[a-z ]{0,12}", n in 1u32..60, kw in prop::sample::select(vec!["figure ", "fig.", "table ", "eq. (", "section ", "page "])) {
            let text = format!("{prefix}{kw}{n}) and more");
            for m in rules().extract_explicit(&text) {
                let src = m.source_text(&text);
                let again = rules().extract_explicit(src);
                prop_assert!(again.iter().any(|x| x.kind == m.kind && x.payload == m.payload), "{src:?}");
            }
        }

        #[test]
        fn normalize_idempotent(raw in "[ a-z0-9.,:()-]{0,12}") {
            let r = rules();
            let once = r.normalize(&raw);
            prop_assert_eq!(r.normalize(&once), once);
        }

        #[test]
        fn distribution_order_invariant(flags in prop::collection::vec(any::<bool>(), 1..30), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut comments: Vec<_> = flags.iter().enumerate().map(|(i, &f)| attributed(2009, f, i)).collect();
            let d1 = distribution(&CorpusAttribution { comments: comments.clone() }, Scope::Corpus).unwrap();
            comments.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let d2 = distribution(&CorpusAttribution { comments }, Scope::Corpus).unwrap();
            prop_assert_eq!(d1.counts, d2.counts);
            prop_assert!((0.0..=1.0).contains(&d2.coverage_rate()));
        }
    }
}
