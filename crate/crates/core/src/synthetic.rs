//! Seeded generators for fixtures: a separable section corpus for the HAN,
//! bibliographic records, count-regression data and the bundled
//! mini-corpus with its expected attribution counts.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::corpus::{Article, BibRecord, PaperType, ReviewReport, Section, StructureLabel};
use crate::stats::Design;
use crate::structure::LabeledExample;
use crate::text::words;

const CLASS_WORDS: [&[&str]; 4] = [
    &[
        "pollution",
        "previous",
        "gap",
        "motivate",
        "question",
        "important",
        "literature",
        "purpose",
        "known",
        "recent",
    ],
    &[
        "estimate",
        "sample",
        "instrument",
        "regression",
        "calibrate",
        "parameter",
        "procedure",
        "collect",
        "measure",
        "simulate",
    ],
    &[
        "increase",
        "decrease",
        "observe",
        "significant",
        "percent",
        "trend",
        "higher",
        "lower",
        "peak",
        "correlate",
    ],
    &[
        "implication",
        "limitation",
        "future",
        "suggest",
        "consistent",
        "contrast",
        "explain",
        "policy",
        "recommend",
        "conclude",
    ],
];

const FILLER: &[&str] = &[
    "the", "we", "in", "of", "this", "and", "to", "a", "is", "for", "region", "period", "level",
    "case", "area", "value",
];

fn sentence<R: Rng>(rng: &mut R, class: usize, len: usize, class_share: f64) -> String {
    let mut ws: Vec<&str> = (0..len)
        .map(|_| {
            if rng.random_bool(class_share) {
                *CLASS_WORDS[class].choose(rng).unwrap()
            } else {
                *FILLER.choose(rng).unwrap()
            }
        })
        .collect();
    // Every sentence carries at least one class word.
    let k = rng.random_range(0..len);
    ws[k] = CLASS_WORDS[class].choose(rng).unwrap();
    let mut s = ws.join(" ");
    s[..1].make_ascii_uppercase();
    s.push('.');
    s
}

/// A section body of `sentences` sentences written from the class vocabulary.
pub fn section_body<R: Rng>(rng: &mut R, class: usize, sentences: usize) -> String {
    (0..sentences)
        .map(|_| {
            let len = rng.random_range(5..=8);
            sentence(rng, class, len, 0.35)
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// `n_per_class` examples per IMRaD class, 2 to 4 sentences each.
pub fn han_corpus(n_per_class: usize, seed: u64) -> Vec<LabeledExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(4 * n_per_class);
    for i in 0..n_per_class {
        for (c, label) in StructureLabel::IMRAD.iter().enumerate() {
            let n = rng.random_range(2..=4);
            out.push(LabeledExample {
                article_id: format!("syn-{i:04}"),
                ordinal: c as u32 + 1,
                label: *label,
                text: section_body(&mut rng, c, n),
            });
        }
    }
    out
}

/// Training accuracy of a multiclass perceptron on bag-of-words counts,
/// run until an error-free epoch or `max_epochs`. Reaching 1.0 certifies
/// that the examples are linearly separable.
pub fn bow_linear_oracle(examples: &[LabeledExample], max_epochs: usize) -> f64 {
    let mut vocab: BTreeMap<String, usize> = BTreeMap::new();
    let docs: Vec<(Vec<(usize, f64)>, usize)> = examples
        .iter()
        .filter_map(|e| {
            let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
            for w in words(&e.text) {
                let n = vocab.len();
                let id = *vocab.entry(w).or_insert(n);
                *counts.entry(id).or_default() += 1.0;
            }
            Some((counts.into_iter().collect(), e.label.index()?))
        })
        .collect();
    let dim = vocab.len() + 1;
    let mut w = vec![vec![0.0; dim]; 4];
    let score = |w: &Vec<Vec<f64>>, x: &[(usize, f64)], c: usize| -> f64 {
        w[c][dim - 1] + x.iter().map(|&(i, v)| w[c][i] * v).sum::<f64>()
    };
    let predict = |w: &Vec<Vec<f64>>, x: &[(usize, f64)]| -> usize {
        (0..4).fold(0, |best, c| {
            if score(w, x, c) > score(w, x, best) {
                c
            } else {
                best
            }
        })
    };
    for _ in 0..max_epochs {
        let mut errors = 0;
        for (x, y) in &docs {
            let p = predict(&w, x);
            if p != *y {
                errors += 1;
                for &(i, v) in x {
                    w[*y][i] += v;
                    w[p][i] -= v;
                }
                w[*y][dim - 1] += 1.0;
                w[p][dim - 1] -= 1.0;
            }
        }
        if errors == 0 {
            break;
        }
    }
    let correct = docs.iter().filter(|(x, y)| predict(&w, x) == *y).count();
    correct as f64 / docs.len().max(1) as f64
}

/// Bibliographic records with plausible control distributions and
/// over-dispersed citation counts.
pub fn bib_records(n: usize, seed: u64) -> Vec<BibRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let review = rng.random_bool(0.08);
            let authors = rng.random_range(1..=12u32);
            let pages = rng.random_range(6..=24u32);
            let refs = rng.random_range(15..=90u32);
            let countries = if rng.random_bool(0.4) {
                rng.random_range(2..=5u32)
            } else {
                1
            };
            let eta = 1.2
                + 0.5 * f64::from(u8::from(review))
                + 0.03 * authors as f64
                + 0.01 * refs as f64;
            BibRecord {
                article_id: format!("B{i:05}"),
                citations: nb_draw(&mut rng, eta.exp(), 0.8),
                paper_type: if review {
                    PaperType::Review
                } else {
                    PaperType::Other
                },
                title_length: rng.random_range(5..=22),
                author_count: authors,
                page_count: pages,
                reference_count: refs,
                country_count: countries,
            }
        })
        .collect()
}

/// One NB2 draw with mean `mu` and dispersion `alpha` (Poisson when
/// `alpha == 0`), via the gamma-Poisson mixture.
pub fn nb_draw<R: Rng>(rng: &mut R, mu: f64, alpha: f64) -> u64 {
    let lambda = if alpha > 0.0 {
        Gamma::new(1.0 / alpha, alpha * mu).unwrap().sample(rng)
    } else {
        mu
    };
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).unwrap().sample(rng) as u64
}

/// Count-regression data with known coefficients: `beta[0]` is the
/// intercept, the remaining covariates are standard normal.
pub fn count_data(n: usize, beta: &[f64], alpha: f64, seed: u64) -> (Design, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = Normal::new(0.0, 1.0).unwrap();
    let p = beta.len() - 1;
    let columns: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| std.sample(&mut rng)).collect())
        .collect();
    let y = (0..n)
        .map(|i| {
            let eta = beta[0] + (0..p).map(|j| beta[j + 1] * columns[j][i]).sum::<f64>();
            nb_draw(&mut rng, eta.exp(), alpha) as f64
        })
        .collect();
    let names = (1..=p).map(|j| format!("x{j}")).collect();
    (Design::new(names, columns).expect("generated design"), y)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedComment {
    pub comment_id: String,
    pub year: i32,
    pub structures: BTreeSet<StructureLabel>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedYear {
    pub total_comments: usize,
    pub covered_comments: usize,
    /// Distinct (comment, structure) pairs in I, M, R, D order.
    pub counts: [usize; 4],
}

/// Attribution outcome each mini-corpus comment was written to produce.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiniExpected {
    pub comments: Vec<ExpectedComment>,
    pub per_year: BTreeMap<i32, ExpectedYear>,
    /// Title-rule label counts in I, M, R, D order, plus sections left Unknown.
    pub label_counts: [usize; 4],
    pub others: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiniCorpus {
    pub articles: Vec<Article>,
    pub reports: Vec<ReviewReport>,
    pub bib: Vec<BibRecord>,
    pub expected: MiniExpected,
}

const LINES_PER_PAGE: u32 = 50;

fn page_line(offset: u32) -> (u32, u32) {
    (offset / LINES_PER_PAGE + 1, offset % LINES_PER_PAGE + 1)
}

struct Layout {
    /// (first line offset, last line offset) per section, in order.
    spans: Vec<(u32, u32)>,
    labels: Vec<StructureLabel>,
}

impl Layout {
    fn ordinal_of(&self, label: StructureLabel) -> u32 {
        self.labels.iter().position(|l| *l == label).unwrap() as u32 + 1
    }

    /// A random (page, line) inside the section with `label`.
    fn point_in(&self, label: StructureLabel, rng: &mut ChaCha8Rng) -> (u32, u32) {
        let i = self.ordinal_of(label) as usize - 1;
        let (a, b) = self.spans[i];
        page_line(rng.random_range(a..=b))
    }

    /// Pages covered by exactly one section, with that section's label.
    fn exclusive_pages(&self) -> Vec<(u32, StructureLabel)> {
        let last = self.spans.last().unwrap().1;
        let pages = page_line(last).0;
        (1..=pages)
            .filter_map(|p| {
                let owners: Vec<usize> = self
                    .spans
                    .iter()
                    .enumerate()
                    .filter(|(_, (a, b))| page_line(*a).0 <= p && p <= page_line(*b).0)
                    .map(|(i, _)| i)
                    .collect();
                (owners.len() == 1).then(|| (p, self.labels[owners[0]]))
            })
            .collect()
    }

    /// Pages shared by two IMRaD-titled sections. Pages touching an
    /// untitled section are skipped: its label comes from the classifier.
    fn shared_pages(&self) -> Vec<u32> {
        let excl: BTreeSet<u32> = self.exclusive_pages().into_iter().map(|(p, _)| p).collect();
        let pages = page_line(self.spans.last().unwrap().1).0;
        let untitled: Vec<(u32, u32)> = self
            .spans
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| **l == StructureLabel::Unknown)
            .map(|((a, b), _)| (page_line(*a).0, page_line(*b).0))
            .collect();
        (1..=pages)
            .filter(|p| !excl.contains(p) && untitled.iter().all(|(a, b)| p < a || p > b))
            .collect()
    }
}

const INTRO_TITLES: &[&str] = &["Introduction", "Background and motivation", "Overview"];
const METHOD_TITLES: &[&str] = &[
    "Data and methods",
    "Model",
    "Methodology",
    "Experimental approach",
];
const RESULT_TITLES: &[&str] = &["Results", "Analysis"];
const DISCUSSION_TITLES: &[&str] = &[
    "Discussion",
    "Conclusions",
    "Summary and conclusions",
    "Concluding remarks",
];

const TOPIC_WORDS: [&[&str]; 3] = [
    &["aerosol", "optical", "satellite", "retrieval", "cloud"],
    &["ocean", "salinity", "buoy", "tide", "coastal"],
    &["soil", "moisture", "crop", "irrigation", "farm"],
];
const ABSTRACT_SHARED: &[&str] = &[
    "study",
    "observations",
    "network",
    "regional",
    "seasonal",
    "variability",
];

const GENERIC: &[&str] = &[
    "Please proofread the manuscript carefully.",
    "I recommend publication after minor revision.",
    "The English needs polishing throughout.",
    "The title could be more specific.",
    "The abstract overstates the novelty.",
    "Several references are missing their page numbers.",
];

fn build_article(i: usize, rng: &mut ChaCha8Rng) -> (Article, Layout) {
    use StructureLabel::*;
    let with_case_study = i % 4 == 3;
    let mut plan: Vec<(String, StructureLabel, u32)> = vec![
        (
            INTRO_TITLES[i % INTRO_TITLES.len()].into(),
            Introduction,
            rng.random_range(60..90),
        ),
        (
            METHOD_TITLES[i % METHOD_TITLES.len()].into(),
            Methods,
            rng.random_range(90..130),
        ),
        (
            RESULT_TITLES[i % RESULT_TITLES.len()].into(),
            Results,
            rng.random_range(90..130),
        ),
    ];
    if with_case_study {
        plan.push(("Case study".into(), Unknown, rng.random_range(30..50)));
    }
    plan.push((
        DISCUSSION_TITLES[i % DISCUSSION_TITLES.len()].into(),
        Discussion,
        rng.random_range(60..90),
    ));

    let mut offset = 0u32;
    let mut spans = Vec::new();
    let mut sections = Vec::new();
    for (k, (title, label, len)) in plan.iter().enumerate() {
        let (a, b) = (offset, offset + len - 1);
        offset += len;
        spans.push((a, b));
        let (p0, l0) = page_line(a);
        let (p1, l1) = page_line(b);
        let class = label.index().unwrap_or(2);
        let n_sentences = rng.random_range(4..=7);
        sections.push(Section {
            ordinal: k as u32 + 1,
            number_string: (k + 1).to_string(),
            title: title.clone(),
            body: section_body(rng, class, n_sentences),
            page_span: [p0, p1],
            line_span: Some([l0, l1]),
            label: Unknown,
        });
    }
    let layout = Layout {
        spans,
        labels: plan.iter().map(|p| p.1).collect(),
    };
    let m = layout.ordinal_of(Methods);
    let r = layout.ordinal_of(Results);
    let d = layout.ordinal_of(Discussion);
    let mut figure_registry: BTreeMap<String, u32> = [("1", m), ("2", r), ("3", r), ("4", r)]
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect();
    if i % 2 == 0 {
        figure_registry.insert("5".into(), d);
    }
    let table_registry = [("1", m), ("2", r)]
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect();
    let equation_registry = [("1", m), ("2", m), ("3", m)]
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect();

    let topic = i % 3;
    let n_words = rng.random_range(18..=24);
    let abstract_words: Vec<&str> = (0..n_words)
        .map(|_| {
            if rng.random_bool(0.9) {
                *TOPIC_WORDS[topic].choose(rng).unwrap()
            } else {
                *ABSTRACT_SHARED.choose(rng).unwrap()
            }
        })
        .collect();
    let article = Article {
        id: format!("A{:03}", i + 1),
        year: 2013 + (i / 10) as i32,
        title: format!("Regional {} study {}", TOPIC_WORDS[topic][0], i + 1),
        abstract_text: abstract_words.join(" ") + ".",
        sections,
        figure_registry,
        table_registry,
        equation_registry,
    };
    (article, layout)
}

/// One comment and the structures it was written to resolve to.
fn make_comment(
    i: usize,
    layout: &Layout,
    rng: &mut ChaCha8Rng,
) -> (String, BTreeSet<StructureLabel>) {
    use StructureLabel::*;
    let set = |ls: &[StructureLabel]| ls.iter().copied().collect::<BTreeSet<_>>();
    match rng.random_range(0..20) {
        0 => (
            format!(
                "Figure {} is hard to read; please enlarge the axis labels.",
                rng.random_range(2..=4)
            ),
            set(&[Results]),
        ),
        1 => (
            "Fig. 2 and Fig. 3 use inconsistent colour scales.".into(),
            set(&[Results]),
        ),
        2 => (
            "Table 1 should report the sampling dates.".into(),
            set(&[Methods]),
        ),
        3 => (
            "The values in Tab. 2 do not add up.".into(),
            set(&[Results]),
        ),
        4 => (
            format!(
                "Eq. ({}) lacks a definition of the symbols.",
                rng.random_range(1..=3)
            ),
            set(&[Methods]),
        ),
        5 => (
            "Section 2.1 repeats material from elsewhere.".into(),
            set(&[Methods]),
        ),
        6 => (
            "In section 3 the sample sizes are missing.".into(),
            set(&[Results]),
        ),
        7 => {
            let (p, l) = layout.point_in(Introduction, rng);
            (
                format!("On page {p}, line {l} the citation is incomplete."),
                set(&[Introduction]),
            )
        }
        8 => {
            let (p, l) = layout.point_in(Discussion, rng);
            (
                format!("Page {p}, line {l}: this claim is too strong."),
                set(&[Discussion]),
            )
        }
        9 => (
            "Figure 2 contradicts the model assumptions.".into(),
            set(&[Results]),
        ),
        10 => (
            "Compare Table 1 with Figure 3 before drawing any inference.".into(),
            set(&[Methods, Results]),
        ),
        11 => (
            "The model assumptions need a clearer justification.".into(),
            set(&[Methods]),
        ),
        12 => ("The introduction is too long.".into(), set(&[Introduction])),
        13 => (
            "The conclusions are not supported by the evidence.".into(),
            set(&[Discussion]),
        ),
        14 => (
            "The results are convincing but the uncertainty is not quantified.".into(),
            set(&[Results]),
        ),
        15 => (
            "Both the introduction and the discussion should be shortened.".into(),
            set(&[Introduction, Discussion]),
        ),
        16 => ("Figure 9 is referenced but never shown.".into(), set(&[])),
        17 => {
            let shared = layout.shared_pages();
            let p = *shared.choose(rng).unwrap();
            (format!("Something is wrong on page {p}."), set(&[]))
        }
        18 => {
            let excl: Vec<(u32, StructureLabel)> = layout
                .exclusive_pages()
                .into_iter()
                .filter(|(_, l)| *l != Unknown)
                .collect();
            let &(p, l) = excl.choose(rng).unwrap();
            (format!("The notation on page {p} is confusing."), set(&[l]))
        }
        _ => {
            if i % 2 == 0 && rng.random_bool(0.3) {
                ("Figure 5 adds nothing new.".into(), set(&[Discussion]))
            } else {
                (GENERIC.choose(rng).unwrap().to_string(), set(&[]))
            }
        }
    }
}

/// Bundled end-to-end fixture: 40 articles over 2013-2016, two or three
/// reports each, and one bibliographic record per article.
pub fn mini_corpus(seed: u64) -> MiniCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut articles = Vec::new();
    let mut reports = Vec::new();
    let mut bib = Vec::new();
    let mut expected = MiniExpected::default();
    for i in 0..40 {
        let (article, layout) = build_article(i, &mut rng);
        for s in &article.sections {
            match crate::structure::classify_title(
                &s.title,
                &crate::structure::TitleRuleSet::default(),
            )
            .index()
            {
                Some(c) => expected.label_counts[c] += 1,
                None => expected.others += 1,
            }
        }
        let n_reports = if i % 3 == 0 { 3 } else { 2 };
        for k in 0..n_reports {
            let id = format!("R{}-{}", article.id, k + 1);
            let n_comments = rng.random_range(3..=5);
            let mut texts = Vec::new();
            for c in 0..n_comments {
                let (text, structures) = make_comment(i, &layout, &mut rng);
                let year = expected.per_year.entry(article.year).or_default();
                year.total_comments += 1;
                if !structures.is_empty() {
                    year.covered_comments += 1;
                }
                for l in &structures {
                    year.counts[l.index().unwrap()] += 1;
                }
                expected.comments.push(ExpectedComment {
                    comment_id: format!("{id}-c{}", c + 1),
                    year: article.year,
                    structures,
                });
                texts.push(text);
            }
            let raw_text = if (i + k) % 2 == 0 {
                texts
                    .iter()
                    .enumerate()
                    .map(|(j, t)| format!("{}. {t}", j + 1))
                    .collect::<Vec<_>>()
                    .join("\n")
            } else {
                texts.join("\n\n")
            };
            reports.push(ReviewReport {
                id,
                article_id: article.id.clone(),
                year: article.year,
                raw_text,
                comments: Vec::new(),
            });
        }
        let review = i % 9 == 4;
        let authors = rng.random_range(1..=8u32);
        let refs = rng.random_range(20..=80u32);
        let eta =
            2.0 + 0.4 * f64::from(u8::from(review)) + 0.05 * authors as f64 + 0.005 * refs as f64;
        bib.push(BibRecord {
            article_id: article.id.clone(),
            citations: nb_draw(&mut rng, eta.exp(), 0.6),
            paper_type: if review {
                PaperType::Review
            } else {
                PaperType::Other
            },
            title_length: article.title.split_whitespace().count() as u32,
            author_count: authors,
            page_count: article.sections.last().unwrap().page_span[1],
            reference_count: refs,
            country_count: if rng.random_bool(0.35) {
                rng.random_range(2..=4)
            } else {
                1
            },
        });
        articles.push(article);
    }
    MiniCorpus {
        articles,
        reports,
        bib,
        expected,
    }
}

/// Seed of the bundled mini-corpus files.
pub const MINI_CORPUS_SEED: u64 = 20_240_601;

impl MiniCorpus {
    /// File name and contents of each bundled file.
    pub fn files(&self) -> crate::error::Result<Vec<(&'static str, String)>> {
        Ok(vec![
            ("articles.jsonl", crate::corpus::to_jsonl(&self.articles)?),
            ("reviews.jsonl", crate::corpus::to_jsonl(&self.reports)?),
            ("bib.jsonl", crate::corpus::to_jsonl(&self.bib)?),
            (
                "expected.json",
                serde_json::to_string_pretty(&self.expected)? + "\n",
            ),
        ])
    }

    pub fn write(&self, dir: &std::path::Path) -> crate::error::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, text) in self.files()? {
            std::fs::write(dir.join(name), text)?;
        }
        Ok(())
    }
}
