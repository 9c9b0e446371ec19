//! Section labeling by title feature words and balanced dataset construction.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{Article, StructureLabel};
use crate::error::{Error, Result};
use crate::text::words;

/// Feature phrases per structure. Matching is whole-word and
/// case-insensitive, longest phrase first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TitleRuleSet {
    pub phrases: BTreeMap<StructureLabel, Vec<String>>,
}

impl Default for TitleRuleSet {
    fn default() -> Self {
        let table: [(StructureLabel, &[&str]); 4] = [
            (
                StructureLabel::Introduction,
                &[
                    "introduction",
                    "motivation",
                    "background",
                    "overview",
                    "review of literature",
                ],
            ),
            (
                StructureLabel::Methods,
                &[
                    "system",
                    "theory",
                    "method",
                    "methods",
                    "methodology",
                    "model",
                    "models",
                    "framework",
                    "approach",
                    "approaches",
                    "methodologies",
                    "experimental",
                    "experiment",
                    "experiments",
                    "data",
                    "data and methods",
                ],
            ),
            (StructureLabel::Results, &["result", "results", "analysis"]),
            (
                StructureLabel::Discussion,
                &[
                    "discussion",
                    "discussions",
                    "conclusion",
                    "conclusions",
                    "summary",
                    "concluding",
                    "summary and conclusions",
                ],
            ),
        ];
        Self {
            phrases: table
                .into_iter()
                .map(|(l, ps)| (l, ps.iter().map(|p| p.to_string()).collect()))
                .collect(),
        }
    }
}

impl TitleRuleSet {
    pub fn validate(&self) -> Result<()> {
        for (label, ps) in &self.phrases {
            if *label == StructureLabel::Unknown {
                return Err(Error::Validation(
                    "title rules cannot target Unknown".into(),
                ));
            }
            if ps.iter().any(|p| words(p).is_empty()) {
                return Err(Error::Validation(format!("empty title phrase for {label}")));
            }
        }
        Ok(())
    }

    /// (tokenized phrase, label), longest phrase first.
    fn ordered(&self) -> Vec<(Vec<String>, StructureLabel)> {
        let mut v: Vec<(Vec<String>, StructureLabel)> = self
            .phrases
            .iter()
            .flat_map(|(l, ps)| ps.iter().map(move |p| (words(p), *l)))
            .collect();
        v.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        v
    }

    /// Every distinct label whose phrase occurs in `tokens`, consuming matched
    /// tokens so a multi-word phrase shadows its own parts.
    pub fn matched_labels(&self, tokens: &[String]) -> BTreeSet<StructureLabel> {
        let mut used = vec![false; tokens.len()];
        let mut labels = BTreeSet::new();
        for (phrase, label) in self.ordered() {
            let n = phrase.len();
            if n == 0 || n > tokens.len() {
                continue;
            }
            let mut i = 0;
            while i + n <= tokens.len() {
                if !used[i..i + n].iter().any(|&u| u) && tokens[i..i + n] == phrase[..] {
                    used[i..i + n].iter_mut().for_each(|u| *u = true);
                    labels.insert(label);
                    i += n;
                } else {
                    i += 1;
                }
            }
        }
        labels
    }
}

fn leading_numbering() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\s*(?:(?:\d+[.)]?)+|[ivxlc]+[.)])\s*").unwrap())
}

/// Label a section title; `Unknown` when no label or more than one distinct
/// label matches.
pub fn classify_title(title: &str, rules: &TitleRuleSet) -> StructureLabel {
    let stripped = leading_numbering().replace(title, "");
    let labels = rules.matched_labels(&words(&stripped));
    if labels.len() == 1 {
        *labels.iter().next().unwrap()
    } else {
        StructureLabel::Unknown
    }
}

/// Per-label section counts in the layout of the corpus summary table.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub paper_count: usize,
    pub counts: [usize; 4],
    pub others: usize,
    pub papers_with_others: usize,
}

impl LabelCounts {
    pub fn total(&self) -> usize {
        self.counts.iter().sum::<usize>() + self.others
    }

    pub fn csv_header() -> &'static [&'static str] {
        &[
            "journal",
            "span",
            "paper_count",
            "introduction_count",
            "methods_count",
            "results_count",
            "discussion_count",
            "others_count",
        ]
    }

    pub fn csv_row(&self, journal: &str, span: &str) -> Vec<String> {
        let mut row = vec![
            journal.to_string(),
            span.to_string(),
            self.paper_count.to_string(),
        ];
        row.extend(self.counts.iter().map(|c| c.to_string()));
        row.push(self.others.to_string());
        row
    }
}

/// Labels every section by title. Sections already carrying a label keep it.
pub fn label_corpus(articles: &[Article], rules: &TitleRuleSet) -> (Vec<Article>, LabelCounts) {
    let mut counts = LabelCounts {
        paper_count: articles.len(),
        ..Default::default()
    };
    let labeled = articles
        .iter()
        .map(|a| {
            let mut a = a.clone();
            let mut any_other = false;
            for s in &mut a.sections {
                if s.label == StructureLabel::Unknown {
                    s.label = classify_title(&s.title, rules);
                }
                match s.label.index() {
                    Some(i) => counts.counts[i] += 1,
                    None => {
                        counts.others += 1;
                        any_other = true;
                    }
                }
            }
            counts.papers_with_others += usize::from(any_other);
            a
        })
        .collect();
    (labeled, counts)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub article_id: String,
    pub ordinal: u32,
    pub label: StructureLabel,
    pub text: String,
}

/// Title-labeled sections as training examples, ordered by (article, ordinal).
pub fn labeled_examples(articles: &[Article]) -> Vec<LabeledExample> {
    let mut v: Vec<LabeledExample> = articles
        .iter()
        .flat_map(|a| {
            a.sections
                .iter()
                .filter(|s| s.label != StructureLabel::Unknown)
                .map(|s| LabeledExample {
                    article_id: a.id.clone(),
                    ordinal: s.ordinal,
                    label: s.label,
                    text: s.body.clone(),
                })
        })
        .collect();
    v.sort_by(|a, b| (&a.article_id, a.ordinal).cmp(&(&b.article_id, b.ordinal)));
    v
}

/// Train/validation/test proportions, e.g. 6:2:2 or 8:2:0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: u32,
    pub val: u32,
    pub test: u32,
}

impl SplitRatios {
    pub const DEEP: SplitRatios = SplitRatios {
        train: 6,
        val: 2,
        test: 2,
    };
    pub const SHALLOW: SplitRatios = SplitRatios {
        train: 8,
        val: 0,
        test: 2,
    };

    /// Per-class (train, val, test) sizes: val and test are floored, the
    /// remainder goes to train.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let total = (self.train + self.val + self.test).max(1) as usize;
        let val = n * self.val as usize / total;
        let test = n * self.test as usize / total;
        (n - val - test, val, test)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub train: Vec<LabeledExample>,
    pub val: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
    pub n_per_class: usize,
    pub ratios: SplitRatios,
    pub seed: u64,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Samples `n_per_class` examples of each IMRaD class with `seed` and splits
/// each class by `ratios`.
pub fn build_balanced_dataset(
    labeled: &[LabeledExample],
    n_per_class: usize,
    ratios: SplitRatios,
    seed: u64,
) -> Result<LabeledDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = LabeledDataset {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        n_per_class,
        ratios,
        seed,
    };
    let (n_train, n_val, _) = ratios.sizes(n_per_class);
    for label in StructureLabel::IMRAD {
        let mut pool: Vec<&LabeledExample> = labeled.iter().filter(|e| e.label == label).collect();
        if pool.len() < n_per_class {
            return Err(Error::InsufficientClass(
                label.to_string(),
                pool.len(),
                n_per_class,
            ));
        }
        pool.sort_by(|a, b| (&a.article_id, a.ordinal).cmp(&(&b.article_id, b.ordinal)));
        pool.shuffle(&mut rng);
        pool.truncate(n_per_class);
        ds.train
            .extend(pool[..n_train].iter().map(|e| (*e).clone()));
        ds.val
            .extend(pool[n_train..n_train + n_val].iter().map(|e| (*e).clone()));
        ds.test
            .extend(pool[n_train + n_val..].iter().map(|e| (*e).clone()));
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Section;
    use proptest::prelude::*;

    fn rules() -> TitleRuleSet {
        TitleRuleSet::default()
    }

    #[test]
    fn table_titles() {
        assert_eq!(
            classify_title("1 Introduction", &rules()),
            StructureLabel::Introduction
        );
        assert_eq!(
            classify_title("Data and methods", &rules()),
            StructureLabel::Methods
        );
        assert_eq!(
            classify_title("2.1 Model description", &rules()),
            StructureLabel::Methods
        );
        assert_eq!(
            classify_title("III. Summary and conclusions", &rules()),
            StructureLabel::Discussion
        );
        assert_eq!(
            classify_title("Review of literature", &rules()),
            StructureLabel::Introduction
        );
    }

    #[test]
    fn compound_title_conflict_is_unknown() {
        // "results" -> Results and "discussion" -> Discussion: two labels.
        assert_eq!(
            classify_title("Results and discussion", &rules()),
            StructureLabel::Unknown
        );
        assert_eq!(
            classify_title("Case study", &rules()),
            StructureLabel::Unknown
        );
    }

    #[test]
    fn whole_word_only() {
        assert_eq!(
            classify_title("Modelling", &rules()),
            StructureLabel::Unknown
        );
        assert_eq!(
            classify_title("Datasets", &rules()),
            StructureLabel::Unknown
        );
    }

    #[test]
    fn default_rules_validate() {
        rules().validate().unwrap();
        assert_eq!(
            rules().phrases.values().map(Vec::len).sum::<usize>(),
            5 + 16 + 3 + 7
        );
    }

    fn article(titles: &[&str]) -> Article {
        Article {
            id: "a".into(),
            year: 2009,
            title: "t".into(),
            abstract_text: "x".into(),
            sections: titles
                .iter()
                .enumerate()
                .map(|(i, t)| Section {
                    ordinal: i as u32 + 1,
                    number_string: (i + 1).to_string(),
                    title: t.to_string(),
                    body: "b".into(),
                    page_span: [1, 1],
                    line_span: None,
                    label: StructureLabel::Unknown,
                })
                .collect(),
            figure_registry: Default::default(),
            table_registry: Default::default(),
            equation_registry: Default::default(),
        }
    }

    #[test]
    fn label_corpus_counts() {
        let (_, c) = label_corpus(
            &[article(&["Introduction", "Model", "Analysis", "Summary"])],
            &rules(),
        );
        assert_eq!(c.counts, [1, 1, 1, 1]);
        assert_eq!(c.others, 0);
        let (_, c) = label_corpus(&[article(&["Case study"])], &rules());
        assert_eq!(c.others, 1);
        assert_eq!(c.papers_with_others, 1);
    }

    fn examples(per_class: usize) -> Vec<LabeledExample> {
        StructureLabel::IMRAD
            .iter()
            .flat_map(|&l| {
                (0..per_class).map(move |i| LabeledExample {
                    article_id: format!("{l}-{i:03}"),
                    ordinal: 1,
                    label: l,
                    text: format!("{l} {i}"),
                })
            })
            .collect()
    }

    #[test]
    fn split_sizes() {
        assert_eq!(SplitRatios::DEEP.sizes(5), (3, 1, 1));
        assert_eq!(SplitRatios::DEEP.sizes(2743), (1647, 548, 548));
        assert_eq!(SplitRatios::SHALLOW.sizes(10), (8, 0, 2));
    }

    #[test]
    fn balanced_minimal_case() {
        let ds = build_balanced_dataset(&examples(7), 5, SplitRatios::DEEP, 1).unwrap();
        assert_eq!((ds.train.len(), ds.val.len(), ds.test.len()), (12, 4, 4));
        for l in StructureLabel::IMRAD {
            assert_eq!(ds.train.iter().filter(|e| e.label == l).count(), 3);
        }
    }

    #[test]
    fn insufficient_class_names_it() {
        let mut ex = examples(5);
        ex.retain(|e| !(e.label == StructureLabel::Results && e.article_id.ends_with('4')));
        match build_balanced_dataset(&ex, 5, SplitRatios::DEEP, 1) {
            Err(Error::InsufficientClass(name, 4, 5)) => assert_eq!(name, "Results"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn same_seed_same_dataset() {
        let a = build_balanced_dataset(&examples(20), 10, SplitRatios::DEEP, 9).unwrap();
        let b = build_balanced_dataset(&examples(20), 10, SplitRatios::DEEP, 9).unwrap();
        let c = build_balanced_dataset(&examples(20), 10, SplitRatios::DEEP, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.train, c.train);
    }

    proptest! {
        #[test]
        fn title_invariant_under_case_and_numbering(
            idx in 0usize..31,
            num in "(|[1-9]|[1-9]\\.[1-9]|[1-9]\\.|IV\\.|ii\\.)",
            upper in any::<bool>(),
            trailing in "(|:|\\.)",
        ) {
            let r = rules();
            let phrase = r.phrases.values().flatten().nth(idx).unwrap().clone();
            let base = classify_title(&phrase, &r);
            let mut t = format!("{num} {phrase}{trailing}");
            if upper { t = t.to_uppercase(); }
            prop_assert_eq!(classify_title(&t, &r), base);
        }

        #[test]
        fn splits_disjoint_and_exhaustive(n in 1usize..15, seed in any::<u64>()) {
            let ds = build_balanced_dataset(&examples(15), n, SplitRatios::DEEP, seed).unwrap();
            let mut keys: Vec<_> = ds.train.iter().chain(&ds.val).chain(&ds.test).map(|e| e.article_id.clone()).collect();
            let total = keys.len();
            keys.sort();
            keys.dedup();
            prop_assert_eq!(keys.len(), total);
            prop_assert_eq!(total, 4 * n);
        }
    }
}
