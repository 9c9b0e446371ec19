//! Structure-discriminative feature words of attributed comments.
//!
//! Each attributed (comment, structure) pair is one document of that
//! structure's class. Chi-square scores use the 2x2 presence table of a word
//! against class membership; TF-IDF treats each structure's pooled comments
//! as a single document.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::StructureLabel;
use crate::position::CorpusAttribution;
use crate::text::Preprocessor;

const CLASSES: usize = 4;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WordCounts {
    /// Comments of the class containing the word.
    pub df: [u64; CLASSES],
    /// Occurrences of the word in the class.
    pub tf: [u64; CLASSES],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassCorpusStats {
    /// Comments per class.
    pub n: [u64; CLASSES],
    pub words: BTreeMap<String, WordCounts>,
}

impl ClassCorpusStats {
    /// Adds one comment (already tokenized) to every class in `classes`.
    pub fn add(&mut self, tokens: &[String], classes: &BTreeSet<StructureLabel>) {
        let distinct: BTreeSet<&String> = tokens.iter().collect();
        for class in classes.iter().filter_map(|c| c.index()) {
            self.n[class] += 1;
            for t in tokens {
                self.words.entry(t.clone()).or_default().tf[class] += 1;
            }
            for t in &distinct {
                self.words.get_mut(*t).unwrap().df[class] += 1;
            }
        }
    }

    /// Commutative merge of two partial accumulations.
    pub fn merge(&mut self, other: &ClassCorpusStats) {
        for c in 0..CLASSES {
            self.n[c] += other.n[c];
        }
        for (w, oc) in &other.words {
            let e = self.words.entry(w.clone()).or_default();
            for c in 0..CLASSES {
                e.df[c] += oc.df[c];
                e.tf[c] += oc.tf[c];
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.n.iter().sum()
    }

    pub fn from_attribution(attrs: &CorpusAttribution, pre: &Preprocessor) -> Self {
        let mut s = Self::default();
        for c in attrs.comments.iter().filter(|c| c.is_covered()) {
            s.add(&pre.preprocess(&c.text), &c.structures());
        }
        s
    }

    /// 2x2 table for `word` against `class`; `None` when the word is unseen.
    pub fn contingency(&self, word: &str, class: StructureLabel) -> Option<ContingencyTable> {
        let c = class.index()?;
        let wc = self.words.get(word)?;
        let total = self.total();
        let present_in = wc.df[c];
        let present_out: u64 = wc.df.iter().sum::<u64>() - present_in;
        let absent_in = self.n[c] - present_in;
        let absent_out = (total - self.n[c]) - present_out;
        Some(ContingencyTable::new([
            [present_in, present_out],
            [absent_in, absent_out],
        ]))
    }
}

/// Observed presence/absence x in-class/out-of-class counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub observed: [[u64; 2]; 2],
}

impl ContingencyTable {
    pub fn new(observed: [[u64; 2]; 2]) -> Self {
        Self { observed }
    }

    pub fn total(&self) -> u64 {
        self.observed.iter().flatten().sum()
    }

    /// Expected counts under independence of the two margins.
    pub fn expected(&self) -> [[f64; 2]; 2] {
        let n = self.total() as f64;
        let row = |r: usize| (self.observed[r][0] + self.observed[r][1]) as f64;
        let col = |c: usize| (self.observed[0][c] + self.observed[1][c]) as f64;
        let mut e = [[0.0; 2]; 2];
        for (r, er) in e.iter_mut().enumerate() {
            for (c, v) in er.iter_mut().enumerate() {
                *v = row(r) * col(c) / n;
            }
        }
        e
    }

    /// Sum over cells of (observed - expected)^2 / expected; `None` when any
    /// expected cell is zero.
    pub fn chi_square(&self) -> Option<f64> {
        if self.total() == 0 {
            return None;
        }
        let e = self.expected();
        let mut chi = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                if e[r][c] <= 0.0 {
                    return None;
                }
                let d = self.observed[r][c] as f64 - e[r][c];
                chi += d * d / e[r][c];
            }
        }
        Some(chi)
    }
}

pub fn chi_square(word: &str, class: StructureLabel, stats: &ClassCorpusStats) -> Option<f64> {
    let v = stats.contingency(word, class)?.chi_square();
    if v.is_none() {
        log::debug!("chi-square skipped for `{word}` / {class}: zero expected cell");
    }
    v
}

/// tf(w, c) * ln(4 / classes containing w).
pub fn tfidf(word: &str, class: StructureLabel, stats: &ClassCorpusStats) -> f64 {
    let (Some(c), Some(wc)) = (class.index(), stats.words.get(word)) else {
        return 0.0;
    };
    let containing = wc.tf.iter().filter(|&&t| t > 0).count();
    if containing == 0 || wc.tf[c] == 0 {
        return 0.0;
    }
    wc.tf[c] as f64 * (CLASSES as f64 / containing as f64).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredWord {
    pub word: String,
    pub chi: f64,
    pub tfidf: f64,
}

/// Words whose score is at least the k-th best; ties at the cut are kept.
fn top_k_with_ties<'a>(scored: &[(&'a str, f64)], k: usize) -> HashSet<&'a str> {
    if k == 0 || scored.is_empty() {
        return HashSet::new();
    }
    let mut values: Vec<f64> = scored.iter().map(|s| s.1).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    let cut = values[(k - 1).min(values.len() - 1)];
    scored.iter().filter(|s| s.1 >= cut).map(|s| s.0).collect()
}

/// Intersection of the top-k words by chi-square and by TF-IDF among words
/// that occur in `class`, ordered by chi-square, then TF-IDF, then word.
pub fn candidate_features(
    class: StructureLabel,
    stats: &ClassCorpusStats,
    k: usize,
) -> Vec<ScoredWord> {
    let Some(c) = class.index() else {
        return Vec::new();
    };
    let mut chi = Vec::new();
    let mut tf = Vec::new();
    for (w, wc) in &stats.words {
        if wc.tf[c] == 0 {
            continue;
        }
        if let Some(v) = chi_square(w, class, stats) {
            chi.push((w.as_str(), v));
        }
        tf.push((w.as_str(), tfidf(w, class, stats)));
    }
    let top_chi = top_k_with_ties(&chi, k);
    let top_tf = top_k_with_ties(&tf, k);
    let chi_of: BTreeMap<&str, f64> = chi.iter().copied().collect();
    let mut out: Vec<ScoredWord> = top_chi
        .intersection(&top_tf)
        .map(|w| ScoredWord {
            word: w.to_string(),
            chi: chi_of[w],
            tfidf: tfidf(w, class, stats),
        })
        .collect();
    out.sort_by(|a, b| {
        b.chi
            .total_cmp(&a.chi)
            .then(b.tfidf.total_cmp(&a.tfidf))
            .then(a.word.cmp(&b.word))
    });
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedWord {
    pub word: String,
    pub reason: String,
}

/// Automated stand-in for manual review of candidates: keep lexicon nouns
/// that pass an alphabetic-shape check; every drop is returned for audit.
pub fn filter_candidates(
    words: &[String],
    lexicon: &HashSet<String>,
) -> (Vec<String>, Vec<DroppedWord>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for w in words {
        let shape_ok = w.chars().count() >= 2
            && w.chars().all(|c| c.is_ascii_lowercase())
            && w.chars().any(|c| "aeiouy".contains(c));
        let reason = if !shape_ok {
            Some("shape")
        } else if !lexicon.contains(w) {
            Some("not a noun")
        } else {
            None
        };
        match reason {
            None => kept.push(w.clone()),
            Some(r) => dropped.push(DroppedWord {
                word: w.clone(),
                reason: r.into(),
            }),
        }
    }
    (kept, dropped)
}

/// Share of each structure's comments mentioning `word`; `None` for a
/// structure with no comments.
pub fn proportions(word: &str, stats: &ClassCorpusStats) -> [Option<f64>; CLASSES] {
    let df = stats.words.get(word).map(|w| w.df).unwrap_or([0; CLASSES]);
    let mut out = [None; CLASSES];
    for c in 0..CLASSES {
        if stats.n[c] > 0 {
            out[c] = Some(df[c] as f64 / stats.n[c] as f64);
        }
    }
    out
}

/// Token-level variant: occurrences of `word` over the structure's comment
/// count, capped at 1.
pub fn token_proportions(word: &str, stats: &ClassCorpusStats) -> [Option<f64>; CLASSES] {
    let tf = stats.words.get(word).map(|w| w.tf).unwrap_or([0; CLASSES]);
    let mut out = [None; CLASSES];
    for c in 0..CLASSES {
        if stats.n[c] > 0 {
            out[c] = Some((tf[c] as f64 / stats.n[c] as f64).min(1.0));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureWord {
    pub word: String,
    pub chi: f64,
    pub tfidf: f64,
    pub proportions: [Option<f64>; CLASSES],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureWordTable {
    /// Candidate counts before filtering, IMRaD order.
    pub candidate_counts: [usize; CLASSES],
    pub per_structure: [Vec<FeatureWord>; CLASSES],
    pub dropped: Vec<DroppedWord>,
}

impl FeatureWordTable {
    pub fn build(stats: &ClassCorpusStats, k: usize, lexicon: &HashSet<String>) -> Self {
        let mut t = FeatureWordTable::default();
        for (c, label) in StructureLabel::IMRAD.iter().enumerate() {
            let cands = candidate_features(*label, stats, k);
            t.candidate_counts[c] = cands.len();
            let names: Vec<String> = cands.iter().map(|s| s.word.clone()).collect();
            let (kept, dropped) = filter_candidates(&names, lexicon);
            let kept: HashSet<String> = kept.into_iter().collect();
            t.per_structure[c] = cands
                .into_iter()
                .filter(|s| kept.contains(&s.word))
                .map(|s| FeatureWord {
                    proportions: proportions(&s.word, stats),
                    word: s.word,
                    chi: s.chi,
                    tfidf: s.tfidf,
                })
                .collect();
            t.dropped.extend(dropped.into_iter().map(|d| DroppedWord {
                reason: format!("{}: {}", label.code(), d.reason),
                ..d
            }));
        }
        t
    }

    /// Rows of the top-`top` words per structure: the word, then one cell per
    /// structure holding the proportion where the word is a feature word of
    /// that structure and "None" elsewhere.
    pub fn table_rows(&self, top: usize) -> Vec<(StructureLabel, String, [Option<f64>; CLASSES])> {
        let member: Vec<HashSet<&str>> = self
            .per_structure
            .iter()
            .map(|ws| ws.iter().map(|w| w.word.as_str()).collect())
            .collect();
        let mut rows = Vec::new();
        for (c, label) in StructureLabel::IMRAD.iter().enumerate() {
            for w in self.per_structure[c].iter().take(top) {
                let mut cells = [None; CLASSES];
                for (j, cell) in cells.iter_mut().enumerate() {
                    if member[j].contains(w.word.as_str()) {
                        *cell = w.proportions[j];
                    }
                }
                rows.push((*label, w.word.clone(), cells));
            }
        }
        rows
    }
}
