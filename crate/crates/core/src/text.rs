//! Tokenization, stopwords and dictionary lemmatization.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

const STOPWORDS: &str = include_str!("../data/stopwords.txt");
const LEMMAS: &str = include_str!("../data/lemmas.tsv");
const NOUNS: &str = include_str!("../data/nouns.txt");

/// Lowercased alphanumeric runs; apostrophes inside a word are kept
/// ("don't"), every other character separates tokens.
pub fn words(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut out = Vec::new();
    let mut cur = String::new();
    let chars: Vec<char> = lower.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        let inner_apostrophe = (c == '\'' || c == '’')
            && !cur.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphabetic());
        if c.is_alphanumeric() {
            cur.push(c);
        } else if inner_apostrophe {
            cur.push('\'');
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

#[derive(Debug, Clone)]
pub struct Preprocessor {
    stopwords: HashSet<String>,
    lemmas: HashMap<String, String>,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Self::bundled().clone()
    }
}

impl Preprocessor {
    /// The bundled English stopword list and lemma dictionary.
    pub fn bundled() -> &'static Preprocessor {
        static P: OnceLock<Preprocessor> = OnceLock::new();
        P.get_or_init(|| Preprocessor {
            stopwords: STOPWORDS
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect(),
            lemmas: parse_lemmas(LEMMAS),
        })
    }

    pub fn with_stopwords<I: IntoIterator<Item = S>, S: Into<String>>(mut self, extra: I) -> Self {
        self.stopwords.extend(extra.into_iter().map(Into::into));
        self
    }

    /// Adds `inflected<TAB>lemma` lines.
    pub fn with_lemmas(mut self, tsv: &str) -> Self {
        self.lemmas.extend(parse_lemmas(tsv));
        self
    }

    pub fn is_stopword(&self, w: &str) -> bool {
        self.stopwords.contains(w)
    }

    pub fn lemma<'a>(&'a self, w: &'a str) -> &'a str {
        self.lemmas.get(w).map(String::as_str).unwrap_or(w)
    }

    /// Lowercase, drop stopwords and pure numbers, lemmatize.
    pub fn preprocess(&self, text: &str) -> Vec<String> {
        words(text)
            .into_iter()
            .filter(|w| !self.is_stopword(w) && !w.chars().all(|c| c.is_ascii_digit()))
            .map(|w| self.lemma(&w).to_string())
            .filter(|w| !self.is_stopword(w))
            .collect()
    }
}

fn parse_lemmas(tsv: &str) -> HashMap<String, String> {
    tsv.lines()
        .filter(|l| !l.starts_with('#'))
        .filter_map(|l| {
            let (k, v) = l.split_once('\t')?;
            Some((k.trim().to_lowercase(), v.trim().to_lowercase()))
        })
        .collect()
}

/// Bundled noun lexicon used to filter candidate feature words.
pub fn bundled_nouns() -> &'static HashSet<String> {
    static N: OnceLock<HashSet<String>> = OnceLock::new();
    N.get_or_init(|| {
        NOUNS
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words_split_on_punctuation() {
        assert_eq!(
            words("Fig.5, (eq. 3) don't"),
            vec!["fig", "5", "eq", "3", "don't"]
        );
    }

    #[test]
    fn preprocess_lemmatizes_and_drops_stopwords() {
        let p = Preprocessor::bundled();
        assert_eq!(
            p.preprocess("The models were running"),
            vec!["model", "run"]
        );
        assert!(p.preprocess("").is_empty());
        assert!(p.preprocess("the and of were is").is_empty());
    }

    #[test]
    fn bundled_stopword_count() {
        assert_eq!(Preprocessor::bundled().stopwords.len(), 179);
    }

    #[test]
    fn extension_points() {
        let p = Preprocessor::default()
            .with_stopwords(["model"])
            .with_lemmas("geese\tgoose\n");
        assert_eq!(p.preprocess("models geese"), vec!["goose"]);
    }
}
