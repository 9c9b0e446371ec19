use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::model::{HanConfig, SectionInput};
use crate::error::{Error, Result};
use crate::text::words;

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;

/// Word-to-id table. Ids 0 and 1 are reserved for padding and unknown words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>" {
            return Err(Error::Validation(
                "vocabulary must start with <pad>, <unk>".into(),
            ));
        }
        let index: HashMap<String, u32> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        if index.len() != tokens.len() {
            return Err(Error::Validation("vocabulary has duplicate tokens".into()));
        }
        Ok(Self { tokens, index })
    }

    /// Words seen at least `min_freq` times, most frequent first (ties
    /// alphabetical), capped so the table holds at most `max_size` ids.
    pub fn build<'a, I: IntoIterator<Item = &'a str>>(
        texts: I,
        min_freq: usize,
        max_size: usize,
    ) -> Self {
        let mut freq: BTreeMap<String, usize> = BTreeMap::new();
        for t in texts {
            for w in words(t) {
                *freq.entry(w).or_default() += 1;
            }
        }
        let mut kept: Vec<(String, usize)> = freq
            .into_iter()
            .filter(|(_, c)| *c >= min_freq.max(1))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        kept.truncate(max_size.saturating_sub(2));
        let mut tokens = vec!["<pad>".to_string(), "<unk>".to_string()];
        tokens.extend(kept.into_iter().map(|(w, _)| w));
        Self::from_tokens(tokens).expect("built vocabulary is well formed")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, word: &str) -> u32 {
        self.index.get(word).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Rebuilds the lookup table after deserialization.
    pub(crate) fn reindex(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
    }
}

/// Splits on `.`, `!` and `?` followed by whitespace or end of text, so
/// decimals such as "3.1" stay inside a sentence.
pub fn split_sentences(body: &str) -> Vec<Vec<String>> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"[.!?]+(?:\s+|$)").unwrap());
    re.split(body)
        .map(words)
        .filter(|s| !s.is_empty())
        .collect()
}

/// Tokenizes a section body into word ids, truncating to the configured
/// sentence and word limits.
pub fn sentence_split(body: &str, vocab: &Vocab, config: &HanConfig) -> Result<SectionInput> {
    let sentences: Vec<Vec<u32>> = split_sentences(body)
        .into_iter()
        .take(config.max_sentences)
        .map(|s| {
            s.iter()
                .take(config.max_words_per_sentence)
                .map(|w| vocab.id(w))
                .collect()
        })
        .collect();
    if sentences.is_empty() {
        return Err(Error::InvalidInput("section body has no words".into()));
    }
    Ok(SectionInput { sentences })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_sentences_two_tokens() {
        let v = Vocab::build(["a b c d a b c d"], 1, 100);
        let s = sentence_split("A b. C d!", &v, &HanConfig::default()).unwrap();
        assert_eq!(s.sentences.len(), 2);
        assert!(s.sentences.iter().all(|x| x.len() == 2));
        assert!(s.sentences.iter().flatten().all(|&id| id > UNK));
    }

    #[test]
    fn unknown_words_map_to_unk() {
        let v = Vocab::build(["x y"], 2, 100);
        assert_eq!(v.len(), 2);
        let s = sentence_split("Never seen words here?", &v, &HanConfig::default()).unwrap();
        assert_eq!(s.sentences, vec![vec![UNK; 4]]);
    }

    #[test]
    fn empty_body_is_an_error() {
        let v = Vocab::build(["x"], 1, 10);
        assert!(sentence_split("", &v, &HanConfig::default()).is_err());
        assert!(sentence_split(" ... !", &v, &HanConfig::default()).is_err());
    }

    #[test]
    fn fixture_paragraph_tokenization() {
        let body = "We fit the model in Section 3.1. Results improve! Does it hold?";
        let got = split_sentences(body);
        let want: Vec<Vec<&str>> = vec![
            vec!["we", "fit", "the", "model", "in", "section", "3", "1"],
            vec!["results", "improve"],
            vec!["does", "it", "hold"],
        ];
        assert_eq!(got, want);
    }

    #[test]
    fn truncation_and_frequency_order() {
        let v = Vocab::build(["b b b a a c"], 2, 3);
        assert_eq!(v.tokens(), &["<pad>", "<unk>", "b"]);
        let cfg = HanConfig {
            max_sentences: 1,
            max_words_per_sentence: 2,
            ..Default::default()
        };
        let s = sentence_split("b a c. b b", &v, &cfg).unwrap();
        assert_eq!(s.sentences, vec![vec![2, UNK]]);
    }
}
