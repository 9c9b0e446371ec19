use std::collections::BTreeSet;

use prc_core::corpus::SplitterConfig;
use prc_core::position::{attribute_corpus, distribution, CountingUnit, ExtractionRuleSet, Scope};
use prc_core::structure::{label_corpus, TitleRuleSet};
use prc_core::synthetic::{mini_corpus, MINI_CORPUS_SEED};

#[test]
fn attribution_matches_construction() {
    let m = mini_corpus(MINI_CORPUS_SEED);
    let rules = TitleRuleSet::default();
    let (articles, counts) = label_corpus(&m.articles, &rules);
    assert_eq!(counts.counts, m.expected.label_counts);
    assert_eq!(counts.others, m.expected.others);
    let mut reports = m.reports.clone();
    for r in &mut reports {
        r.ensure_comments(&SplitterConfig::default());
    }
    let attrs = attribute_corpus(
        &articles,
        &reports,
        ExtractionRuleSet::default_rules(),
        &rules,
        CountingUnit::Comment,
    )
    .unwrap();
    assert_eq!(attrs.comments.len(), m.expected.comments.len());
    for (got, want) in attrs.comments.iter().zip(&m.expected.comments) {
        assert_eq!(got.comment_id, want.comment_id);
        let s: BTreeSet<_> = got.structures();
        assert_eq!(s, want.structures, "{}: {:?}", got.comment_id, got.text);
    }
    for (year, want) in &m.expected.per_year {
        let d = distribution(&attrs, Scope::Year(*year)).unwrap();
        assert_eq!(d.counts, want.counts);
        assert_eq!(d.total_comments, want.total_comments);
        assert_eq!(d.covered_comments, want.covered_comments);
    }
}

fn bundled_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini")
}

#[test]
fn bundled_files_match_generator() {
    let m = mini_corpus(MINI_CORPUS_SEED);
    for (name, text) in m.files().unwrap() {
        let on_disk = std::fs::read_to_string(bundled_dir().join(name)).unwrap();
        assert!(
            on_disk == text,
            "{name} is stale; rerun the ignored regenerate_bundled_files test"
        );
    }
}

#[test]
#[ignore]
fn regenerate_bundled_files() {
    mini_corpus(MINI_CORPUS_SEED).write(&bundled_dir()).unwrap();
}

#[test]
#[ignore]
fn show_sweep() {
    use prc_core::citation::{parse_grid, sweep, EmbeddingProvider, TfIdfEmbedder};
    let m = mini_corpus(MINI_CORPUS_SEED);
    let e = TfIdfEmbedder::fit(m.articles.iter().map(|a| a.abstract_text.as_str()));
    let v: Vec<_> = m
        .articles
        .iter()
        .map(|a| e.embed_article(&a.id, &a.abstract_text).unwrap())
        .collect();
    let r = sweep(&v, &parse_grid("0.1:0.9:0.1").unwrap()).unwrap();
    for p in &r.points {
        println!("{p:?}");
    }
}
