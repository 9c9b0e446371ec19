mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use common::*;
use prc_core::corpus::StructureLabel;
use prc_core::features::{candidate_features, chi_square, proportions, tfidf};

#[test]
fn hand_fixture_counts() {
    use StructureLabel::*;
    let docs = hand_fixture();
    let s = stats_of(&docs);
    assert_eq!(s.n, [2, 2, 1, 1]);
    assert_eq!(
        proportions("alpha", &s),
        [Some(1.0), Some(0.5), Some(0.0), Some(1.0)]
    );
    assert_eq!(
        proportions("delta", &s),
        [Some(0.0), Some(0.5), Some(0.0), Some(1.0)]
    );
    assert_eq!(
        proportions("gamma", &s),
        [Some(0.5), Some(0.5), Some(1.0), Some(0.0)]
    );
    assert_eq!(tfidf("alpha", Introduction, &s), 3.0 * (4.0f64 / 3.0).ln());
    assert_eq!(tfidf("delta", Discussion, &s), 2.0 * 2.0f64.ln());
    assert_eq!(tfidf("delta", Results, &s), 0.0);
    // [[2, 2], [0, 2]]: 6 * (2*2 - 2*0)^2 / (4 * 2 * 2 * 4)
    assert!((chi_square("alpha", Introduction, &s).unwrap() - 1.5).abs() < 1e-12);
    assert_eq!(
        chi_square("alpha", Introduction, &s),
        brute_chi(&docs, "alpha", Introduction)
    );
}

#[test]
fn scores_match_brute_force() {
    for docs in [hand_fixture(), random_fixture(1)] {
        let s = stats_of(&docs);
        let vocab: BTreeSet<&String> = docs.iter().flat_map(|d| d.0.iter()).collect();
        for w in vocab.iter().take(400) {
            for c in StructureLabel::IMRAD {
                let chi = chi_square(w, c, &s);
                assert_eq!(chi, brute_chi(&docs, w, c), "{w} {c}");
                if let Some(v) = chi {
                    let cf = closed_form_chi(&docs, w, c);
                    assert!((v - cf).abs() <= 1e-9 * cf.max(1.0), "{w} {c}: {v} vs {cf}");
                }
                assert_eq!(tfidf(w, c, &s), brute_tfidf(&docs, w, c), "{w} {c}");
            }
        }
    }
}

#[test]
fn candidates_match_sort_and_intersect() {
    let docs = random_fixture(2);
    let s = stats_of(&docs);
    for c in StructureLabel::IMRAD {
        for k in [10, 100] {
            let got: BTreeSet<String> = candidate_features(c, &s, k)
                .into_iter()
                .map(|w| w.word)
                .collect();
            assert_eq!(got, brute_candidates(&docs, c, k), "{c} k={k}");
        }
    }
}

#[test]
fn candidates_grow_with_k() {
    let docs = random_fixture(3);
    let s = stats_of(&docs);
    assert!(s.words.len() > 1000);
    for c in StructureLabel::IMRAD {
        let sets: Vec<HashSet<String>> = [10, 100, 1000]
            .iter()
            .map(|&k| {
                candidate_features(c, &s, k)
                    .into_iter()
                    .map(|w| w.word)
                    .collect()
            })
            .collect();
        assert!(
            sets[0].is_subset(&sets[1]) && sets[1].is_subset(&sets[2]),
            "{c}"
        );
        assert!(sets[2].len() > sets[0].len());
    }
}

#[test]
fn word_counts_match_scan() {
    let docs = random_fixture(4);
    let s = stats_of(&docs);
    let mut df: BTreeMap<&str, [u64; 4]> = BTreeMap::new();
    for (t, cs) in &docs {
        let distinct: BTreeSet<&String> = t.iter().collect();
        for c in cs {
            for w in &distinct {
                df.entry(w.as_str()).or_default()[c.index().unwrap()] += 1;
            }
        }
    }
    assert_eq!(df.len(), s.words.len());
    for (w, counts) in df {
        assert_eq!(s.words[w].df, counts, "{w}");
    }
}
