#![allow(dead_code)]
//! Brute-force oracles and fixtures shared by the integration tests and the
//! acceptance harness.

use std::collections::BTreeSet;

use prc_core::citation::AbstractVector;
use prc_core::corpus::StructureLabel;
use prc_core::features::ClassCorpusStats;
use prc_core::han::{HanConfig, SectionInput};
use prc_core::position::ExtractionRuleSet;
use prc_core::structure::{LabeledDataset, SplitRatios};
use prc_core::synthetic::han_corpus;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

pub type Doc = (Vec<String>, BTreeSet<StructureLabel>);

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

pub fn stats_of(docs: &[Doc]) -> ClassCorpusStats {
    let mut s = ClassCorpusStats::default();
    for (t, c) in docs {
        s.add(t, c);
    }
    s
}

pub fn hand_fixture() -> Vec<Doc> {
    use StructureLabel::*;
    vec![
        (toks("alpha beta"), [Introduction].into()),
        (toks("alpha alpha gamma"), [Introduction, Methods].into()),
        (toks("beta delta"), [Methods].into()),
        (toks("gamma"), [Results].into()),
        (toks("alpha delta delta"), [Discussion].into()),
    ]
}

pub fn random_fixture(seed: u64) -> Vec<Doc> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..3000)
        .map(|_| {
            let mut classes = BTreeSet::new();
            classes.insert(StructureLabel::IMRAD[rng.random_range(0..4)]);
            if rng.random_bool(0.15) {
                classes.insert(StructureLabel::IMRAD[rng.random_range(0..4)]);
            }
            let bias = classes.first().unwrap().index().unwrap();
            let n = rng.random_range(3..20);
            let tokens = (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    if rng.random_bool(0.2) {
                        format!("c{bias}w{}", (u * u * 60.0) as usize)
                    } else {
                        format!("w{:04}", (u * u * 2000.0) as usize)
                    }
                })
                .collect();
            (tokens, classes)
        })
        .collect()
}

/// Presence table and chi-square from a direct scan of the documents.
pub fn brute_chi(docs: &[Doc], word: &str, class: StructureLabel) -> Option<f64> {
    let mut o = [[0u64; 2]; 2];
    for (t, cs) in docs {
        let present = t.iter().any(|w| w == word);
        for c in cs {
            o[usize::from(!present)][usize::from(*c != class)] += 1;
        }
    }
    let n: u64 = o.iter().flatten().sum();
    let mut chi = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            let e = (o[r][0] + o[r][1]) as f64 * (o[0][c] + o[1][c]) as f64 / n as f64;
            if e <= 0.0 {
                return None;
            }
            let d = o[r][c] as f64 - e;
            chi += d * d / e;
        }
    }
    Some(chi)
}

pub fn closed_form_chi(docs: &[Doc], word: &str, class: StructureLabel) -> f64 {
    let (mut a, mut b, mut c, mut d) = (0f64, 0f64, 0f64, 0f64);
    for (t, cs) in docs {
        let present = t.iter().any(|w| w == word);
        for k in cs {
            match (present, *k == class) {
                (true, true) => a += 1.0,
                (true, false) => b += 1.0,
                (false, true) => c += 1.0,
                (false, false) => d += 1.0,
            }
        }
    }
    (a + b + c + d) * (a * d - b * c).powi(2) / ((a + b) * (c + d) * (a + c) * (b + d))
}

pub fn brute_tf(docs: &[Doc], word: &str, class: StructureLabel) -> u64 {
    docs.iter()
        .filter(|(_, cs)| cs.contains(&class))
        .map(|(t, _)| t.iter().filter(|w| *w == word).count() as u64)
        .sum()
}

pub fn brute_tfidf(docs: &[Doc], word: &str, class: StructureLabel) -> f64 {
    let tf = brute_tf(docs, word, class);
    let containing = StructureLabel::IMRAD
        .iter()
        .filter(|c| brute_tf(docs, word, **c) > 0)
        .count();
    if tf == 0 {
        return 0.0;
    }
    tf as f64 * (4.0 / containing as f64).ln()
}

pub fn brute_top_k(scored: &[(String, f64)], k: usize) -> BTreeSet<String> {
    let mut sorted: Vec<&(String, f64)> = scored.iter().collect();
    sorted.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let Some(cut) = sorted
        .get(k.min(sorted.len()).saturating_sub(1))
        .map(|s| s.1)
    else {
        return BTreeSet::new();
    };
    sorted
        .iter()
        .take_while(|s| s.1 >= cut)
        .map(|s| s.0.clone())
        .collect()
}

pub fn brute_candidates(docs: &[Doc], class: StructureLabel, k: usize) -> BTreeSet<String> {
    let vocab: BTreeSet<&String> = docs.iter().flat_map(|d| d.0.iter()).collect();
    let mut chi = Vec::new();
    let mut tf = Vec::new();
    for w in vocab {
        if brute_tf(docs, w, class) == 0 {
            continue;
        }
        if let Some(v) = brute_chi(docs, w, class) {
            chi.push((w.clone(), v));
        }
        tf.push((w.clone(), brute_tfidf(docs, w, class)));
    }
    brute_top_k(&chi, k)
        .intersection(&brute_top_k(&tf, k))
        .cloned()
        .collect()
}

pub fn brute_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let below = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn brute_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn brute_ks_d(a: &[f64], b: &[f64]) -> f64 {
    let cdf = |s: &[f64], t: f64| s.iter().filter(|&&v| v <= t).count() as f64 / s.len() as f64;
    a.iter()
        .chain(b)
        .map(|&t| (cdf(a, t) - cdf(b, t)).abs())
        .fold(0.0, f64::max)
}

/// Kolmogorov tail probability from the theta-function form for small
/// arguments and the alternating series otherwise, each summed until the
/// terms vanish.
pub fn oracle_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        let pi2 = std::f64::consts::PI.powi(2);
        let mut s = 0.0;
        for k in 1..1000 {
            let t = (-((2 * k - 1) as f64).powi(2) * pi2 / (8.0 * lambda * lambda)).exp();
            s += t;
            if t < 1e-300 {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s
    } else {
        let mut s = 0.0;
        for k in 1..1000 {
            let t = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
            s += if k % 2 == 1 { t } else { -t };
            if t < 1e-300 {
                break;
            }
        }
        2.0 * s
    }
}

pub fn sample(rng: &mut ChaCha8Rng, n: usize, tied: bool) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if tied {
                rng.random_range(0..5) as f64
            } else {
                rng.random_range(-10.0..10.0)
            }
        })
        .collect()
}

pub fn unit(id: &str, degrees: f64) -> AbstractVector {
    let r = degrees.to_radians();
    AbstractVector {
        article_id: id.into(),
        v: vec![r.cos(), r.sin()],
    }
}

/// The six unit vectors (angles in degrees) of the clustering hand trace.
pub fn six_vectors() -> Vec<AbstractVector> {
    [
        ("v1", 0.0),
        ("v2", 42.0),
        ("v3", 80.0),
        ("v4", 50.0),
        ("v5", 100.0),
        ("v6", -30.0),
    ]
    .iter()
    .map(|(id, deg)| unit(id, *deg))
    .collect()
}

#[derive(Deserialize)]
struct LabeledMention {
    kind: String,
    payload: String,
}

#[derive(Deserialize)]
struct PositionCase {
    text: String,
    mentions: Vec<LabeledMention>,
}

pub type Mentions = Vec<(String, String)>;

/// `(text, expected mentions)` of the hand-labeled position fixture.
pub fn position_fixture() -> Vec<(String, Mentions)> {
    include_str!("../../data/fixtures/positions.jsonl")
        .lines()
        .map(|l| {
            let c: PositionCase = serde_json::from_str(l).unwrap();
            (
                c.text,
                c.mentions
                    .into_iter()
                    .map(|m| (m.kind, m.payload))
                    .collect(),
            )
        })
        .collect()
}

/// Published rule examples with their single expected mention.
pub const RULE_EXAMPLES: [(&str, &str, &str); 13] = [
    ("page 10, line 7", "PageLine", "page=10;line=7"),
    ("p.10, l.7", "PageLine", "page=10;line=7"),
    ("pg. 10, ln 7", "PageLine", "page=10;line=7"),
    ("pg 10, line 7", "PageLine", "page=10;line=7"),
    ("p 10/ 7", "PageLine", "page=10;line=7"),
    ("equation (5)", "Equation", "5"),
    ("eq. 5", "Equation", "5"),
    ("eq. (5)", "Equation", "5"),
    ("table 5", "Table", "5"),
    ("fig.5", "Figure", "5"),
    ("figure 5", "Figure", "5"),
    ("section 3.1", "SectionNumber", "3.1"),
    ("3.1", "SectionNumber", "3.1"),
];

pub fn extract_pairs(text: &str) -> Mentions {
    ExtractionRuleSet::default_rules()
        .extract_explicit(text)
        .iter()
        .map(|m| (m.kind.to_string(), m.payload.to_string()))
        .collect()
}

/// The gradient-check configuration: vocabulary 50, 3 sentences of 5 words.
pub fn small_config() -> HanConfig {
    HanConfig {
        vocab_size: 50,
        embed_dim: 8,
        hidden_dim: 8,
        max_sentences: 3,
        max_words_per_sentence: 5,
        seed: 11,
        ..Default::default()
    }
}

pub fn random_section(rng: &mut ChaCha8Rng, cfg: &HanConfig, vocab: u32) -> SectionInput {
    let n = rng.random_range(1..=cfg.max_sentences);
    SectionInput {
        sentences: (0..n)
            .map(|_| {
                let m = rng.random_range(1..=cfg.max_words_per_sentence);
                (0..m).map(|_| rng.random_range(1..vocab)).collect()
            })
            .collect(),
    }
}

/// All 200 synthetic examples as the training split.
pub fn learning_dataset(seed: u64) -> LabeledDataset {
    LabeledDataset {
        train: han_corpus(50, seed),
        val: Vec::new(),
        test: Vec::new(),
        n_per_class: 50,
        ratios: SplitRatios::SHALLOW,
        seed,
    }
}

pub fn learning_config(seed: u64) -> HanConfig {
    HanConfig {
        embed_dim: 16,
        hidden_dim: 16,
        max_sentences: 8,
        max_words_per_sentence: 20,
        learning_rate: 0.01,
        epochs: 50,
        batch_size: 16,
        min_freq: 1,
        seed,
        ..Default::default()
    }
}

pub fn mini_config(out: &std::path::Path) -> prc_core::pipeline::PipelineConfig {
    let dir = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/mini");
    let mut c = prc_core::pipeline::PipelineConfig::load(dir.join("mini.toml")).unwrap();
    c.output_dir = out.to_path_buf();
    c
}

/// Runs the mini-corpus pipeline into `a` and `b` and checks byte-identical
/// reports, coverage against the construction counts, distribution sums and
/// figure CSV/SVG agreement.
pub fn mini_run_consistency(a: &std::path::Path, b: &std::path::Path) -> Result<String, String> {
    use prc_core::pipeline::figures::{parse_csv_values, parse_svg_values};
    use prc_core::synthetic::{mini_corpus, MINI_CORPUS_SEED};
    let e = |e: prc_core::Error| e.to_string();
    let io = |e: std::io::Error| e.to_string();

    let m = mini_corpus(MINI_CORPUS_SEED);
    if m.articles.len() < 40 || m.reports.len() < 80 {
        return Err(format!(
            "{} articles, {} reports",
            m.articles.len(),
            m.reports.len()
        ));
    }
    let report = prc_core::pipeline::run(mini_config(a)).map_err(e)?;
    prc_core::pipeline::run(mini_config(b)).map_err(e)?;
    let ja = std::fs::read(a.join("report.json")).map_err(io)?;
    let jb = std::fs::read(b.join("report.json")).map_err(io)?;
    if ja != jb {
        return Err("report.json differs between runs".into());
    }

    let expected = &m.expected.per_year;
    if report.coverage.len() != expected.len() {
        return Err(format!(
            "{} coverage rows, {} years",
            report.coverage.len(),
            expected.len()
        ));
    }
    for c in &report.coverage {
        let want = &expected[&c.year];
        if (c.total_comments, c.covered_comments) != (want.total_comments, want.covered_comments) {
            return Err(format!(
                "{}: coverage {}/{} vs hand count {}/{}",
                c.year,
                c.covered_comments,
                c.total_comments,
                want.covered_comments,
                want.total_comments
            ));
        }
    }

    let dist = std::fs::read_to_string(a.join("figures/fig_distribution.csv")).map_err(io)?;
    let rows = parse_csv_values(&dist).map_err(e)?;
    for c in &report.coverage {
        let sum: f64 = rows
            .iter()
            .filter(|r| r.1 == c.year.to_string())
            .map(|r| r.2)
            .sum();
        if sum != c.covered_comments as f64 {
            return Err(format!(
                "{}: distribution sums to {sum}, covered {}",
                c.year, c.covered_comments
            ));
        }
    }

    let mut figures = 0;
    for entry in std::fs::read_dir(a.join("figures")).map_err(io)? {
        let csv = entry.map_err(io)?.path();
        if csv.extension().is_none_or(|x| x != "csv") {
            continue;
        }
        let from_csv = parse_csv_values(&std::fs::read_to_string(&csv).map_err(io)?).map_err(e)?;
        let from_svg =
            parse_svg_values(&std::fs::read_to_string(csv.with_extension("svg")).map_err(io)?)
                .map_err(e)?;
        if from_csv != from_svg {
            return Err(format!("{}: CSV and SVG values differ", csv.display()));
        }
        figures += 1;
    }
    if figures < 6 {
        return Err(format!("only {figures} figures"));
    }
    let covered: usize = report.coverage.iter().map(|c| c.covered_comments).sum();
    let total: usize = report.coverage.iter().map(|c| c.total_comments).sum();
    Ok(format!(
        "{} articles, {} reports; coverage {covered}/{total}; {figures} figures",
        m.articles.len(),
        m.reports.len()
    ))
}
