mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use prc_core::citation::{
    allocate, cluster, dbi, normalize_group, pcsi, topic_year_groups, transfer, AbstractVector,
};
use prc_core::synthetic::bib_records;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ids(c: &prc_core::citation::Cluster) -> Vec<&str> {
    c.member_ids()
}

/// Single pass at 0.7:
/// v2 (42 deg) vs v1: cos 42 = 0.743 -> joins v1.
/// v3 (80): cos 80 = 0.174 -> founds a cluster.
/// v4 (50): cos 50 = 0.643 vs cos 30 = 0.866 -> joins v3.
/// v5 (100): cos 20 = 0.940 -> joins v3.
/// v6 (-30): cos 30 = 0.866 vs cos 110 < 0 -> joins v1.
/// Transfer: v2 sees cos 38 = 0.788 > 0.743 at v3 and moves; nothing else moves.
#[test]
fn six_vector_hand_trace() {
    let vs = six_vectors();
    let allocated = allocate(&vs, 0.7).unwrap();
    assert_eq!(
        allocated.iter().map(ids).collect::<Vec<_>>(),
        [vec!["v1", "v2", "v6"], vec!["v3", "v4", "v5"]]
    );
    let moved = transfer(allocated).unwrap();
    assert_eq!(
        moved.iter().map(ids).collect::<Vec<_>>(),
        [vec!["v1", "v6"], vec!["v3", "v4", "v5", "v2"]]
    );
    assert_eq!(moved.iter().map(|c| c.id).collect::<Vec<_>>(), [0, 1]);
    assert_eq!(cluster(&vs, 0.7).unwrap(), moved);
}

#[test]
fn dbi_of_two_singletons_is_zero() {
    let c = cluster(&[unit("a", 0.0), unit("b", 60.0)], 0.9).unwrap();
    assert_eq!(c.len(), 2);
    assert_eq!(dbi(&c).unwrap(), 0.0);
}

proptest! {
    #[test]
    fn clustering_is_a_partition(
        vs in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 1..40),
        threshold in 0.05f64..1.0,
    ) {
        let vectors: Vec<AbstractVector> = vs
            .into_iter()
            .enumerate()
            .filter(|(_, v)| v.iter().map(|x| x * x).sum::<f64>() > 1e-6)
            .map(|(i, v)| AbstractVector { article_id: format!("a{i}"), v })
            .collect();
        let clusters = cluster(&vectors, threshold).unwrap();
        let mut seen: Vec<&str> = clusters.iter().flat_map(|c| c.member_ids()).collect();
        prop_assert!(clusters.iter().all(|c| !c.members.is_empty()));
        seen.sort();
        let mut want: Vec<&str> = vectors.iter().map(|v| v.article_id.as_str()).collect();
        want.sort();
        prop_assert_eq!(seen, want);
    }
}

#[test]
fn pcsi_group_properties() {
    let bib = bib_records(600, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let placement: BTreeMap<String, (usize, i32)> = bib
        .iter()
        .map(|r| {
            (
                r.article_id.clone(),
                (rng.random_range(0..5), rng.random_range(2013..2017)),
            )
        })
        .collect();
    let out = pcsi(&bib, &placement).unwrap();
    let groups = topic_year_groups(&bib, &placement).unwrap();
    let mut checked = 0;
    for g in &groups {
        let members: BTreeSet<&str> = g.article_ids.iter().map(String::as_str).collect();
        let zs: Vec<f64> = out
            .iter()
            .filter(|n| members.contains(n.article_id.as_str()))
            .filter_map(|n| n.z)
            .collect();
        if zs.len() < 2 || g.sd_log.is_none_or(|s| s <= 0.0) {
            continue;
        }
        let n = zs.len() as f64;
        let mean = zs.iter().sum::<f64>() / n;
        let sd = (zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(
            mean.abs() <= 1e-9,
            "group {}/{}: mean {mean}",
            g.topic,
            g.year
        );
        assert!(
            (sd - 1.0).abs() <= 1e-9,
            "group {}/{}: sd {sd}",
            g.topic,
            g.year
        );
        checked += 1;
    }
    assert!(checked >= 15, "only {checked} groups checked");
    for n in &out {
        assert_eq!(n.raw == 0, n.pcsi == 0.0);
        assert!(n.pcsi.is_finite() && n.pcsi >= 0.0);
    }
}

#[test]
fn pcsi_reference_values() {
    let e = std::f64::consts::E;
    let got = normalize_group(&[e, e * e, e * e * e]).unwrap();
    for ((_, p), want) in got.iter().zip([1.0 / e, 1.0, e]) {
        assert!((p - want).abs() <= 1e-9, "{p} vs {want}");
    }
    // 4 is the geometric mean of {2, 4, 8}; the uncited member stays at 0.
    let got = normalize_group(&[2.0, 0.0, 8.0, 4.0]).unwrap();
    assert!((got[3].1 - 1.0).abs() <= 1e-12);
    assert_eq!(got[1], (None, 0.0));
}
