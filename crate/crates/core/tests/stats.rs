mod common;

use std::time::Instant;

use common::*;

use prc_core::stats::ks::{kolmogorov_q, ks_two_sample};
use prc_core::stats::partition::partition;
use prc_core::stats::rank::spearman;
use prc_core::stats::regression::{nb_fit, Design};
use prc_core::synthetic::count_data;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn spearman_and_ks_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut instances = 0;
    while instances < 200 {
        let n = rng.random_range(3..30);
        let tied = rng.random_bool(0.5);
        let x = sample(&mut rng, n, tied);
        let y = sample(&mut rng, n, tied);
        let (rx, ry) = (brute_ranks(&x), brute_ranks(&y));
        let constant = |r: &[f64]| r.iter().all(|v| *v == r[0]);
        if constant(&rx) || constant(&ry) {
            assert!(spearman(&x, &y).is_err());
            continue;
        }
        let rho = spearman(&x, &y).unwrap().rho;
        assert!((rho - brute_pearson(&rx, &ry)).abs() <= 1e-9, "rho {rho}");
        if !tied {
            let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
            let nf = n as f64;
            assert!((rho - (1.0 - 6.0 * d2 / (nf * (nf * nf - 1.0)))).abs() <= 1e-9);
        }

        let m = rng.random_range(1..30);
        let b = sample(&mut rng, m, tied);
        let ks = ks_two_sample(&x, &b).unwrap();
        let d = brute_ks_d(&x, &b);
        assert!((ks.d - d).abs() <= 1e-9, "D {} vs {d}", ks.d);
        let lambda = ((n * m) as f64 / (n + m) as f64).sqrt() * d;
        let want = if d == 0.0 { 1.0 } else { oracle_q(lambda) };
        assert!(
            (ks.p - want).abs() <= 1e-6,
            "p {} vs {want} at lambda {lambda}",
            ks.p
        );
        instances += 1;
    }
}

#[test]
fn identical_samples_give_zero_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 1..40 {
        let a = sample(&mut rng, n, n % 2 == 0);
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!((r.d, r.p), (0.0, 1.0));
    }
    for lambda in [0.3, 0.8, 1.0, 1.36, 2.5] {
        assert!((kolmogorov_q(lambda) - oracle_q(lambda)).abs() <= 1e-12);
    }
}

#[test]
fn partition_of_2503_records() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let records: Vec<(String, f64)> = (0..2503)
        .map(|i| (format!("r{i:04}"), rng.random_range(0.0..50.0)))
        .collect();
    let p = partition(&records, 10).unwrap();
    let mut want = vec![251; 9];
    want.push(244);
    assert_eq!(p.sizes(), want);
    for w in p.bins.windows(2) {
        assert!(w[0].min >= w[1].max);
        assert_eq!(w[0].rank + 1, w[1].rank);
    }
    let mut ids: Vec<&String> = p.bins.iter().flat_map(|b| b.ids.iter()).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 2503);
}

#[test]
fn nb_recovers_known_coefficients() {
    let start = Instant::now();
    let beta = [0.8, 0.4, -0.3, 0.15];
    let (mut covered, mut total) = (0, 0);
    for rep in 0..20u64 {
        let alpha = [0.5, 1.0, 2.0][rep as usize % 3];
        let (design, y) = count_data(2000, &beta, alpha, 100 + rep);
        let fit = nb_fit(&design, &y).unwrap();
        for (c, truth) in fit.coefficients.iter().zip(beta) {
            total += 1;
            if (c.beta - truth).abs() <= 3.0 * c.se {
                covered += 1;
            }
        }
        assert_eq!(fit.k, beta.len() + 1);
        assert_eq!(fit.aic, 2.0 * fit.k as f64 - 2.0 * fit.log_likelihood);
        assert_eq!(
            fit.bic,
            fit.k as f64 * (fit.n as f64).ln() - 2.0 * fit.log_likelihood
        );
        assert!(
            fit.trace.is_non_decreasing(),
            "{:?}",
            fit.trace.log_likelihood
        );
        assert!(fit.mcfadden_r2 > 0.0 && fit.mcfadden_r2 < 1.0);
        assert!(
            (fit.alpha - alpha).abs() < 0.25 * alpha,
            "alpha {} vs {alpha}",
            fit.alpha
        );

        let null = nb_fit(&Design::intercept_only(), &y).unwrap();
        assert_eq!(null.mcfadden_r2, 0.0);
    }
    assert!(
        covered as f64 >= 0.9 * total as f64,
        "{covered}/{total} within 3 SE"
    );
    assert!(start.elapsed().as_secs() < 120);
}
