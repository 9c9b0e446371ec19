use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::InvalidInput(
            "series must have equal, non-zero length".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate(
            "constant series has no correlation".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SpearmanPValue {
    /// Student t approximation with n - 2 degrees of freedom.
    #[default]
    TApprox,
    /// Exact two-sided permutation p-value; only for n <= 10.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub rho: f64,
    pub p: f64,
    pub n: usize,
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<Correlation> {
    spearman_with(x, y, SpearmanPValue::TApprox)
}

pub fn spearman_with(x: &[f64], y: &[f64], method: SpearmanPValue) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "series lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "spearman needs n >= 3, got {n}"
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spearman input".into()));
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let rho = pearson(&rx, &ry)?;
    let p = match method {
        SpearmanPValue::TApprox => t_p_value(rho, n),
        SpearmanPValue::Exact => exact_p_value(&rx, &ry, rho)?,
    };
    Ok(Correlation { rho, p, n })
}

fn t_p_value(rho: f64, n: usize) -> f64 {
    if rho.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Share of permutations of `ry` whose |rho| reaches the observed one.
fn exact_p_value(rx: &[f64], ry: &[f64], rho: f64) -> Result<f64> {
    let n = rx.len();
    if n > 10 {
        return Err(Error::InvalidInput(
            "exact spearman p-value is limited to n <= 10".into(),
        ));
    }
    let mut perm: Vec<f64> = ry.to_vec();
    let mut c = vec![0usize; n];
    let (mut hits, mut total) = (0u64, 0u64);
    let target = rho.abs() - 1e-12;
    let mut visit = |p: &[f64]| {
        total += 1;
        if pearson(rx, p).map(|r| r.abs() >= target).unwrap_or(false) {
            hits += 1;
        }
    };
    // Heap's algorithm.
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(hits as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(
            average_ranks(&[10.0, 20.0, 20.0, 5.0]),
            vec![2.0, 3.5, 3.5, 1.0]
        );
    }

    #[test]
    fn monotone_series() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let up = spearman(&x, &[2.0, 4.0, 8.0, 16.0, 32.0]).unwrap();
        assert_eq!(up.rho, 1.0);
        assert_eq!(up.p, 0.0);
        let down = spearman(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
        assert_eq!(down.rho, -1.0);
    }

    #[test]
    fn errors() {
        assert!(spearman(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn exact_matches_enumeration_for_n4() {
        // rho = 0.8 for x = (1,2,3,4), y = (1,3,2,4); of the 24 permutations
        // |rho| >= 0.8 holds for rho in {1, 0.8, 0.8, 0.8, -1, -0.8, -0.8, -0.8}.
        let c = spearman_with(
            &[1.0, 2.0, 3.0, 4.0],
            &[1.0, 3.0, 2.0, 4.0],
            SpearmanPValue::Exact,
        )
        .unwrap();
        assert!((c.rho - 0.8).abs() < 1e-15);
        assert!((c.p - 8.0 / 24.0).abs() < 1e-15);
    }
}
