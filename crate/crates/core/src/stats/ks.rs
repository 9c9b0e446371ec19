use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Terms of the Kolmogorov series kept in [`kolmogorov_q`].
pub const KOLMOGOROV_TERMS: usize = 100;

/// `Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)`, the asymptotic
/// tail probability of `sqrt(n) D`. Returns 1 for `lambda < 0.05`, where the
/// truncated series has not converged and the true value is 1 to double
/// precision.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.05 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=KOLMOGOROV_TERMS {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as usize % 2 == 1 { term } else { -term };
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn mean_sd(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn sorted(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sample".into()));
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Normal Q-Q pairs `(theoretical, empirical)`: theoretical quantiles of the
/// normal with the sample mean and sd at plotting positions `(i - 0.5) / n`.
/// A constant sample yields a flat line at its value.
pub fn qq_points(sample: &[f64]) -> Result<Vec<(f64, f64)>> {
    if sample.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "Q-Q plot needs n >= 3, got {}",
            sample.len()
        )));
    }
    let s = sorted(sample)?;
    let (mean, sd) = mean_sd(&s);
    let n = s.len() as f64;
    let std = Normal::new(0.0, 1.0).unwrap();
    Ok(s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let q = if sd > 0.0 {
                mean + sd * std.inverse_cdf((i as f64 + 0.5) / n)
            } else {
                mean
            };
            (q, x)
        })
        .collect())
}

/// One-sample K-S test against a normal with moments estimated from the
/// sample, in the layout of a statistics-package report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsNormalReport {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub most_extreme_absolute: f64,
    pub most_extreme_positive: f64,
    pub most_extreme_negative: f64,
    pub z: f64,
    pub p: f64,
}

pub fn ks_normal(sample: &[f64]) -> Result<KsNormalReport> {
    if sample.len() < 5 {
        return Err(Error::InvalidInput(format!(
            "K-S normality test needs n >= 5, got {}",
            sample.len()
        )));
    }
    let s = sorted(sample)?;
    let (mean, sd) = mean_sd(&s);
    if sd == 0.0 {
        return Err(Error::Degenerate(
            "sample has zero standard deviation".into(),
        ));
    }
    let dist = Normal::new(mean, sd).unwrap();
    let n = s.len() as f64;
    let (mut pos, mut neg) = (0.0f64, 0.0f64);
    let mut i = 0;
    while i < s.len() {
        let mut j = i;
        while j + 1 < s.len() && s[j + 1] == s[i] {
            j += 1;
        }
        let f = dist.cdf(s[i]);
        pos = pos.max((j + 1) as f64 / n - f);
        neg = neg.min(i as f64 / n - f);
        i = j + 1;
    }
    let d = pos.max(-neg);
    let z = n.sqrt() * d;
    Ok(KsNormalReport {
        n: s.len(),
        mean,
        sd,
        most_extreme_absolute: d,
        most_extreme_positive: pos,
        most_extreme_negative: neg,
        z,
        p: if d == 0.0 { 1.0 } else { kolmogorov_q(z) },
    })
}

/// ECDF steps `(x, F(x))` at each distinct sample value.
pub fn ecdf(sample: &[f64]) -> Result<Vec<(f64, f64)>> {
    if sample.is_empty() {
        return Err(Error::InvalidInput("empty sample".into()));
    }
    let s = sorted(sample)?;
    let n = s.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in s.iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = f,
            _ => out.push((x, f)),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsTwoSample {
    pub d: f64,
    pub p: f64,
    pub n_a: usize,
    pub n_b: usize,
}

/// Two-sample K-S: `D = max |F_a - F_b|` over the pooled support, p from the
/// asymptotic series at `sqrt(n_a n_b / (n_a + n_b)) D`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTwoSample> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("both samples must be non-empty".into()));
    }
    let (sa, sb) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < sa.len() && j < sb.len() {
        let x = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] == x {
            i += 1;
        }
        while j < sb.len() && sb[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let lambda = (na * nb / (na + nb)).sqrt() * d;
    Ok(KsTwoSample {
        d,
        p: if d == 0.0 { 1.0 } else { kolmogorov_q(lambda) },
        n_a: sa.len(),
        n_b: sb.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_reference_values() {
        // Q(1) = 0.26999967..., Q(1.36) ~ 0.0494
        assert!((kolmogorov_q(1.0) - 0.269_999_671_677_341_3).abs() < 1e-12);
        assert!((kolmogorov_q(1.36) - 0.049_4).abs() < 1e-3);
        assert_eq!(kolmogorov_q(0.0), 1.0);
    }

    #[test]
    fn identical_and_disjoint() {
        let a = [1.0, 2.0, 2.0, 5.0];
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!((r.d, r.p), (0.0, 1.0));
        let r = ks_two_sample(&[1.0, 2.0], &[3.0, 4.0, 5.0]).unwrap();
        assert_eq!(r.d, 1.0);
    }

    #[test]
    fn ecdf_steps() {
        assert_eq!(
            ecdf(&[3.0, 1.0, 3.0, 2.0]).unwrap(),
            vec![(1.0, 0.25), (2.0, 0.5), (3.0, 1.0)]
        );
        assert!(ecdf(&[]).is_err());
    }

    #[test]
    fn qq_small_and_constant() {
        assert_eq!(qq_points(&[1.0, 2.0, 3.0]).unwrap().len(), 3);
        let flat = qq_points(&[4.0; 5]).unwrap();
        assert!(flat.iter().all(|&(t, e)| t == 4.0 && e == 4.0));
        let sym = qq_points(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(sym[1].0, 2.0);
    }

    #[test]
    fn ks_normal_rejects_degenerate() {
        assert!(ks_normal(&[1.0; 6]).is_err());
        assert!(ks_normal(&[1.0, 2.0, 3.0, 4.0]).is_err());
    }
}
