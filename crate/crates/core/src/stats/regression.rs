//! Least squares, Poisson and NB2 count regression.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Bounds of the dispersion search.
pub const ALPHA_MIN: f64 = 1e-8;
pub const ALPHA_MAX: f64 = 1e4;
/// Gradient norm the final coefficient fit must reach.
pub const GRAD_TOL: f64 = 1e-6;
pub const MAX_ITER: usize = 200;
/// `1 - R^2` at or below this is treated as perfect collinearity.
pub const COLLINEAR_TOL: f64 = 1e-12;

/// Named covariate columns; the intercept is added by the fitting routines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Design {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Shape("one name per column required".into()));
        }
        if let Some(n) = columns.first().map(Vec::len) {
            if columns.iter().any(|c| c.len() != n) {
                return Err(Error::Shape("columns differ in length".into()));
            }
        }
        if columns.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design".into()));
        }
        Ok(Self { names, columns })
    }

    pub fn intercept_only() -> Self {
        Self {
            names: Vec::new(),
            columns: Vec::new(),
        }
    }

    pub fn rows(&self) -> Option<usize> {
        self.columns.first().map(Vec::len)
    }

    fn matrix(&self, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, self.columns.len() + 1, |i, j| {
            if j == 0 {
                1.0
            } else {
                self.columns[j - 1][i]
            }
        })
    }

    fn all_names(&self) -> Vec<String> {
        std::iter::once("(intercept)".to_string())
            .chain(self.names.iter().cloned())
            .collect()
    }
}

/// `R^2` of an intercept-plus-`others` least-squares fit of `target`.
fn r_squared(target: &[f64], others: &[&Vec<f64>]) -> Result<f64> {
    let n = target.len();
    let x = DMatrix::from_fn(n, others.len() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            others[j - 1][i]
        }
    });
    let y = DVector::from_column_slice(target);
    let svd = x.clone().svd(true, true);
    let beta = svd
        .solve(&y, 1e-12)
        .map_err(|e| Error::Degenerate(format!("least squares: {e}")))?;
    let resid = &y - &x * beta;
    let mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(Error::Degenerate("constant covariate".into()));
    }
    Ok(1.0 - resid.norm_squared() / sst)
}

/// Variance inflation factors; perfectly collinear columns get infinity.
pub fn vif(columns: &[Vec<f64>]) -> Result<Vec<f64>> {
    let p = columns.len();
    let n = columns.first().map(Vec::len).unwrap_or(0);
    if p < 2 {
        return Err(Error::InvalidInput(
            "VIF needs at least two covariates".into(),
        ));
    }
    if n <= p {
        return Err(Error::InvalidInput(format!(
            "VIF needs n > p (n = {n}, p = {p})"
        )));
    }
    (0..p)
        .map(|j| {
            let others: Vec<&Vec<f64>> = columns
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != j)
                .map(|(_, c)| c)
                .collect();
            let r2 = r_squared(&columns[j], &others)?;
            let tol = 1.0 - r2;
            Ok(if tol <= COLLINEAR_TOL {
                f64::INFINITY
            } else {
                (1.0 / tol).max(1.0)
            })
        })
        .collect()
}

fn ln_factorial(y: f64) -> f64 {
    ln_gamma(y + 1.0)
}

/// `ln Gamma(y + 1/alpha) - ln Gamma(1/alpha) + y ln alpha`.
fn ln_rising(y: f64, alpha: f64) -> f64 {
    if y <= 500.0 {
        (0..y as u64).map(|j| (alpha * j as f64).ln_1p()).sum()
    } else {
        ln_gamma(y + 1.0 / alpha) - ln_gamma(1.0 / alpha) + y * alpha.ln()
    }
}

/// Log-likelihood of one count under NB2 (`alpha > 0`) or Poisson
/// (`alpha == 0`) with mean `mu`.
pub fn ll_obs(y: f64, mu: f64, alpha: f64) -> f64 {
    let ylogmu = if y == 0.0 { 0.0 } else { y * mu.ln() };
    if alpha == 0.0 {
        ylogmu - mu - ln_factorial(y)
    } else {
        ln_rising(y, alpha) - ln_factorial(y) + ylogmu - (y + 1.0 / alpha) * (alpha * mu).ln_1p()
    }
}

struct Problem<'a> {
    x: DMatrix<f64>,
    y: &'a [f64],
}

impl Problem<'_> {
    fn mu(&self, beta: &DVector<f64>) -> DVector<f64> {
        (&self.x * beta).map(|eta| eta.clamp(-700.0, 700.0).exp())
    }

    fn ll(&self, beta: &DVector<f64>, alpha: f64) -> f64 {
        let mu = self.mu(beta);
        let mut sum = 0.0;
        let mut comp = 0.0;
        for (y, m) in self.y.iter().zip(mu.iter()) {
            // Neumaier summation keeps the total resolvable near the optimum.
            let v = ll_obs(*y, *m, alpha);
            let t = sum + v;
            comp += if sum.abs() >= v.abs() {
                (sum - t) + v
            } else {
                (v - t) + sum
            };
            sum = t;
        }
        let total = sum + comp;
        if total.is_finite() {
            total
        } else {
            f64::NEG_INFINITY
        }
    }

    fn score_and_info(&self, beta: &DVector<f64>, alpha: f64) -> (DVector<f64>, DMatrix<f64>) {
        let mu = self.mu(beta);
        let p = self.x.ncols();
        let mut g = DVector::zeros(p);
        let mut info = DMatrix::zeros(p, p);
        for i in 0..self.x.nrows() {
            let m = mu[i];
            let denom = 1.0 + alpha * m;
            let r = (self.y[i] - m) / denom;
            let w = m / denom;
            let row = self.x.row(i);
            for a in 0..p {
                g[a] += row[a] * r;
                let wa = w * row[a];
                for b in 0..=a {
                    info[(a, b)] += wa * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                info[(b, a)] = info[(a, b)];
            }
        }
        (g, info)
    }
}

/// Rounding level of a log-likelihood total of magnitude `|ll|`.
pub fn rounding_slack(ll: f64) -> f64 {
    8.0 * f64::EPSILON * ll.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrlsTrace {
    pub log_likelihood: Vec<f64>,
    pub gradient_norm: Vec<f64>,
    pub converged: bool,
}

impl IrlsTrace {
    /// Whether no iteration lowered the log-likelihood by more than
    /// [`rounding_slack`].
    pub fn is_non_decreasing(&self) -> bool {
        self.log_likelihood
            .windows(2)
            .all(|w| w[1] >= w[0] - rounding_slack(w[0]))
    }
}

/// Fisher-scoring IRLS for fixed `alpha` with step halving. A step is kept
/// when it raises the log-likelihood, or when the change is within rounding
/// of the total and the score norm falls.
fn irls(prob: &Problem, alpha: f64, start: DVector<f64>) -> Result<(DVector<f64>, IrlsTrace)> {
    let mut beta = start;
    let mut ll = prob.ll(&beta, alpha);
    let (mut g, mut info) = prob.score_and_info(&beta, alpha);
    let mut trace = IrlsTrace {
        log_likelihood: vec![ll],
        gradient_norm: vec![g.norm()],
        converged: false,
    };
    for _ in 0..MAX_ITER {
        if g.norm() <= GRAD_TOL * 1e-2 {
            trace.converged = true;
            break;
        }
        let chol = info.clone().cholesky().ok_or_else(|| {
            Error::Degenerate("information matrix is singular; design not full rank".into())
        })?;
        let delta = chol.solve(&g);
        let noise = rounding_slack(ll);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = &beta + &delta * step;
            let cll = prob.ll(&cand, alpha);
            if cll > ll {
                accepted = Some((cand, cll));
                break;
            }
            if cll >= ll - noise {
                let (cg, _) = prob.score_and_info(&cand, alpha);
                if cg.norm() < g.norm() {
                    accepted = Some((cand, cll));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((nb, nll)) = accepted else { break };
        beta = nb;
        ll = nll;
        (g, info) = prob.score_and_info(&beta, alpha);
        trace.log_likelihood.push(ll);
        trace.gradient_norm.push(g.norm());
    }
    trace.converged = g.norm() <= GRAD_TOL;
    Ok((beta, trace))
}

fn start_beta(prob: &Problem) -> DVector<f64> {
    let mut b = DVector::zeros(prob.x.ncols());
    let mean = prob.y.iter().sum::<f64>() / prob.y.len() as f64;
    b[0] = mean.max(1e-3).ln();
    b
}

fn check_counts(y: &[f64], design: &Design) -> Result<usize> {
    let n = y.len();
    if n == 0 {
        return Err(Error::InvalidInput("no observations".into()));
    }
    if design.rows().is_some_and(|r| r != n) {
        return Err(Error::Shape(format!(
            "design has {} rows, counts {n}",
            design.rows().unwrap()
        )));
    }
    if y.iter()
        .any(|v| !(v.is_finite() && *v >= 0.0 && v.fract() == 0.0))
    {
        return Err(Error::InvalidInput(
            "counts must be non-negative integers".into(),
        ));
    }
    if n <= design.columns.len() + 1 {
        return Err(Error::InvalidInput(
            "more parameters than observations".into(),
        ));
    }
    Ok(n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub beta: f64,
    pub se: f64,
    pub z: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountFit {
    pub coefficients: Vec<Coefficient>,
    /// 0 for Poisson.
    pub alpha: f64,
    pub log_likelihood: f64,
    pub ll_null: f64,
    pub n: usize,
    /// Estimated parameters: coefficients, plus the dispersion for NB2.
    pub k: usize,
    pub aic: f64,
    pub bic: f64,
    pub mcfadden_r2: f64,
    /// IRLS trace of the final coefficient fit at the chosen dispersion.
    pub trace: IrlsTrace,
    pub gradient_norm: f64,
}

impl CountFit {
    pub fn beta(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.beta).collect()
    }

    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

fn wald(names: Vec<String>, beta: &DVector<f64>, info: DMatrix<f64>) -> Result<Vec<Coefficient>> {
    let cov = info
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("information matrix is singular".into()))?;
    let std = Normal::new(0.0, 1.0).unwrap();
    Ok(names
        .into_iter()
        .enumerate()
        .map(|(j, name)| {
            let se = cov[(j, j)].max(0.0).sqrt();
            let z = beta[j] / se;
            Coefficient {
                name,
                beta: beta[j],
                se,
                z,
                p: 2.0 * std.sf(z.abs()),
            }
        })
        .collect())
}

fn finish(
    design: &Design,
    prob: &Problem,
    beta: DVector<f64>,
    alpha: f64,
    trace: IrlsTrace,
    ll_null: Option<f64>,
) -> Result<CountFit> {
    if !trace.converged {
        return Err(Error::NonConvergence(format!(
            "IRLS stopped after {} iterations with score norm {:.3e}; log-likelihood trace {:?}",
            trace.log_likelihood.len() - 1,
            trace.gradient_norm.last().copied().unwrap_or(f64::NAN),
            trace.log_likelihood
        )));
    }
    let n = prob.y.len();
    let ll = prob.ll(&beta, alpha);
    let (g, info) = prob.score_and_info(&beta, alpha);
    let coefficients = wald(design.all_names(), &beta, info)?;
    let k = coefficients.len() + usize::from(alpha > 0.0);
    let ll_null = ll_null.unwrap_or(ll);
    Ok(CountFit {
        coefficients,
        alpha,
        log_likelihood: ll,
        ll_null,
        n,
        k,
        aic: 2.0 * k as f64 - 2.0 * ll,
        bic: k as f64 * (n as f64).ln() - 2.0 * ll,
        mcfadden_r2: if ll == ll_null {
            0.0
        } else {
            1.0 - ll / ll_null
        },
        trace,
        gradient_norm: g.norm(),
    })
}

pub fn poisson_fit(design: &Design, counts: &[f64]) -> Result<CountFit> {
    let n = check_counts(counts, design)?;
    let prob = Problem {
        x: design.matrix(n),
        y: counts,
    };
    let ll_null = if design.columns.is_empty() {
        None
    } else {
        Some(poisson_fit(&Design::intercept_only(), counts)?.log_likelihood)
    };
    let (beta, trace) = irls(&prob, 0.0, start_beta(&prob))?;
    finish(design, &prob, beta, 0.0, trace, ll_null)
}

/// Golden-section maximization of the profile log-likelihood over
/// `ln alpha`, warm-starting each coefficient fit from the previous one.
fn search_alpha(prob: &Problem) -> Result<f64> {
    let (mut a, mut b) = (ALPHA_MIN.ln(), ALPHA_MAX.ln());
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut warm = start_beta(prob);
    let profile = |t: f64, warm: &mut DVector<f64>| -> Result<f64> {
        let (beta, _) = irls(prob, t.exp(), warm.clone())?;
        let ll = prob.ll(&beta, t.exp());
        *warm = beta;
        Ok(ll)
    };
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = profile(c, &mut warm)?;
    let mut fd = profile(d, &mut warm)?;
    while b - a > 1e-6 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = profile(c, &mut warm)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = profile(d, &mut warm)?;
        }
    }
    let mid = 0.5 * (a + b);
    // The bounds themselves are admissible when the maximum sits on them.
    let mut best = (mid, profile(mid, &mut warm)?);
    for t in [ALPHA_MIN.ln(), ALPHA_MAX.ln()] {
        let v = profile(t, &mut warm)?;
        if v > best.1 {
            best = (t, v);
        }
    }
    Ok(best.0.exp())
}

/// NB2 regression (variance `mu + alpha mu^2`, log link). The dispersion
/// maximizes the profile likelihood within `[ALPHA_MIN, ALPHA_MAX]`;
/// McFadden R^2 is taken against an intercept-only NB2 fit.
pub fn nb_fit(design: &Design, counts: &[f64]) -> Result<CountFit> {
    let n = check_counts(counts, design)?;
    let prob = Problem {
        x: design.matrix(n),
        y: counts,
    };
    let ll_null = if design.columns.is_empty() {
        None
    } else {
        Some(nb_fit(&Design::intercept_only(), counts)?.log_likelihood)
    };
    let alpha = search_alpha(&prob)?;
    let (beta, trace) = irls(&prob, alpha, start_beta(&prob))?;
    finish(design, &prob, beta, alpha, trace, ll_null)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overdispersion {
    pub statistic: f64,
    pub p: f64,
    pub ll_nb: f64,
    pub ll_poisson: f64,
}

/// Likelihood-ratio test of `alpha = 0`: `2 (LL_NB - LL_Poisson)` against a
/// 50:50 mixture of a point mass at 0 and chi-square(1).
pub fn overdispersion_test(nb: &CountFit, poisson: &CountFit) -> Result<Overdispersion> {
    if nb.n != poisson.n || nb.coefficients.len() != poisson.coefficients.len() {
        return Err(Error::InvalidInput(
            "fits are not nested on the same data".into(),
        ));
    }
    let statistic = (2.0 * (nb.log_likelihood - poisson.log_likelihood)).max(0.0);
    let p = if statistic == 0.0 {
        1.0
    } else {
        0.5 * ChiSquared::new(1.0).unwrap().sf(statistic)
    };
    Ok(Overdispersion {
        statistic,
        p,
        ll_nb: nb.log_likelihood,
        ll_poisson: poisson.log_likelihood,
    })
}
