//! Python module `prc`: position extraction, title labeling, citation
//! normalization, the statistics battery and full pipeline runs.

use std::path::PathBuf;

use prc_core::citation;
use prc_core::pipeline::{Pipeline, PipelineConfig};
use prc_core::position::{extract_implicit, ExtractionRuleSet};
use prc_core::stats::{ks, partition as part, rank, regression};
use prc_core::structure::{classify_title as classify, TitleRuleSet};
use prc_core::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn to_py(e: Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        _ => match e {
            Error::InvalidInput(_)
            | Error::Shape(_)
            | Error::NonFinite(_)
            | Error::Degenerate(_) => PyValueError::new_err(e.to_string()),
            _ => PyRuntimeError::new_err(e.to_string()),
        },
    }
}

/// Converts a serializable value into native Python objects via `json`.
fn native<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Explicit and implicit position mentions in one comment, as
/// `(kind, payload, start, end)` tuples. `rules` optionally names a rule file.
#[pyfunction]
#[pyo3(signature = (comment, rules=None))]
fn extract_positions(
    comment: &str,
    rules: Option<PathBuf>,
) -> PyResult<Vec<(String, String, usize, usize)>> {
    let loaded;
    let set = match rules {
        Some(p) => {
            loaded = ExtractionRuleSet::load(p).map_err(to_py)?;
            &loaded
        }
        None => ExtractionRuleSet::default_rules(),
    };
    let mut mentions = set.extract_explicit(comment);
    mentions.extend(extract_implicit(comment, &TitleRuleSet::default()));
    Ok(mentions
        .into_iter()
        .map(|m| {
            (
                m.kind.to_string(),
                m.payload.to_string(),
                m.source_span.0,
                m.source_span.1,
            )
        })
        .collect())
}

/// Structure label of a section title under the default title rules.
#[pyfunction]
fn classify_title(title: &str) -> String {
    classify(title, &TitleRuleSet::default()).to_string()
}

/// `(z, pcsi)` for each citation count of one topic-year group.
#[pyfunction]
fn normalize_group(citations: Vec<f64>) -> PyResult<Vec<(Option<f64>, f64)>> {
    citation::normalize_group(&citations).map_err(to_py)
}

/// `(rho, p, n)`.
#[pyfunction]
fn spearman(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64, usize)> {
    let c = rank::spearman(&x, &y).map_err(to_py)?;
    Ok((c.rho, c.p, c.n))
}

/// `(d, p)` of the two-sample Kolmogorov-Smirnov test.
#[pyfunction]
fn ks_two_sample(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = ks::ks_two_sample(&a, &b).map_err(to_py)?;
    Ok((r.d, r.p))
}

/// Kolmogorov limiting survival function `Q(lambda)`.
#[pyfunction]
fn kolmogorov_q(lam: f64) -> f64 {
    ks::kolmogorov_q(lam)
}

/// Splits `(id, value)` records into `bins` ranked bins; returns the ids of
/// each bin, highest values first.
#[pyfunction]
fn partition(records: Vec<(String, f64)>, bins: usize) -> PyResult<Vec<Vec<String>>> {
    let set = part::partition(&records, bins).map_err(to_py)?;
    Ok(set.bins.into_iter().map(|b| b.ids).collect())
}

/// Negative binomial (NB2) regression of `counts` on named covariate columns
/// plus an intercept. Returns the fit as a dict.
#[pyfunction]
fn nb_fit(
    py: Python<'_>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    counts: Vec<f64>,
) -> PyResult<Py<PyAny>> {
    let design = regression::Design::new(names, columns).map_err(to_py)?;
    let fit = regression::nb_fit(&design, &counts).map_err(to_py)?;
    native(py, &fit)
}

/// Runs the whole pipeline from a TOML config. `overrides` are `key=value`
/// assignments applied in order. Returns the run report as a dict.
#[pyfunction]
#[pyo3(signature = (config, seed, out=None, overrides=Vec::new()))]
fn run_pipeline(
    py: Python<'_>,
    config: PathBuf,
    seed: u64,
    out: Option<PathBuf>,
    overrides: Vec<String>,
) -> PyResult<Py<PyAny>> {
    let mut cfg = PipelineConfig::load(&config).map_err(to_py)?;
    cfg.set(&format!("seed={seed}")).map_err(to_py)?;
    if let Some(o) = out {
        cfg.set(&format!("output_dir={:?}", o.to_string_lossy()))
            .map_err(to_py)?;
    }
    for s in &overrides {
        cfg.set(s).map_err(to_py)?;
    }
    let report = Pipeline::new(cfg)
        .and_then(|mut p| p.report())
        .map_err(to_py)?;
    native(py, &report)
}

#[pymodule]
fn prc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(extract_positions, m)?)?;
    m.add_function(wrap_pyfunction!(classify_title, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_group, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(ks_two_sample, m)?)?;
    m.add_function(wrap_pyfunction!(kolmogorov_q, m)?)?;
    m.add_function(wrap_pyfunction!(partition, m)?)?;
    m.add_function(wrap_pyfunction!(nb_fit, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
