//! Correlation battery: Spearman, normality diagnostics, partitions, K-S
//! tests, VIF and count regression.

pub mod ks;
pub mod partition;
pub mod rank;
pub mod regression;

use serde::{Deserialize, Serialize};

pub use ks::{
    ecdf, kolmogorov_q, ks_normal, ks_two_sample, qq_points, KsNormalReport, KsTwoSample,
};
pub use partition::{bin_size, partition, Bin, PartitionSet};
pub use rank::{average_ranks, pearson, spearman, spearman_with, Correlation, SpearmanPValue};
pub use regression::{
    nb_fit, overdispersion_test, poisson_fit, vif, CountFit, Design, Overdispersion,
};

use crate::corpus::{BibRecord, PaperType};
use crate::error::{Error, Result};

pub const CONTROL_NAMES: [&str; 6] = [
    "X1_review",
    "X2_title_length",
    "X3_author_count",
    "X4_page_count",
    "X5_reference_count",
    "X6_international",
];
pub const PROPORTION_NAMES: [&str; 4] = ["X7_I", "X8_M", "X9_R", "X10_D"];

/// Controls X1-X6: review indicator, title length, author count, page
/// count, reference count, international cooperation indicator (two or more
/// countries).
pub fn controls(bib: &BibRecord) -> [f64; 6] {
    [
        f64::from(u8::from(bib.paper_type == PaperType::Review)),
        bib.title_length as f64,
        bib.author_count as f64,
        bib.page_count as f64,
        bib.reference_count as f64,
        f64::from(u8::from(bib.country_count >= 2)),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProportionRecord {
    pub article_id: String,
    pub year: i32,
    /// Share of the article's comments attributed to I, M, R, D.
    pub proportions: [f64; 4],
    pub citations: u64,
    pub pcsi: f64,
    pub controls: [f64; 6],
}

impl ProportionRecord {
    pub fn validate(&self) -> Result<()> {
        if self.proportions.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Validation(format!(
                "{}: proportion outside [0, 1]",
                self.article_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFit {
    pub model: String,
    pub fit: CountFit,
}

/// Designs of M1..M5. M1 holds the `controls` (names from
/// [`CONTROL_NAMES`]); M2..M5 each add one of the I, M, R and D proportions
/// to M1. Constant controls are dropped: they are collinear with the
/// intercept.
pub fn model_designs(
    records: &[ProportionRecord],
    controls: &[String],
) -> Result<Vec<(String, Design)>> {
    let mut names: Vec<String> = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for name in controls {
        let j = CONTROL_NAMES
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Config(format!("unknown control variable {name}")))?;
        let col: Vec<f64> = records.iter().map(|r| r.controls[j]).collect();
        if col.iter().any(|v| *v != col[0]) {
            names.push(name.clone());
            columns.push(col);
        } else {
            log::warn!("control {name} is constant and was dropped");
        }
    }
    let mut out = Vec::with_capacity(5);
    for m in 0..5 {
        let (mut names, mut columns) = (names.clone(), columns.clone());
        if m > 0 {
            names.push(PROPORTION_NAMES[m - 1].to_string());
            columns.push(records.iter().map(|r| r.proportions[m - 1]).collect());
        }
        out.push((format!("M{}", m + 1), Design::new(names, columns)?));
    }
    Ok(out)
}

/// NB2 fits of M1..M5 on raw citation counts with all six controls.
pub fn nested_models(records: &[ProportionRecord]) -> Result<Vec<NamedFit>> {
    let controls: Vec<String> = CONTROL_NAMES.iter().map(|s| s.to_string()).collect();
    let y: Vec<f64> = records.iter().map(|r| r.citations as f64).collect();
    model_designs(records, &controls)?
        .into_iter()
        .map(|(model, design)| {
            Ok(NamedFit {
                model,
                fit: nb_fit(&design, &y)?,
            })
        })
        .collect()
}
