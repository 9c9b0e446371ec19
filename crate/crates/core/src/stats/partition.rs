use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    /// 1 is the highest-valued bin.
    pub rank: usize,
    pub ids: Vec<String>,
    pub values: Vec<f64>,
    pub count: usize,
    pub max: f64,
    pub min: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSet {
    pub bins: Vec<Bin>,
}

impl PartitionSet {
    pub fn sizes(&self) -> Vec<usize> {
        self.bins.iter().map(|b| b.count).collect()
    }
}

/// Size of every bin but the last: `ceil(n / bins)`, falling back to
/// `floor(n / bins)` when the ceiling would leave the last bin empty.
pub fn bin_size(n: usize, bins: usize) -> usize {
    let ceil = n.div_ceil(bins);
    if ceil * (bins - 1) < n {
        ceil
    } else {
        n / bins
    }
}

/// Sorts `(id, value)` pairs by value descending (ties by id) and cuts them
/// into `bins` consecutive bins; the last bin absorbs the remainder.
pub fn partition(records: &[(String, f64)], bins: usize) -> Result<PartitionSet> {
    if bins == 0 {
        return Err(Error::InvalidInput("bins must be >= 1".into()));
    }
    if records.len() < bins {
        return Err(Error::InvalidInput(format!(
            "{} records cannot fill {bins} bins",
            records.len()
        )));
    }
    if records.iter().any(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite("partition values".into()));
    }
    let mut sorted: Vec<&(String, f64)> = records.iter().collect();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let size = bin_size(records.len(), bins);
    let mut out = Vec::with_capacity(bins);
    for r in 0..bins {
        let start = r * size;
        let end = if r + 1 == bins {
            sorted.len()
        } else {
            start + size
        };
        let chunk = &sorted[start..end];
        let values: Vec<f64> = chunk.iter().map(|(_, v)| *v).collect();
        out.push(Bin {
            rank: r + 1,
            ids: chunk.iter().map(|(id, _)| id.clone()).collect(),
            count: values.len(),
            max: values[0],
            min: values[values.len() - 1],
            mean: values.iter().sum::<f64>() / values.len() as f64,
            values,
        });
    }
    Ok(PartitionSet { bins: out })
}
