use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::figures::{fmt_num, Figure, FigureKind, Series};
use super::{Correlated, Distributed, Normalized, Pipeline, SpearmanRow, VariableSummary};
use crate::citation::SweepPoint;
use crate::corpus::StructureLabel;
use crate::error::Result;
use crate::han::ClassificationMetrics;
use crate::position::StructureDistribution;
use crate::stats::{ecdf, KsNormalReport, NamedFit, Overdispersion};
use crate::structure::LabelCounts;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HanSummary {
    pub sizes: [usize; 3],
    pub epochs: usize,
    pub best_epoch: usize,
    pub final_train_accuracy: Option<f64>,
    pub test_metrics: Option<ClassificationMetrics>,
    pub checkpoint_checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub year: i32,
    pub total_comments: usize,
    pub covered_comments: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub structure: StructureLabel,
    pub word: String,
    /// Proportion per structure where the word is a feature word of that
    /// structure, `None` elsewhere.
    pub cells: [Option<f64>; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSummary {
    pub best_threshold: f64,
    pub clusters: usize,
    pub sweep: Vec<SweepPoint>,
    pub topic_year_groups: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionRow {
    pub rank: usize,
    pub count: usize,
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    pub mean_proportions: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub n: usize,
    pub spearman: Vec<SpearmanRow>,
    pub ks_normal: Option<KsNormalReport>,
    pub partitions: Vec<PartitionRow>,
    pub compare: [usize; 2],
    pub ks: Vec<super::KsRow>,
    pub variables: Vec<VariableSummary>,
    pub models: Vec<NamedFit>,
    pub overdispersion: Option<Overdispersion>,
}

/// Machine-readable summary of a run. Timings live in `timings.json`, so
/// the same inputs and seed give the same bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_checksum: String,
    pub seed: u64,
    /// SHA-256 of each stage artifact the numbers below were read from.
    pub artifacts: BTreeMap<String, String>,
    pub structures: LabelCounts,
    pub han: HanSummary,
    pub han_assigned: [usize; 4],
    pub coverage: Vec<CoverageRow>,
    pub distributions: Vec<StructureDistribution>,
    pub average_distribution: [f64; 4],
    pub unresolved_mentions: usize,
    pub feature_candidates: [usize; 4],
    pub feature_words: Vec<FeatureRow>,
    pub clustering: ClusteringSummary,
    pub correlation: CorrelationSummary,
    pub notes: Vec<String>,
}

pub(crate) fn build(p: &mut Pipeline) -> Result<RunReport> {
    let labeled = p.label()?;
    let classified = p.classify()?;
    let trained = p.train()?;
    let extracted = p.extract()?;
    let dist = p.distribution()?;
    let features = p.features()?;
    let clustered = p.cluster()?;
    let normalized = p.normalize()?;
    let corr = p.correlate()?;

    let mut notes = corr.notes.clone();
    for y in &dist.years {
        if y.distribution.covered_comments == 0 {
            notes.push(format!("year {}: no comment carries position information; omitted from the distribution figure", y.year));
        }
    }
    if !normalized.dropped.is_empty() {
        notes.push(format!(
            "{} bibliographic records without a corpus article were ignored",
            normalized.dropped.len()
        ));
    }

    let mut distributions: Vec<StructureDistribution> =
        dist.years.iter().map(|y| y.distribution.clone()).collect();
    distributions.push(dist.corpus.clone());

    Ok(RunReport {
        config_checksum: p.config.checksum(),
        seed: p.seed,
        artifacts: p
            .artifacts
            .iter()
            .map(|(s, h)| (s.name().to_string(), h.clone()))
            .collect(),
        structures: labeled.counts.clone(),
        han: HanSummary {
            sizes: trained.sizes,
            epochs: trained.history.len(),
            best_epoch: trained.best_epoch,
            final_train_accuracy: trained.history.last().map(|h| h.train_accuracy),
            test_metrics: trained.test_metrics.clone(),
            checkpoint_checksum: trained.model.checksum(),
        },
        han_assigned: classified.assigned,
        coverage: coverage_rows(&dist),
        distributions,
        average_distribution: dist.average,
        unresolved_mentions: extracted.unresolved_mentions,
        feature_candidates: features.candidate_counts,
        feature_words: features
            .table_rows(p.config.features.top)
            .into_iter()
            .map(|(structure, word, cells)| FeatureRow {
                structure,
                word,
                cells,
            })
            .collect(),
        clustering: ClusteringSummary {
            best_threshold: clustered.best_threshold,
            clusters: clustered.clusters.len(),
            sweep: clustered.points.clone(),
            topic_year_groups: normalized.groups,
        },
        correlation: CorrelationSummary {
            n: corr.records.len(),
            spearman: corr.spearman.clone(),
            ks_normal: corr.ks_normal,
            partitions: corr
                .partition
                .bins
                .iter()
                .zip(&corr.bin_proportions)
                .map(|(b, m)| PartitionRow {
                    rank: b.rank,
                    count: b.count,
                    max: b.max,
                    min: b.min,
                    mean: b.mean,
                    mean_proportions: m.mean_proportions,
                })
                .collect(),
            compare: corr.compare,
            ks: corr.ks.clone(),
            variables: corr.variables.clone(),
            models: corr.models.clone(),
            overdispersion: corr.overdispersion,
        },
        notes,
    })
}

fn coverage_rows(dist: &Distributed) -> Vec<CoverageRow> {
    dist.years
        .iter()
        .map(|y| CoverageRow {
            year: y.year,
            total_comments: y.distribution.total_comments,
            covered_comments: y.distribution.covered_comments,
            rate: y.distribution.coverage_rate(),
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "None".to_string(), fmt_num)
}

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// `article_id,topic,year,raw,pcsi` rows of a normalization artifact.
pub fn write_pcsi_csv(path: &Path, normalized: &Normalized) -> Result<()> {
    write_csv(
        path,
        &["article_id", "topic", "year", "raw", "pcsi"],
        normalized
            .citations
            .iter()
            .map(|c| {
                vec![
                    c.article_id.clone(),
                    c.topic.to_string(),
                    c.year.to_string(),
                    c.raw.to_string(),
                    fmt_num(c.pcsi),
                ]
            })
            .collect(),
    )
}

const CODES: [&str; 4] = ["I", "M", "R", "D"];

/// Figures of a run, built from the report and the correlation artifact.
pub fn figures(report: &RunReport, dist: &Distributed, corr: &Correlated) -> Result<Vec<Figure>> {
    let mut figs = vec![Figure {
        name: "fig_coverage".into(),
        title: "Comments with position information per year".into(),
        kind: FigureKind::Line,
        x_label: "year".into(),
        y_label: "coverage rate".into(),
        series: vec![Series {
            name: "coverage rate".into(),
            points: report
                .coverage
                .iter()
                .map(|c| (c.year.to_string(), c.rate))
                .collect(),
        }],
    }];

    let shown: Vec<_> = dist
        .years
        .iter()
        .filter(|y| y.distribution.covered_comments > 0)
        .collect();
    let mut series: Vec<Series> = CODES
        .iter()
        .enumerate()
        .map(|(i, code)| Series {
            name: code.to_string(),
            points: shown
                .iter()
                .map(|y| (y.year.to_string(), y.single[i] as f64))
                .collect(),
        })
        .collect();
    series.push(Series {
        name: "multiple".into(),
        points: shown
            .iter()
            .map(|y| (y.year.to_string(), y.multiple as f64))
            .collect(),
    });
    figs.push(Figure {
        name: "fig_distribution".into(),
        title: "Covered comments by attributed structure".into(),
        kind: FigureKind::StackedBar,
        x_label: "year".into(),
        y_label: "comments".into(),
        series,
    });

    figs.push(Figure {
        name: "fig_average_distribution".into(),
        title: "Average share of comments per structure".into(),
        kind: FigureKind::Bar,
        x_label: "structure".into(),
        y_label: "mean proportion".into(),
        series: vec![Series {
            name: "mean proportion".into(),
            points: CODES
                .iter()
                .zip(dist.average)
                .map(|(c, v)| (c.to_string(), v))
                .collect(),
        }],
    });

    let mut feature_series: Vec<Series> = Vec::new();
    for (i, code) in CODES.iter().enumerate() {
        let points: Vec<(String, f64)> = report
            .feature_words
            .iter()
            .filter(|r| r.structure.index() == Some(i))
            .filter_map(|r| r.cells[i].map(|v| (r.word.clone(), v)))
            .collect();
        if !points.is_empty() {
            feature_series.push(Series {
                name: code.to_string(),
                points,
            });
        }
    }
    figs.push(Figure {
        name: "fig_feature_words".into(),
        title: "Feature word proportions in their structure".into(),
        kind: FigureKind::Bar,
        x_label: "word".into(),
        y_label: "proportion".into(),
        series: feature_series,
    });

    let [a, b] = corr.compare;
    let mut ecdf_series = Vec::new();
    for (j, code) in CODES.iter().enumerate() {
        for rank in [a, b] {
            let ids = &corr.partition.bins[rank - 1].ids;
            let values: Vec<f64> = corr
                .records
                .iter()
                .filter(|r| ids.contains(&r.article_id))
                .map(|r| r.proportions[j])
                .collect();
            ecdf_series.push(Series {
                name: format!("{code} partition {rank}"),
                points: ecdf(&values)?
                    .into_iter()
                    .map(|(x, f)| (fmt_num(x), f))
                    .collect(),
            });
        }
    }
    figs.push(Figure {
        name: "fig_ecdf_partitions".into(),
        title: format!("Cumulative distribution of comment shares, partitions {a} and {b}"),
        kind: FigureKind::Step,
        x_label: "share of comments".into(),
        y_label: "cumulative probability".into(),
        series: ecdf_series,
    });

    figs.push(Figure {
        name: "fig_qq_pcsi".into(),
        title: "Normal Q-Q plot of standardized citations".into(),
        kind: FigureKind::Scatter,
        x_label: "expected normal value".into(),
        y_label: "observed value".into(),
        series: vec![Series {
            name: "pcsi".into(),
            points: corr.qq.iter().map(|(t, e)| (fmt_num(*t), *e)).collect(),
        }],
    });

    figs.push(Figure {
        name: "fig_cluster_sweep".into(),
        title: "Davies-Bouldin index over the threshold grid".into(),
        kind: FigureKind::Line,
        x_label: "threshold".into(),
        y_label: "DBI".into(),
        series: vec![Series {
            name: "dbi".into(),
            points: report
                .clustering
                .sweep
                .iter()
                .filter_map(|s| s.dbi.map(|d| (fmt_num(s.threshold), d)))
                .collect(),
        }],
    });
    Ok(figs)
}

pub(crate) fn write_outputs(p: &mut Pipeline, r: &RunReport) -> Result<()> {
    let out = p.out.clone();
    let tables = out.join("tables");
    let figdir = out.join("figures");
    std::fs::create_dir_all(&tables)?;
    std::fs::create_dir_all(&figdir)?;
    std::fs::write(
        out.join("report.json"),
        serde_json::to_string_pretty(r)? + "\n",
    )?;

    let dist = p.distribution()?;
    let corr = p.correlate()?;
    let normalized = p.normalize()?;

    let years = match (dist.years.first(), dist.years.last()) {
        (Some(a), Some(b)) => format!("{}-{}", a.year, b.year),
        _ => String::new(),
    };
    write_csv(
        &tables.join("table4_structures.csv"),
        LabelCounts::csv_header(),
        vec![r.structures.csv_row("corpus", &years)],
    )?;
    let header = ClassificationMetrics::csv_header();
    let rows = r
        .han
        .test_metrics
        .iter()
        .map(|m| m.csv_row("sentence-level HAN"))
        .collect();
    write_csv(&tables.join("table5_han.csv"), &header, rows)?;
    write_csv(
        &tables.join("coverage.csv"),
        &[
            "year",
            "total_comments",
            "covered_comments",
            "coverage_rate",
        ],
        r.coverage
            .iter()
            .map(|c| {
                vec![
                    c.year.to_string(),
                    c.total_comments.to_string(),
                    c.covered_comments.to_string(),
                    fmt_num(c.rate),
                ]
            })
            .collect(),
    )?;
    let scope_name = |d: &StructureDistribution| match &d.scope {
        crate::position::Scope::Year(y) => y.to_string(),
        crate::position::Scope::Article(a) => a.clone(),
        crate::position::Scope::Corpus => "all".to_string(),
    };
    write_csv(
        &tables.join("distribution.csv"),
        &[
            "scope",
            "I",
            "M",
            "R",
            "D",
            "covered_comments",
            "total_comments",
        ],
        r.distributions
            .iter()
            .map(|d| {
                let mut row = vec![scope_name(d)];
                row.extend(d.counts.iter().map(|c| c.to_string()));
                row.push(d.covered_comments.to_string());
                row.push(d.total_comments.to_string());
                row
            })
            .collect(),
    )?;
    write_csv(
        &tables.join("table6_spearman.csv"),
        &["variable", "rho", "p", "n"],
        r.correlation
            .spearman
            .iter()
            .map(|s| vec![s.variable.clone(), opt(s.rho), opt(s.p), s.n.to_string()])
            .collect(),
    )?;
    write_csv(
        &tables.join("table7_partitions.csv"),
        &[
            "partition",
            "paper_count",
            "max",
            "min",
            "mean",
            "mean_I",
            "mean_M",
            "mean_R",
            "mean_D",
        ],
        r.correlation
            .partitions
            .iter()
            .map(|b| {
                let mut row = vec![
                    b.rank.to_string(),
                    b.count.to_string(),
                    fmt_num(b.max),
                    fmt_num(b.min),
                    fmt_num(b.mean),
                ];
                row.extend(b.mean_proportions.iter().map(|v| fmt_num(*v)));
                row
            })
            .collect(),
    )?;
    let [a, b] = r.correlation.compare;
    write_csv(
        &tables.join("table8_ks.csv"),
        &[
            "variable",
            "partition_a",
            "partition_b",
            "d",
            "p",
            "n_a",
            "n_b",
        ],
        r.correlation
            .ks
            .iter()
            .map(|k| {
                vec![
                    k.variable.clone(),
                    a.to_string(),
                    b.to_string(),
                    fmt_num(k.d),
                    fmt_num(k.p),
                    k.n_a.to_string(),
                    k.n_b.to_string(),
                ]
            })
            .collect(),
    )?;
    write_csv(
        &tables.join("table9_variables.csv"),
        &["variable", "max", "min", "mean", "vif"],
        r.correlation
            .variables
            .iter()
            .map(|v| {
                vec![
                    v.variable.clone(),
                    fmt_num(v.max),
                    fmt_num(v.min),
                    fmt_num(v.mean),
                    opt(v.vif),
                ]
            })
            .collect(),
    )?;
    let mut model_rows = Vec::new();
    for m in &r.correlation.models {
        for c in &m.fit.coefficients {
            model_rows.push(vec![
                m.model.clone(),
                c.name.clone(),
                fmt_num(c.beta),
                fmt_num(c.se),
                fmt_num(c.z),
                fmt_num(c.p),
            ]);
        }
        for (name, v) in [
            ("alpha", m.fit.alpha),
            ("log_likelihood", m.fit.log_likelihood),
            ("aic", m.fit.aic),
            ("bic", m.fit.bic),
            ("mcfadden_r2", m.fit.mcfadden_r2),
            ("n", m.fit.n as f64),
        ] {
            model_rows.push(vec![
                m.model.clone(),
                name.into(),
                fmt_num(v),
                String::new(),
                String::new(),
                String::new(),
            ]);
        }
    }
    write_csv(
        &tables.join("table10_models.csv"),
        &["model", "term", "estimate", "se", "z", "p"],
        model_rows,
    )?;
    write_csv(
        &tables.join("table11_feature_words.csv"),
        &["structure", "word", "I", "M", "R", "D"],
        r.feature_words
            .iter()
            .map(|f| {
                let mut row = vec![f.structure.code().to_string(), f.word.clone()];
                row.extend(f.cells.iter().map(|c| opt(*c)));
                row
            })
            .collect(),
    )?;
    if let Some(k) = &r.correlation.ks_normal {
        write_csv(
            &tables.join("ks_normal_pcsi.csv"),
            &[
                "n",
                "mean",
                "sd",
                "most_extreme_absolute",
                "most_extreme_positive",
                "most_extreme_negative",
                "z",
                "p",
            ],
            vec![[
                k.n as f64,
                k.mean,
                k.sd,
                k.most_extreme_absolute,
                k.most_extreme_positive,
                k.most_extreme_negative,
                k.z,
                k.p,
            ]
            .iter()
            .map(|v| fmt_num(*v))
            .collect()],
        )?;
    }
    write_pcsi_csv(&tables.join("pcsi.csv"), &normalized)?;

    for f in figures(r, &dist, &corr)? {
        f.write(&figdir)?;
    }
    Ok(())
}
