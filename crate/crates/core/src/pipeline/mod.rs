//! End-to-end run: ingest, label, train and classify, extract and
//! attribute, distribution, feature words, clustering, citation
//! normalization, correlation and report. Every stage writes its artifact as
//! JSON and is cached under a key hashed from its inputs and config subtree.

pub mod config;
pub mod figures;
pub mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::rc::Rc;
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::PipelineConfig;
pub use report::RunReport;

use crate::citation::{
    parse_grid, pcsi, sweep, topic_assignment, topic_year_groups, AbstractVector,
    EmbeddingProvider, NormalizedCitation, SweepResult, TfIdfEmbedder,
};
use crate::corpus::{
    check_references, load_articles, load_bib, load_reviews, Article, ReviewReport, StructureLabel,
};
use crate::error::{Error, Result};
use crate::features::{ClassCorpusStats, FeatureWordTable};
use crate::han::{self, ClassificationMetrics, ConfusionMatrix, EpochMetrics, HanModel};
use crate::position::{
    attribute_corpus, distribution, CorpusAttribution, ExtractionRuleSet, Scope,
    StructureDistribution,
};
use crate::stats::{
    controls, ks_normal, ks_two_sample, model_designs, nb_fit, overdispersion_test, partition,
    poisson_fit, qq_points, spearman, vif, KsNormalReport, NamedFit, Overdispersion, PartitionSet,
    ProportionRecord, PROPORTION_NAMES,
};
use crate::structure::{
    build_balanced_dataset, label_corpus, labeled_examples, LabelCounts, TitleRuleSet,
};
use crate::text::{bundled_nouns, Preprocessor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Label,
    Train,
    Classify,
    Extract,
    Distribution,
    Features,
    Cluster,
    Normalize,
    Correlate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 11] = [
        Stage::Ingest,
        Stage::Label,
        Stage::Train,
        Stage::Classify,
        Stage::Extract,
        Stage::Distribution,
        Stage::Features,
        Stage::Cluster,
        Stage::Normalize,
        Stage::Correlate,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Label => "label",
            Stage::Train => "train",
            Stage::Classify => "classify",
            Stage::Extract => "extract",
            Stage::Distribution => "distribution",
            Stage::Features => "features",
            Stage::Cluster => "cluster",
            Stage::Normalize => "normalize",
            Stage::Correlate => "correlate",
            Stage::Report => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ingested {
    pub articles: Vec<Article>,
    /// Reports with comments split.
    pub reports: Vec<ReviewReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Labeled {
    pub articles: Vec<Article>,
    pub counts: LabelCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trained {
    pub model: HanModel,
    pub history: Vec<EpochMetrics>,
    pub best_epoch: usize,
    /// Train, validation and test sizes.
    pub sizes: [usize; 3],
    pub confusion: ConfusionMatrix,
    /// `None` when the test split is empty.
    pub test_metrics: Option<ClassificationMetrics>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionAssignment {
    pub article_id: String,
    pub ordinal: u32,
    pub title: String,
    pub label: StructureLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classified {
    pub articles: Vec<Article>,
    pub assignments: Vec<SectionAssignment>,
    /// HAN-assigned sections per class, IMRaD order.
    pub assigned: [usize; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extracted {
    pub attribution: CorpusAttribution,
    pub unresolved_mentions: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearDistribution {
    pub year: i32,
    pub distribution: StructureDistribution,
    /// Covered comments attributed to exactly one structure, IMRaD order.
    pub single: [usize; 4],
    /// Covered comments attributed to two or more structures.
    pub multiple: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleShare {
    pub article_id: String,
    pub year: i32,
    pub comments: usize,
    /// Share of the article's comments attributed to each structure.
    pub proportions: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distributed {
    pub years: Vec<YearDistribution>,
    pub corpus: StructureDistribution,
    pub articles: Vec<ArticleShare>,
    /// Mean of the per-article proportions.
    pub average: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalized {
    pub citations: Vec<NormalizedCitation>,
    pub groups: usize,
    /// Bibliographic records without a corpus article.
    pub dropped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpearmanRow {
    pub variable: String,
    pub rho: Option<f64>,
    pub p: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsRow {
    pub variable: String,
    pub d: f64,
    pub p: f64,
    pub n_a: usize,
    pub n_b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSummary {
    pub variable: String,
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    pub vif: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinProportions {
    pub rank: usize,
    pub mean_proportions: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlated {
    pub records: Vec<ProportionRecord>,
    pub spearman: Vec<SpearmanRow>,
    pub ks_normal: Option<KsNormalReport>,
    pub qq: Vec<(f64, f64)>,
    pub partition: PartitionSet,
    pub bin_proportions: Vec<BinProportions>,
    pub compare: [usize; 2],
    pub ks: Vec<KsRow>,
    pub variables: Vec<VariableSummary>,
    pub models: Vec<NamedFit>,
    pub overdispersion: Option<Overdispersion>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
    pub cached: bool,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_digest(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

fn key_of(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    hex::encode(h.finalize())
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable")
}

/// A pipeline over one configuration. Stages are computed on demand, once,
/// and loaded from the cache when their key matches.
pub struct Pipeline {
    config: PipelineConfig,
    seed: u64,
    out: PathBuf,
    artifacts: BTreeMap<Stage, String>,
    timings: Vec<StageTiming>,
    ingested: Option<Rc<Ingested>>,
    labeled: Option<Rc<Labeled>>,
    trained: Option<Rc<Trained>>,
    classified: Option<Rc<Classified>>,
    extracted: Option<Rc<Extracted>>,
    distributed: Option<Rc<Distributed>>,
    features: Option<Rc<FeatureWordTable>>,
    clustered: Option<Rc<SweepResult>>,
    normalized: Option<Rc<Normalized>>,
    correlated: Option<Rc<Correlated>>,
}

impl Pipeline {
    /// Validates the configuration and prepares the output directory.
    /// Stage runs without a configured seed use seed 0.
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let out = config.output_dir.clone();
        std::fs::create_dir_all(out.join("cache"))?;
        std::fs::create_dir_all(out.join("artifacts"))?;
        Ok(Self {
            seed: config.seed.unwrap_or(0),
            config,
            out,
            artifacts: BTreeMap::new(),
            timings: Vec::new(),
            ingested: None,
            labeled: None,
            trained: None,
            classified: None,
            extracted: None,
            distributed: None,
            features: None,
            clustered: None,
            normalized: None,
            correlated: None,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn output_dir(&self) -> &Path {
        &self.out
    }

    /// SHA-256 of each computed stage artifact.
    pub fn artifacts(&self) -> &BTreeMap<Stage, String> {
        &self.artifacts
    }

    pub fn timings(&self) -> &[StageTiming] {
        &self.timings
    }

    pub fn artifact_path(&self, stage: Stage) -> PathBuf {
        self.out
            .join("artifacts")
            .join(format!("{}.json", stage.name()))
    }

    fn cached<T: Serialize + DeserializeOwned>(
        &mut self,
        stage: Stage,
        parts: &[&str],
        compute: impl FnOnce() -> Result<T>,
    ) -> Result<Rc<T>> {
        let start = Instant::now();
        let mut all = vec![stage.name()];
        all.extend_from_slice(parts);
        let key = key_of(&all);
        let cache = self
            .out
            .join("cache")
            .join(format!("{}-{}.json", stage.name(), &key[..16]));
        let (value, bytes, hit) = match std::fs::read(&cache) {
            Ok(bytes) => match serde_json::from_slice::<T>(&bytes) {
                Ok(v) => (v, bytes, true),
                Err(e) => {
                    log::warn!("discarding unreadable cache {}: {e}", cache.display());
                    let v = compute().map_err(|e| Error::stage(stage.name(), e))?;
                    let bytes = serde_json::to_vec(&v)?;
                    (v, bytes, false)
                }
            },
            Err(_) => {
                let v = compute().map_err(|e| Error::stage(stage.name(), e))?;
                let bytes = serde_json::to_vec(&v)?;
                (v, bytes, false)
            }
        };
        if !hit {
            std::fs::write(&cache, &bytes)?;
        }
        std::fs::write(self.artifact_path(stage), &bytes)?;
        self.artifacts.insert(stage, sha256_hex(&bytes));
        self.timings.push(StageTiming {
            stage: stage.name().into(),
            seconds: start.elapsed().as_secs_f64(),
            cached: hit,
        });
        log::info!(
            "stage {} done ({})",
            stage.name(),
            if hit { "cached" } else { "computed" }
        );
        Ok(Rc::new(value))
    }

    fn hash_of(&self, stage: Stage) -> String {
        self.artifacts[&stage].clone()
    }

    fn title_rules(&self) -> Result<TitleRuleSet> {
        match &self.config.rules.titles {
            None => Ok(TitleRuleSet::default()),
            Some(p) => {
                let rules: TitleRuleSet = serde_json::from_str(&std::fs::read_to_string(p)?)?;
                rules.validate()?;
                Ok(rules)
            }
        }
    }

    fn extraction_rules(&self) -> Result<ExtractionRuleSet> {
        match &self.config.rules.extraction {
            None => Ok(ExtractionRuleSet::default_rules().clone()),
            Some(p) => ExtractionRuleSet::load(p),
        }
    }

    pub fn ingest(&mut self) -> Result<Rc<Ingested>> {
        if let Some(v) = &self.ingested {
            return Ok(v.clone());
        }
        let c = &self.config;
        let (a, r) = (c.corpus.articles.clone(), c.corpus.reviews.clone());
        let splitter = c.splitter.clone();
        let parts = [
            file_digest(&a).map_err(|e| Error::stage("ingest", e))?,
            file_digest(&r).map_err(|e| Error::stage("ingest", e))?,
            json(&splitter),
        ];
        let v = self.cached(Stage::Ingest, &[&parts[0], &parts[1], &parts[2]], || {
            let articles = load_articles(&a)?;
            let mut reports = load_reviews(&r)?;
            check_references(&articles, &reports)?;
            for rep in &mut reports {
                rep.ensure_comments(&splitter);
            }
            Ok(Ingested { articles, reports })
        })?;
        self.ingested = Some(v.clone());
        Ok(v)
    }

    pub fn label(&mut self) -> Result<Rc<Labeled>> {
        if let Some(v) = &self.labeled {
            return Ok(v.clone());
        }
        let ing = self.ingest()?;
        let rules = self.title_rules().map_err(|e| Error::stage("label", e))?;
        let parts = [self.hash_of(Stage::Ingest), json(&rules)];
        let v = self.cached(Stage::Label, &[&parts[0], &parts[1]], || {
            let (articles, counts) = label_corpus(&ing.articles, &rules);
            Ok(Labeled { articles, counts })
        })?;
        self.labeled = Some(v.clone());
        Ok(v)
    }

    pub fn train(&mut self) -> Result<Rc<Trained>> {
        if let Some(v) = &self.trained {
            return Ok(v.clone());
        }
        let lab = self.label()?;
        let mut tc = self.config.han.clone();
        tc.model.seed = self.seed;
        let parts = [self.hash_of(Stage::Label), json(&tc)];
        let seed = self.seed;
        let v = self.cached(Stage::Train, &[&parts[0], &parts[1]], || {
            let examples = labeled_examples(&lab.articles);
            let ds = build_balanced_dataset(&examples, tc.n_per_class, tc.split.ratios(), seed)?;
            let outcome = han::train(&tc.model, &ds)?;
            let (confusion, test_metrics) = if ds.test.is_empty() {
                (ConfusionMatrix::default(), None)
            } else {
                let (cm, m) = han::evaluate(&outcome.model, &ds.test)?;
                (cm, Some(m))
            };
            Ok(Trained {
                model: outcome.model,
                history: outcome.history,
                best_epoch: outcome.best_epoch,
                sizes: [ds.train.len(), ds.val.len(), ds.test.len()],
                confusion,
                test_metrics,
            })
        })?;
        v.model.save(self.out.join("han_model.json"))?;
        self.trained = Some(v.clone());
        Ok(v)
    }

    pub fn classify(&mut self) -> Result<Rc<Classified>> {
        if let Some(v) = &self.classified {
            return Ok(v.clone());
        }
        let lab = self.label()?;
        let trained = self.train()?;
        let parts = [self.hash_of(Stage::Label), self.hash_of(Stage::Train)];
        let v = self.cached(Stage::Classify, &[&parts[0], &parts[1]], || {
            let articles = han::classify_others(&trained.model, &lab.articles)?;
            let mut assignments = Vec::new();
            let mut assigned = [0; 4];
            for (before, after) in lab.articles.iter().zip(&articles) {
                for (s0, s1) in before.sections.iter().zip(&after.sections) {
                    if s0.label == StructureLabel::Unknown {
                        if let Some(i) = s1.label.index() {
                            assigned[i] += 1;
                        }
                        assignments.push(SectionAssignment {
                            article_id: after.id.clone(),
                            ordinal: s1.ordinal,
                            title: s1.title.clone(),
                            label: s1.label,
                        });
                    }
                }
            }
            Ok(Classified {
                articles,
                assignments,
                assigned,
            })
        })?;
        self.classified = Some(v.clone());
        Ok(v)
    }

    pub fn extract(&mut self) -> Result<Rc<Extracted>> {
        if let Some(v) = &self.extracted {
            return Ok(v.clone());
        }
        let ing = self.ingest()?;
        let cls = self.classify()?;
        let title_rules = self.title_rules().map_err(|e| Error::stage("extract", e))?;
        let rules = self
            .extraction_rules()
            .map_err(|e| Error::stage("extract", e))?;
        let unit = self.config.rules.unit;
        let parts = [
            self.hash_of(Stage::Ingest),
            self.hash_of(Stage::Classify),
            json(&rules.to_file()),
            json(&title_rules),
            json(&unit),
        ];
        let refs: Vec<&str> = parts.iter().map(String::as_str).collect();
        let v = self.cached(Stage::Extract, &refs, || {
            let attribution =
                attribute_corpus(&cls.articles, &ing.reports, &rules, &title_rules, unit)?;
            let unresolved_mentions = attribution
                .comments
                .iter()
                .map(|c| c.attribution.unresolved.len())
                .sum();
            Ok(Extracted {
                attribution,
                unresolved_mentions,
            })
        })?;
        self.extracted = Some(v.clone());
        Ok(v)
    }

    pub fn distribution(&mut self) -> Result<Rc<Distributed>> {
        if let Some(v) = &self.distributed {
            return Ok(v.clone());
        }
        let ext = self.extract()?;
        let parts = [self.hash_of(Stage::Extract)];
        let v = self.cached(Stage::Distribution, &[&parts[0]], || {
            distribute(&ext.attribution)
        })?;
        self.distributed = Some(v.clone());
        Ok(v)
    }

    pub fn features(&mut self) -> Result<Rc<FeatureWordTable>> {
        if let Some(v) = &self.features {
            return Ok(v.clone());
        }
        let ext = self.extract()?;
        let k = self.config.features.k;
        let parts = [self.hash_of(Stage::Extract), k.to_string()];
        let v = self.cached(Stage::Features, &[&parts[0], &parts[1]], || {
            let stats =
                ClassCorpusStats::from_attribution(&ext.attribution, Preprocessor::bundled());
            Ok(FeatureWordTable::build(&stats, k, bundled_nouns()))
        })?;
        self.features = Some(v.clone());
        Ok(v)
    }

    pub fn cluster(&mut self) -> Result<Rc<SweepResult>> {
        if let Some(v) = &self.clustered {
            return Ok(v.clone());
        }
        let ing = self.ingest()?;
        let grid = self.config.clustering.grid.clone();
        let parts = [self.hash_of(Stage::Ingest), grid.clone()];
        let v = self.cached(Stage::Cluster, &[&parts[0], &parts[1]], || {
            let grid = parse_grid(&grid)?;
            let embedder =
                TfIdfEmbedder::fit(ing.articles.iter().map(|a| a.abstract_text.as_str()));
            let vectors: Vec<AbstractVector> = ing
                .articles
                .iter()
                .map(|a| embedder.embed_article(&a.id, &a.abstract_text))
                .collect::<Result<_>>()?;
            sweep(&vectors, &grid)
        })?;
        self.clustered = Some(v.clone());
        Ok(v)
    }

    pub fn normalize(&mut self) -> Result<Rc<Normalized>> {
        if let Some(v) = &self.normalized {
            return Ok(v.clone());
        }
        let ing = self.ingest()?;
        let cl = self.cluster()?;
        let bib_path = self.config.corpus.bib.clone();
        let bib_digest = file_digest(&bib_path).map_err(|e| {
            Error::stage(
                "normalize",
                Error::Validation(format!("bibliography {}: {e}", bib_path.display())),
            )
        })?;
        let parts = [
            self.hash_of(Stage::Ingest),
            self.hash_of(Stage::Cluster),
            bib_digest,
        ];
        let v = self.cached(Stage::Normalize, &[&parts[0], &parts[1], &parts[2]], || {
            let bib = load_bib(&bib_path)?;
            let years: BTreeMap<&str, i32> = ing
                .articles
                .iter()
                .map(|a| (a.id.as_str(), a.year))
                .collect();
            let topics = topic_assignment(&cl.clusters);
            let mut placement = BTreeMap::new();
            let mut kept = Vec::new();
            let mut dropped = Vec::new();
            for r in bib {
                match (topics.get(&r.article_id), years.get(r.article_id.as_str())) {
                    (Some(&t), Some(&y)) => {
                        placement.insert(r.article_id.clone(), (t, y));
                        kept.push(r);
                    }
                    _ => dropped.push(r.article_id),
                }
            }
            if !dropped.is_empty() {
                log::warn!(
                    "{} bibliographic records have no corpus article",
                    dropped.len()
                );
            }
            let groups = topic_year_groups(&kept, &placement)?.len();
            Ok(Normalized {
                citations: pcsi(&kept, &placement)?,
                groups,
                dropped,
            })
        })?;
        self.normalized = Some(v.clone());
        Ok(v)
    }

    pub fn correlate(&mut self) -> Result<Rc<Correlated>> {
        if let Some(v) = &self.correlated {
            return Ok(v.clone());
        }
        let dist = self.distribution()?;
        let norm = self.normalize()?;
        let bib_path = self.config.corpus.bib.clone();
        let cfg = self.config.correlation.clone();
        let parts = [
            self.hash_of(Stage::Distribution),
            self.hash_of(Stage::Normalize),
            json(&cfg),
        ];
        let v = self.cached(Stage::Correlate, &[&parts[0], &parts[1], &parts[2]], || {
            let bib = load_bib(&bib_path)?;
            correlate(&dist, &norm, &bib, &cfg)
        })?;
        self.correlated = Some(v.clone());
        Ok(v)
    }

    /// Runs every stage and writes `report.json`, `timings.json`, tables and
    /// figures.
    pub fn report(&mut self) -> Result<RunReport> {
        let start = Instant::now();
        let r = report::build(self)?;
        report::write_outputs(self, &r).map_err(|e| Error::stage("report", e))?;
        self.timings.push(StageTiming {
            stage: Stage::Report.name().into(),
            seconds: start.elapsed().as_secs_f64(),
            cached: false,
        });
        std::fs::write(
            self.out.join("timings.json"),
            serde_json::to_string_pretty(&self.timings)? + "\n",
        )?;
        Ok(r)
    }

    /// Computes stages up to and including `stage`.
    pub fn run_until(&mut self, stage: Stage) -> Result<()> {
        match stage {
            Stage::Ingest => self.ingest().map(drop),
            Stage::Label => self.label().map(drop),
            Stage::Train => self.train().map(drop),
            Stage::Classify => self.classify().map(drop),
            Stage::Extract => self.extract().map(drop),
            Stage::Distribution => self.distribution().map(drop),
            Stage::Features => self.features().map(drop),
            Stage::Cluster => self.cluster().map(drop),
            Stage::Normalize => self.normalize().map(drop),
            Stage::Correlate => self.correlate().map(drop),
            Stage::Report => self.report().map(drop),
        }
    }
}

/// Full run; the configuration must carry a seed.
pub fn run(config: PipelineConfig) -> Result<RunReport> {
    config.require_seed()?;
    Pipeline::new(config)?.report()
}

/// Per-year and corpus distributions plus per-article structure shares.
pub fn distribute(attrs: &CorpusAttribution) -> Result<Distributed> {
    let years: BTreeSet<i32> = attrs.comments.iter().map(|c| c.year).collect();
    let mut out_years = Vec::new();
    for &year in &years {
        let d = distribution(attrs, Scope::Year(year))?;
        let mut single = [0; 4];
        let mut multiple = 0;
        for c in attrs
            .comments
            .iter()
            .filter(|c| c.year == year && c.is_covered())
        {
            let s = c.structures();
            if s.len() == 1 {
                if let Some(i) = s.iter().next().and_then(|l| l.index()) {
                    single[i] += 1;
                }
            } else {
                multiple += 1;
            }
        }
        out_years.push(YearDistribution {
            year,
            distribution: d,
            single,
            multiple,
        });
    }
    let corpus = distribution(attrs, Scope::Corpus)?;
    let mut per_article: BTreeMap<&str, (i32, usize, [usize; 4])> = BTreeMap::new();
    for c in &attrs.comments {
        let e = per_article
            .entry(c.article_id.as_str())
            .or_insert((c.year, 0, [0; 4]));
        e.1 += 1;
        for l in c.structures() {
            if let Some(i) = l.index() {
                e.2[i] += 1;
            }
        }
    }
    let articles: Vec<ArticleShare> = per_article
        .into_iter()
        .map(|(id, (year, n, counts))| ArticleShare {
            article_id: id.to_string(),
            year,
            comments: n,
            proportions: counts.map(|k| k as f64 / n as f64),
        })
        .collect();
    let mut average = [0.0; 4];
    for a in &articles {
        for (s, p) in average.iter_mut().zip(a.proportions) {
            *s += p;
        }
    }
    let n = articles.len().max(1) as f64;
    Ok(Distributed {
        years: out_years,
        corpus,
        articles,
        average: average.map(|s| s / n),
    })
}

fn column(records: &[ProportionRecord], j: usize) -> Vec<f64> {
    records.iter().map(|r| r.proportions[j]).collect()
}

/// Spearman, normality diagnostics, partitions, two-sample K-S, variable
/// summaries with VIF, and the NB models M1..M5.
pub fn correlate(
    dist: &Distributed,
    norm: &Normalized,
    bib: &[crate::corpus::BibRecord],
    cfg: &config::CorrelationConfig,
) -> Result<Correlated> {
    let mut notes = Vec::new();
    let by_id: BTreeMap<&str, &crate::corpus::BibRecord> =
        bib.iter().map(|b| (b.article_id.as_str(), b)).collect();
    let pcsi_of: BTreeMap<&str, f64> = norm
        .citations
        .iter()
        .map(|c| (c.article_id.as_str(), c.pcsi))
        .collect();
    let mut records = Vec::new();
    for a in &dist.articles {
        match (
            by_id.get(a.article_id.as_str()),
            pcsi_of.get(a.article_id.as_str()),
        ) {
            (Some(b), Some(&p)) => {
                let r = ProportionRecord {
                    article_id: a.article_id.clone(),
                    year: a.year,
                    proportions: a.proportions,
                    citations: b.citations,
                    pcsi: p,
                    controls: controls(b),
                };
                r.validate()?;
                records.push(r);
            }
            _ => notes.push(format!(
                "article {} has reviews but no bibliographic record",
                a.article_id
            )),
        }
    }
    if records.len() < cfg.partitions {
        return Err(Error::InvalidInput(format!(
            "{} articles with reviews and citations, {} partitions requested",
            records.len(),
            cfg.partitions
        )));
    }
    let pcsi_values: Vec<f64> = records.iter().map(|r| r.pcsi).collect();

    let mut spearman_rows = Vec::new();
    for (j, name) in PROPORTION_NAMES.iter().enumerate() {
        let row = match spearman(&column(&records, j), &pcsi_values) {
            Ok(c) => SpearmanRow {
                variable: name.to_string(),
                rho: Some(c.rho),
                p: Some(c.p),
                n: c.n,
            },
            Err(Error::Degenerate(why)) => {
                notes.push(format!("Spearman {name}: {why}"));
                SpearmanRow {
                    variable: name.to_string(),
                    rho: None,
                    p: None,
                    n: records.len(),
                }
            }
            Err(e) => return Err(e),
        };
        spearman_rows.push(row);
    }

    let ks_norm = match ks_normal(&pcsi_values) {
        Ok(r) => Some(r),
        Err(Error::Degenerate(why)) => {
            notes.push(format!("K-S normality: {why}"));
            None
        }
        Err(e) => return Err(e),
    };
    let qq = qq_points(&pcsi_values)?;

    let keyed: Vec<(String, f64)> = records
        .iter()
        .map(|r| (r.article_id.clone(), r.pcsi))
        .collect();
    let part = partition(&keyed, cfg.partitions)?;
    let index: BTreeMap<&str, &ProportionRecord> =
        records.iter().map(|r| (r.article_id.as_str(), r)).collect();
    let bin_props = |rank: usize| -> Vec<[f64; 4]> {
        part.bins[rank - 1]
            .ids
            .iter()
            .map(|id| index[id.as_str()].proportions)
            .collect()
    };
    let bin_proportions = part
        .bins
        .iter()
        .map(|b| {
            let ps = bin_props(b.rank);
            let mut m = [0.0; 4];
            for p in &ps {
                for j in 0..4 {
                    m[j] += p[j];
                }
            }
            BinProportions {
                rank: b.rank,
                mean_proportions: m.map(|s| s / ps.len() as f64),
            }
        })
        .collect();
    let (a, b) = (bin_props(cfg.compare[0]), bin_props(cfg.compare[1]));
    let mut ks = Vec::new();
    for (j, name) in PROPORTION_NAMES.iter().enumerate() {
        let xa: Vec<f64> = a.iter().map(|p| p[j]).collect();
        let xb: Vec<f64> = b.iter().map(|p| p[j]).collect();
        let r = ks_two_sample(&xa, &xb)?;
        ks.push(KsRow {
            variable: name.to_string(),
            d: r.d,
            p: r.p,
            n_a: r.n_a,
            n_b: r.n_b,
        });
    }

    let designs = model_designs(&records, &cfg.controls)?;
    for name in &cfg.controls {
        if !designs[0].1.names.contains(name) {
            notes.push(format!(
                "control {name} is constant over the analysed articles and was dropped"
            ));
        }
    }
    let full_names: Vec<String> = {
        let mut v = designs[0].1.names.clone();
        v.extend(PROPORTION_NAMES.iter().map(|s| s.to_string()));
        v
    };
    let full_columns: Vec<Vec<f64>> = {
        let mut v = designs[0].1.columns.clone();
        v.extend((0..4).map(|j| column(&records, j)));
        v
    };
    let vifs = match vif(&full_columns) {
        Ok(v) => v.into_iter().map(Some).collect(),
        Err(e @ (Error::Degenerate(_) | Error::InvalidInput(_))) => {
            notes.push(format!("VIF: {e}"));
            vec![None; full_columns.len()]
        }
        Err(e) => return Err(e),
    };
    let variables = full_names
        .iter()
        .zip(&full_columns)
        .zip(vifs)
        .map(|((name, col), vif)| VariableSummary {
            variable: name.clone(),
            max: col.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            min: col.iter().cloned().fold(f64::INFINITY, f64::min),
            mean: col.iter().sum::<f64>() / col.len() as f64,
            vif,
        })
        .collect();

    let y: Vec<f64> = records.iter().map(|r| r.citations as f64).collect();
    let mut models = Vec::new();
    for (model, design) in &designs {
        models.push(NamedFit {
            model: model.clone(),
            fit: nb_fit(design, &y)?,
        });
    }
    let overdispersion = match poisson_fit(&designs[0].1, &y) {
        Ok(p) => Some(overdispersion_test(&models[0].fit, &p)?),
        Err(e @ Error::NonConvergence(_)) => {
            notes.push(format!("Poisson fit for the overdispersion test: {e}"));
            None
        }
        Err(e) => return Err(e),
    };

    Ok(Correlated {
        records,
        spearman: spearman_rows,
        ks_normal: ks_norm,
        qq,
        partition: part,
        bin_proportions,
        compare: cfg.compare,
        ks,
        variables,
        models,
        overdispersion,
        notes,
    })
}
