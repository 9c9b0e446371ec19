//! Topic clustering of abstracts and PCSI citation normalization.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::BibRecord;
use crate::error::{Error, Result};
use crate::text::Preprocessor;

/// Absolute slack applied to similarity comparisons so that values equal up
/// to rounding compare as equal.
pub const SIM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractVector {
    pub article_id: String,
    pub v: Vec<f64>,
}

/// Turns an abstract into a fixed-length vector.
pub trait EmbeddingProvider {
    fn dim(&self) -> usize;
    fn embed(&self, abstract_text: &str) -> Result<Vec<f64>>;

    fn embed_article(&self, article_id: &str, abstract_text: &str) -> Result<AbstractVector> {
        Ok(AbstractVector {
            article_id: article_id.to_string(),
            v: self.embed(abstract_text)?,
        })
    }
}

/// L2-normalized TF-IDF bag of words over a fitted vocabulary, with
/// smoothed idf `ln((1 + N) / (1 + df)) + 1`.
#[derive(Debug, Clone)]
pub struct TfIdfEmbedder {
    pub terms: Vec<String>,
    pub idf: Vec<f64>,
    index: HashMap<String, usize>,
    pre: Option<Preprocessor>,
}

impl TfIdfEmbedder {
    pub fn fit<'a, I: IntoIterator<Item = &'a str>>(abstracts: I) -> Self {
        Self::fit_with(abstracts, Preprocessor::bundled().clone())
    }

    pub fn fit_with<'a, I: IntoIterator<Item = &'a str>>(abstracts: I, pre: Preprocessor) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        let mut n = 0usize;
        for a in abstracts {
            n += 1;
            let mut toks = pre.preprocess(a);
            toks.sort();
            toks.dedup();
            for t in toks {
                *df.entry(t).or_default() += 1;
            }
        }
        let terms: Vec<String> = df.keys().cloned().collect();
        let idf = df
            .values()
            .map(|&d| ((1.0 + n as f64) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            terms,
            idf,
            index,
            pre: Some(pre),
        }
    }

    fn preprocessor(&self) -> &Preprocessor {
        self.pre.as_ref().unwrap_or_else(|| Preprocessor::bundled())
    }
}

impl EmbeddingProvider for TfIdfEmbedder {
    fn dim(&self) -> usize {
        self.terms.len()
    }

    fn embed(&self, abstract_text: &str) -> Result<Vec<f64>> {
        if abstract_text.trim().is_empty() {
            return Err(Error::InvalidInput("empty abstract".into()));
        }
        let mut v = vec![0.0; self.terms.len()];
        for t in self.preprocessor().preprocess(abstract_text) {
            if let Some(&i) = self.index.get(&t) {
                v[i] += self.idf[i];
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!(
            "vector lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::InvalidInput("cosine of a zero vector".into()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: usize,
    pub founding_center: AbstractVector,
    pub members: Vec<AbstractVector>,
}

impl Cluster {
    pub fn member_ids(&self) -> Vec<&str> {
        self.members.iter().map(|m| m.article_id.as_str()).collect()
    }

    pub fn centroid(&self) -> Vec<f64> {
        let d = self.founding_center.v.len();
        let mut c = vec![0.0; d];
        for m in &self.members {
            for (ci, x) in c.iter_mut().zip(&m.v) {
                *ci += x;
            }
        }
        let n = self.members.len() as f64;
        c.iter_mut().for_each(|x| *x /= n);
        c
    }
}

/// Single pass in input order: each vector joins the cluster whose founding
/// center is most similar (earliest on ties) if that similarity reaches
/// `threshold`, otherwise it founds a new cluster.
pub fn allocate(vectors: &[AbstractVector], threshold: f64) -> Result<Vec<Cluster>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "threshold {threshold} outside (0, 1]"
        )));
    }
    let mut clusters: Vec<Cluster> = Vec::new();
    for v in vectors {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in clusters.iter().enumerate() {
            let s = cosine(&v.v, &c.founding_center.v)?;
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        match best {
            Some((i, s)) if s >= threshold - SIM_TOLERANCE => clusters[i].members.push(v.clone()),
            _ => clusters.push(Cluster {
                id: clusters.len(),
                founding_center: v.clone(),
                members: vec![v.clone()],
            }),
        }
    }
    Ok(clusters)
}

/// One pass over clusters in founding order: a member moves to a later
/// cluster whose founding center is strictly more similar than its own
/// (the most similar such cluster, earliest on ties). Clusters left empty
/// are dropped and the rest renumbered.
pub fn transfer(mut clusters: Vec<Cluster>) -> Result<Vec<Cluster>> {
    for i in 0..clusters.len() {
        let members = std::mem::take(&mut clusters[i].members);
        let mut stay = Vec::with_capacity(members.len());
        for m in members {
            let own = cosine(&m.v, &clusters[i].founding_center.v)?;
            let mut best: Option<(usize, f64)> = None;
            for (j, c) in clusters.iter().enumerate().skip(i + 1) {
                let s = cosine(&m.v, &c.founding_center.v)?;
                if s > own + SIM_TOLERANCE && best.is_none_or(|(_, b)| s > b) {
                    best = Some((j, s));
                }
            }
            match best {
                Some((j, _)) => clusters[j].members.push(m),
                None => stay.push(m),
            }
        }
        clusters[i].members = stay;
    }
    clusters.retain(|c| !c.members.is_empty());
    for (i, c) in clusters.iter_mut().enumerate() {
        c.id = i;
    }
    Ok(clusters)
}

/// Davies-Bouldin index with distance `1 - cosine`, member-mean centroids
/// and scatter equal to the mean member-to-centroid distance.
pub fn dbi(clusters: &[Cluster]) -> Result<f64> {
    if clusters.len() < 2 {
        return Err(Error::InvalidInput(
            "DBI needs at least two clusters".into(),
        ));
    }
    let centroids: Vec<Vec<f64>> = clusters.iter().map(Cluster::centroid).collect();
    let mut scatter = Vec::with_capacity(clusters.len());
    for (c, cen) in clusters.iter().zip(&centroids) {
        let mut s = 0.0;
        for m in &c.members {
            s += 1.0 - cosine(&m.v, cen)?;
        }
        scatter.push(s / c.members.len() as f64);
    }
    let k = clusters.len();
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = f64::NEG_INFINITY;
        for j in 0..k {
            if i == j {
                continue;
            }
            let d = 1.0 - cosine(&centroids[i], &centroids[j])?;
            if d <= SIM_TOLERANCE {
                return Err(Error::Degenerate(format!(
                    "clusters {i} and {j} share a centroid"
                )));
            }
            worst = worst.max((scatter[i] + scatter[j]) / d);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

pub fn cluster(vectors: &[AbstractVector], threshold: f64) -> Result<Vec<Cluster>> {
    transfer(allocate(vectors, threshold)?)
}

/// Parses `start:stop:step` into an inclusive grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("threshold grid `{spec}`: {e}")))?;
    let [start, stop, step] = parts[..] else {
        return Err(Error::Config(format!(
            "threshold grid `{spec}` is not start:stop:step"
        )));
    };
    if !(step > 0.0) || stop < start {
        return Err(Error::Config(format!("threshold grid `{spec}` is empty")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub clusters: usize,
    /// `None` when fewer than two clusters form or the clustering is degenerate.
    pub dbi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub best_threshold: f64,
    pub clusters: Vec<Cluster>,
}

/// Clusters at every grid threshold and keeps the one with the smallest DBI
/// (earliest threshold on ties).
pub fn sweep(vectors: &[AbstractVector], grid: &[f64]) -> Result<SweepResult> {
    let mut points = Vec::new();
    let mut best: Option<(f64, f64, Vec<Cluster>)> = None;
    for &t in grid {
        let cl = cluster(vectors, t)?;
        let d = if cl.len() >= 2 {
            match dbi(&cl) {
                Ok(d) => Some(d),
                Err(Error::Degenerate(_)) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        points.push(SweepPoint {
            threshold: t,
            clusters: cl.len(),
            dbi: d,
        });
        if let Some(d) = d {
            if best.as_ref().is_none_or(|(_, b, _)| d < *b) {
                best = Some((t, d, cl));
            }
        }
    }
    let (best_threshold, _, clusters) = best.ok_or_else(|| {
        Error::Degenerate("no threshold in the grid produced two or more clusters".into())
    })?;
    Ok(SweepResult {
        points,
        best_threshold,
        clusters,
    })
}

/// Topic id per article, in cluster order.
pub fn topic_assignment(clusters: &[Cluster]) -> BTreeMap<String, usize> {
    clusters
        .iter()
        .flat_map(|c| c.members.iter().map(move |m| (m.article_id.clone(), c.id)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicYearGroup {
    pub topic: usize,
    pub year: i32,
    pub article_ids: Vec<String>,
    pub citations: Vec<u64>,
    /// Mean of `ln x` over cited members.
    pub mean_log: Option<f64>,
    /// Sample standard deviation of `ln x` over cited members.
    pub sd_log: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCitation {
    pub article_id: String,
    pub topic: usize,
    pub year: i32,
    pub raw: u64,
    pub z: Option<f64>,
    pub pcsi: f64,
}

fn mean_sd(ys: &[f64]) -> (Option<f64>, Option<f64>) {
    if ys.is_empty() {
        return (None, None);
    }
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let sd = (ys.len() >= 2)
        .then(|| (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), sd)
}

fn standardize(x: f64, mean: Option<f64>, sd: Option<f64>) -> (Option<f64>, f64) {
    if x == 0.0 {
        return (None, 0.0);
    }
    let z = match (mean, sd) {
        (Some(m), Some(s)) if s > SIM_TOLERANCE => (x.ln() - m) / s,
        _ => 0.0,
    };
    (Some(z), z.exp())
}

/// `(z, pcsi)` for every member of one topic-year group of citation values.
pub fn normalize_group(citations: &[f64]) -> Result<Vec<(Option<f64>, f64)>> {
    if let Some(bad) = citations.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::InvalidInput(format!("citation value {bad}")));
    }
    let ys: Vec<f64> = citations
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|x| x.ln())
        .collect();
    let (mean, sd) = mean_sd(&ys);
    Ok(citations
        .iter()
        .map(|&x| standardize(x, mean, sd))
        .collect())
}

/// Groups articles by (topic, year). `placement` maps article id to its
/// topic and publication year.
pub fn topic_year_groups(
    bib: &[BibRecord],
    placement: &BTreeMap<String, (usize, i32)>,
) -> Result<Vec<TopicYearGroup>> {
    let mut groups: BTreeMap<(usize, i32), TopicYearGroup> = BTreeMap::new();
    for r in bib {
        let &(topic, year) = placement.get(&r.article_id).ok_or_else(|| {
            Error::InvalidInput(format!("article {} has no topic assignment", r.article_id))
        })?;
        let g = groups
            .entry((topic, year))
            .or_insert_with(|| TopicYearGroup {
                topic,
                year,
                article_ids: Vec::new(),
                citations: Vec::new(),
                mean_log: None,
                sd_log: None,
            });
        g.article_ids.push(r.article_id.clone());
        g.citations.push(r.citations);
    }
    for g in groups.values_mut() {
        let ys: Vec<f64> = g
            .citations
            .iter()
            .filter(|&&x| x > 0)
            .map(|&x| (x as f64).ln())
            .collect();
        (g.mean_log, g.sd_log) = mean_sd(&ys);
    }
    Ok(groups.into_values().collect())
}

/// PCSI: 0 for uncited articles, otherwise `exp((ln x - mean) / sd)` within
/// the topic-year group. Groups with one cited member or zero spread give
/// `z = 0`. Output follows the order of `bib`.
pub fn pcsi(
    bib: &[BibRecord],
    placement: &BTreeMap<String, (usize, i32)>,
) -> Result<Vec<NormalizedCitation>> {
    let groups = topic_year_groups(bib, placement)?;
    let stats: BTreeMap<(usize, i32), (Option<f64>, Option<f64>)> = groups
        .iter()
        .map(|g| ((g.topic, g.year), (g.mean_log, g.sd_log)))
        .collect();
    bib.iter()
        .map(|r| {
            let (topic, year) = placement[&r.article_id];
            let (mean, sd) = stats[&(topic, year)];
            let (z, pcsi) = standardize(r.citations as f64, mean, sd);
            Ok(NormalizedCitation {
                article_id: r.article_id.clone(),
                topic,
                year,
                raw: r.citations,
                z,
                pcsi,
            })
        })
        .collect()
}
