use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::SplitterConfig;
use crate::error::{Error, Result};
use crate::han::HanConfig;
use crate::position::CountingUnit;
use crate::stats::CONTROL_NAMES;
use crate::structure::SplitRatios;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusPaths {
    pub articles: PathBuf,
    pub reviews: PathBuf,
    pub bib: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RulePaths {
    /// Explicit position rules; the bundled set when absent.
    pub extraction: Option<PathBuf>,
    /// Section-title feature phrases (JSON); the bundled table when absent.
    pub titles: Option<PathBuf>,
    pub unit: CountingUnit,
}

impl Default for RulePaths {
    fn default() -> Self {
        Self {
            extraction: None,
            titles: None,
            unit: CountingUnit::Comment,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SplitScheme {
    /// Train / validation / test 6:2:2.
    #[default]
    Deep,
    /// Train / test 8:2.
    Shallow,
}

impl SplitScheme {
    pub fn ratios(self) -> SplitRatios {
        match self {
            SplitScheme::Deep => SplitRatios::DEEP,
            SplitScheme::Shallow => SplitRatios::SHALLOW,
        }
    }
}

/// HAN hyperparameters and dataset sampling. The model seed is replaced by
/// the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    /// Examples sampled per class for the balanced dataset.
    pub n_per_class: usize,
    pub split: SplitScheme,
    #[serde(flatten)]
    pub model: HanConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            n_per_class: 2743,
            split: SplitScheme::Deep,
            model: HanConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub k: usize,
    pub top: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { k: 1000, top: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    /// Threshold grid as `start:stop:step`.
    pub grid: String,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            grid: "0.5:0.95:0.05".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelationConfig {
    pub partitions: usize,
    /// Partition ranks (1 = most cited) compared by the two-sample K-S test.
    pub compare: [usize; 2],
    /// Control variables of the regression models.
    pub controls: Vec<String>,
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        Self {
            partitions: 10,
            compare: [1, 9],
            controls: CONTROL_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    pub corpus: CorpusPaths,
    #[serde(default)]
    pub splitter: SplitterConfig,
    #[serde(default)]
    pub rules: RulePaths,
    #[serde(default)]
    pub han: TrainingConfig,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default)]
    pub clustering: ClusterConfig,
    #[serde(default)]
    pub correlation: CorrelationConfig,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a TOML file; relative paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            config.resolve_relative(dir);
        }
        Ok(config)
    }

    pub fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        fix(&mut self.corpus.articles);
        fix(&mut self.corpus.reviews);
        fix(&mut self.corpus.bib);
        if let Some(p) = self.rules.extraction.as_mut() {
            fix(p);
        }
        if let Some(p) = self.rules.titles.as_mut() {
            fix(p);
        }
    }

    /// Applies a `section.key=value` override; the value is parsed as a TOML
    /// value, falling back to a plain string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let mut root = toml::Value::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let mut node = &mut root;
        let parts: Vec<&str> = key.trim().split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = node
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("`{key}` does not name a config key")))?;
            if i + 1 == parts.len() {
                table.insert(part.to_string(), value.clone());
                break;
            }
            node = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
        *self = root
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("override `{key}`: {e}")))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for (name, path) in [
            ("articles", &self.corpus.articles),
            ("reviews", &self.corpus.reviews),
        ] {
            if !path.is_file() {
                return Err(Error::Validation(format!(
                    "corpus.{name}: {} does not exist",
                    path.display()
                )));
            }
        }
        for path in [&self.rules.extraction, &self.rules.titles]
            .into_iter()
            .flatten()
        {
            if !path.is_file() {
                return Err(Error::Validation(format!(
                    "rule file {} does not exist",
                    path.display()
                )));
            }
        }
        self.han.model.validate()?;
        if self.han.n_per_class == 0 {
            return Err(Error::Config("han.n_per_class must be positive".into()));
        }
        if self.features.k == 0 {
            return Err(Error::Config("features.k must be positive".into()));
        }
        crate::citation::parse_grid(&self.clustering.grid)?;
        let c = &self.correlation;
        if c.partitions < 2
            || c.compare.iter().any(|r| *r == 0 || *r > c.partitions)
            || c.compare[0] == c.compare[1]
        {
            return Err(Error::Config(format!(
                "correlation.compare {:?} must name two distinct partitions in 1..={}",
                c.compare, c.partitions
            )));
        }
        for name in &c.controls {
            if !CONTROL_NAMES.contains(&name.as_str()) {
                return Err(Error::Config(format!("unknown control variable {name}")));
            }
        }
        Ok(())
    }

    /// The seed, required for a full run.
    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("a seed is required: pass --seed or set `seed`".into()))
    }

    /// SHA-256 of the configuration without its output directory.
    pub fn checksum(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        hex::encode(Sha256::digest(
            serde_json::to_vec(&c).expect("config serializes"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 7
output_dir = "out"
[corpus]
articles = "a.jsonl"
reviews = "r.jsonl"
bib = "b.jsonl"
"#;

    #[test]
    fn defaults_fill_missing_sections() {
        let c = PipelineConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.correlation.partitions, 10);
        assert_eq!(c.han.model.epochs, HanConfig::default().epochs);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(PipelineConfig::from_toml(&format!("{MINIMAL}\n[features]\nkk = 3\n")).is_err());
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let mut c = PipelineConfig::from_toml(MINIMAL).unwrap();
        c.set("han.epochs=3").unwrap();
        c.set("features.k=50").unwrap();
        c.set("clustering.grid=0.2:0.4:0.1").unwrap();
        c.set("seed=11").unwrap();
        assert_eq!(
            (c.han.model.epochs, c.features.k, c.seed),
            (3, 50, Some(11))
        );
        assert_eq!(c.clustering.grid, "0.2:0.4:0.1");
        assert!(c.set("features.k=abc").is_err());
        assert!(c.set("nonsense").is_err());
    }

    #[test]
    fn checksum_ignores_output_dir() {
        let a = PipelineConfig::from_toml(MINIMAL).unwrap();
        let mut b = a.clone();
        b.output_dir = "elsewhere".into();
        assert_eq!(a.checksum(), b.checksum());
        b.seed = Some(8);
        assert_ne!(a.checksum(), b.checksum());
    }
}
