use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{
    argmax, forward, loss_and_grad, HanConfig, HanParams, SectionInput, NUM_CLASSES,
};
use super::vocab::{sentence_split, Vocab, UNK};
use crate::corpus::{Article, StructureLabel};
use crate::error::{Error, Result};
use crate::structure::{LabeledDataset, LabeledExample};

pub const CHECKPOINT_FORMAT: &str = "prc-han/1";

/// Mean batch loss above which training is declared diverged.
pub const DIVERGENCE_LOSS: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HanModel {
    pub format: String,
    pub config: HanConfig,
    pub vocab: Vocab,
    pub params: HanParams,
}

impl HanModel {
    pub fn encode(&self, body: &str) -> Result<SectionInput> {
        sentence_split(body, &self.vocab, &self.config)
    }

    /// Class probabilities for a section body. Bodies without any word are
    /// scored as a single unknown token.
    pub fn predict_probs(&self, body: &str) -> Result<Vec<f64>> {
        let input = self.encode(body).unwrap_or(SectionInput {
            sentences: vec![vec![UNK]],
        });
        Ok(forward(&self.config, &self.params, &input)?.class_probs)
    }

    pub fn predict(&self, body: &str) -> Result<StructureLabel> {
        let p = self.predict_probs(body)?;
        Ok(StructureLabel::from_index(argmax(&p)).expect("class index"))
    }

    pub fn checksum(&self) -> String {
        self.params.checksum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut m: HanModel = serde_json::from_str(s)?;
        if m.format != CHECKPOINT_FORMAT {
            return Err(Error::Validation(format!(
                "unsupported checkpoint format `{}`",
                m.format
            )));
        }
        m.config.validate()?;
        m.vocab.reindex();
        if m.vocab.len() != m.params.embedding.rows {
            return Err(Error::Shape("vocabulary and embedding sizes differ".into()));
        }
        if let Some(name) = m.params.first_non_finite() {
            return Err(Error::NonFinite(name.into()));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_macro_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model: HanModel,
    pub history: Vec<EpochMetrics>,
    /// Epoch whose parameters were kept; 0 means the initialization.
    pub best_epoch: usize,
}

struct Adam {
    m: HanParams,
    v: HanParams,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(params: &HanParams, lr: f64) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut HanParams, grad: &HanParams) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        let grads = grad.tensors();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for ((((_, p), (_, g)), (_, m)), (_, v)) in
            params.tensors_mut().into_iter().zip(grads).zip(ms).zip(vs)
        {
            for i in 0..p.len() {
                m[i] = Self::BETA1 * m[i] + (1.0 - Self::BETA1) * g[i];
                v[i] = Self::BETA2 * v[i] + (1.0 - Self::BETA2) * g[i] * g[i];
                p[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + Self::EPS);
            }
        }
    }
}

fn encode_examples(
    examples: &[LabeledExample],
    vocab: &Vocab,
    config: &HanConfig,
) -> Vec<(SectionInput, usize)> {
    examples
        .iter()
        .filter_map(|e| {
            let label = e.label.index()?;
            match sentence_split(&e.text, vocab, config) {
                Ok(input) => Some((input, label)),
                Err(_) => {
                    log::warn!("skipping {}#{}: empty body", e.article_id, e.ordinal);
                    None
                }
            }
        })
        .collect()
}

fn predictions(
    config: &HanConfig,
    params: &HanParams,
    data: &[(SectionInput, usize)],
) -> Result<Vec<usize>> {
    data.iter()
        .map(|(x, _)| Ok(argmax(&forward(config, params, x)?.class_probs)))
        .collect()
}

/// Trains from a fresh seeded initialization with Adam, keeping the
/// parameters of the epoch with the best validation Macro-F1 (training
/// Macro-F1 when the validation split is empty).
pub fn train(config: &HanConfig, dataset: &LabeledDataset) -> Result<TrainOutcome> {
    config.validate()?;
    let vocab = Vocab::build(
        dataset.train.iter().map(|e| e.text.as_str()),
        config.min_freq,
        config.vocab_size,
    );
    let train_set = encode_examples(&dataset.train, &vocab, config);
    let val_set = encode_examples(&dataset.val, &vocab, config);
    if train_set.is_empty() {
        return Err(Error::InvalidInput("training split is empty".into()));
    }
    let mut params = HanParams::init(config, vocab.len());
    let mut best = params.clone();
    let mut best_score = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut history = Vec::with_capacity(config.epochs);
    let mut adam = Adam::new(&params, config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(SectionInput, usize)> =
                chunk.iter().map(|&i| train_set[i].clone()).collect();
            let (loss, grad) = match loss_and_grad(config, &params, &batch) {
                Ok(r) => r,
                Err(Error::NonFinite(what)) => {
                    log::error!("non-finite {what} at epoch {epoch}");
                    return Err(Error::Diverged {
                        epoch,
                        loss: f64::NAN,
                    });
                }
                Err(e) => return Err(e),
            };
            if loss > DIVERGENCE_LOSS {
                return Err(Error::Diverged { epoch, loss });
            }
            total += loss * batch.len() as f64;
            adam.step(&mut params, &grad);
        }
        let train_loss = total / train_set.len() as f64;
        let train_pred = predictions(config, &params, &train_set)?;
        let train_cm = ConfusionMatrix::from_pairs(
            train_set
                .iter()
                .map(|(_, y)| *y)
                .zip(train_pred.iter().copied()),
        );
        let train_accuracy = train_cm.accuracy();
        let val_macro_f1 = if val_set.is_empty() {
            None
        } else {
            let pred = predictions(config, &params, &val_set)?;
            let cm = ConfusionMatrix::from_pairs(val_set.iter().map(|(_, y)| *y).zip(pred));
            Some(cm.metrics().macro_f1)
        };
        let score = val_macro_f1.unwrap_or_else(|| train_cm.metrics().macro_f1);
        log::info!(
            "epoch {epoch}: loss {train_loss:.6} train acc {train_accuracy:.4} score {score:.4}"
        );
        if score > best_score {
            best_score = score;
            best = params.clone();
            best_epoch = epoch;
        }
        history.push(EpochMetrics {
            epoch,
            train_loss,
            train_accuracy,
            val_macro_f1,
        });
    }
    if config.epochs == 0 {
        best = params;
    }
    Ok(TrainOutcome {
        model: HanModel {
            format: CHECKPOINT_FORMAT.into(),
            config: config.clone(),
            vocab,
            params: best,
        },
        history,
        best_epoch,
    })
}

/// Rows are true classes, columns predictions, both in I, M, R, D order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix(pub [[u64; NUM_CLASSES]; NUM_CLASSES]);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    /// Share of each true class predicted correctly; `None` when the class
    /// has no examples.
    pub per_class_accuracy: [Option<f64>; NUM_CLASSES],
    pub per_class_precision: [Option<f64>; NUM_CLASSES],
    pub per_class_f1: [Option<f64>; NUM_CLASSES],
}

impl ClassificationMetrics {
    pub fn csv_header() -> [&'static str; 8] {
        [
            "model",
            "macro_p",
            "macro_r",
            "macro_f1",
            "accuracy_i",
            "accuracy_m",
            "accuracy_r",
            "accuracy_d",
        ]
    }

    pub fn csv_row(&self, model: &str) -> Vec<String> {
        let mut row = vec![
            model.to_string(),
            format!("{:.4}", self.macro_precision),
            format!("{:.4}", self.macro_recall),
            format!("{:.4}", self.macro_f1),
        ];
        row.extend(
            self.per_class_accuracy
                .iter()
                .map(|a| a.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"))),
        );
        row
    }
}

impl ConfusionMatrix {
    pub fn from_pairs<I: IntoIterator<Item = (usize, usize)>>(pairs: I) -> Self {
        let mut m = Self::default();
        for (truth, pred) in pairs {
            m.0[truth][pred] += 1;
        }
        m
    }

    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let correct: u64 = (0..NUM_CLASSES).map(|c| self.0[c][c]).sum();
        match self.total() {
            0 => 0.0,
            n => correct as f64 / n as f64,
        }
    }

    pub fn metrics(&self) -> ClassificationMetrics {
        let mut out = ClassificationMetrics {
            macro_precision: 0.0,
            macro_recall: 0.0,
            macro_f1: 0.0,
            accuracy: self.accuracy(),
            per_class_accuracy: [None; NUM_CLASSES],
            per_class_precision: [None; NUM_CLASSES],
            per_class_f1: [None; NUM_CLASSES],
        };
        let mut defined = 0usize;
        for c in 0..NUM_CLASSES {
            let tp = self.0[c][c] as f64;
            let support: u64 = self.0[c].iter().sum();
            let predicted: u64 = (0..NUM_CLASSES).map(|r| self.0[r][c]).sum();
            if support == 0 {
                log::warn!(
                    "class {c} absent from the evaluation set; excluded from macro averages"
                );
                continue;
            }
            let recall = tp / support as f64;
            let precision = if predicted == 0 {
                0.0
            } else {
                tp / predicted as f64
            };
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            out.per_class_accuracy[c] = Some(recall);
            out.per_class_precision[c] = Some(precision);
            out.per_class_f1[c] = Some(f1);
            out.macro_precision += precision;
            out.macro_recall += recall;
            out.macro_f1 += f1;
            defined += 1;
        }
        if defined > 0 {
            let d = defined as f64;
            out.macro_precision /= d;
            out.macro_recall /= d;
            out.macro_f1 /= d;
        }
        out
    }
}

pub fn evaluate(
    model: &HanModel,
    testset: &[LabeledExample],
) -> Result<(ConfusionMatrix, ClassificationMetrics)> {
    let mut cm = ConfusionMatrix::default();
    for e in testset {
        let Some(truth) = e.label.index() else {
            return Err(Error::InvalidInput(format!(
                "{}#{} is unlabeled",
                e.article_id, e.ordinal
            )));
        };
        let pred = argmax(&model.predict_probs(&e.text)?);
        cm.0[truth][pred] += 1;
    }
    let m = cm.metrics();
    Ok((cm, m))
}

/// Labels every `Unknown` section with the model's argmax class; other
/// sections are left untouched.
pub fn classify_others(model: &HanModel, articles: &[Article]) -> Result<Vec<Article>> {
    let mut out = articles.to_vec();
    for a in &mut out {
        for s in &mut a.sections {
            if s.label == StructureLabel::Unknown {
                s.label = model.predict(&s.body)?;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let cm = ConfusionMatrix::from_pairs((0..4).flat_map(|c| [(c, c), (c, c)]));
        let m = cm.metrics();
        assert_eq!(
            (m.macro_precision, m.macro_recall, m.macro_f1, m.accuracy),
            (1.0, 1.0, 1.0, 1.0)
        );
        assert_eq!(m.per_class_accuracy, [Some(1.0); 4]);
    }

    #[test]
    fn single_class_predictions() {
        let cm = ConfusionMatrix::from_pairs((0..4).flat_map(|c| [(c, 0), (c, 0)]));
        let m = cm.metrics();
        assert_eq!(
            m.per_class_accuracy,
            [Some(1.0), Some(0.0), Some(0.0), Some(0.0)]
        );
    }

    #[test]
    fn hand_computed_metrics() {
        // rows truth, cols prediction
        let cm = ConfusionMatrix([[8, 2, 0, 0], [1, 6, 3, 0], [0, 0, 10, 0], [0, 5, 0, 5]]);
        let m = cm.metrics();
        let p = [8.0 / 9.0, 6.0 / 13.0, 10.0 / 13.0, 1.0];
        let r = [0.8, 0.6, 1.0, 0.5];
        let f: Vec<f64> = p
            .iter()
            .zip(&r)
            .map(|(p, r)| 2.0 * p * r / (p + r))
            .collect();
        assert!((m.macro_precision - p.iter().sum::<f64>() / 4.0).abs() < 1e-15);
        assert!((m.macro_recall - 0.725).abs() < 1e-15);
        assert!((m.macro_f1 - f.iter().sum::<f64>() / 4.0).abs() < 1e-15);
        assert!((m.accuracy - 29.0 / 40.0).abs() < 1e-15);
    }

    #[test]
    fn absent_class_is_undefined() {
        let cm = ConfusionMatrix([[3, 0, 0, 0], [0, 3, 0, 0], [0, 0, 3, 0], [0; 4]]);
        let m = cm.metrics();
        assert_eq!(m.per_class_accuracy[3], None);
        assert_eq!(m.macro_f1, 1.0);
        assert_eq!(ClassificationMetrics::csv_row(&m, "han")[7], "undefined");
    }
}
