use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::attention::{AttentionCache, AttentionParams};
use super::lstm::{BiLstmCache, BiLstmParams};
use super::tensor::{axpy, softmax, Matrix};
use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 4;

/// Uniform init range for recurrent, attention and output weights.
pub const INIT_SCALE: f64 = 0.08;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HanConfig {
    /// Upper bound on vocabulary size, reserved ids included.
    pub vocab_size: usize,
    pub embed_dim: usize,
    /// Hidden units per direction.
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub max_sentences: usize,
    pub max_words_per_sentence: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub min_freq: usize,
}

impl Default for HanConfig {
    fn default() -> Self {
        Self {
            vocab_size: 20_000,
            embed_dim: 64,
            hidden_dim: 64,
            num_classes: NUM_CLASSES,
            max_sentences: 30,
            max_words_per_sentence: 40,
            seed: 0,
            learning_rate: 0.005,
            epochs: 10,
            batch_size: 16,
            min_freq: 2,
        }
    }
}

impl HanConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("max_sentences", self.max_sentences),
            ("max_words_per_sentence", self.max_words_per_sentence),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("han.{name} must be >= 1")));
            }
        }
        if self.num_classes != NUM_CLASSES {
            return Err(Error::Config(format!(
                "han.num_classes must be {NUM_CLASSES}"
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("han.learning_rate must be positive".into()));
        }
        Ok(())
    }

    /// Width of a bidirectional hidden state, also used as attention width.
    pub fn state_dim(&self) -> usize {
        2 * self.hidden_dim
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HanParams {
    /// Word embedding matrix `W_e` (vocabulary x embed_dim).
    pub embedding: Matrix,
    pub word_encoder: BiLstmParams,
    pub word_attention: AttentionParams,
    pub sentence_encoder: BiLstmParams,
    pub sentence_attention: AttentionParams,
    pub output_w: Matrix,
    pub output_b: Vec<f64>,
}

impl HanParams {
    pub fn zeros(config: &HanConfig, vocab_len: usize) -> Self {
        let (e, h, s) = (config.embed_dim, config.hidden_dim, config.state_dim());
        Self {
            embedding: Matrix::zeros(vocab_len, e),
            word_encoder: BiLstmParams::zeros(e, h),
            word_attention: AttentionParams::zeros(s, s),
            sentence_encoder: BiLstmParams::zeros(s, h),
            sentence_attention: AttentionParams::zeros(s, s),
            output_w: Matrix::zeros(NUM_CLASSES, s),
            output_b: vec![0.0; NUM_CLASSES],
        }
    }

    /// Seeded initialization: embeddings from N(0, 1/embed_dim), everything
    /// else uniform in `[-INIT_SCALE, INIT_SCALE]`, zero biases except the
    /// LSTM forget gates.
    pub fn init(config: &HanConfig, vocab_len: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (e, h, s) = (config.embed_dim, config.hidden_dim, config.state_dim());
        let normal = Normal::new(0.0, 1.0 / (e as f64).sqrt()).unwrap();
        let mut embedding = Matrix::zeros(vocab_len, e);
        for v in embedding.data.iter_mut().skip(e) {
            *v = normal.sample(&mut rng);
        }
        Self {
            embedding,
            word_encoder: BiLstmParams::init(e, h, INIT_SCALE, &mut rng),
            word_attention: AttentionParams::init(s, s, INIT_SCALE, &mut rng),
            sentence_encoder: BiLstmParams::init(s, h, INIT_SCALE, &mut rng),
            sentence_attention: AttentionParams::init(s, s, INIT_SCALE, &mut rng),
            output_w: Matrix::uniform(NUM_CLASSES, s, INIT_SCALE, &mut rng),
            output_b: vec![0.0; NUM_CLASSES],
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
        z
    }

    /// Every parameter tensor with a stable dotted name.
    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("embedding", &self.embedding.data[..]),
            (
                "word_encoder.forward.w",
                &self.word_encoder.forward.w.data[..],
            ),
            ("word_encoder.forward.b", &self.word_encoder.forward.b[..]),
            (
                "word_encoder.backward.w",
                &self.word_encoder.backward.w.data[..],
            ),
            ("word_encoder.backward.b", &self.word_encoder.backward.b[..]),
            ("word_attention.proj", &self.word_attention.proj.data[..]),
            ("word_attention.bias", &self.word_attention.bias[..]),
            ("word_attention.context", &self.word_attention.context[..]),
            (
                "sentence_encoder.forward.w",
                &self.sentence_encoder.forward.w.data[..],
            ),
            (
                "sentence_encoder.forward.b",
                &self.sentence_encoder.forward.b[..],
            ),
            (
                "sentence_encoder.backward.w",
                &self.sentence_encoder.backward.w.data[..],
            ),
            (
                "sentence_encoder.backward.b",
                &self.sentence_encoder.backward.b[..],
            ),
            (
                "sentence_attention.proj",
                &self.sentence_attention.proj.data[..],
            ),
            ("sentence_attention.bias", &self.sentence_attention.bias[..]),
            (
                "sentence_attention.context",
                &self.sentence_attention.context[..],
            ),
            ("output.w", &self.output_w.data[..]),
            ("output.b", &self.output_b[..]),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let HanParams {
            embedding,
            word_encoder,
            word_attention,
            sentence_encoder,
            sentence_attention,
            output_w,
            output_b,
        } = self;
        vec![
            ("embedding", &mut embedding.data[..]),
            (
                "word_encoder.forward.w",
                &mut word_encoder.forward.w.data[..],
            ),
            ("word_encoder.forward.b", &mut word_encoder.forward.b[..]),
            (
                "word_encoder.backward.w",
                &mut word_encoder.backward.w.data[..],
            ),
            ("word_encoder.backward.b", &mut word_encoder.backward.b[..]),
            ("word_attention.proj", &mut word_attention.proj.data[..]),
            ("word_attention.bias", &mut word_attention.bias[..]),
            ("word_attention.context", &mut word_attention.context[..]),
            (
                "sentence_encoder.forward.w",
                &mut sentence_encoder.forward.w.data[..],
            ),
            (
                "sentence_encoder.forward.b",
                &mut sentence_encoder.forward.b[..],
            ),
            (
                "sentence_encoder.backward.w",
                &mut sentence_encoder.backward.w.data[..],
            ),
            (
                "sentence_encoder.backward.b",
                &mut sentence_encoder.backward.b[..],
            ),
            (
                "sentence_attention.proj",
                &mut sentence_attention.proj.data[..],
            ),
            ("sentence_attention.bias", &mut sentence_attention.bias[..]),
            (
                "sentence_attention.context",
                &mut sentence_attention.context[..],
            ),
            ("output.w", &mut output_w.data[..]),
            ("output.b", &mut output_b[..]),
        ]
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// First tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.tensors()
            .into_iter()
            .find(|(_, t)| t.iter().any(|v| !v.is_finite()))
            .map(|(n, _)| n)
    }

    /// SHA-256 over the little-endian bytes of every tensor in order.
    pub fn checksum(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for (name, t) in self.tensors() {
            h.update(name.as_bytes());
            for v in t {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    fn check_shapes(&self, config: &HanConfig) -> Result<()> {
        let (e, s) = (config.embed_dim, config.state_dim());
        let ok = self.embedding.cols == e
            && self.word_encoder.forward.w.cols == e + config.hidden_dim
            && self.word_encoder.forward.w.rows == 4 * config.hidden_dim
            && self.sentence_encoder.forward.w.cols == s + config.hidden_dim
            && self.word_attention.proj.cols == s
            && self.sentence_attention.proj.cols == s
            && self.output_w.rows == NUM_CLASSES
            && self.output_w.cols == s;
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(
                "parameters do not match the configuration".into(),
            ))
        }
    }
}

/// A section as word-id sentences, unpadded; padding up to the configured
/// limits is implied and masked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionInput {
    pub sentences: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardTrace {
    /// `x_ki`: embedded words per sentence.
    pub word_vectors: Vec<Vec<Vec<f64>>>,
    /// `h_ki`: concatenated bidirectional word states.
    pub word_hidden: Vec<Vec<Vec<f64>>>,
    /// `a_ki` per sentence, padded to `max_words_per_sentence` with zeros.
    pub word_attention: Vec<Vec<f64>>,
    /// `S_k`: attention-pooled sentence vectors.
    pub sentence_vectors: Vec<Vec<f64>>,
    /// `h_k`: concatenated bidirectional sentence states.
    pub sentence_hidden: Vec<Vec<f64>>,
    /// `a_k`, padded to `max_sentences` with zeros.
    pub sentence_attention: Vec<f64>,
    /// `V`: the section representation.
    pub document: Vec<f64>,
    pub logits: Vec<f64>,
    pub class_probs: Vec<f64>,
}

impl ForwardTrace {
    pub fn predicted(&self) -> usize {
        argmax(&self.class_probs)
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

struct Cache {
    trace: ForwardTrace,
    word_lstm: Vec<BiLstmCache>,
    word_attn: Vec<AttentionCache>,
    sent_lstm: BiLstmCache,
    sent_attn: AttentionCache,
}

fn validate_input(config: &HanConfig, params: &HanParams, section: &SectionInput) -> Result<()> {
    params.check_shapes(config)?;
    if section.sentences.is_empty() {
        return Err(Error::Shape("section has no sentences".into()));
    }
    if section.sentences.len() > config.max_sentences {
        return Err(Error::Shape(format!(
            "{} sentences exceed max_sentences {}",
            section.sentences.len(),
            config.max_sentences
        )));
    }
    for (k, s) in section.sentences.iter().enumerate() {
        if s.is_empty() || s.len() > config.max_words_per_sentence {
            return Err(Error::Shape(format!(
                "sentence {k} has {} words (allowed 1..={})",
                s.len(),
                config.max_words_per_sentence
            )));
        }
        if let Some(&bad) = s.iter().find(|&&w| w as usize >= params.embedding.rows) {
            return Err(Error::Shape(format!(
                "word id {bad} outside vocabulary of {}",
                params.embedding.rows
            )));
        }
    }
    Ok(())
}

fn forward_cached(config: &HanConfig, params: &HanParams, section: &SectionInput) -> Result<Cache> {
    validate_input(config, params, section)?;
    let mut trace = ForwardTrace {
        word_vectors: Vec::new(),
        word_hidden: Vec::new(),
        word_attention: Vec::new(),
        sentence_vectors: Vec::new(),
        sentence_hidden: Vec::new(),
        sentence_attention: Vec::new(),
        document: Vec::new(),
        logits: Vec::new(),
        class_probs: Vec::new(),
    };
    let mut word_lstm = Vec::new();
    let mut word_attn = Vec::new();
    for sentence in &section.sentences {
        let xs: Vec<Vec<f64>> = sentence
            .iter()
            .map(|&w| params.embedding.row(w as usize).to_vec())
            .collect();
        let (hs, lc) = params.word_encoder.forward(&xs);
        let (s_k, ac) = params
            .word_attention
            .forward(&hs, config.max_words_per_sentence);
        trace.word_attention.push(ac.weights.clone());
        trace.word_vectors.push(xs);
        trace.word_hidden.push(hs);
        trace.sentence_vectors.push(s_k);
        word_lstm.push(lc);
        word_attn.push(ac);
    }
    let (hk, sent_lstm) = params.sentence_encoder.forward(&trace.sentence_vectors);
    let (v, sent_attn) = params.sentence_attention.forward(&hk, config.max_sentences);
    trace.sentence_attention = sent_attn.weights.clone();
    trace.sentence_hidden = hk;
    let mut logits = params.output_w.matvec(&v);
    for (l, b) in logits.iter_mut().zip(&params.output_b) {
        *l += b;
    }
    trace.class_probs = softmax(&logits);
    trace.logits = logits;
    trace.document = v;
    Ok(Cache {
        trace,
        word_lstm,
        word_attn,
        sent_lstm,
        sent_attn,
    })
}

/// Runs the network on one section.
pub fn forward(
    config: &HanConfig,
    params: &HanParams,
    section: &SectionInput,
) -> Result<ForwardTrace> {
    Ok(forward_cached(config, params, section)?.trace)
}

/// Cross-entropy for one example; accumulates `scale * dloss/dparams`.
fn backward_one(
    config: &HanConfig,
    params: &HanParams,
    section: &SectionInput,
    label: usize,
    scale: f64,
    grad: &mut HanParams,
) -> Result<f64> {
    let cache = forward_cached(config, params, section)?;
    let tr = &cache.trace;
    let loss = -tr.class_probs[label].max(f64::MIN_POSITIVE).ln();
    let mut dlogits = tr.class_probs.clone();
    dlogits[label] -= 1.0;
    dlogits.iter_mut().for_each(|d| *d *= scale);

    grad.output_w.add_outer(&dlogits, &tr.document);
    axpy(&mut grad.output_b, 1.0, &dlogits);
    let dv = params.output_w.matvec_t(&dlogits);

    let dhk = params.sentence_attention.backward(
        &tr.sentence_hidden,
        &cache.sent_attn,
        &dv,
        &mut grad.sentence_attention,
    );
    let dsk = params
        .sentence_encoder
        .backward(&cache.sent_lstm, &dhk, &mut grad.sentence_encoder);

    for (k, sentence) in section.sentences.iter().enumerate() {
        let dhs = params.word_attention.backward(
            &tr.word_hidden[k],
            &cache.word_attn[k],
            &dsk[k],
            &mut grad.word_attention,
        );
        let dxs = params
            .word_encoder
            .backward(&cache.word_lstm[k], &dhs, &mut grad.word_encoder);
        let e = config.embed_dim;
        for (&w, dx) in sentence.iter().zip(&dxs) {
            let row = &mut grad.embedding.data[w as usize * e..(w as usize + 1) * e];
            axpy(row, 1.0, dx);
        }
    }
    Ok(loss)
}

/// Mean cross-entropy over `batch` and its gradient for every parameter.
pub fn loss_and_grad(
    config: &HanConfig,
    params: &HanParams,
    batch: &[(SectionInput, usize)],
) -> Result<(f64, HanParams)> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let mut grad = params.zeros_like();
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for (section, label) in batch {
        if *label >= NUM_CLASSES {
            return Err(Error::InvalidInput(format!("label {label} out of range")));
        }
        loss += backward_one(config, params, section, *label, scale, &mut grad)? * scale;
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    if let Some(name) = grad.first_non_finite() {
        return Err(Error::NonFinite(format!("gradient of {name}")));
    }
    Ok((loss, grad))
}

/// Mean cross-entropy only.
pub fn loss(
    config: &HanConfig,
    params: &HanParams,
    batch: &[(SectionInput, usize)],
) -> Result<f64> {
    let mut total = 0.0;
    for (section, label) in batch {
        let tr = forward(config, params, section)?;
        total -= tr.class_probs[*label].max(f64::MIN_POSITIVE).ln();
    }
    Ok(total / batch.len() as f64)
}
