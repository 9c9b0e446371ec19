//! Sentence-level hierarchical attention network.
//!
//! Words are embedded, encoded by a bidirectional LSTM and pooled with
//! additive attention into sentence vectors; sentences go through a second
//! BiLSTM and attention layer into a section vector `V`, which a softmax
//! layer maps onto the four IMRaD classes. Gradients are derived by hand.

pub mod attention;
pub mod gradcheck;
pub mod lstm;
pub mod model;
pub mod tensor;
pub mod train;
pub mod vocab;

pub use model::{
    forward, loss, loss_and_grad, ForwardTrace, HanConfig, HanParams, SectionInput, NUM_CLASSES,
};
pub use train::{
    classify_others, evaluate, train, ClassificationMetrics, ConfusionMatrix, EpochMetrics,
    HanModel, TrainOutcome,
};
pub use vocab::{sentence_split, split_sentences, Vocab, PAD, UNK};
