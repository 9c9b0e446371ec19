//! Peer-review comment analytics.
//!
//! The crate labels article sections with IMRaD structures (title rules plus a
//! sentence-level hierarchical attention network), maps referee comments onto
//! those structures through position extraction, scores structure-specific
//! feature words, normalizes citations per topic and year, and runs the
//! correlation battery that relates comment distribution to citations.

pub mod citation;
pub mod corpus;
pub mod error;
pub mod features;
pub mod han;
pub mod pipeline;
pub mod position;
pub mod stats;
pub mod structure;
pub mod synthetic;
pub mod text;

pub use corpus::{
    Article, BibRecord, PaperType, ReviewComment, ReviewReport, Section, StructureLabel,
};
pub use error::{Error, Result};
