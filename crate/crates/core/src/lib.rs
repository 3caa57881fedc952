//! Incremental detection of speech repairs and edit terms in POS-tagged
//! transcripts.
//!
//! The crate covers the full loop: corpus handling (inline repair markup,
//! reference labels, synthetic data), Kneser-Ney language models over words
//! and POS tags, information-theoretic feature extraction, cost-sensitive
//! random forests, the incremental detector itself, incremental evaluation
//! metrics, and training/sweep orchestration.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod forest;
pub mod lm;
pub mod pipeline;
pub mod sweep;
pub mod train;

pub use error::{Error, Result};
