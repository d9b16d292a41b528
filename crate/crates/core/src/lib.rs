//! Analytics over financial-advisor notes: text preprocessing, LDA topic
//! modeling with C_v coherence, skip-gram embeddings, keyword tagging,
//! note/transaction feature engineering and cash-out classifiers, plus a
//! synthetic data generator with planted ground truth.

pub mod classify;
pub mod coherence;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod features;
pub mod io;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod tagging;
pub mod topicmodel;

pub use error::{Error, ErrorCategory, Result};
