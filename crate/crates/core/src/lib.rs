//! Conceptor-based debiasing of word embeddings.
//!
//! This crate implements a soft debiasing pipeline built on conceptor matrices:
//!
//! * [`embedding`] — load, save, and manipulate word-embedding tables in the
//!   common text format (`token v1 .. vd` per line).
//! * [`conceptor`] — compute conceptors from sample matrices, combine them with
//!   Boolean operations (NOT/AND/OR), adapt apertures, and apply the negated
//!   conceptor as a soft debiasing map.
//! * [`bias`] — word lists, bias-subspace specifications, and the built-in
//!   suite of association tests (gender and racial).
//! * [`weat`] — the Word Embedding Association Test: test statistic, effect
//!   size, permutation p-values, and a generalized vector-space variant.
//! * [`baselines`] — hard debiasing baselines (principal-component removal and
//!   neutralize/equalize).
//! * [`simeval`] — semantic-similarity retention scoring against human-rated
//!   word-pair datasets.
//! * [`synthetic`] — a deterministic generator for planted-bias test corpora.
//!
//! All numeric work is done in `f64`. Functions that consume files report the
//! offending path and line on parse errors; all fallible operations return
//! [`Error`].

pub mod baselines;
pub mod bias;
pub mod conceptor;
pub mod embedding;
mod error;
pub mod linalg;
pub mod simeval;
pub mod synthetic;
pub mod weat;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
