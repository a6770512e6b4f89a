//! Fine-grained identification by retrieving expert documents from layperson
//! descriptions.
//!
//! The pipeline: captions and expert sentences are embedded
//! ([`embed`]), a Siamese sentence-matching head is trained on synthetic
//! caption pairs ([`pairs`], [`fgsm`]), and every document of the corpus is
//! scored by averaging pair scores over captions and sentences ([`scoring`]).
//! Classic lexical rankers ([`baselines`]) and the evaluation harness
//! ([`eval`]) share the same corpus model ([`corpus`]).
//!
//! Numeric code is generic over [`Scalar`]; the aliases below fix the
//! precision used by the command-line pipeline.

// Validation writes `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod corpus;
pub mod embed;
mod error;
pub mod eval;
pub mod fgsm;
pub mod pairs;
mod scalar;
pub mod scoring;
pub mod synthetic;
pub mod text;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Matching-head parameters in training precision.
pub type Params = fgsm::FgsmParams<f64>;
/// Matching-head parameters in single precision, for compact inference.
pub type ParamsF32 = fgsm::FgsmParams<f32>;
/// Document scores in training precision.
pub type Scores = scoring::DocScores<f64>;
/// Corpus scorer in training precision.
pub type CorpusScorer = scoring::Scorer<f64>;
