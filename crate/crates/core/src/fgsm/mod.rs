//! The fine-grained sentence matching head.
//!
//! A shared projection `φ` maps each sentence embedding to a non-negative
//! feature vector; the classifier `h` scores the concatenation
//! `[φ1; φ2; |φ1 − φ2|]`. Gradients are written out by hand and verified
//! against central finite differences ([`grad_check`]).

mod checkpoint;
mod forward;
mod gradcheck;
mod linalg;
mod loss;
mod objective;
mod params;
mod regularizer;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use forward::{pair_features, phi_forward, positive_score, score_pair};
pub use gradcheck::{grad_check, grad_check_prior, grad_check_regularizer, random_params, relative_error, RandomProbe, FD_STEP};
pub use loss::{loss_pairs, LabeledPair};
pub use objective::prior_objective;
pub use params::{Dims, FgsmParams, Head, Parts};
pub use regularizer::regularizer;
pub use train::{format_history, train, Adam, EpochLog, TrainConfig, TrainOutcome, TrainingData};

pub(crate) use forward::softmax_in_place;
pub(crate) use objective::{document_scores, SlotCache};
