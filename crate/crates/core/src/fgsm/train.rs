//! Two-phase optimization of the matching head.
//!
//! Phase 1 minimizes the pair loss alone. Phase 2 (only when `lambda > 0`)
//! minimizes `L + lambda * R`, with `R` evaluated each step on a freshly
//! sampled batch of images scored against the corpus.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::{loss_pairs, LabeledPair};
use super::objective::prior_objective;
use super::params::{Dims, FgsmParams, Head};
use crate::corpus::{CaptionView, Corpus};
use crate::embed::EmbeddingStore;
use crate::pairs::{PairLabel, SentencePair};
use crate::scalar::lit;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Pair-only epochs.
    pub epochs: usize,
    /// Epochs with the prior term; defaults to `epochs`. Ignored when `lambda == 0`.
    pub reg_epochs: Option<usize>,
    pub lambda: f64,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub reg_image_batch: usize,
    /// Score only this many randomly chosen documents per prior step.
    pub reg_doc_sample: Option<usize>,
    pub proj_dim: usize,
    pub hidden_dim: usize,
    pub head: Head,
    /// Use `softmax(-z)` document distributions in the prior.
    pub negate_scores: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 10,
            reg_epochs: None,
            lambda: 1.0,
            seed: 42,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            reg_image_batch: 16,
            reg_doc_sample: None,
            proj_dim: 128,
            hidden_dim: 128,
            head: Head::ThreeClass,
            negate_scores: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.reg_image_batch == 0 {
            return bad("batch sizes must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be a non-negative number");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return bad("optimizer moments must lie in [0, 1) and epsilon must be positive");
        }
        if self.proj_dim == 0 || self.hidden_dim == 0 {
            return bad("layer sizes must be positive");
        }
        if self.reg_doc_sample == Some(0) || self.reg_doc_sample == Some(1) {
            return bad("reg_doc_sample must be at least 2");
        }
        Ok(())
    }

    pub fn prior_epochs(&self) -> usize {
        if self.lambda > 0.0 {
            self.reg_epochs.unwrap_or(self.epochs)
        } else {
            0
        }
    }
}

/// Inputs to [`train`]. Caption views carry no class labels.
#[derive(Debug, Clone, Copy)]
pub struct TrainingData<'a> {
    pub pairs: &'a [SentencePair],
    pub images: &'a [CaptionView<'a>],
    pub caption_store: &'a EmbeddingStore,
    pub doc_store: Option<&'a EmbeddingStore>,
    pub corpus: Option<&'a Corpus>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub pair_loss: f64,
    pub reg_value: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: FgsmParams<T>,
    pub history: Vec<EpochLog>,
}

/// `epoch\tpair_loss\treg_value\ttotal`, one line per epoch.
pub fn format_history(history: &[EpochLog]) -> String {
    history
        .iter()
        .map(|e| format!("{}\t{}\t{}\t{}\n", e.epoch, e.pair_loss, e.reg_value, e.total))
        .collect()
}

/// Adaptive-moment gradient descent with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    learning_rate: T,
    beta1: T,
    beta2: T,
    epsilon: T,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(n_params: usize, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            learning_rate: lit(learning_rate),
            beta1: lit(beta1),
            beta2: lit(beta2),
            epsilon: lit(epsilon),
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut FgsmParams<T>, grads: &FgsmParams<T>) {
        self.t += 1;
        let one = T::one();
        let c1 = one - self.beta1.powi(self.t);
        let c2 = one - self.beta2.powi(self.t);
        let theta = params.as_mut_slice();
        for (((w, &g), m), v) in theta.iter_mut().zip(grads.as_slice()).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (one - self.beta1) * g;
            *v = self.beta2 * *v + (one - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// Embeddings upcast to the training precision, indexed densely.
struct EmbeddingTable<T> {
    index: HashMap<String, usize>,
    vectors: Vec<Vec<T>>,
}

impl<T: Scalar> EmbeddingTable<T> {
    fn new() -> Self {
        Self {
            index: HashMap::new(),
            vectors: Vec::new(),
        }
    }

    fn resolve(&mut self, key: &str, stores: &[&EmbeddingStore]) -> Result<usize> {
        if let Some(&i) = self.index.get(key) {
            return Ok(i);
        }
        let v = stores
            .iter()
            .find_map(|s| s.get(key))
            .ok_or_else(|| Error::MissingKey(key.to_owned()))?;
        let i = self.vectors.len();
        self.vectors.push(v.iter().map(|&x| T::of_f32(x)).collect());
        self.index.insert(key.to_owned(), i);
        Ok(i)
    }
}

const STREAM_SHUFFLE: u64 = 11;

/// Train the matching head; see the module docs for the protocol.
pub fn train<T: Scalar>(data: &TrainingData<'_>, cfg: &TrainConfig) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    let dim = data.caption_store.dim();
    if let Some(ds) = data.doc_store {
        ds.ensure_dim(dim)?;
    }
    if cfg.head == Head::Binary && data.pairs.iter().any(|p| p.label == PairLabel::Neutral) {
        return Err(Error::Config("neutral pairs need the three-class head".into()));
    }
    let use_prior = cfg.lambda > 0.0;
    let (prior_corpus, prior_store) = if use_prior {
        match (data.corpus, data.doc_store) {
            (Some(c), Some(s)) => {
                c.require_rankable()?;
                (Some(c), Some(s))
            }
            _ => return Err(Error::Config("lambda > 0 needs a corpus and a document embedding store".into())),
        }
    } else {
        (None, None)
    };

    let mut stores: Vec<&EmbeddingStore> = vec![data.caption_store];
    stores.extend(data.doc_store);
    let mut table = EmbeddingTable::<T>::new();
    let pair_idx: Vec<(usize, usize, PairLabel)> = data
        .pairs
        .iter()
        .map(|p| Ok((table.resolve(&p.a_key, &stores)?, table.resolve(&p.b_key, &stores)?, p.label)))
        .collect::<Result<_>>()?;

    let mut image_idx: Vec<Vec<usize>> = Vec::new();
    let mut doc_idx: Vec<Vec<usize>> = Vec::new();
    if let (Some(corpus), Some(store)) = (prior_corpus, prior_store) {
        for view in data.images.iter().filter(|v| !v.captions().is_empty()) {
            let keys = view.caption_keys();
            image_idx.push(
                keys.iter()
                    .map(|k| table.resolve(k, &[data.caption_store]))
                    .collect::<Result<_>>()?,
            );
        }
        if image_idx.is_empty() {
            return Err(Error::invalid("the prior needs at least one image with captions"));
        }
        for doc in corpus.documents() {
            doc_idx.push(
                doc.sentence_keys()
                    .iter()
                    .map(|k| table.resolve(k, &[store]))
                    .collect::<Result<_>>()?,
            );
        }
    }

    let dims = Dims::new(dim, cfg.proj_dim, cfg.hidden_dim, cfg.head);
    dims.validate()?;
    let mut params = FgsmParams::<T>::init(dims, cfg.seed);
    let mut adam = Adam::new(dims.n_params(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(STREAM_SHUFFLE);
    let lambda: T = lit(cfg.lambda);

    let mut order: Vec<usize> = (0..pair_idx.len()).collect();
    let mut history = Vec::new();
    let mut step = 0usize;
    let total_epochs = cfg.epochs + cfg.prior_epochs();

    for epoch in 1..=total_epochs {
        let with_prior = epoch > cfg.epochs;
        order.shuffle(&mut rng);
        let (mut loss_sum, mut reg_sum, mut n_steps) = (0.0, 0.0, 0usize);

        for chunk in order.chunks(cfg.batch_size) {
            step += 1;
            let batch: Vec<LabeledPair<'_, T>> = chunk
                .iter()
                .map(|&i| {
                    let (a, b, l) = pair_idx[i];
                    (table.vectors[a].as_slice(), table.vectors[b].as_slice(), l)
                })
                .collect();
            let (loss, mut grads) = loss_pairs(&batch, &params)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { step, what: "pair loss" });
            }
            loss_sum += loss.to_f64_lossless();

            if with_prior {
                let n_img = cfg.reg_image_batch.min(image_idx.len());
                let mut chosen = rand::seq::index::sample(&mut rng, image_idx.len(), n_img).into_vec();
                chosen.sort_unstable();
                let images: Vec<Vec<&[T]>> = chosen
                    .iter()
                    .map(|&i| image_idx[i].iter().map(|&k| table.vectors[k].as_slice()).collect())
                    .collect();
                let doc_subset: Vec<usize> = match cfg.reg_doc_sample {
                    Some(m) if m < doc_idx.len() => {
                        let mut d = rand::seq::index::sample(&mut rng, doc_idx.len(), m).into_vec();
                        d.sort_unstable();
                        d
                    }
                    _ => (0..doc_idx.len()).collect(),
                };
                let docs: Vec<Vec<&[T]>> = doc_subset
                    .iter()
                    .map(|&j| doc_idx[j].iter().map(|&k| table.vectors[k].as_slice()).collect())
                    .collect();
                let (reg, reg_grads) = prior_objective(&params, &images, &docs, cfg.negate_scores)?;
                if !reg.is_finite() {
                    return Err(Error::Divergence { step, what: "prior value" });
                }
                reg_sum += reg.to_f64_lossless();
                grads.add_scaled(&reg_grads, lambda);
            }
            if !grads.is_finite() {
                return Err(Error::Divergence { step, what: "gradient" });
            }
            adam.step(&mut params, &grads);
            n_steps += 1;
        }

        let n = n_steps.max(1) as f64;
        let log = EpochLog {
            epoch,
            pair_loss: loss_sum / n,
            reg_value: reg_sum / n,
            total: loss_sum / n + cfg.lambda * reg_sum / n,
        };
        log::info!(
            "epoch {epoch}/{total_epochs} phase {} pair_loss {:.6} reg {:.6} total {:.6}",
            if with_prior { 2 } else { 1 },
            log.pair_loss,
            log.reg_value,
            log.total
        );
        history.push(log);
    }
    Ok(TrainOutcome { params, history })
}
