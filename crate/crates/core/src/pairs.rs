//! Synthetic sentence-pair training sets built from caption sets alone.
//!
//! Positives pair two captions of the same image, negatives pair captions of
//! different images, and neutrals pair a caption with a document sentence or
//! a foreign caption sharing no lexicon noun with it. No function here can
//! see ground-truth classes: inputs are [`CaptionView`]s.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CaptionView, Corpus};
use crate::text::{extract_nouns, tokenize, NounLexicon};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairLabel {
    Positive,
    Neutral,
    Negative,
}

impl PairLabel {
    /// Output index in the three-class head.
    pub fn class_index(self) -> usize {
        match self {
            PairLabel::Positive => 0,
            PairLabel::Neutral => 1,
            PairLabel::Negative => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SentencePair {
    #[serde(rename = "a")]
    pub a_key: String,
    #[serde(rename = "b")]
    pub b_key: String,
    pub label: PairLabel,
}

impl SentencePair {
    fn new(a_key: String, b_key: String, label: PairLabel) -> Self {
        debug_assert_ne!(a_key, b_key);
        Self { a_key, b_key, label }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassMode {
    Binary,
    ThreeClass,
}

impl ClassMode {
    pub fn from_count(classes: usize) -> Result<Self> {
        match classes {
            2 => Ok(ClassMode::Binary),
            3 => Ok(ClassMode::ThreeClass),
            n => Err(Error::Config(format!("classes must be 2 or 3, got {n}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairGenConfig {
    pub seed: u64,
    pub emit_both_orders: bool,
    /// Share of neutral pairs in a three-class set, in `[0, 1)`.
    pub neutral_fraction: f64,
    pub classes: ClassMode,
    /// Probability that a neutral candidate is a document sentence rather
    /// than a foreign caption.
    pub neutral_doc_share: f64,
    /// Neutral rejection sampling gives up after this many attempts per pair.
    pub neutral_attempts_per_pair: usize,
}

impl Default for PairGenConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            emit_both_orders: false,
            neutral_fraction: 1.0 / 3.0,
            classes: ClassMode::ThreeClass,
            neutral_doc_share: 0.5,
            neutral_attempts_per_pair: 100,
        }
    }
}

impl PairGenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.neutral_fraction) {
            return Err(Error::Config(format!(
                "neutral_fraction must lie in [0, 1), got {}",
                self.neutral_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.neutral_doc_share) {
            return Err(Error::Config("neutral_doc_share must lie in [0, 1]".into()));
        }
        if self.neutral_attempts_per_pair == 0 {
            return Err(Error::Config("neutral_attempts_per_pair must be positive".into()));
        }
        Ok(())
    }
}

// Independent RNG streams so that each generator is reproducible on its own.
const STREAM_POSITIVE: u64 = 1;
const STREAM_NEGATIVE: u64 = 2;
const STREAM_NEUTRAL: u64 = 3;
const STREAM_ASSEMBLE: u64 = 4;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Every unordered caption pair of each image (no self-pairs).
pub fn gen_positive(captions: &[CaptionView<'_>], cfg: &PairGenConfig) -> Vec<SentencePair> {
    let mut rng = stream_rng(cfg.seed, STREAM_POSITIVE);
    let mut out = Vec::new();
    for view in captions {
        let keys = view.caption_keys();
        for i in 0..keys.len() {
            for j in i + 1..keys.len() {
                if cfg.emit_both_orders {
                    out.push(SentencePair::new(keys[i].clone(), keys[j].clone(), PairLabel::Positive));
                    out.push(SentencePair::new(keys[j].clone(), keys[i].clone(), PairLabel::Positive));
                } else if rng.gen::<bool>() {
                    out.push(SentencePair::new(keys[j].clone(), keys[i].clone(), PairLabel::Positive));
                } else {
                    out.push(SentencePair::new(keys[i].clone(), keys[j].clone(), PairLabel::Positive));
                }
            }
        }
    }
    out
}

/// Flat indexing of all captions across images.
struct CaptionIndex {
    /// Start offset of each image's captions.
    offsets: Vec<usize>,
    total: usize,
}

impl CaptionIndex {
    fn new(captions: &[CaptionView<'_>]) -> Self {
        let mut offsets = Vec::with_capacity(captions.len());
        let mut total = 0;
        for v in captions {
            offsets.push(total);
            total += v.captions().len();
        }
        Self { offsets, total }
    }

    /// `(image, caption)` of flat index `flat`.
    fn locate(&self, flat: usize) -> (usize, usize) {
        let image = self.offsets.partition_point(|&o| o <= flat) - 1;
        (image, flat - self.offsets[image])
    }

    fn image_len(&self, image: usize) -> usize {
        self.offsets.get(image + 1).copied().unwrap_or(self.total) - self.offsets[image]
    }

    /// Uniform caption from any image other than `image`.
    fn sample_foreign<R: Rng>(&self, image: usize, rng: &mut R) -> (usize, usize) {
        let own = self.image_len(image);
        let mut flat = rng.gen_range(0..self.total - own);
        if flat >= self.offsets[image] {
            flat += own;
        }
        self.locate(flat)
    }
}

/// Exactly `count` pairs: a uniform caption, then a uniform caption of a
/// different image.
pub fn gen_negative(captions: &[CaptionView<'_>], count: usize, cfg: &PairGenConfig) -> Result<Vec<SentencePair>> {
    let with_captions = captions.iter().filter(|v| !v.captions().is_empty()).count();
    if with_captions < 2 {
        return Err(Error::invalid("negative sampling needs captions from at least 2 images"));
    }
    let index = CaptionIndex::new(captions);
    let mut rng = stream_rng(cfg.seed, STREAM_NEGATIVE);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let (ia, ca) = index.locate(rng.gen_range(0..index.total));
        let (ib, cb) = index.sample_foreign(ia, &mut rng);
        out.push(SentencePair::new(
            captions[ia].caption_key(ca),
            captions[ib].caption_key(cb),
            PairLabel::Negative,
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeutralSample {
    pub pairs: Vec<SentencePair>,
    /// Requested pairs that could not be found within the attempt budget.
    pub shortfall: usize,
    pub attempts: usize,
}

/// Rejection-sample `count` caption/sentence pairs with disjoint noun sets.
pub fn gen_neutral(
    captions: &[CaptionView<'_>],
    corpus: &Corpus,
    lexicon: &NounLexicon,
    count: usize,
    cfg: &PairGenConfig,
) -> Result<NeutralSample> {
    if count == 0 {
        return Ok(NeutralSample {
            pairs: Vec::new(),
            shortfall: 0,
            attempts: 0,
        });
    }
    if corpus.is_empty() {
        return Err(Error::invalid("neutral sampling needs a non-empty corpus"));
    }
    let index = CaptionIndex::new(captions);
    if index.total == 0 {
        return Err(Error::invalid("neutral sampling needs at least one caption"));
    }
    let nouns = |s: &str| -> BTreeSet<String> { extract_nouns(&tokenize(s), lexicon) };
    let caption_nouns: Vec<Vec<BTreeSet<String>>> = captions.iter().map(|v| v.captions().iter().map(|c| nouns(c)).collect()).collect();
    let doc_sentences: Vec<(&str, BTreeSet<String>)> = corpus.keyed_sentences().map(|(k, s)| (k, nouns(s))).collect();
    let foreign_possible = captions.iter().filter(|v| !v.captions().is_empty()).count() >= 2;

    let mut rng = stream_rng(cfg.seed, STREAM_NEUTRAL);
    let budget = cfg.neutral_attempts_per_pair.saturating_mul(count);
    let mut pairs = Vec::with_capacity(count);
    let mut attempts = 0;
    while pairs.len() < count && attempts < budget {
        attempts += 1;
        let (ia, ca) = index.locate(rng.gen_range(0..index.total));
        let a_nouns = &caption_nouns[ia][ca];
        let use_doc = !foreign_possible || rng.gen_bool(cfg.neutral_doc_share);
        let (b_key, b_nouns) = if use_doc {
            let (k, n) = &doc_sentences[rng.gen_range(0..doc_sentences.len())];
            ((*k).to_owned(), n)
        } else {
            let (ib, cb) = index.sample_foreign(ia, &mut rng);
            (captions[ib].caption_key(cb), &caption_nouns[ib][cb])
        };
        if a_nouns.is_disjoint(b_nouns) {
            pairs.push(SentencePair::new(captions[ia].caption_key(ca), b_key, PairLabel::Neutral));
        }
    }
    let shortfall = count - pairs.len();
    if shortfall > 0 {
        log::warn!("neutral sampling found {} of {count} pairs after {attempts} attempts", pairs.len());
    }
    Ok(NeutralSample {
        pairs,
        shortfall,
        attempts,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub pairs: Vec<SentencePair>,
    pub neutral_shortfall: usize,
}

impl TrainingSet {
    pub fn count(&self, label: PairLabel) -> usize {
        self.pairs.iter().filter(|p| p.label == label).count()
    }
}

/// Balanced, shuffled training set.
///
/// Binary: all positives plus as many negatives. Three-class: positives and
/// negatives as in the binary case plus neutrals making up
/// `neutral_fraction` of the total (equal thirds by default). If too few
/// neutrals exist, positives and negatives are subsampled to keep the ratio.
pub fn build_training_set(
    captions: &[CaptionView<'_>],
    corpus: Option<&Corpus>,
    lexicon: Option<&NounLexicon>,
    cfg: &PairGenConfig,
) -> Result<TrainingSet> {
    cfg.validate()?;
    let mut positives = gen_positive(captions, cfg);
    let mut rng = stream_rng(cfg.seed, STREAM_ASSEMBLE);
    let mut neutrals = Vec::new();
    let mut neutral_shortfall = 0;

    if cfg.classes == ClassMode::ThreeClass && cfg.neutral_fraction > 0.0 {
        let corpus = corpus.ok_or_else(|| Error::Config("three-class pairs need a corpus".into()))?;
        let lexicon = lexicon.ok_or_else(|| Error::Config("three-class pairs need a noun lexicon".into()))?;
        let f = cfg.neutral_fraction;
        let wanted = (2.0 * positives.len() as f64 * f / (1.0 - f)).round() as usize;
        let sample = gen_neutral(captions, corpus, lexicon, wanted, cfg)?;
        neutral_shortfall = sample.shortfall;
        neutrals = sample.pairs;
        if neutral_shortfall > 0 {
            let keep = ((neutrals.len() as f64 * (1.0 - f) / (2.0 * f)).floor() as usize).min(positives.len());
            let mut chosen = rand::seq::index::sample(&mut rng, positives.len(), keep).into_vec();
            chosen.sort_unstable();
            positives = chosen.into_iter().map(|i| positives[i].clone()).collect();
        }
    }

    let negatives = gen_negative(captions, positives.len(), cfg)?;
    let mut pairs = positives;
    pairs.extend(negatives);
    pairs.extend(neutrals);
    pairs.shuffle(&mut rng);
    Ok(TrainingSet { pairs, neutral_shortfall })
}

pub fn write_pairs<W: Write>(pairs: &[SentencePair], mut out: W) -> Result<()> {
    for p in pairs {
        serde_json::to_writer(&mut out, p).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_pairs(pairs: &[SentencePair], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_pairs(pairs, &mut out)?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_pairs<R: BufRead>(reader: R) -> Result<Vec<SentencePair>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let pair: SentencePair = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if pair.a_key == pair.b_key {
            return Err(Error::Parse {
                line: i + 1,
                message: "pair keys must differ".into(),
            });
        }
        out.push(pair);
    }
    Ok(out)
}

pub fn load_pairs(path: impl AsRef<Path>) -> Result<Vec<SentencePair>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_pairs(BufReader::new(file))
}
