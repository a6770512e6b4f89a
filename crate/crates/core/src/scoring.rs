//! Document scoring: mean pair scores per document, a softmax over the
//! corpus, stable ranking and evidence pairs.
//!
//! Captions always occupy the first argument of the matching head and
//! document sentences the second.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CaptionView, Corpus};
use crate::embed::EmbeddingStore;
use crate::fgsm::{document_scores, positive_score, score_pair, softmax_in_place, FgsmParams, SlotCache};
use crate::{Error, Result, Scalar};

/// How a (caption, sentence) pair is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMode {
    /// Positive-class probability of the trained matching head.
    #[default]
    Fgsm,
    /// Cosine similarity of the raw store embeddings.
    Cosine,
}

impl std::str::FromStr for ScoreMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fgsm" => Ok(Self::Fgsm),
            "cosine" => Ok(Self::Cosine),
            _ => Err(Error::Config(format!("unknown scoring mode '{s}'"))),
        }
    }
}

/// Scores of every corpus document for one image, in corpus order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocScores<T> {
    pub image_id: String,
    pub ranking: Vec<String>,
    pub z: Vec<T>,
    pub probs: Vec<T>,
}

impl<T: Scalar> DocScores<T> {
    /// Probabilities and ranking derived from raw document scores.
    pub fn from_z(image_id: impl Into<String>, z: Vec<T>, corpus: &Corpus, negate: bool) -> Result<Self> {
        if z.len() != corpus.len() {
            return Err(Error::DimMismatch {
                what: "document scores".into(),
                expected: corpus.len(),
                actual: z.len(),
            });
        }
        let ranking = rank_order(&z, negate)
            .into_iter()
            .map(|j| corpus.documents()[j].doc_id().to_owned())
            .collect();
        Ok(Self {
            image_id: image_id.into(),
            probs: probabilities(&z, negate),
            z,
            ranking,
        })
    }
}

/// `softmax(z)`, or `softmax(-z)` with `negate`.
pub fn probabilities<T: Scalar>(z: &[T], negate: bool) -> Vec<T> {
    let mut p: Vec<T> = if negate { z.iter().map(|&v| -v).collect() } else { z.to_vec() };
    softmax_in_place(&mut p);
    p
}

/// Document indices by descending score (ascending with `negate`, which
/// orders by the resulting probabilities). Ties keep corpus order.
pub fn rank_order<T: Scalar>(z: &[T], negate: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = if negate { (z[a], z[b]) } else { (z[b], z[a]) };
        x.partial_cmp(&y).unwrap_or(Ordering::Equal)
    });
    order
}

/// Mean of `pair_score(c, s)` over all `n_captions × n_sentences` pairs.
pub fn mean_pair_score<T, F>(n_captions: usize, n_sentences: usize, mut pair_score: F) -> Result<T>
where
    T: Scalar,
    F: FnMut(usize, usize) -> T,
{
    if n_captions == 0 || n_sentences == 0 {
        return Err(Error::invalid("document scoring needs at least one caption and one sentence"));
    }
    let mut acc = T::zero();
    for c in 0..n_captions {
        for s in 0..n_sentences {
            acc += pair_score(c, s);
        }
    }
    Ok(acc / T::from_usize(n_captions * n_sentences).unwrap())
}

/// Document score of one caption set against one document, pair by pair.
pub fn score_document<T: Scalar>(captions: &[&[T]], sentences: &[&[T]], params: &FgsmParams<T>) -> Result<T> {
    let mut first_err = None;
    let z = mean_pair_score(captions.len(), sentences.len(), |c, s| {
        match score_pair(captions[c], sentences[s], params) {
            Ok(logits) => positive_score(&logits),
            Err(e) => {
                first_err.get_or_insert(e);
                T::zero()
            }
        }
    })?;
    match first_err {
        Some(e) => Err(e),
        None => Ok(z),
    }
}

pub fn cosine<T: Scalar>(a: &[T], b: &[T]) -> T {
    let (mut ab, mut aa, mut bb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == T::zero() || bb == T::zero() {
        T::zero()
    } else {
        ab / (aa.sqrt() * bb.sqrt())
    }
}

/// One (caption, sentence) match supporting a document's score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evidence<T> {
    pub caption_index: usize,
    pub sentence_index: usize,
    pub score: T,
}

/// The `top_m` highest entries of a caption-major score matrix; ties keep
/// caption-major order.
pub fn top_pairs<T: Scalar>(scores: &[Vec<T>], top_m: usize) -> Vec<Evidence<T>> {
    let mut all: Vec<Evidence<T>> = scores
        .iter()
        .enumerate()
        .flat_map(|(c, row)| {
            row.iter().enumerate().map(move |(s, &score)| Evidence {
                caption_index: c,
                sentence_index: s,
                score,
            })
        })
        .collect();
    all.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal));
    all.truncate(top_m);
    all
}

/// Scores caption sets against a fixed corpus. Sentence projections are
/// computed once at construction.
pub struct Scorer<T: Scalar> {
    corpus: Corpus,
    params: Option<FgsmParams<T>>,
    sentences: Vec<Vec<T>>,
    unit_sentences: Vec<Vec<T>>,
    bounds: Vec<usize>,
    cache: Option<SlotCache<T>>,
    negate: bool,
}

impl<T: Scalar> Scorer<T> {
    /// `params` may be omitted when only cosine scoring is needed.
    pub fn new(corpus: Corpus, doc_store: &EmbeddingStore, params: Option<FgsmParams<T>>) -> Result<Self> {
        corpus.require_rankable()?;
        if let Some(p) = &params {
            doc_store.ensure_dim(p.dims().input)?;
        }
        let mut bounds = vec![0];
        let mut sentences = Vec::with_capacity(corpus.sentence_count());
        for doc in corpus.documents() {
            for key in doc.sentence_keys() {
                sentences.push(doc_store.require(key)?.iter().map(|&x| T::of_f32(x)).collect::<Vec<T>>());
            }
            bounds.push(sentences.len());
        }
        let unit_sentences = sentences.iter().map(|s| unit(s)).collect();
        let cache = params.as_ref().map(|p| {
            let refs: Vec<&[T]> = sentences.iter().map(Vec::as_slice).collect();
            SlotCache::build(&p.parts(), &p.dims(), 1, &refs)
        });
        Ok(Self {
            corpus,
            params,
            sentences,
            unit_sentences,
            bounds,
            cache,
            negate: false,
        })
    }

    /// Use `softmax(-z)` and rank by ascending `z`.
    pub fn with_negate(mut self, negate: bool) -> Self {
        self.negate = negate;
        self
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn params(&self) -> Option<&FgsmParams<T>> {
        self.params.as_ref()
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.params.as_ref().map(|p| p.dims().input)
    }

    fn require_params(&self) -> Result<&FgsmParams<T>> {
        self.params
            .as_ref()
            .ok_or_else(|| Error::Config("fgsm scoring needs a trained checkpoint".into()))
    }

    fn check_captions(&self, captions: &[Vec<T>]) -> Result<()> {
        if captions.is_empty() {
            return Err(Error::invalid("at least one caption is required"));
        }
        let dim = self.sentences.first().map_or(0, Vec::len);
        for c in captions {
            if c.len() != dim {
                return Err(Error::DimMismatch {
                    what: "caption embedding".into(),
                    expected: dim,
                    actual: c.len(),
                });
            }
        }
        Ok(())
    }

    /// Raw document scores for caption embeddings, in corpus order.
    pub fn document_z(&self, captions: &[Vec<T>], mode: ScoreMode) -> Result<Vec<T>> {
        self.check_captions(captions)?;
        match mode {
            ScoreMode::Fgsm => {
                let params = self.require_params()?;
                let (parts, dims) = (params.parts(), params.dims());
                let refs: Vec<&[T]> = captions.iter().map(Vec::as_slice).collect();
                let caps = SlotCache::build(&parts, &dims, 0, &refs);
                Ok(document_scores(&parts, &dims, &caps, self.cache.as_ref().unwrap(), &self.bounds))
            }
            ScoreMode::Cosine => {
                let caps: Vec<Vec<T>> = captions.iter().map(|c| unit(c)).collect();
                (0..self.corpus.len())
                    .map(|j| {
                        let sents = &self.unit_sentences[self.bounds[j]..self.bounds[j + 1]];
                        mean_pair_score(caps.len(), sents.len(), |c, s| dot(&caps[c], &sents[s]))
                    })
                    .collect()
            }
        }
    }

    pub fn score_embeddings(&self, image_id: &str, captions: &[Vec<T>], mode: ScoreMode) -> Result<DocScores<T>> {
        let z = self.document_z(captions, mode)?;
        DocScores::from_z(image_id, z, &self.corpus, self.negate)
    }

    /// Score an image whose caption embeddings live in `caption_store`.
    pub fn score_view(&self, view: &CaptionView<'_>, caption_store: &EmbeddingStore, mode: ScoreMode) -> Result<DocScores<T>> {
        let captions = lookup(caption_store, &view.caption_keys())?;
        self.score_embeddings(view.image_id(), &captions, mode)
    }

    /// Score many images in parallel; output order follows `views`.
    pub fn score_views(&self, views: &[CaptionView<'_>], caption_store: &EmbeddingStore, mode: ScoreMode) -> Result<Vec<DocScores<T>>> {
        views.par_iter().map(|v| self.score_view(v, caption_store, mode)).collect()
    }

    /// Caption-major matrix of pair scores against document `doc_index`.
    pub fn pair_matrix(&self, captions: &[Vec<T>], doc_index: usize, mode: ScoreMode) -> Result<Vec<Vec<T>>> {
        self.check_captions(captions)?;
        let range = self
            .bounds
            .get(doc_index + 1)
            .map(|&end| self.bounds[doc_index]..end)
            .ok_or_else(|| Error::Unknown {
                kind: "document index",
                id: doc_index.to_string(),
            })?;
        match mode {
            ScoreMode::Fgsm => {
                let params = self.require_params()?;
                captions
                    .iter()
                    .map(|c| {
                        self.sentences[range.clone()]
                            .iter()
                            .map(|s| Ok(positive_score(&score_pair(c, s, params)?)))
                            .collect()
                    })
                    .collect()
            }
            ScoreMode::Cosine => Ok(captions
                .iter()
                .map(|c| {
                    let c = unit(c);
                    self.unit_sentences[range.clone()].iter().map(|s| dot(&c, s)).collect()
                })
                .collect()),
        }
    }

    /// The `top_m` best (caption, sentence) pairs for one document.
    pub fn evidence(&self, captions: &[Vec<T>], doc_index: usize, top_m: usize, mode: ScoreMode) -> Result<Vec<Evidence<T>>> {
        if top_m == 0 {
            return Err(Error::invalid("top_m must be at least 1"));
        }
        Ok(top_pairs(&self.pair_matrix(captions, doc_index, mode)?, top_m))
    }
}

/// Score one image against the corpus. Builds a fresh [`Scorer`]; prefer
/// reusing one for many images.
pub fn score_corpus<T: Scalar>(
    view: &CaptionView<'_>,
    corpus: &Corpus,
    caption_store: &EmbeddingStore,
    doc_store: &EmbeddingStore,
    params: Option<&FgsmParams<T>>,
    mode: ScoreMode,
) -> Result<DocScores<T>> {
    Scorer::new(corpus.clone(), doc_store, params.cloned())?.score_view(view, caption_store, mode)
}

/// Embeddings for `keys`, upcast to `T`.
pub fn lookup<T: Scalar>(store: &EmbeddingStore, keys: &[String]) -> Result<Vec<Vec<T>>> {
    keys.iter()
        .map(|k| Ok(store.require(k)?.iter().map(|&x| T::of_f32(x)).collect()))
        .collect()
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn unit<T: Scalar>(v: &[T]) -> Vec<T> {
    let n = dot(v, v).sqrt();
    if n == T::zero() {
        v.to_vec()
    } else {
        v.iter().map(|&x| x / n).collect()
    }
}

#[derive(Serialize)]
struct ScoreRecord<'a, T> {
    image_id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<&'a str>,
    ranking: &'a [String],
    z: &'a [T],
    probs: &'a [T],
}

/// One JSON object per image: `image_id`, `ranking`, `z`, `probs`, plus
/// `method` when given.
pub fn write_scores<T: Scalar + Serialize, W: Write>(scores: &[DocScores<T>], method: Option<&str>, mut out: W) -> Result<()> {
    for s in scores {
        let rec = ScoreRecord {
            image_id: &s.image_id,
            method,
            ranking: &s.ranking,
            z: &s.z,
            probs: &s.probs,
        };
        serde_json::to_writer(&mut out, &rec).map_err(|e| Error::Stream(e.into()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_scores<T: Scalar + Serialize>(scores: &[DocScores<T>], method: Option<&str>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_scores(scores, method, std::io::BufWriter::new(file)).map_err(|e| match e {
        Error::Stream(s) => Error::io(path, s),
        other => other,
    })
}

/// A scores-dump line read back; only the ranking is needed downstream.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ScoreLine {
    pub image_id: String,
    #[serde(default)]
    pub method: Option<String>,
    pub ranking: Vec<String>,
    #[serde(default)]
    pub z: Vec<f64>,
    #[serde(default)]
    pub probs: Vec<f64>,
}

pub fn read_scores<R: std::io::BufRead>(reader: R) -> Result<Vec<ScoreLine>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn load_scores(path: impl AsRef<Path>) -> Result<Vec<ScoreLine>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_scores(std::io::BufReader::new(file))
}
