//! Unsupervised lexical rankers: TF-IDF over n-grams with cosine similarity,
//! and Okapi BM25 over unigrams.

mod bm25;
mod tfidf;

pub use bm25::{Bm25Index, Bm25Params, IdfFloor};
pub use tfidf::{sparse_cosine, SparseVec, TfidfIndex, DEFAULT_NGRAM_SIZES};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CaptionView, Corpus};
use crate::scoring::DocScores;
use crate::{Error, Result};

/// How an image's captions become a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryMode {
    /// All captions joined into one query.
    #[default]
    Concatenate,
    /// Each caption scored alone; document scores averaged.
    MeanPerCaption,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LexicalMethod {
    Tfidf,
    Bm25,
}

impl LexicalMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::Tfidf => "tfidf",
            Self::Bm25 => "bm25",
        }
    }
}

impl std::str::FromStr for LexicalMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tfidf" => Ok(Self::Tfidf),
            "bm25" => Ok(Self::Bm25),
            _ => Err(Error::Config(format!("unknown baseline '{s}'"))),
        }
    }
}

/// A built lexical index of either kind.
#[derive(Debug, Clone)]
pub enum LexicalIndex {
    Tfidf(TfidfIndex),
    Bm25(Bm25Index),
}

impl LexicalIndex {
    pub fn build(method: LexicalMethod, corpus: &Corpus, ngram_sizes: &[usize], bm25: Bm25Params) -> Result<Self> {
        Ok(match method {
            LexicalMethod::Tfidf => Self::Tfidf(TfidfIndex::build(corpus, ngram_sizes)?),
            LexicalMethod::Bm25 => Self::Bm25(Bm25Index::build(corpus, bm25)?),
        })
    }

    pub fn method(&self) -> LexicalMethod {
        match self {
            Self::Tfidf(_) => LexicalMethod::Tfidf,
            Self::Bm25(_) => LexicalMethod::Bm25,
        }
    }

    /// Score of every document for one query string, in corpus order.
    pub fn score_text(&self, query: &str) -> Vec<f64> {
        match self {
            Self::Tfidf(i) => i.score_text(query),
            Self::Bm25(i) => i.score_text(query),
        }
    }

    /// Document scores for a caption set under `mode`.
    pub fn score_captions(&self, captions: &[String], mode: QueryMode) -> Vec<f64> {
        match mode {
            QueryMode::Concatenate => self.score_text(&captions.join(" ")),
            QueryMode::MeanPerCaption => {
                let per: Vec<Vec<f64>> = captions.iter().map(|c| self.score_text(c)).collect();
                let k = per.first().map_or(0, Vec::len);
                let n = per.len().max(1) as f64;
                (0..k).map(|j| per.iter().map(|s| s[j]).sum::<f64>() / n).collect()
            }
        }
    }
}

/// Rank the corpus for every image. `z` holds the raw lexical scores and
/// `probs` their softmax, so dumps share the model's format.
pub fn rank_all(index: &LexicalIndex, corpus: &Corpus, views: &[CaptionView<'_>], mode: QueryMode) -> Result<Vec<DocScores<f64>>> {
    corpus.require_rankable()?;
    views
        .par_iter()
        .map(|v| DocScores::from_z(v.image_id(), index.score_captions(v.captions(), mode), corpus, false))
        .collect()
}
