use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::Corpus;
use crate::text::{ngrams, tokenize};
use crate::{Error, Result};

pub const DEFAULT_NGRAM_SIZES: &[usize] = &[2, 3];

/// Sparse vector as `(column, value)` pairs sorted by column.
pub type SparseVec = Vec<(usize, f64)>;

/// Smoothed TF-IDF over whole-document n-gram counts.
#[derive(Debug, Clone)]
pub struct TfidfIndex {
    vocabulary: BTreeMap<String, usize>,
    idf: Vec<f64>,
    documents: Vec<SparseVec>,
    ngram_sizes: Vec<usize>,
}

impl TfidfIndex {
    pub fn build(corpus: &Corpus, ngram_sizes: &[usize]) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::invalid("empty corpus"));
        }
        let sizes: BTreeSet<usize> = ngram_sizes.iter().copied().collect();
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::Config("n-gram sizes must be a non-empty set of positive integers".into()));
        }
        let ngram_sizes: Vec<usize> = sizes.into_iter().collect();
        let counts: Vec<BTreeMap<String, usize>> = corpus.documents().iter().map(|d| term_counts(&d.text(), &ngram_sizes)).collect();

        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for c in &counts {
            for term in c.keys() {
                *df.entry(term.as_str()).or_default() += 1;
            }
        }
        let n = corpus.len() as f64;
        let vocabulary: BTreeMap<String, usize> = df.keys().enumerate().map(|(i, &t)| (t.to_owned(), i)).collect();
        let idf: Vec<f64> = df.values().map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0).collect();

        let mut index = Self {
            vocabulary,
            idf,
            documents: Vec::new(),
            ngram_sizes,
        };
        index.documents = counts.iter().map(|c| index.weigh(c)).collect();
        Ok(index)
    }

    pub fn ngram_sizes(&self) -> &[usize] {
        &self.ngram_sizes
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    /// L2-normalized weight vector of document `j`.
    pub fn document_vector(&self, j: usize) -> &SparseVec {
        &self.documents[j]
    }

    fn weigh(&self, counts: &BTreeMap<String, usize>) -> SparseVec {
        let mut v: SparseVec = counts
            .iter()
            .filter_map(|(t, &c)| self.vocabulary.get(t).map(|&i| (i, c as f64 * self.idf[i])))
            .collect();
        v.sort_by_key(|&(i, _)| i);
        let norm = v.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|(_, w)| *w /= norm);
        }
        v
    }

    /// Normalized TF-IDF vector of arbitrary text; out-of-vocabulary terms drop out.
    pub fn vectorize(&self, text: &str) -> SparseVec {
        self.weigh(&term_counts(text, &self.ngram_sizes))
    }

    /// Cosine similarity of `query` with every document, in corpus order.
    pub fn score_text(&self, query: &str) -> Vec<f64> {
        let q = self.vectorize(query);
        self.documents.iter().map(|d| sparse_cosine(&q, d)).collect()
    }
}

fn term_counts(text: &str, sizes: &[usize]) -> BTreeMap<String, usize> {
    let tokens = tokenize(text);
    let mut counts = BTreeMap::new();
    for &n in sizes {
        for g in ngrams(&tokens, n) {
            *counts.entry(g).or_default() += 1;
        }
    }
    counts
}

/// Dot product of two sorted sparse vectors (their cosine when both are unit or zero).
pub fn sparse_cosine(a: &SparseVec, b: &SparseVec) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    fn corpus(texts: &[&str]) -> Corpus {
        Corpus::new(
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| Document::new(format!("d{i}"), format!("c{i}"), vec![(*t).to_owned()]).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_document_idf_is_one() {
        let idx = TfidfIndex::build(&corpus(&["a red bird with a red crown"]), &[2, 3]).unwrap();
        assert!(idx.idf().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn shared_term_idf_is_one() {
        let idx = TfidfIndex::build(&corpus(&["red bird a", "red bird b", "red bird c"]), &[2]).unwrap();
        assert_eq!(idx.idf()[idx.vocabulary()["red bird"]], 1.0);
        let rare = idx.idf()[idx.vocabulary()["bird a"]];
        assert!((rare - (2f64.ln() + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn self_query_scores_one() {
        let texts = [
            "small red bird with black wings",
            "large blue bird near water",
            "brown owl at night",
        ];
        let idx = TfidfIndex::build(&corpus(&texts), &[2, 3]).unwrap();
        let s = idx.score_text(texts[1]);
        assert!((s[1] - 1.0).abs() < 1e-12);
        assert!(s[0] < 1.0 && s[2] < 1.0);
    }

    #[test]
    fn disjoint_query_scores_zero() {
        let idx = TfidfIndex::build(&corpus(&["red bird sings", "blue bird flies"]), &[2, 3]).unwrap();
        assert_eq!(idx.score_text("green frog jumps"), vec![0.0, 0.0]);
    }

    #[test]
    fn invalid_sizes() {
        let c = corpus(&["a b", "c d"]);
        assert!(TfidfIndex::build(&c, &[]).is_err());
        assert!(TfidfIndex::build(&c, &[0, 2]).is_err());
    }
}
