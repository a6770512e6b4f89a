use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::text::tokenize;
use crate::{Error, Result};

/// Replacement value for negative idf entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdfFloor {
    /// `ε` times the mean of the positive idf values.
    #[default]
    MeanPositive,
    /// `ε` times the mean of all idf values, as in the widely used Python `rank_bm25`.
    MeanAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    pub epsilon: f64,
    pub floor: IdfFloor,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self {
            k1: 1.5,
            b: 0.75,
            epsilon: 0.25,
            floor: IdfFloor::MeanPositive,
        }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0) || !(0.0..=1.0).contains(&self.b) || !(self.epsilon >= 0.0) {
            return Err(Error::Config("bm25 needs k1 > 0, 0 <= b <= 1 and epsilon >= 0".into()));
        }
        Ok(())
    }
}

/// Okapi BM25 over unigram tokens of whole documents.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    params: Bm25Params,
    term_freqs: Vec<HashMap<String, usize>>,
    doc_lens: Vec<usize>,
    avgdl: f64,
    idf: HashMap<String, f64>,
}

impl Bm25Index {
    pub fn build(corpus: &Corpus, params: Bm25Params) -> Result<Self> {
        params.validate()?;
        if corpus.is_empty() {
            return Err(Error::invalid("empty corpus"));
        }
        let mut term_freqs = Vec::with_capacity(corpus.len());
        let mut doc_lens = Vec::with_capacity(corpus.len());
        let mut df: HashMap<String, usize> = HashMap::new();
        for doc in corpus.documents() {
            let tokens = tokenize(&doc.text());
            doc_lens.push(tokens.len());
            let mut tf: HashMap<String, usize> = HashMap::new();
            for t in tokens {
                *tf.entry(t.into_string()).or_default() += 1;
            }
            for term in tf.keys() {
                *df.entry(term.clone()).or_default() += 1;
            }
            term_freqs.push(tf);
        }
        let n = corpus.len() as f64;
        let avgdl = doc_lens.iter().sum::<usize>() as f64 / n;

        let mut idf: HashMap<String, f64> = df
            .into_iter()
            .map(|(t, d)| {
                let d = d as f64;
                (t, ((n - d + 0.5) / (d + 0.5)).ln())
            })
            .collect();
        let replacement = params.epsilon * floor_base(idf.values().copied(), params.floor);
        idf.values_mut().filter(|v| **v < 0.0).for_each(|v| *v = replacement);

        Ok(Self {
            params,
            term_freqs,
            doc_lens,
            avgdl,
            idf,
        })
    }

    pub fn params(&self) -> &Bm25Params {
        &self.params
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    /// Effective idf of `term` (after flooring), zero when unseen.
    pub fn idf(&self, term: &str) -> f64 {
        self.idf.get(term).copied().unwrap_or(0.0)
    }

    /// BM25 score of every document for `query`, in corpus order. Repeated
    /// query tokens contribute once per occurrence.
    pub fn score_text(&self, query: &str) -> Vec<f64> {
        let q = tokenize(query);
        let Bm25Params { k1, b, .. } = self.params;
        self.term_freqs
            .iter()
            .zip(&self.doc_lens)
            .map(|(tf, &len)| {
                let norm = k1 * (1.0 - b + b * len as f64 / self.avgdl);
                q.iter()
                    .map(|t| {
                        let f = tf.get(t.as_str()).copied().unwrap_or(0) as f64;
                        self.idf(t.as_str()) * f * (k1 + 1.0) / (f + norm)
                    })
                    .sum()
            })
            .collect()
    }
}

fn floor_base(idf: impl Iterator<Item = f64> + Clone, floor: IdfFloor) -> f64 {
    let mean = |it: &mut dyn Iterator<Item = f64>| {
        let (s, c) = it.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        (c > 0).then(|| s / c as f64)
    };
    match floor {
        IdfFloor::MeanAll => mean(&mut idf.clone()).unwrap_or(0.0),
        // With no positive idf at all (e.g. a single document), fall back to
        // the mean magnitude so matching terms still count positively.
        IdfFloor::MeanPositive => mean(&mut idf.clone().filter(|&v| v > 0.0))
            .or_else(|| mean(&mut idf.map(f64::abs)))
            .unwrap_or(0.0),
    }
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
    fn absent_term_contributes_nothing() {
        let idx = Bm25Index::build(&corpus(&["red bird", "blue bird", "green frog"]), Bm25Params::default()).unwrap();
        assert_eq!(idx.score_text("zebra"), vec![0.0; 3]);
        assert_eq!(idx.score_text("red zebra"), idx.score_text("red"));
    }

    #[test]
    fn single_document() {
        let text = "a red bird with a red crown";
        let idx = Bm25Index::build(&corpus(&[text]), Bm25Params::default()).unwrap();
        assert!(idx.score_text(text)[0] > 0.0);
        assert_eq!(idx.score_text("")[0], 0.0);
    }

    #[test]
    fn negative_idf_is_floored() {
        // "bird" occurs in 3 of 4 documents: ln(1.5 / 3.5) < 0
        let idx = Bm25Index::build(
            &corpus(&["red bird", "blue bird", "bird song", "green frog"]),
            Bm25Params::default(),
        )
        .unwrap();
        let pos = [(3.5f64 / 1.5).ln(); 5];
        let expected = 0.25 * pos.iter().sum::<f64>() / 5.0;
        assert!((idx.idf("bird") - expected).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_params() {
        let c = corpus(&["a", "b"]);
        assert!(Bm25Index::build(
            &c,
            Bm25Params {
                k1: 0.0,
                ..Default::default()
            }
        )
        .is_err());
        assert!(Bm25Index::build(
            &c,
            Bm25Params {
                b: 1.5,
                ..Default::default()
            }
        )
        .is_err());
    }
}
