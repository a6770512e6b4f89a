//! An immutable loaded model and the identify logic over it.

use std::path::PathBuf;
use std::sync::Arc;

use fieldguide_core::baselines::{sparse_cosine, Bm25Index, Bm25Params, LexicalIndex, QueryMode, TfidfIndex, DEFAULT_NGRAM_SIZES};
use fieldguide_core::corpus::{load_corpus, Corpus};
use fieldguide_core::embed::{load_store, EmbeddingProvider, EmbeddingStore, HashedBow, HashedBowConfig};
use fieldguide_core::fgsm::load_checkpoint;
use fieldguide_core::scoring::{probabilities, rank_order, top_pairs, ScoreMode, Scorer};
use fieldguide_core::text::SplitRules;
use fieldguide_core::{Error, Params, Result};
use serde::{Deserialize, Serialize};

type EvidenceFn<'a> = Box<dyn Fn(usize) -> Result<Vec<EvidenceItem>> + 'a>;

/// Evidence pairs attached to each returned document.
pub const EVIDENCE_PER_RESULT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Fgsm,
    Cosine,
    Tfidf,
    Bm25,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fgsm" => Ok(Self::Fgsm),
            "cosine" => Ok(Self::Cosine),
            "tfidf" => Ok(Self::Tfidf),
            "bm25" => Ok(Self::Bm25),
            _ => Err(Error::Config(format!("unknown mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentifyRequest {
    pub captions: Vec<String>,
    #[serde(default)]
    pub top_k: Option<usize>,
    #[serde(default)]
    pub mode: Option<Mode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub caption: String,
    pub sentence: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultItem {
    pub doc_id: String,
    pub class_name: String,
    pub z: f64,
    pub probability: f64,
    pub evidence: Vec<EvidenceItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub mode: Mode,
    pub corpus_id: String,
    #[serde(rename = "K")]
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifyResponse {
    pub results: Vec<ResultItem>,
    pub model_info: ModelInfo,
}

/// Input bounds for identify requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_captions: usize,
    pub max_chars: usize,
    pub default_top_k: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_captions: 16,
            max_chars: 512,
            default_top_k: 5,
        }
    }
}

/// Everything a running service needs, loaded once and shared read-only.
pub struct Snapshot {
    corpus_id: String,
    scorer: Scorer<f64>,
    provider: Arc<dyn EmbeddingProvider>,
    tfidf: TfidfIndex,
    bm25: LexicalIndex,
    default_mode: Mode,
    limits: Limits,
}

/// Files and options for [`Snapshot::load`].
#[derive(Debug, Clone)]
pub struct SnapshotConfig {
    pub corpus: PathBuf,
    pub store: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub provider: HashedBowConfig,
    pub mode: Mode,
    pub limits: Limits,
}

impl Snapshot {
    /// Assemble a snapshot. `params` is required for the default mode `fgsm`
    /// and enables it as a per-request option otherwise.
    pub fn new(
        corpus: Corpus,
        doc_store: &EmbeddingStore,
        params: Option<Params>,
        provider: Arc<dyn EmbeddingProvider>,
        default_mode: Mode,
        limits: Limits,
    ) -> Result<Self> {
        doc_store.ensure_dim(provider.dim())?;
        if default_mode == Mode::Fgsm && params.is_none() {
            return Err(Error::Config("mode fgsm needs a checkpoint".into()));
        }
        let corpus_id = corpus.fingerprint();
        let tfidf = TfidfIndex::build(&corpus, DEFAULT_NGRAM_SIZES)?;
        let bm25 = LexicalIndex::Bm25(Bm25Index::build(&corpus, Bm25Params::default())?);
        let scorer = Scorer::new(corpus, doc_store, params)?;
        Ok(Self {
            corpus_id,
            scorer,
            provider,
            tfidf,
            bm25,
            default_mode,
            limits,
        })
    }

    pub fn load(cfg: &SnapshotConfig) -> Result<Self> {
        let corpus = load_corpus(&cfg.corpus, &SplitRules::default())?;
        let store = load_store(&cfg.store)?;
        let params: Option<Params> = cfg.checkpoint.as_ref().map(load_checkpoint).transpose()?;
        let provider: Arc<dyn EmbeddingProvider> = Arc::new(HashedBow::new(cfg.provider)?);
        Self::new(corpus, &store, params, provider, cfg.mode, cfg.limits)
    }

    pub fn corpus(&self) -> &Corpus {
        self.scorer.corpus()
    }

    pub fn corpus_id(&self) -> &str {
        &self.corpus_id
    }

    pub fn default_mode(&self) -> Mode {
        self.default_mode
    }

    fn validate(&self, req: &IdentifyRequest) -> Result<usize> {
        let k = self.corpus().len();
        if req.captions.is_empty() || req.captions.len() > self.limits.max_captions {
            return Err(Error::InvalidInput(format!(
                "between 1 and {} captions are required",
                self.limits.max_captions
            )));
        }
        for (i, c) in req.captions.iter().enumerate() {
            if c.trim().is_empty() {
                return Err(Error::InvalidInput(format!("caption {i} is empty")));
            }
            if c.chars().count() > self.limits.max_chars {
                return Err(Error::InvalidInput(format!(
                    "caption {i} exceeds {} characters",
                    self.limits.max_chars
                )));
            }
        }
        let top_k = req.top_k.unwrap_or(self.limits.default_top_k.min(k));
        if top_k == 0 || top_k > k {
            return Err(Error::InvalidInput(format!("top_k must lie in 1..={k}")));
        }
        Ok(top_k)
    }

    /// Rank the corpus for the submitted captions.
    pub fn identify(&self, req: &IdentifyRequest) -> Result<IdentifyResponse> {
        let top_k = self.validate(req)?;
        let mode = req.mode.unwrap_or(self.default_mode);
        let corpus = self.corpus();
        let embedded = || -> Vec<Vec<f64>> {
            req.captions
                .iter()
                .map(|c| self.provider.embed(c).into_iter().map(f64::from).collect())
                .collect()
        };

        let (z, evidence): (Vec<f64>, EvidenceFn<'_>) = match mode {
            Mode::Fgsm | Mode::Cosine => {
                let score_mode = if mode == Mode::Fgsm { ScoreMode::Fgsm } else { ScoreMode::Cosine };
                let caps = embedded();
                let z = self.scorer.document_z(&caps, score_mode)?;
                let ev = move |j: usize| {
                    let top = self.scorer.evidence(&caps, j, EVIDENCE_PER_RESULT, score_mode)?;
                    Ok(self.evidence_items(req, j, top.iter().map(|e| (e.caption_index, e.sentence_index, e.score))))
                };
                (z, Box::new(ev))
            }
            Mode::Tfidf | Mode::Bm25 => {
                let z = if mode == Mode::Tfidf {
                    self.tfidf.score_text(&req.captions.join(" "))
                } else {
                    self.bm25.score_captions(&req.captions, QueryMode::Concatenate)
                };
                (z, Box::new(|j| Ok(self.lexical_evidence(req, j))))
            }
        };

        let probs = probabilities(&z, false);
        let results = rank_order(&z, false)
            .into_iter()
            .take(top_k)
            .map(|j| {
                let doc = &corpus.documents()[j];
                Ok(ResultItem {
                    doc_id: doc.doc_id().to_owned(),
                    class_name: doc.class_name().to_owned(),
                    z: z[j],
                    probability: probs[j],
                    evidence: evidence(j)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(IdentifyResponse {
            results,
            model_info: ModelInfo {
                mode,
                corpus_id: self.corpus_id.clone(),
                k: corpus.len(),
            },
        })
    }

    fn evidence_items(&self, req: &IdentifyRequest, doc: usize, top: impl Iterator<Item = (usize, usize, f64)>) -> Vec<EvidenceItem> {
        let sentences = self.corpus().documents()[doc].sentences();
        top.map(|(c, s, score)| EvidenceItem {
            caption: req.captions[c].clone(),
            sentence: sentences[s].clone(),
            score,
        })
        .collect()
    }

    /// Lexical modes explain matches by TF-IDF cosine between single sentences.
    fn lexical_evidence(&self, req: &IdentifyRequest, doc: usize) -> Vec<EvidenceItem> {
        let caps: Vec<_> = req.captions.iter().map(|c| self.tfidf.vectorize(c)).collect();
        let matrix: Vec<Vec<f64>> = caps
            .iter()
            .map(|c| {
                self.corpus().documents()[doc]
                    .sentences()
                    .iter()
                    .map(|s| sparse_cosine(c, &self.tfidf.vectorize(s)))
                    .collect()
            })
            .collect();
        let top = top_pairs(&matrix, EVIDENCE_PER_RESULT);
        self.evidence_items(req, doc, top.iter().map(|e| (e.caption_index, e.sentence_index, e.score)))
    }
}
