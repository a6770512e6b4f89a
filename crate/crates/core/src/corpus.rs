//! Expert corpus and caption datasets.
//!
//! A corpus holds exactly one document per class. Caption sets carry an
//! optional ground-truth `class_id` that only evaluation may read; training
//! code receives [`CaptionView`]s, which do not expose it.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::text::{split_sentences, SplitRules};
use crate::{Error, Result};

/// Stable key of sentence `index` of document `doc_id`.
pub fn sentence_key(doc_id: &str, index: usize) -> String {
    format!("doc:{doc_id}:s{index}")
}

/// Stable key of caption `index` of image `image_id`.
pub fn caption_key(image_id: &str, index: usize) -> String {
    format!("img:{image_id}:c{index}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    doc_id: String,
    class_name: String,
    sentences: Vec<String>,
    sentence_keys: Vec<String>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, class_name: impl Into<String>, sentences: Vec<String>) -> Result<Self> {
        let doc_id = doc_id.into();
        if doc_id.is_empty() {
            return Err(Error::invalid("document id must not be empty"));
        }
        if sentences.is_empty() {
            return Err(Error::invalid(format!("document '{doc_id}' has no sentences")));
        }
        let sentence_keys = (0..sentences.len()).map(|i| sentence_key(&doc_id, i)).collect();
        Ok(Self {
            doc_id,
            class_name: class_name.into(),
            sentences,
            sentence_keys,
        })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn class_name(&self) -> &str {
        &self.class_name
    }

    pub fn sentences(&self) -> &[String] {
        &self.sentences
    }

    pub fn sentence_keys(&self) -> &[String] {
        &self.sentence_keys
    }

    /// Sentences joined by single spaces.
    pub fn text(&self) -> String {
        self.sentences.join(" ")
    }
}

/// Ordered document collection. Document order is the canonical tie-break order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut index = HashMap::with_capacity(documents.len());
        for (i, doc) in documents.iter().enumerate() {
            if index.insert(doc.doc_id.clone(), i).is_some() {
                return Err(Error::Duplicate {
                    kind: "doc_id",
                    id: doc.doc_id.clone(),
                });
            }
        }
        Ok(Self { documents, index })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.index.get(doc_id).map(|&i| &self.documents[i])
    }

    pub fn position(&self, doc_id: &str) -> Option<usize> {
        self.index.get(doc_id).copied()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.documents.iter().map(|d| d.doc_id.as_str())
    }

    pub fn sentence_count(&self) -> usize {
        self.documents.iter().map(|d| d.sentences.len()).sum()
    }

    /// All `(key, sentence)` pairs in corpus order.
    pub fn keyed_sentences(&self) -> impl Iterator<Item = (&str, &str)> {
        self.documents
            .iter()
            .flat_map(|d| d.sentence_keys.iter().zip(&d.sentences).map(|(k, s)| (k.as_str(), s.as_str())))
    }

    /// Short content fingerprint (hex) of the canonical serialization.
    pub fn fingerprint(&self) -> String {
        let mut buf = Vec::new();
        write_corpus(self, &mut buf).expect("writing to memory cannot fail");
        format!("{:016x}", xxhash_rust::xxh64::xxh64(&buf, 0))
    }

    /// Error if the corpus is too small to rank.
    pub fn require_rankable(&self) -> Result<()> {
        if self.documents.len() < 2 {
            return Err(Error::invalid(format!(
                "scoring needs at least 2 documents, corpus has {}",
                self.documents.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocRecordIn {
    doc_id: String,
    class_name: String,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    sentences: Option<Vec<String>>,
}

#[derive(Debug, Serialize)]
struct DocRecordOut<'a> {
    doc_id: &'a str,
    class_name: &'a str,
    sentences: &'a [String],
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parse corpus records (one JSON object per line; blank lines skipped).
pub fn parse_corpus<R: BufRead>(reader: R, rules: &SplitRules) -> Result<Corpus> {
    let mut documents = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DocRecordIn = serde_json::from_str(&line).map_err(|e| parse_error(line_no, e.to_string()))?;
        let sentences = match (rec.text, rec.sentences) {
            (Some(text), None) => split_sentences(&text, rules),
            (None, Some(sentences)) => sentences,
            (Some(_), Some(_)) => return Err(parse_error(line_no, "record has both \"text\" and \"sentences\"")),
            (None, None) => return Err(parse_error(line_no, "record needs \"text\" or \"sentences\"")),
        };
        if !seen.insert(rec.doc_id.clone()) {
            return Err(parse_error(line_no, format!("duplicate doc_id '{}'", rec.doc_id)));
        }
        let doc = Document::new(rec.doc_id, rec.class_name, sentences).map_err(|e| parse_error(line_no, e.to_string()))?;
        documents.push(doc);
    }
    if documents.is_empty() {
        return Err(Error::invalid("empty corpus"));
    }
    Corpus::new(documents)
}

pub fn load_corpus(path: impl AsRef<Path>, rules: &SplitRules) -> Result<Corpus> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(BufReader::new(file), rules)
}

/// Write the canonical (pre-split) form of a corpus.
pub fn write_corpus<W: Write>(corpus: &Corpus, mut out: W) -> Result<()> {
    for doc in &corpus.documents {
        let rec = DocRecordOut {
            doc_id: &doc.doc_id,
            class_name: &doc.class_name,
            sentences: &doc.sentences,
        };
        serde_json::to_writer(&mut out, &rec).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_corpus(corpus, &mut out)?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Sub-corpus with the documents in `keep`, in original relative order.
pub fn filter_corpus<'a, I>(corpus: &Corpus, keep: I) -> Result<Corpus>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut wanted = HashSet::new();
    for id in keep {
        if corpus.get(id).is_none() {
            return Err(Error::Unknown {
                kind: "doc_id",
                id: id.to_owned(),
            });
        }
        wanted.insert(id);
    }
    if wanted.len() < 2 {
        return Err(Error::invalid("a filtered corpus needs at least 2 documents"));
    }
    let documents = corpus
        .documents
        .iter()
        .filter(|d| wanted.contains(d.doc_id.as_str()))
        .cloned()
        .collect();
    Corpus::new(documents)
}

/// Descriptions of one image. `class_id` is evaluation-only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptionSet {
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_id: Option<String>,
    pub captions: Vec<String>,
}

impl CaptionSet {
    pub fn view(&self) -> CaptionView<'_> {
        CaptionView {
            image_id: &self.image_id,
            captions: &self.captions,
        }
    }

    pub fn caption_keys(&self) -> Vec<String> {
        self.view().caption_keys()
    }
}

/// Label-stripped view of a [`CaptionSet`], the only form training code sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaptionView<'a> {
    image_id: &'a str,
    captions: &'a [String],
}

impl<'a> CaptionView<'a> {
    pub fn new(image_id: &'a str, captions: &'a [String]) -> Self {
        Self { image_id, captions }
    }

    pub fn image_id(&self) -> &'a str {
        self.image_id
    }

    pub fn captions(&self) -> &'a [String] {
        self.captions
    }

    pub fn caption_key(&self, index: usize) -> String {
        caption_key(self.image_id, index)
    }

    pub fn caption_keys(&self) -> Vec<String> {
        (0..self.captions.len()).map(|i| self.caption_key(i)).collect()
    }
}

pub fn strip_labels(sets: &[CaptionSet]) -> Vec<CaptionView<'_>> {
    sets.iter().map(CaptionSet::view).collect()
}

pub fn parse_captions<R: BufRead>(reader: R) -> Result<Vec<CaptionSet>> {
    let mut sets = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let set: CaptionSet = serde_json::from_str(&line).map_err(|e| parse_error(line_no, e.to_string()))?;
        if set.captions.is_empty() {
            return Err(parse_error(line_no, format!("image '{}' has no captions", set.image_id)));
        }
        if !seen.insert(set.image_id.clone()) {
            return Err(parse_error(line_no, format!("duplicate image_id '{}'", set.image_id)));
        }
        sets.push(set);
    }
    if sets.is_empty() {
        return Err(Error::invalid("empty caption file"));
    }
    Ok(sets)
}

pub fn load_captions(path: impl AsRef<Path>) -> Result<Vec<CaptionSet>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_captions(BufReader::new(file))
}

pub fn write_captions<W: Write>(sets: &[CaptionSet], mut out: W) -> Result<()> {
    for set in sets {
        serde_json::to_writer(&mut out, set).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_captions(sets: &[CaptionSet], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_captions(sets, &mut out)?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Ground truth `image_id -> doc_id`, checked against the corpus.
pub fn ground_truth(sets: &[CaptionSet], corpus: Option<&Corpus>) -> Result<HashMap<String, String>> {
    let mut truth = HashMap::with_capacity(sets.len());
    for set in sets {
        let class_id = set
            .class_id
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("image '{}' has no class_id", set.image_id)))?;
        if let Some(corpus) = corpus {
            if corpus.get(class_id).is_none() {
                return Err(Error::Unknown {
                    kind: "doc_id",
                    id: class_id.clone(),
                });
            }
        }
        truth.insert(set.image_id.clone(), class_id.clone());
    }
    Ok(truth)
}
