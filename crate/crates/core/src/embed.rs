//! Sentence embeddings: a seeded feature-hashing provider and a keyed,
//! file-backed store for precomputed vectors (including vectors exported
//! from an external language model).

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use indexmap::IndexMap;
use rayon::prelude::*;
use xxhash_rust::xxh64::xxh64;

use crate::text::tokenize;
use crate::{Error, Result};

pub const STORE_MAGIC: &[u8; 8] = b"CLEVEMB1";
pub const STORE_VERSION: u32 = 1;

/// Maps a sentence to a fixed-length vector.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, sentence: &str) -> Vec<f32>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedBowConfig {
    pub dim: usize,
    pub seed: u64,
}

impl Default for HashedBowConfig {
    fn default() -> Self {
        Self { dim: 256, seed: 42 }
    }
}

impl HashedBowConfig {
    pub const MIN_DIM: usize = 8;

    pub fn validate(&self) -> Result<()> {
        if self.dim < Self::MIN_DIM {
            return Err(Error::Config(format!(
                "hashed embedding dim must be at least {}, got {}",
                Self::MIN_DIM,
                self.dim
            )));
        }
        Ok(())
    }
}

/// Sign-hashed bag of words with mean pooling and L2 normalization.
///
/// Each token is hashed with seeded XXH64. The bucket is `hash % dim`; the
/// sign is `+1` when the top bit of the hash is clear and `-1` otherwise.
pub fn embed_hashed_bow(sentence: &str, cfg: &HashedBowConfig) -> Vec<f32> {
    let tokens = tokenize(sentence);
    let mut acc = vec![0f64; cfg.dim];
    if tokens.is_empty() {
        return vec![0.0; cfg.dim];
    }
    for token in &tokens {
        let h = xxh64(token.as_str().as_bytes(), cfg.seed);
        let bucket = (h % cfg.dim as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        acc[bucket] += sign;
    }
    let n = tokens.len() as f64;
    acc.iter_mut().for_each(|v| *v /= n);
    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        acc.iter_mut().for_each(|v| *v /= norm);
    }
    acc.into_iter().map(|v| v as f32).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedBow {
    cfg: HashedBowConfig,
}

impl HashedBow {
    pub fn new(cfg: HashedBowConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &HashedBowConfig {
        &self.cfg
    }
}

impl EmbeddingProvider for HashedBow {
    fn dim(&self) -> usize {
        self.cfg.dim
    }

    fn embed(&self, sentence: &str) -> Vec<f32> {
        embed_hashed_bow(sentence, &self.cfg)
    }
}

/// Fixed-dimension vectors keyed by sentence key, in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: IndexMap<String, Vec<f32>>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: IndexMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, key: impl Into<String>, vector: Vec<f32>) -> Result<()> {
        let key = key.into();
        if vector.len() != self.dim {
            return Err(Error::DimMismatch {
                what: format!("vector '{key}'"),
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if self.vectors.contains_key(&key) {
            return Err(Error::Duplicate { kind: "key", id: key });
        }
        self.vectors.insert(key, vector);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&[f32]> {
        self.vectors.get(key).map(Vec::as_slice)
    }

    pub fn require(&self, key: &str) -> Result<&[f32]> {
        self.get(key).ok_or_else(|| Error::MissingKey(key.to_owned()))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.vectors.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn ensure_dim(&self, expected: usize) -> Result<()> {
        if self.dim != expected {
            return Err(Error::DimMismatch {
                what: "embedding store".into(),
                expected,
                actual: self.dim,
            });
        }
        Ok(())
    }

    /// Union of two stores with equal dim and disjoint keys.
    pub fn merged(&self, other: &EmbeddingStore) -> Result<EmbeddingStore> {
        other.ensure_dim(self.dim)?;
        let mut out = self.clone();
        for (k, v) in other.iter() {
            out.insert(k, v.to_vec())?;
        }
        Ok(out)
    }
}

/// Embed every `(key, sentence)` with `provider`. Embedding runs in parallel;
/// insertion order follows the input.
pub fn build_store<K, S>(sentences: &[(K, S)], provider: &dyn EmbeddingProvider) -> Result<EmbeddingStore>
where
    K: AsRef<str> + Sync,
    S: AsRef<str> + Sync,
{
    let vectors: Vec<Vec<f32>> = sentences.par_iter().map(|(_, s)| provider.embed(s.as_ref())).collect();
    let mut store = EmbeddingStore::new(provider.dim());
    for ((key, _), v) in sentences.iter().zip(vectors) {
        store.insert(key.as_ref(), v)?;
    }
    Ok(store)
}

pub fn write_store<W: Write>(store: &EmbeddingStore, mut out: W) -> Result<()> {
    out.write_all(STORE_MAGIC)?;
    out.write_u32::<LittleEndian>(STORE_VERSION)?;
    out.write_u32::<LittleEndian>(store.dim as u32)?;
    out.write_u64::<LittleEndian>(store.vectors.len() as u64)?;
    for (key, v) in &store.vectors {
        out.write_u32::<LittleEndian>(key.len() as u32)?;
        out.write_all(key.as_bytes())?;
        for &x in v {
            out.write_f32::<LittleEndian>(x)?;
        }
    }
    Ok(())
}

fn truncated(field: &'static str, e: std::io::Error) -> Error {
    Error::Format {
        field,
        message: format!("truncated or unreadable ({e})"),
    }
}

pub fn read_store<R: Read>(mut input: R) -> Result<EmbeddingStore> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(|e| truncated("magic", e))?;
    if &magic != STORE_MAGIC {
        return Err(Error::Format {
            field: "magic",
            message: format!("expected {:?}", std::str::from_utf8(STORE_MAGIC).unwrap()),
        });
    }
    let version = input.read_u32::<LittleEndian>().map_err(|e| truncated("version", e))?;
    if version != STORE_VERSION {
        return Err(Error::Format {
            field: "version",
            message: format!("unsupported version {version}"),
        });
    }
    let dim = input.read_u32::<LittleEndian>().map_err(|e| truncated("dim", e))? as usize;
    if dim == 0 {
        return Err(Error::Format {
            field: "dim",
            message: "must be positive".into(),
        });
    }
    let count = input.read_u64::<LittleEndian>().map_err(|e| truncated("count", e))?;
    let mut store = EmbeddingStore::new(dim);
    for _ in 0..count {
        let key_len = input.read_u32::<LittleEndian>().map_err(|e| truncated("key_length", e))? as usize;
        let mut key = vec![0u8; key_len];
        input.read_exact(&mut key).map_err(|e| truncated("key", e))?;
        let key = String::from_utf8(key).map_err(|_| Error::Format {
            field: "key",
            message: "not valid UTF-8".into(),
        })?;
        let mut v = vec![0f32; dim];
        input.read_f32_into::<LittleEndian>(&mut v).map_err(|e| truncated("vector", e))?;
        store.insert(key, v)?;
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::Format {
            field: "count",
            message: "trailing bytes after the last record".into(),
        });
    }
    Ok(store)
}

pub fn save_store(store: &EmbeddingStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_store(store, &mut out)?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_store(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_store(BufReader::new(file))
}

/// Parse the text import format: `key<TAB>v1 v2 ... vdim` per line. The
/// dimension is taken from the first record.
pub fn import_text<R: BufRead>(reader: R) -> Result<EmbeddingStore> {
    let mut store: Option<EmbeddingStore> = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (key, values) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: line_no,
            message: "expected key<TAB>values".into(),
        })?;
        let v = values
            .split_whitespace()
            .map(|x| x.parse::<f32>())
            .collect::<std::result::Result<Vec<f32>, _>>()
            .map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parse {
                line: line_no,
                message: "vector must be non-empty and finite".into(),
            });
        }
        let store = store.get_or_insert_with(|| EmbeddingStore::new(v.len()));
        store.insert(key, v).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
    }
    store.ok_or_else(|| Error::invalid("empty embedding import file"))
}
