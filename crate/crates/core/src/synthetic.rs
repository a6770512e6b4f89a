//! A seeded synthetic identification task.
//!
//! Every class has a signature of (color, part) attributes drawn from
//! vocabularies shared by all classes, so single words are ambiguous and
//! only combinations identify a class. Images carry templated captions
//! naming a few signature attributes; each class document mixes visual
//! sentences built from its signature with range and behaviour sentences
//! that share no nouns with any caption.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CaptionSet, Corpus, Document};
use crate::text::NounLexicon;
use crate::{Error, Result};

pub const COLORS: &[&str] = &["red", "blue", "yellow", "black", "white", "brown", "green", "orange"];
pub const PARTS: &[&str] = &["crown", "wing", "tail", "breast", "throat", "beak", "belly", "nape"];

const HABITATS: &[&str] = &["marsh", "forest", "meadow", "desert", "tundra", "canyon", "prairie", "river"];
const REGIONS: &[&str] = &["mountains", "coast", "lowlands", "islands", "valleys", "plains"];
const FOODS: &[&str] = &["insects", "seeds", "berries", "snails", "nectar", "worms"];
const SEASONS: &[&str] = &["spring", "summer", "autumn", "winter"];
const OTHER_NOUNS: &[&str] = &["bird", "song", "nest", "eggs", "flocks", "pairs", "species", "adults"];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub images_per_class: usize,
    pub captions_per_image: usize,
    pub attributes: usize,
    pub distractor_sentences: usize,
    /// Probability that a caption names a wrong color for one attribute.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            classes: 20,
            images_per_class: 30,
            captions_per_image: 5,
            attributes: 4,
            distractor_sentences: 6,
            noise: 0.1,
            seed: 42,
        }
    }
}

/// Visual sentences per document: one per attribute plus two combining pairs.
pub fn visual_sentence_count(attributes: usize) -> usize {
    attributes + 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub corpus: Corpus,
    /// Labelled with the generating class; strip before training.
    pub captions: Vec<CaptionSet>,
    pub lexicon_words: Vec<String>,
    /// `(color, part)` signature of each class, in corpus order.
    pub signatures: Vec<Vec<(String, String)>>,
}

impl SyntheticDataset {
    pub fn lexicon(&self) -> NounLexicon {
        NounLexicon::from_words(&self.lexicon_words)
    }

    /// Deterministic train/test split: every `test_every`-th image of each
    /// class (by generation order) goes to the test side.
    pub fn split(&self, test_every: usize) -> (Vec<CaptionSet>, Vec<CaptionSet>) {
        let mut seen = std::collections::HashMap::<&str, usize>::new();
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for set in &self.captions {
            let class = set.class_id.as_deref().unwrap_or("");
            let n = seen.entry(class).or_default();
            if test_every > 0 && *n % test_every == test_every - 1 {
                test.push(set.clone());
            } else {
                train.push(set.clone());
            }
            *n += 1;
        }
        (train, test)
    }
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticDataset> {
    if cfg.classes < 2 || cfg.images_per_class == 0 || cfg.captions_per_image == 0 {
        return Err(Error::Config(
            "need at least 2 classes, 1 image per class and 1 caption per image".into(),
        ));
    }
    if cfg.attributes < 2 || cfg.attributes > PARTS.len() {
        return Err(Error::Config(format!("attributes must lie in 2..={}", PARTS.len())));
    }
    if !(0.0..=1.0).contains(&cfg.noise) {
        return Err(Error::Config("noise must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut signatures: Vec<Vec<(String, String)>> = Vec::with_capacity(cfg.classes);
    let mut used: BTreeSet<Vec<(String, String)>> = BTreeSet::new();
    let mut attempts = 0;
    while signatures.len() < cfg.classes {
        attempts += 1;
        if attempts > 10_000 {
            return Err(Error::Config("cannot draw enough distinct signatures".into()));
        }
        let parts: Vec<&str> = PARTS.choose_multiple(&mut rng, cfg.attributes).copied().collect();
        let mut sig: Vec<(String, String)> = parts
            .iter()
            .map(|p| ((*COLORS.choose(&mut rng).unwrap()).to_owned(), (*p).to_owned()))
            .collect();
        let mut key = sig.clone();
        key.sort();
        if used.insert(key) {
            sig.shuffle(&mut rng);
            signatures.push(sig);
        }
    }

    let documents = signatures
        .iter()
        .enumerate()
        .map(|(i, sig)| {
            let mut sentences = visual_sentences(sig);
            sentences.extend((0..cfg.distractor_sentences).map(|_| distractor(&mut rng)));
            sentences.shuffle(&mut rng);
            Document::new(doc_id(i), format!("Species {:02}", i + 1), sentences)
        })
        .collect::<Result<Vec<_>>>()?;
    let corpus = Corpus::new(documents)?;

    let total = cfg.classes * cfg.images_per_class;
    let mut numbers: Vec<usize> = (0..total).collect();
    numbers.shuffle(&mut rng);
    let mut captions = Vec::with_capacity(total);
    for (class, sig) in signatures.iter().enumerate() {
        for k in 0..cfg.images_per_class {
            let number = numbers[class * cfg.images_per_class + k];
            let caps = (0..cfg.captions_per_image).map(|_| caption(sig, cfg.noise, &mut rng)).collect();
            captions.push(CaptionSet {
                image_id: format!("img{number:05}"),
                class_id: Some(doc_id(class)),
                captions: caps,
            });
        }
    }

    let lexicon_words = PARTS
        .iter()
        .chain(HABITATS)
        .chain(REGIONS)
        .chain(FOODS)
        .chain(SEASONS)
        .chain(OTHER_NOUNS)
        .map(|w| (*w).to_owned())
        .collect();
    Ok(SyntheticDataset {
        corpus,
        captions,
        lexicon_words,
        signatures,
    })
}

fn doc_id(class: usize) -> String {
    format!("sp{:02}", class + 1)
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn visual_sentences(sig: &[(String, String)]) -> Vec<String> {
    // Visual sentences reuse caption vocabulary; document-only words would
    // otherwise mark every document sentence as neutral under bag-of-words inputs.
    const SINGLE: &[&str] = &[
        "This bird has a {c} {p}.",
        "The {p} is {c}.",
        "The {p} of this bird is {c}.",
        "A bird with a {c} {p}.",
    ];
    let mut out: Vec<String> = sig
        .iter()
        .enumerate()
        .map(|(i, (c, p))| SINGLE[i % SINGLE.len()].replace("{c}", c).replace("{p}", p))
        .collect();
    let n = sig.len();
    for (a, b) in [(0, 1), (2 % n, 3 % n)] {
        let ((c1, p1), (c2, p2)) = (&sig[a], &sig[b]);
        out.push(format!("The {p1} is {c1} and the {p2} is {c2}."));
    }
    out
}

fn distractor(rng: &mut ChaCha8Rng) -> String {
    let pick = |rng: &mut ChaCha8Rng, v: &[&str]| (*v.choose(rng).unwrap()).to_owned();
    match rng.gen_range(0..5) {
        0 => format!("It breeds in {} habitats across the {}.", pick(rng, HABITATS), pick(rng, REGIONS)),
        1 => format!("In {} it feeds mostly on {}.", pick(rng, SEASONS), pick(rng, FOODS)),
        2 => format!("The nest is built near the {} in late {}.", pick(rng, HABITATS), pick(rng, SEASONS)),
        3 => format!("Large flocks gather in the {} during {}.", pick(rng, REGIONS), pick(rng, SEASONS)),
        _ => format!(
            "Pairs defend a {} territory and forage for {}.",
            pick(rng, HABITATS),
            pick(rng, FOODS)
        ),
    }
}

fn caption(sig: &[(String, String)], noise: f64, rng: &mut ChaCha8Rng) -> String {
    let k = rng.gen_range(1..=3usize.min(sig.len()));
    let mut attrs: Vec<(String, String)> = sig.choose_multiple(rng, k).cloned().collect();
    if rng.gen_bool(noise) {
        let i = rng.gen_range(0..attrs.len());
        attrs[i].0 = (*COLORS.choose(rng).unwrap()).to_owned();
    }
    let a = |i: usize| format!("{} {}", attrs[i].0, attrs[i].1);
    let text = match (k, rng.gen_range(0..3)) {
        (1, 0) => format!("this bird has a {}", a(0)),
        (1, 1) => format!("a small bird with a {}", a(0)),
        (1, _) => format!("the {} of this bird is {}", attrs[0].1, attrs[0].0),
        (2, 0) => format!("a bird with a {} and a {}", a(0), a(1)),
        (2, 1) => format!("this bird has a {} and {}", a(0), a(1)),
        (2, _) => format!("{} and {}", a(0), a(1)),
        (_, 0) => format!("this small bird has a {}, a {} and a {}", a(0), a(1), a(2)),
        (_, 1) => format!("a {} with {} and {}", a(0), a(1), a(2)),
        (_, _) => format!(
            "the {} is {}, the {} is {} and the {} is {}",
            attrs[0].1, attrs[0].0, attrs[1].1, attrs[1].0, attrs[2].1, attrs[2].0
        ),
    };
    if rng.gen_bool(0.5) {
        capitalize(&text)
    } else {
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{extract_nouns, tokenize};

    #[test]
    fn default_shape() {
        let ds = generate(&SyntheticConfig::default()).unwrap();
        assert_eq!(ds.corpus.len(), 20);
        assert_eq!(ds.captions.len(), 600);
        assert!(ds.captions.iter().all(|c| c.captions.len() == 5));
        assert!(ds.corpus.documents().iter().all(|d| d.sentences().len() == 12));
        let sigs: BTreeSet<_> = ds
            .signatures
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.sort();
                s
            })
            .collect();
        assert_eq!(sigs.len(), 20);
        assert!(ds.captions.iter().flat_map(|c| &c.captions).any(|c| !c.contains("bird")));
    }

    #[test]
    fn seeded() {
        let a = generate(&SyntheticConfig::default()).unwrap();
        let b = generate(&SyntheticConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = generate(&SyntheticConfig {
            seed: 7,
            ..Default::default()
        })
        .unwrap();
        assert_ne!(a.captions, c.captions);
    }

    #[test]
    fn distractors_share_no_nouns_with_captions() {
        let ds = generate(&SyntheticConfig::default()).unwrap();
        let lex = ds.lexicon();
        let caption_nouns: BTreeSet<String> = ds
            .captions
            .iter()
            .flat_map(|c| &c.captions)
            .flat_map(|c| extract_nouns(&tokenize(c), &lex))
            .collect();
        for doc in ds.corpus.documents() {
            let distractors = doc
                .sentences()
                .iter()
                .filter(|s| !COLORS.iter().any(|c| tokenize(s).iter().any(|t| t.as_str() == *c)));
            for s in distractors {
                let nouns = extract_nouns(&tokenize(s), &lex);
                assert!(nouns.is_disjoint(&caption_nouns), "{s}");
            }
        }
    }

    #[test]
    fn split_is_per_class() {
        let ds = generate(&SyntheticConfig::default()).unwrap();
        let (train, test) = ds.split(3);
        assert_eq!(test.len(), 200);
        assert_eq!(train.len(), 400);
    }
}
