//! Corpus scoring against pair-by-pair evaluation, plus scoring invariants.

use fieldguide_core::corpus::{CaptionSet, Corpus, Document};
use fieldguide_core::embed::{build_store, EmbeddingStore, HashedBow, HashedBowConfig};
use fieldguide_core::fgsm::{load_checkpoint, random_params, save_checkpoint, Dims, Head};
use fieldguide_core::scoring::*;
use fieldguide_core::Params;
use proptest::prelude::*;

fn corpus() -> Corpus {
    Corpus::new(vec![
        Document::new("a", "Alpha", vec!["A red crown.".into(), "It nests in reeds.".into()]).unwrap(),
        Document::new(
            "b",
            "Beta",
            vec![
                "The wing is blue.".into(),
                "Blue tail and white belly.".into(),
                "Sings at dawn.".into(),
            ],
        )
        .unwrap(),
        Document::new("c", "Gamma", vec!["A red crown.".into(), "It nests in reeds.".into()]).unwrap(),
    ])
    .unwrap()
}

fn captions() -> CaptionSet {
    CaptionSet {
        image_id: "img1".into(),
        class_id: None,
        captions: vec!["a bird with a red crown".into(), "blue wings".into()],
    }
}

fn stores(corpus: &Corpus, dim: usize) -> (EmbeddingStore, EmbeddingStore) {
    let p = HashedBow::new(HashedBowConfig { dim, seed: 3 }).unwrap();
    let set = captions();
    let caps: Vec<(String, String)> = set.caption_keys().into_iter().zip(set.captions.clone()).collect();
    let sents: Vec<(&str, &str)> = corpus.keyed_sentences().collect();
    (build_store(&caps, &p).unwrap(), build_store(&sents, &p).unwrap())
}

fn params(dim: usize) -> Params {
    random_params(Dims::new(dim, 6, 7, Head::ThreeClass), 0.5, 11)
}

#[test]
fn cached_scores_match_pairwise_evaluation() {
    let c = corpus();
    let (cs, ds) = stores(&c, 16);
    let p = params(16);
    let set = captions();
    let scores = score_corpus(&set.view(), &c, &cs, &ds, Some(&p), ScoreMode::Fgsm).unwrap();
    let caps: Vec<Vec<f64>> = lookup(&cs, &set.caption_keys()).unwrap();
    let cap_refs: Vec<&[f64]> = caps.iter().map(Vec::as_slice).collect();
    for (j, doc) in c.documents().iter().enumerate() {
        let sents: Vec<Vec<f64>> = lookup(&ds, doc.sentence_keys()).unwrap();
        let refs: Vec<&[f64]> = sents.iter().map(Vec::as_slice).collect();
        let z = score_document(&cap_refs, &refs, &p).unwrap();
        assert!((scores.z[j] - z).abs() < 1e-14);
        assert!((0.0..=1.0).contains(&z));
    }
    assert_eq!(scores.z[0], scores.z[2], "identical documents score identically");
    let total: f64 = scores.probs.iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn reversing_sentences_keeps_score() {
    let c = corpus();
    let (cs, ds) = stores(&c, 16);
    let p = params(16);
    let caps: Vec<Vec<f64>> = lookup(&cs, &captions().caption_keys()).unwrap();
    let cap_refs: Vec<&[f64]> = caps.iter().map(Vec::as_slice).collect();
    let sents: Vec<Vec<f64>> = lookup(&ds, c.documents()[1].sentence_keys()).unwrap();
    let mut refs: Vec<&[f64]> = sents.iter().map(Vec::as_slice).collect();
    let z = score_document(&cap_refs, &refs, &p).unwrap();
    refs.reverse();
    assert!((score_document(&cap_refs, &refs, &p).unwrap() - z).abs() < 1e-15);
    assert!(score_document(&cap_refs, &[], &p).is_err());
}

#[test]
fn permuting_corpus_permutes_scores() {
    let c = corpus();
    let (cs, ds) = stores(&c, 16);
    let p = params(16);
    let docs: Vec<Document> = c.documents().iter().rev().cloned().collect();
    let reversed = Corpus::new(docs).unwrap();
    let set = captions();
    let a = score_corpus(&set.view(), &c, &cs, &ds, Some(&p), ScoreMode::Fgsm).unwrap();
    let b = score_corpus(&set.view(), &reversed, &cs, &ds, Some(&p), ScoreMode::Fgsm).unwrap();
    let mut z = b.z.clone();
    z.reverse();
    assert_eq!(a.z, z);
}

#[test]
fn cosine_mode_uses_raw_embeddings() {
    let c = corpus();
    let (cs, ds) = stores(&c, 64);
    let set = captions();
    let s = score_corpus::<f64>(&set.view(), &c, &cs, &ds, None, ScoreMode::Cosine).unwrap();
    let caps: Vec<Vec<f64>> = lookup(&cs, &set.caption_keys()).unwrap();
    for (j, doc) in c.documents().iter().enumerate() {
        let sents: Vec<Vec<f64>> = lookup(&ds, doc.sentence_keys()).unwrap();
        let z: f64 = mean_pair_score(caps.len(), sents.len(), |a, b| cosine(&caps[a], &sents[b])).unwrap();
        assert!((s.z[j] - z).abs() < 1e-12);
    }
    assert!(score_corpus::<f64>(&set.view(), &c, &cs, &ds, None, ScoreMode::Fgsm).is_err());
}

#[test]
fn evidence_is_top_of_pair_matrix() {
    let c = corpus();
    let (cs, ds) = stores(&c, 16);
    let scorer = Scorer::new(c, &ds, Some(params(16))).unwrap();
    let caps: Vec<Vec<f64>> = lookup(&cs, &captions().caption_keys()).unwrap();
    let m = scorer.pair_matrix(&caps, 1, ScoreMode::Fgsm).unwrap();
    let mut flat: Vec<f64> = m.iter().flatten().copied().collect();
    flat.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let ev = scorer.evidence(&caps, 1, 4, ScoreMode::Fgsm).unwrap();
    let got: Vec<f64> = ev.iter().map(|e| e.score).collect();
    assert_eq!(got, flat[..4]);
    assert_eq!(scorer.evidence(&caps, 1, 100, ScoreMode::Fgsm).unwrap().len(), 6);
    assert!(scorer.evidence(&caps, 1, 0, ScoreMode::Fgsm).is_err());
}

#[test]
fn missing_keys_and_dims_are_errors() {
    let c = corpus();
    let (cs, ds) = stores(&c, 16);
    let set = CaptionSet {
        image_id: "other".into(),
        class_id: None,
        captions: vec!["x".into()],
    };
    let err = score_corpus(&set.view(), &c, &cs, &ds, Some(&params(16)), ScoreMode::Fgsm).unwrap_err();
    assert!(err.to_string().contains("img:other:c0"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&params(16), &path).unwrap();
    let loaded: Params = load_checkpoint(&path).unwrap();
    assert_eq!(loaded.as_slice(), params(16).as_slice());
    let (_, wide) = stores(&c, 32);
    assert!(Scorer::new(c, &wide, Some(loaded)).is_err());
}

proptest! {
    #[test]
    fn probabilities_normalized_and_shift_invariant(z in proptest::collection::vec(-5.0f64..5.0, 2..40), shift in -10.0f64..10.0) {
        let p = probabilities(&z, false);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let shifted: Vec<f64> = z.iter().map(|v| v + shift).collect();
        let q = probabilities(&shifted, false);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert_eq!(rank_order(&z, false), rank_order(&shifted, false));
    }
}
