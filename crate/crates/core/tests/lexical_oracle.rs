//! Lexical rankers against frozen brute-force values from `oracles/lexical.py`.

use fieldguide_core::baselines::{Bm25Index, Bm25Params, IdfFloor, LexicalIndex, LexicalMethod, QueryMode, TfidfIndex};
use fieldguide_core::corpus::{Corpus, Document};

const DOCS: [&str; 5] = [
    "A small red bird with a black crown.",
    "The red bird sings in the forest.",
    "A large blue bird with a white belly.",
    "Black crown and black wings on a small bird.",
    "The owl hunts at night in the forest.",
];

fn corpus() -> Corpus {
    Corpus::new(
        DOCS.iter()
            .enumerate()
            .map(|(i, t)| Document::new(format!("d{i}"), format!("class {i}"), vec![(*t).to_owned()]).unwrap())
            .collect(),
    )
    .unwrap()
}

fn assert_close(actual: &[f64], expected: &[f64]) {
    assert_eq!(actual.len(), expected.len());
    for (a, e) in actual.iter().zip(expected) {
        assert!((a - e).abs() < 1e-9, "{actual:?} vs {expected:?}");
    }
}

#[test]
fn tfidf_bigram_trigram_scores() {
    let idx = TfidfIndex::build(&corpus(), &[2, 3]).unwrap();
    let s = idx.score_text("small red bird with a black crown");
    assert_close(
        &s,
        &[
            0.9212036401551936,
            0.06904435043356921,
            0.1856666932472891,
            0.05657841741740069,
            0.0,
        ],
    );
}

#[test]
fn tfidf_unigram_bigram_scores() {
    let idx = TfidfIndex::build(&corpus(), &[1, 2]).unwrap();
    let s = idx.score_text("black crown in the forest");
    assert_close(
        &s,
        &[
            0.26258137497008993,
            0.5201438876872865,
            0.0,
            0.2948625197914567,
            0.45405926705588234,
        ],
    );
}

#[test]
fn tfidf_document_vectors_are_unit() {
    let idx = TfidfIndex::build(&corpus(), &[2, 3]).unwrap();
    for j in 0..DOCS.len() {
        let n: f64 = idx.document_vector(j).iter().map(|(_, w)| w * w).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }
}

#[test]
fn tfidf_self_query_ranks_first() {
    let idx = LexicalIndex::build(LexicalMethod::Tfidf, &corpus(), &[2, 3], Bm25Params::default()).unwrap();
    for (j, text) in DOCS.iter().enumerate() {
        let s = idx.score_text(text);
        assert!((s[j] - 1.0).abs() < 1e-12);
        assert!(s.iter().enumerate().all(|(k, &v)| k == j || v < 1.0 - 1e-9));
    }
}

#[test]
fn bm25_scores() {
    let idx = Bm25Index::build(&corpus(), Bm25Params::default()).unwrap();
    assert_close(
        &idx.score_text("black crown forest"),
        &[0.6729444732424258, 0.3565268732410203, 0.0, 0.7806613895856467, 0.3364722366212129],
    );
    // repeated query tokens count twice; "bird" has a floored idf
    assert_close(
        &idx.score_text("bird bird owl"),
        &[
            0.3968781339246754,
            0.4205331220393912,
            0.3968781339246754,
            0.3757426119996927,
            1.0986122886681098,
        ],
    );
}

#[test]
fn bm25_mean_all_floor_differs() {
    let c = corpus();
    let a = Bm25Index::build(&c, Bm25Params::default()).unwrap();
    let b = Bm25Index::build(
        &c,
        Bm25Params {
            floor: IdfFloor::MeanAll,
            ..Default::default()
        },
    )
    .unwrap();
    assert_ne!(a.idf("bird"), b.idf("bird"));
    assert_eq!(a.idf("owl"), b.idf("owl"));
}

#[test]
fn bm25_monotone_in_term_frequency() {
    let docs = ["red bird sings", "red red bird", "blue frog", "green frog", "grey owl"];
    let c = Corpus::new(
        docs.iter()
            .enumerate()
            .map(|(i, t)| Document::new(format!("d{i}"), "x", vec![(*t).to_owned()]).unwrap())
            .collect(),
    )
    .unwrap();
    let s = Bm25Index::build(&c, Bm25Params::default()).unwrap().score_text("red");
    assert!(s[1] > s[0]);
}

#[test]
fn per_caption_mean_mode() {
    let idx = LexicalIndex::build(LexicalMethod::Bm25, &corpus(), &[2, 3], Bm25Params::default()).unwrap();
    let caps = vec!["black crown".to_owned(), "forest".to_owned()];
    let a = idx.score_text("black crown");
    let b = idx.score_text("forest");
    let mean = idx.score_captions(&caps, QueryMode::MeanPerCaption);
    for j in 0..DOCS.len() {
        assert!((mean[j] - (a[j] + b[j]) / 2.0).abs() < 1e-15);
    }
    assert_eq!(
        idx.score_captions(&caps, QueryMode::Concatenate),
        idx.score_text("black crown forest")
    );
}
