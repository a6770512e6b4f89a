//! Hashed bag-of-words against frozen values from `oracles/hashed_bow.py`.

use fieldguide_core::embed::{embed_hashed_bow, HashedBowConfig};

fn check(text: &str, expected: &[f64]) {
    let v = embed_hashed_bow(text, &HashedBowConfig { dim: 8, seed: 7 });
    assert_eq!(v.len(), expected.len());
    for (a, e) in v.iter().zip(expected) {
        assert!((*a as f64 - e).abs() < 1e-7, "{text}: {v:?}");
    }
}

#[test]
fn two_tokens() {
    check(
        "red bird",
        &[0.0, 0.0, 0.0, -0.7071067811865475, 0.0, 0.0, 0.0, -0.7071067811865475],
    );
}

#[test]
fn signed_collisions_cancel() {
    // "the" and "has" share bucket 4 with opposite signs
    check(
        "the red bird has a red crown",
        &[
            0.0,
            0.0,
            0.0,
            -0.30151134457776363,
            0.0,
            -0.30151134457776363,
            0.0,
            -0.9045340337332909,
        ],
    );
}

#[test]
fn punctuation_and_case_ignored() {
    let cfg = HashedBowConfig { dim: 8, seed: 7 };
    assert_eq!(embed_hashed_bow("Red, BIRD!", &cfg), embed_hashed_bow("red bird", &cfg));
    assert!(embed_hashed_bow("  ", &cfg).iter().all(|&x| x == 0.0));
}
