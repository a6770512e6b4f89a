//! Batch-level prior on document distributions.
//!
//! For a batch of per-image distributions `p_x` over the corpus,
//!
//! ```text
//! R(B) = Σ_x ( -⟨p_x, p_x⟩ + Σ_{x' ≠ x} ⟨p_x, p_x'⟩ )
//! ```
//!
//! The first term rewards peaked distributions, the second rewards
//! different images choosing different documents. `R ≥ -|B|`, with equality
//! exactly for pairwise-orthogonal one-hot vectors.

use super::linalg::dot;
use crate::scalar::lit;
use crate::{Error, Result, Scalar};

fn check_distribution<T: Scalar>(i: usize, p: &[T], len: usize) -> Result<()> {
    if p.len() != len {
        return Err(Error::DimMismatch {
            what: format!("distribution {i}"),
            expected: len,
            actual: p.len(),
        });
    }
    if p.iter().any(|&x| !(x >= T::zero()) || !x.is_finite()) {
        return Err(Error::invalid(format!("distribution {i} has a negative or non-finite entry")));
    }
    let sum: T = p.iter().copied().sum();
    if (sum - T::one()).abs() > T::normalization_tolerance(len) {
        return Err(Error::invalid(format!("distribution {i} sums to {sum}, not 1")));
    }
    Ok(())
}

/// Value of `R(B)` and `∂R/∂p_x = -2 p_x + 2 Σ_{x' ≠ x} p_x'` for each `x`.
pub fn regularizer<T: Scalar>(batch_probs: &[Vec<T>]) -> Result<(T, Vec<Vec<T>>)> {
    let Some(first) = batch_probs.first() else {
        return Ok((T::zero(), Vec::new()));
    };
    let k = first.len();
    for (i, p) in batch_probs.iter().enumerate() {
        check_distribution(i, p, k)?;
    }
    Ok(regularizer_unchecked(batch_probs))
}

pub(crate) fn regularizer_unchecked<T: Scalar>(batch_probs: &[Vec<T>]) -> (T, Vec<Vec<T>>) {
    let two: T = lit(2.0);
    let mut value = T::zero();
    let mut grads = Vec::with_capacity(batch_probs.len());
    for (x, px) in batch_probs.iter().enumerate() {
        let mut term = -dot(px, px);
        let mut g: Vec<T> = px.iter().map(|&v| -two * v).collect();
        for (y, py) in batch_probs.iter().enumerate() {
            if y == x {
                continue;
            }
            term += dot(px, py);
            for (gi, &v) in g.iter_mut().zip(py) {
                *gi += two * v;
            }
        }
        value += term;
        grads.push(g);
    }
    (value, grads)
}
