//! The batch prior evaluated through document scoring.
//!
//! For each image of the batch, every document gets the mean positive score
//! of all (caption, sentence) pairs; a softmax turns those scores into a
//! distribution over documents; the prior `R` is taken over the batch of
//! distributions. Gradients flow back through the softmax, the mean and the
//! matching head into every parameter.

use rayon::prelude::*;

use super::forward::{
    pair_backward, pair_forward, positive_score_grad, project, project_backward, slot_backward, slot_product, softmax_in_place,
    PairScratch, Projected,
};
use super::params::{Dims, FgsmParams, Parts};
use super::regularizer::regularizer_unchecked;
use crate::{Error, Result, Scalar};

/// Sentences projected once and multiplied into one argument slot of the head.
pub(crate) struct SlotCache<T> {
    pub projected: Vec<Projected<T>>,
    pub slot: Vec<Vec<T>>,
}

impl<T: Scalar> SlotCache<T> {
    pub fn build(parts: &Parts<'_, T>, dims: &Dims, slot: usize, embeddings: &[&[T]]) -> Self {
        let projected: Vec<Projected<T>> = embeddings.iter().map(|e| project(parts, dims, e)).collect();
        let slot = projected.iter().map(|p| slot_product(parts, dims, slot, &p.phi)).collect();
        Self { projected, slot }
    }
}

/// Document `j` covers sentences `bounds[j]..bounds[j + 1]` of the flat list.
pub(crate) fn doc_bounds<S>(docs: &[Vec<S>]) -> Vec<usize> {
    let mut bounds = Vec::with_capacity(docs.len() + 1);
    bounds.push(0);
    for d in docs {
        bounds.push(bounds.last().unwrap() + d.len());
    }
    bounds
}

/// Mean positive score of every document for one caption set.
pub(crate) fn document_scores<T: Scalar>(
    parts: &Parts<'_, T>,
    dims: &Dims,
    captions: &SlotCache<T>,
    sentences: &SlotCache<T>,
    bounds: &[usize],
) -> Vec<T> {
    let mut scratch = PairScratch::new(dims);
    let mut grad = vec![T::zero(); dims.n_outputs()];
    let n_caps = captions.projected.len();
    (0..bounds.len() - 1)
        .map(|j| {
            let mut acc = T::zero();
            for c in 0..n_caps {
                for s in bounds[j]..bounds[j + 1] {
                    pair_forward(
                        parts,
                        dims,
                        &captions.projected[c].phi,
                        &captions.slot[c],
                        &sentences.projected[s].phi,
                        &sentences.slot[s],
                        &mut scratch,
                    );
                    acc += positive_score_grad(&scratch.logits, &mut grad);
                }
            }
            acc / T::from_usize(n_caps * (bounds[j + 1] - bounds[j])).unwrap()
        })
        .collect()
}

struct ImageGrads<T> {
    grads: FgsmParams<T>,
    dv_sent: Vec<Vec<T>>,
    dphi_sent: Vec<Vec<T>>,
}

/// Value of the batch prior and its gradient with respect to the parameters.
///
/// `images[i]` lists the caption embeddings of image `i`; `docs[j]` the
/// sentence embeddings of document `j`. With `negate`, distributions are
/// `softmax(-z)` instead of `softmax(z)`.
pub fn prior_objective<T: Scalar>(
    params: &FgsmParams<T>,
    images: &[Vec<&[T]>],
    docs: &[Vec<&[T]>],
    negate: bool,
) -> Result<(T, FgsmParams<T>)> {
    let dims = params.dims();
    for e in images.iter().flatten().chain(docs.iter().flatten()) {
        params.check_input_dim(e.len())?;
    }
    if images.iter().any(Vec::is_empty) || docs.iter().any(Vec::is_empty) {
        return Err(Error::invalid("every image needs captions and every document sentences"));
    }
    if images.is_empty() || docs.is_empty() {
        return Ok((T::zero(), FgsmParams::zeros(dims)));
    }
    let parts = params.parts();
    let sign = if negate { -T::one() } else { T::one() };
    let flat_sentences: Vec<&[T]> = docs.iter().flatten().copied().collect();
    let bounds = doc_bounds(docs);
    let sentences = SlotCache::build(&parts, &dims, 1, &flat_sentences);

    let caption_caches: Vec<SlotCache<T>> = images.par_iter().map(|caps| SlotCache::build(&parts, &dims, 0, caps)).collect();
    let probs: Vec<Vec<T>> = caption_caches
        .par_iter()
        .map(|caps| {
            let mut z = document_scores(&parts, &dims, caps, &sentences, &bounds);
            z.iter_mut().for_each(|v| *v *= sign);
            softmax_in_place(&mut z);
            z
        })
        .collect();
    let (value, dprobs) = regularizer_unchecked(&probs);

    // dR/dz_j = sign · p_j (g_j - ⟨g, p⟩)
    let dz: Vec<Vec<T>> = probs
        .iter()
        .zip(&dprobs)
        .map(|(p, g)| {
            let gp: T = p.iter().zip(g).map(|(&a, &b)| a * b).sum();
            p.iter().zip(g).map(|(&pj, &gj)| sign * pj * (gj - gp)).collect()
        })
        .collect();

    let per_image: Vec<ImageGrads<T>> = (0..images.len())
        .into_par_iter()
        .map(|i| image_backward(&parts, &dims, &images[i], &caption_caches[i], &sentences, &bounds, &dz[i]))
        .collect();

    let mut grads = FgsmParams::zeros(dims);
    let n_sent = flat_sentences.len();
    let mut dv_sent = vec![vec![T::zero(); dims.hidden]; n_sent];
    let mut dphi_sent = vec![vec![T::zero(); dims.proj]; n_sent];
    for img in &per_image {
        grads.add_scaled(&img.grads, T::one());
        for s in 0..n_sent {
            for (a, &b) in dv_sent[s].iter_mut().zip(&img.dv_sent[s]) {
                *a += b;
            }
            for (a, &b) in dphi_sent[s].iter_mut().zip(&img.dphi_sent[s]) {
                *a += b;
            }
        }
    }
    let mut gp = grads.parts_mut();
    for s in 0..n_sent {
        slot_backward(
            &parts,
            &mut gp,
            &dims,
            1,
            &sentences.projected[s].phi,
            &dv_sent[s],
            &mut dphi_sent[s],
        );
        project_backward(&mut gp, &dims, flat_sentences[s], &sentences.projected[s], &dphi_sent[s]);
    }
    Ok((value, grads))
}

fn image_backward<T: Scalar>(
    parts: &Parts<'_, T>,
    dims: &Dims,
    caption_embs: &[&[T]],
    captions: &SlotCache<T>,
    sentences: &SlotCache<T>,
    bounds: &[usize],
    dz: &[T],
) -> ImageGrads<T> {
    let n_caps = captions.projected.len();
    let n_sent = sentences.projected.len();
    let mut grads = FgsmParams::zeros(*dims);
    let mut du_cap = vec![vec![T::zero(); dims.hidden]; n_caps];
    let mut dphi_cap = vec![vec![T::zero(); dims.proj]; n_caps];
    let mut dv_sent = vec![vec![T::zero(); dims.hidden]; n_sent];
    let mut dphi_sent = vec![vec![T::zero(); dims.proj]; n_sent];
    let mut scratch = PairScratch::new(dims);
    let mut dpos = vec![T::zero(); dims.n_outputs()];
    {
        let mut gp = grads.parts_mut();
        for (j, &dzj) in dz.iter().enumerate() {
            let weight = dzj / T::from_usize(n_caps * (bounds[j + 1] - bounds[j])).unwrap();
            for c in 0..n_caps {
                for s in bounds[j]..bounds[j + 1] {
                    pair_forward(
                        parts,
                        dims,
                        &captions.projected[c].phi,
                        &captions.slot[c],
                        &sentences.projected[s].phi,
                        &sentences.slot[s],
                        &mut scratch,
                    );
                    positive_score_grad(&scratch.logits, &mut dpos);
                    for (d, &g) in scratch.dlogits.iter_mut().zip(&dpos) {
                        *d = weight * g;
                    }
                    pair_backward(
                        parts,
                        &mut gp,
                        dims,
                        &captions.projected[c].phi,
                        &sentences.projected[s].phi,
                        &mut scratch,
                        &mut du_cap[c],
                        &mut dv_sent[s],
                        &mut dphi_cap[c],
                        &mut dphi_sent[s],
                    );
                }
            }
        }
        for c in 0..n_caps {
            slot_backward(parts, &mut gp, dims, 0, &captions.projected[c].phi, &du_cap[c], &mut dphi_cap[c]);
            project_backward(&mut gp, dims, caption_embs[c], &captions.projected[c], &dphi_cap[c]);
        }
    }
    ImageGrads { grads, dv_sent, dphi_sent }
}
