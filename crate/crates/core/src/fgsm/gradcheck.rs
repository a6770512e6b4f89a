//! Central finite-difference verification of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::{loss_pairs, LabeledPair};
use super::objective::prior_objective;
use super::params::{Dims, FgsmParams, Head};
use super::regularizer::{regularizer, regularizer_unchecked};
use crate::pairs::PairLabel;
use crate::Result;

/// Perturbation used for every central difference.
pub const FD_STEP: f64 = 1e-5;

/// Gradients smaller than this are compared on an absolute scale.
const ERROR_FLOOR: f64 = 1e-7;

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(ERROR_FLOOR);
    (analytic - numeric).abs() / scale
}

fn max_error_over_params<F>(params: &FgsmParams<f64>, analytic: &FgsmParams<f64>, mut f: F) -> Result<f64>
where
    F: FnMut(&FgsmParams<f64>) -> Result<f64>,
{
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for i in 0..params.as_slice().len() {
        let orig = params.as_slice()[i];
        probe.as_mut_slice()[i] = orig + FD_STEP;
        let plus = f(&probe)?;
        probe.as_mut_slice()[i] = orig - FD_STEP;
        let minus = f(&probe)?;
        probe.as_mut_slice()[i] = orig;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(analytic.as_slice()[i], numeric));
    }
    Ok(worst)
}

/// Largest relative error between the pair-loss gradient and central differences.
pub fn grad_check(params: &FgsmParams<f64>, probe: &[LabeledPair<'_, f64>]) -> Result<f64> {
    let (_, analytic) = loss_pairs(probe, params)?;
    max_error_over_params(params, &analytic, |p| Ok(loss_pairs(probe, p)?.0))
}

/// Largest relative error of the closed-form regularizer gradient.
pub fn grad_check_regularizer(batch_probs: &[Vec<f64>]) -> Result<f64> {
    let (_, analytic) = regularizer(batch_probs)?;
    let mut probe = batch_probs.to_vec();
    let mut worst = 0.0f64;
    for x in 0..probe.len() {
        for j in 0..probe[x].len() {
            let orig = probe[x][j];
            probe[x][j] = orig + FD_STEP;
            let plus = regularizer_unchecked(&probe).0;
            probe[x][j] = orig - FD_STEP;
            let minus = regularizer_unchecked(&probe).0;
            probe[x][j] = orig;
            worst = worst.max(relative_error(analytic[x][j], (plus - minus) / (2.0 * FD_STEP)));
        }
    }
    Ok(worst)
}

/// Largest relative error of the full prior gradient (scores, softmax, regularizer).
pub fn grad_check_prior(params: &FgsmParams<f64>, images: &[Vec<&[f64]>], docs: &[Vec<&[f64]>], negate: bool) -> Result<f64> {
    let (_, analytic) = prior_objective(params, images, docs, negate)?;
    max_error_over_params(params, &analytic, |p| Ok(prior_objective(p, images, docs, negate)?.0))
}

/// Random embeddings and labels for a gradient probe.
#[derive(Debug, Clone)]
pub struct RandomProbe {
    pub pairs: Vec<(Vec<f64>, Vec<f64>, PairLabel)>,
}

impl RandomProbe {
    pub fn new(dims: Dims, n_pairs: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: &[PairLabel] = match dims.head {
            Head::Binary => &[PairLabel::Positive, PairLabel::Negative],
            Head::ThreeClass => &[PairLabel::Positive, PairLabel::Neutral, PairLabel::Negative],
        };
        let vector = |rng: &mut ChaCha8Rng| (0..dims.input).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        let pairs = (0..n_pairs)
            .map(|i| (vector(&mut rng), vector(&mut rng), labels[i % labels.len()]))
            .collect();
        Self { pairs }
    }

    pub fn batch(&self) -> Vec<LabeledPair<'_, f64>> {
        self.pairs.iter().map(|(a, b, l)| (a.as_slice(), b.as_slice(), *l)).collect()
    }
}

/// Parameters with every entry (biases included) drawn uniformly from `[-scale, scale]`.
pub fn random_params(dims: Dims, scale: f64, seed: u64) -> FgsmParams<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = FgsmParams::zeros(dims);
    p.as_mut_slice().iter_mut().for_each(|w| *w = rng.gen_range(-scale..scale));
    p
}
