use super::linalg::{add_assign, matvec_acc, matvec_t_acc, outer_acc, Block};
use super::params::{Dims, FgsmParams, Head, Parts, PartsMut};
use crate::scalar::lit;
use crate::{Error, Result, Scalar};

fn check_len<T>(e: &[T], dims: &Dims) -> Result<()> {
    if e.len() != dims.input {
        return Err(Error::DimMismatch {
            what: "input embedding".into(),
            expected: dims.input,
            actual: e.len(),
        });
    }
    Ok(())
}

/// `φ(e) = ReLU(W_phi e + b_phi)`
pub fn phi_forward<T: Scalar>(e: &[T], params: &FgsmParams<T>) -> Result<Vec<T>> {
    let dims = params.dims();
    check_len(e, &dims)?;
    Ok(project(&params.parts(), &dims, e).phi)
}

/// The head input `[φ1; φ2; |φ1 − φ2|]`.
pub fn pair_features<T: Scalar>(e1: &[T], e2: &[T], params: &FgsmParams<T>) -> Result<Vec<T>> {
    let phi1 = phi_forward(e1, params)?;
    let phi2 = phi_forward(e2, params)?;
    let mut feat = Vec::with_capacity(3 * phi1.len());
    feat.extend_from_slice(&phi1);
    feat.extend_from_slice(&phi2);
    feat.extend(phi1.iter().zip(&phi2).map(|(&a, &b)| (a - b).abs()));
    Ok(feat)
}

/// Logits of `h([φ1; φ2; |φ1 − φ2|])`. Not symmetric in its arguments.
pub fn score_pair<T: Scalar>(e1: &[T], e2: &[T], params: &FgsmParams<T>) -> Result<Vec<T>> {
    let dims = params.dims();
    let parts = params.parts();
    let feat = pair_features(e1, e2, params)?;
    let mut hid = parts.b_h1.to_vec();
    matvec_acc(parts.w_h1, Block::full(dims.hidden, 3 * dims.proj), &feat, &mut hid);
    hid.iter_mut().for_each(|h| *h = h.max(T::zero()));
    let mut logits = parts.b_h2.to_vec();
    matvec_acc(parts.w_h2, Block::full(dims.n_outputs(), dims.hidden), &hid, &mut logits);
    Ok(logits)
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn softmax_in_place<T: Scalar>(v: &mut [T]) {
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Probability that the pair matches: logistic of the single logit, or the
/// softmax probability of the positive class.
pub fn positive_score<T: Scalar>(logits: &[T]) -> T {
    match logits.len() {
        1 => sigmoid(logits[0]),
        _ => {
            let mut p = logits.to_vec();
            softmax_in_place(&mut p);
            p[0]
        }
    }
}

/// Positive score and its gradient with respect to the logits.
pub(crate) fn positive_score_grad<T: Scalar>(logits: &[T], grad: &mut [T]) -> T {
    match logits.len() {
        1 => {
            let s = sigmoid(logits[0]);
            grad[0] = s * (T::one() - s);
            s
        }
        _ => {
            grad.copy_from_slice(logits);
            softmax_in_place(grad);
            let p0 = grad[0];
            for (k, g) in grad.iter_mut().enumerate() {
                let delta = if k == 0 { T::one() } else { T::zero() };
                *g = p0 * (delta - *g);
            }
            p0
        }
    }
}

/// Cross-entropy of `logits` against `target` and its gradient. Binary heads
/// take target 1 (positive) or 0 (negative); three-class heads a class index.
pub(crate) fn cross_entropy<T: Scalar>(head: Head, logits: &[T], target: usize, grad: &mut [T]) -> T {
    match head {
        Head::Binary => {
            let l = logits[0];
            let y: T = lit(target as f64);
            // softplus(l) - y l, computed stably
            let loss = l.max(T::zero()) + (-l.abs()).exp().ln_1p() - y * l;
            grad[0] = sigmoid(l) - y;
            loss
        }
        Head::ThreeClass => {
            let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
            let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<T>().ln();
            grad.copy_from_slice(logits);
            softmax_in_place(grad);
            grad[target] -= T::one();
            lse - logits[target]
        }
    }
}

/// A projected sentence: pre-activation and `φ`.
#[derive(Debug, Clone)]
pub(crate) struct Projected<T> {
    pub pre: Vec<T>,
    pub phi: Vec<T>,
}

pub(crate) fn project<T: Scalar>(parts: &Parts<'_, T>, dims: &Dims, e: &[T]) -> Projected<T> {
    let mut pre = parts.b_phi.to_vec();
    matvec_acc(parts.w_phi, Block::full(dims.proj, dims.input), e, &mut pre);
    let phi = pre.iter().map(|&x| x.max(T::zero())).collect();
    Projected { pre, phi }
}

/// `dW_phi += dpre eᵀ`, `db_phi += dpre` with `dpre = dφ ⊙ 1[pre > 0]`.
pub(crate) fn project_backward<T: Scalar>(grads: &mut PartsMut<'_, T>, dims: &Dims, e: &[T], proj: &Projected<T>, dphi: &[T]) {
    let dpre: Vec<T> = proj
        .pre
        .iter()
        .zip(dphi)
        .map(|(&pre, &g)| if pre > T::zero() { g } else { T::zero() })
        .collect();
    outer_acc(grads.w_phi, Block::full(dims.proj, dims.input), &dpre, e);
    add_assign(grads.b_phi, &dpre);
}

// W_h1 acts on [φa; φb; |φa − φb|]; its three column blocks are applied separately
// so that the φa and φb products can be computed once per sentence.
fn h1_block(dims: &Dims, which: usize) -> Block {
    Block {
        rows: dims.hidden,
        cols: dims.proj,
        stride: 3 * dims.proj,
        offset: which * dims.proj,
    }
}

/// Contribution of a sentence in the first (`slot = 0`) or second (`slot = 1`)
/// argument position to the hidden pre-activation.
pub(crate) fn slot_product<T: Scalar>(parts: &Parts<'_, T>, dims: &Dims, slot: usize, phi: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); dims.hidden];
    matvec_acc(parts.w_h1, h1_block(dims, slot), phi, &mut out);
    out
}

/// Backprop of [`slot_product`]: `dW_block += δ φᵀ`, `dφ += W_blockᵀ δ`.
pub(crate) fn slot_backward<T: Scalar>(
    parts: &Parts<'_, T>,
    grads: &mut PartsMut<'_, T>,
    dims: &Dims,
    slot: usize,
    phi: &[T],
    delta: &[T],
    dphi: &mut [T],
) {
    let block = h1_block(dims, slot);
    outer_acc(grads.w_h1, block, delta, phi);
    matvec_t_acc(parts.w_h1, block, delta, dphi);
}

/// Per-pair activations, reused across pairs to avoid allocation.
#[derive(Debug, Clone)]
pub(crate) struct PairScratch<T> {
    pub diff: Vec<T>,
    pub hid_pre: Vec<T>,
    pub hid: Vec<T>,
    pub logits: Vec<T>,
    pub dlogits: Vec<T>,
    pub delta: Vec<T>,
    pub ddiff: Vec<T>,
}

impl<T: Scalar> PairScratch<T> {
    pub fn new(dims: &Dims) -> Self {
        Self {
            diff: vec![T::zero(); dims.proj],
            hid_pre: vec![T::zero(); dims.hidden],
            hid: vec![T::zero(); dims.hidden],
            logits: vec![T::zero(); dims.n_outputs()],
            dlogits: vec![T::zero(); dims.n_outputs()],
            delta: vec![T::zero(); dims.hidden],
            ddiff: vec![T::zero(); dims.proj],
        }
    }
}

/// Head forward from cached slot products `u_a = A φa`, `v_b = B φb`.
/// Leaves logits in `s.logits`.
pub(crate) fn pair_forward<T: Scalar>(
    parts: &Parts<'_, T>,
    dims: &Dims,
    phi_a: &[T],
    u_a: &[T],
    phi_b: &[T],
    v_b: &[T],
    s: &mut PairScratch<T>,
) {
    for ((d, &a), &b) in s.diff.iter_mut().zip(phi_a).zip(phi_b) {
        *d = (a - b).abs();
    }
    for (((h, &bias), &u), &v) in s.hid_pre.iter_mut().zip(parts.b_h1).zip(u_a).zip(v_b) {
        *h = bias + u + v;
    }
    matvec_acc(parts.w_h1, h1_block(dims, 2), &s.diff, &mut s.hid_pre);
    for (h, &pre) in s.hid.iter_mut().zip(&s.hid_pre) {
        *h = pre.max(T::zero());
    }
    s.logits.copy_from_slice(parts.b_h2);
    matvec_acc(parts.w_h2, Block::full(dims.n_outputs(), dims.hidden), &s.hid, &mut s.logits);
}

/// Backprop of [`pair_forward`] given `s.dlogits`. Accumulates head
/// gradients, the hidden delta into `du_a` / `dv_b` (to be pushed through
/// the slot blocks later), and the `|φa − φb|` path into `dphi_a` / `dphi_b`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn pair_backward<T: Scalar>(
    parts: &Parts<'_, T>,
    grads: &mut PartsMut<'_, T>,
    dims: &Dims,
    phi_a: &[T],
    phi_b: &[T],
    s: &mut PairScratch<T>,
    du_a: &mut [T],
    dv_b: &mut [T],
    dphi_a: &mut [T],
    dphi_b: &mut [T],
) {
    let out_block = Block::full(dims.n_outputs(), dims.hidden);
    outer_acc(grads.w_h2, out_block, &s.dlogits, &s.hid);
    add_assign(grads.b_h2, &s.dlogits);

    s.delta.iter_mut().for_each(|x| *x = T::zero());
    matvec_t_acc(parts.w_h2, out_block, &s.dlogits, &mut s.delta);
    for (d, &pre) in s.delta.iter_mut().zip(&s.hid_pre) {
        if pre <= T::zero() {
            *d = T::zero();
        }
    }
    add_assign(grads.b_h1, &s.delta);
    add_assign(du_a, &s.delta);
    add_assign(dv_b, &s.delta);

    let diff_block = h1_block(dims, 2);
    outer_acc(grads.w_h1, diff_block, &s.delta, &s.diff);
    s.ddiff.iter_mut().for_each(|x| *x = T::zero());
    matvec_t_acc(parts.w_h1, diff_block, &s.delta, &mut s.ddiff);
    for i in 0..dims.proj {
        let d = phi_a[i] - phi_b[i];
        let g = s.ddiff[i];
        if d > T::zero() {
            dphi_a[i] += g;
            dphi_b[i] -= g;
        } else if d < T::zero() {
            dphi_a[i] -= g;
            dphi_b[i] += g;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tiny(head: Head) -> FgsmParams<f64> {
        FgsmParams::init(Dims::new(4, 3, 5, head), 11)
    }

    #[test]
    fn zero_params() {
        let p = FgsmParams::<f64>::zeros(Dims::new(4, 3, 5, Head::ThreeClass));
        let e = [1.0, -2.0, 0.5, 3.0];
        assert!(phi_forward(&e, &p).unwrap().iter().all(|&x| x == 0.0));
        let logits = score_pair(&e, &e, &p).unwrap();
        assert_eq!(logits, vec![0.0; 3]);
        assert_abs_diff_eq!(positive_score(&logits), 1.0 / 3.0, epsilon = 1e-15);
        let b = FgsmParams::<f64>::zeros(Dims::new(4, 3, 5, Head::Binary));
        assert_eq!(positive_score(&score_pair(&e, &e, &b).unwrap()), 0.5);
    }

    #[test]
    fn identity_projection_passthrough() {
        let mut p = FgsmParams::<f64>::zeros(Dims::new(3, 3, 2, Head::Binary));
        let w = p.parts_mut().w_phi;
        for i in 0..3 {
            w[i * 3 + i] = 1.0;
        }
        assert_eq!(phi_forward(&[0.5, 0.0, 2.0], &p).unwrap(), vec![0.5, 0.0, 2.0]);
    }

    #[test]
    fn hand_computed_projection() {
        // W = [[1, 2], [3, -1]], b = [0.5, -0.5], e = (1, -1)
        // pre = (1 - 2 + 0.5, 3 + 1 - 0.5) = (-0.5, 3.5) -> ReLU (0, 3.5)
        let mut p = FgsmParams::<f64>::zeros(Dims::new(2, 2, 1, Head::Binary));
        let parts = p.parts_mut();
        parts.w_phi.copy_from_slice(&[1.0, 2.0, 3.0, -1.0]);
        parts.b_phi.copy_from_slice(&[0.5, -0.5]);
        assert_eq!(phi_forward(&[1.0, -1.0], &p).unwrap(), vec![0.0, 3.5]);
    }

    #[test]
    fn hand_computed_logits() {
        // d = p = 1, q = 2, binary.
        // φ(e) = ReLU(2e); e1 = 1 -> 2, e2 = 0.25 -> 0.5; features (2, 0.5, 1.5)
        // W_h1 = [[1, 0, 1], [-1, 1, 0]], b_h1 = (0, 0.5)
        //   hidden pre = (3.5, -1.0) -> ReLU (3.5, 0)
        // W_h2 = [2, 7], b_h2 = -1 -> logit 6
        let mut p = FgsmParams::<f64>::zeros(Dims::new(1, 1, 2, Head::Binary));
        let parts = p.parts_mut();
        parts.w_phi[0] = 2.0;
        parts.w_h1.copy_from_slice(&[1.0, 0.0, 1.0, -1.0, 1.0, 0.0]);
        parts.b_h1.copy_from_slice(&[0.0, 0.5]);
        parts.w_h2.copy_from_slice(&[2.0, 7.0]);
        parts.b_h2[0] = -1.0;
        assert_eq!(score_pair(&[1.0], &[0.25], &p).unwrap(), vec![6.0]);
        // swapped: features (0.5, 2, 1.5) -> pre (2.0, 2.0) -> logit 2*2 + 7*2 - 1 = 17
        assert_eq!(score_pair(&[0.25], &[1.0], &p).unwrap(), vec![17.0]);
    }

    #[test]
    fn positive_score_arithmetic() {
        assert_eq!(positive_score(&[0.0]), 0.5);
        assert_abs_diff_eq!(positive_score(&[0.0, 0.0, 0.0]), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(positive_score(&[2f64.ln(), 0.0, 0.0]), 0.5, epsilon = 1e-15);
        assert!(positive_score(&[800.0]) <= 1.0 && positive_score(&[-800.0]) >= 0.0);
    }

    #[test]
    fn self_pair_has_zero_difference_block() {
        let p = tiny(Head::Binary);
        let e = [0.3, -0.1, 0.8, 0.2];
        let f = pair_features(&e, &e, &p).unwrap();
        assert!(f[6..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn swap_keeps_difference_block() {
        let p = tiny(Head::ThreeClass);
        let (a, b) = ([0.3, -0.1, 0.8, 0.2], [-0.5, 0.4, 0.1, 0.9]);
        let f1 = pair_features(&a, &b, &p).unwrap();
        let f2 = pair_features(&b, &a, &p).unwrap();
        assert_eq!(f1[6..], f2[6..]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let p = tiny(Head::Binary);
        assert!(phi_forward(&[1.0, 2.0], &p).is_err());
        assert!(score_pair(&[1.0; 4], &[1.0; 5], &p).is_err());
    }

    #[test]
    fn cached_kernel_matches_reference() {
        for head in [Head::Binary, Head::ThreeClass] {
            let p = tiny(head);
            let dims = p.dims();
            let parts = p.parts();
            let (a, b) = ([0.3, -0.1, 0.8, 0.2], [-0.5, 0.4, 0.1, 0.9]);
            let pa = project(&parts, &dims, &a);
            let pb = project(&parts, &dims, &b);
            let ua = slot_product(&parts, &dims, 0, &pa.phi);
            let vb = slot_product(&parts, &dims, 1, &pb.phi);
            let mut s = PairScratch::new(&dims);
            pair_forward(&parts, &dims, &pa.phi, &ua, &pb.phi, &vb, &mut s);
            let reference = score_pair(&a, &b, &p).unwrap();
            for (x, y) in s.logits.iter().zip(&reference) {
                assert_abs_diff_eq!(*x, *y, epsilon = 1e-14);
            }
        }
    }
}
