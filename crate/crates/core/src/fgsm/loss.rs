use super::forward::{cross_entropy, pair_backward, pair_forward, project, project_backward, slot_backward, slot_product, PairScratch};
use super::params::{FgsmParams, Head};
use crate::pairs::PairLabel;
use crate::{Error, Result, Scalar};

/// One labelled training example: first embedding, second embedding, label.
pub type LabeledPair<'a, T> = (&'a [T], &'a [T], PairLabel);

fn target(head: Head, label: PairLabel) -> Result<usize> {
    match (head, label) {
        (Head::Binary, PairLabel::Positive) => Ok(1),
        (Head::Binary, PairLabel::Negative) => Ok(0),
        (Head::Binary, PairLabel::Neutral) => Err(Error::invalid("label 'neutral' is out of range for a binary head")),
        (Head::ThreeClass, l) => Ok(l.class_index()),
    }
}

/// Mean cross-entropy over `batch` and its gradient with respect to every
/// parameter (binary cross-entropy for a one-logit head, softmax
/// cross-entropy for the three-class head).
pub fn loss_pairs<T: Scalar>(batch: &[LabeledPair<'_, T>], params: &FgsmParams<T>) -> Result<(T, FgsmParams<T>)> {
    let dims = params.dims();
    let mut grads = FgsmParams::zeros(dims);
    if batch.is_empty() {
        return Ok((T::zero(), grads));
    }
    let parts = params.parts();
    let mut scratch = PairScratch::new(&dims);
    let mut total = T::zero();
    let inv_n = T::one() / T::from_usize(batch.len()).unwrap();

    for &(e1, e2, label) in batch {
        for e in [e1, e2] {
            if e.len() != dims.input {
                return Err(Error::DimMismatch {
                    what: "input embedding".into(),
                    expected: dims.input,
                    actual: e.len(),
                });
            }
        }
        let t = target(dims.head, label)?;
        let pa = project(&parts, &dims, e1);
        let pb = project(&parts, &dims, e2);
        let ua = slot_product(&parts, &dims, 0, &pa.phi);
        let vb = slot_product(&parts, &dims, 1, &pb.phi);
        pair_forward(&parts, &dims, &pa.phi, &ua, &pb.phi, &vb, &mut scratch);

        let logits = scratch.logits.clone();
        total += cross_entropy(dims.head, &logits, t, &mut scratch.dlogits);
        scratch.dlogits.iter_mut().for_each(|g| *g *= inv_n);

        let mut gp = grads.parts_mut();
        let mut du = vec![T::zero(); dims.hidden];
        let mut dv = vec![T::zero(); dims.hidden];
        let mut dphi_a = vec![T::zero(); dims.proj];
        let mut dphi_b = vec![T::zero(); dims.proj];
        pair_backward(
            &parts,
            &mut gp,
            &dims,
            &pa.phi,
            &pb.phi,
            &mut scratch,
            &mut du,
            &mut dv,
            &mut dphi_a,
            &mut dphi_b,
        );
        slot_backward(&parts, &mut gp, &dims, 0, &pa.phi, &du, &mut dphi_a);
        slot_backward(&parts, &mut gp, &dims, 1, &pb.phi, &dv, &mut dphi_b);
        project_backward(&mut gp, &dims, e1, &pa, &dphi_a);
        project_backward(&mut gp, &dims, e2, &pb, &dphi_b);
    }
    Ok((total * inv_n, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fgsm::Dims;

    #[test]
    fn zero_params_give_log_class_count() {
        let a = [0.2, -0.4, 0.9];
        let b = [0.0, 1.0, -1.0];
        let binary = FgsmParams::<f64>::zeros(Dims::new(3, 2, 2, Head::Binary));
        let batch = [(&a[..], &b[..], PairLabel::Positive), (&b[..], &a[..], PairLabel::Negative)];
        let (loss, grads) = loss_pairs(&batch, &binary).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-12);
        assert!(grads.is_finite());

        let three = FgsmParams::<f64>::zeros(Dims::new(3, 2, 2, Head::ThreeClass));
        let batch = [
            (&a[..], &b[..], PairLabel::Positive),
            (&a[..], &b[..], PairLabel::Neutral),
            (&b[..], &a[..], PairLabel::Negative),
        ];
        let (loss, _) = loss_pairs(&batch, &three).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn neutral_rejected_for_binary_head() {
        let p = FgsmParams::<f64>::zeros(Dims::new(2, 2, 2, Head::Binary));
        let e = [1.0, 0.0];
        assert!(loss_pairs(&[(&e[..], &e[..], PairLabel::Neutral)], &p).is_err());
    }

    #[test]
    fn loss_decreases_along_negative_gradient() {
        let p = FgsmParams::<f64>::init(Dims::new(3, 4, 4, Head::ThreeClass), 5);
        let a = [0.2, -0.4, 0.9];
        let b = [0.5, 0.1, -0.3];
        let batch = [(&a[..], &b[..], PairLabel::Positive), (&b[..], &a[..], PairLabel::Negative)];
        let (l0, g) = loss_pairs(&batch, &p).unwrap();
        let mut q = p.clone();
        q.add_scaled(&g, -1e-2);
        let (l1, _) = loss_pairs(&batch, &q).unwrap();
        assert!(l1 < l0);
    }
}
