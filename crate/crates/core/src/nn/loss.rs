use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct LossOutput {
    pub loss: f64,
    pub probs: Tensor,
    pub grad_logits: Tensor,
}

fn check_finite(logits: &Tensor) -> Result<()> {
    if let Some(i) = logits.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("logit {i} is {}", logits.data()[i])));
    }
    Ok(())
}

/// Max-subtracted softmax over a logit vector.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    check_finite(logits)?;
    let max = logits.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps = logits.map(|z| (z - max).exp());
    let total = exps.sum();
    Ok(exps.map(|e| e / total))
}

/// Cross-entropy of `softmax(logits)` against a class index, with its
/// gradient `probs - onehot(label)`.
pub fn softmax_cross_entropy(logits: &Tensor, label: usize) -> Result<LossOutput> {
    let classes = logits.len();
    if label >= classes {
        return Err(Error::argument(format!("label {label} out of range for {classes} classes")));
    }
    check_finite(logits)?;
    let z = logits.data();
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = z.iter().map(|&v| (v - max).exp()).sum();
    // log-sum-exp form keeps the loss accurate when probs[label] underflows.
    let loss = total.ln() - (z[label] - max);
    let probs = logits.map(|v| (v - max).exp() / total);
    let mut grad = probs.clone();
    grad.data_mut()[label] -= 1.0;
    Ok(LossOutput {
        loss,
        probs,
        grad_logits: grad,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn uniform_logits() {
        let out = softmax_cross_entropy(&Tensor::filled([3], 0.7).unwrap(), 1).unwrap();
        assert!((out.loss - 3f64.ln()).abs() < 1e-12);
        for &p in out.probs.data() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn large_logits_are_stable() {
        let out = softmax_cross_entropy(&Tensor::from_vec([2], vec![1000., 0.]).unwrap(), 0).unwrap();
        assert!(out.loss.is_finite());
        assert!(out.loss < 1e-9);
        let out = softmax_cross_entropy(&Tensor::from_vec([2], vec![1000., 0.]).unwrap(), 1).unwrap();
        assert!((out.loss - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn matches_high_precision_reference() {
        // Reference values evaluated with 40-digit arithmetic.
        const LOSS: f64 = 0.407_605_964_444_380_3;
        const PROBS: [f64; 3] = [0.090_030_573_170_380_46, 0.244_728_471_054_797_65, 0.665_240_955_774_821_9];
        let out = softmax_cross_entropy(&Tensor::from_vec([3], vec![1., 2., 3.]).unwrap(), 2).unwrap();
        assert!((out.loss - LOSS).abs() < 1e-14);
        for i in 0..3 {
            assert!((out.probs.data()[i] - PROBS[i]).abs() < 1e-15);
        }
        let expected_grad = [PROBS[0], PROBS[1], PROBS[2] - 1.0];
        for i in 0..3 {
            assert!((out.grad_logits.data()[i] - expected_grad[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn errors() {
        let logits = Tensor::zeros([2]).unwrap();
        assert!(matches!(softmax_cross_entropy(&logits, 2), Err(Error::Argument(_))));
        let bad = Tensor::from_vec([2], vec![f64::NAN, 0.]).unwrap();
        assert!(matches!(softmax_cross_entropy(&bad, 0), Err(Error::Numeric(_))));
        let bad = Tensor::from_vec([2], vec![f64::INFINITY, 0.]).unwrap();
        assert!(matches!(softmax(&bad), Err(Error::Numeric(_))));
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(z in prop::collection::vec(-50.0f64..50.0, 1..12)) {
            let p = softmax(&Tensor::from_vec([z.len()], z).unwrap()).unwrap();
            prop_assert!(p.data().iter().all(|&v| v >= 0.0));
            prop_assert!((p.sum() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn confident_prediction_has_tiny_loss(c in 2usize..8, label_seed in any::<usize>()) {
            let label = label_seed % c;
            let mut z = vec![0.0; c];
            z[label] = 60.0;
            let out = softmax_cross_entropy(&Tensor::from_vec([c], z).unwrap(), label).unwrap();
            prop_assert!(out.loss < 1e-9);
        }

        #[test]
        fn uniform_prediction_costs_ln_c(c in 1usize..20, v in -5.0f64..5.0) {
            let out = softmax_cross_entropy(&Tensor::filled([c], v).unwrap(), 0).unwrap();
            prop_assert!((out.loss - (c as f64).ln()).abs() < 1e-12);
        }
    }
}
