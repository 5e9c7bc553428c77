use crate::{Error, Result};

/// A scalar loss together with its gradient w.r.t. the network output.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// Elementwise Huber loss, summed over components.
///
/// Each residual `r = prediction - target` contributes `r²/2` when
/// `|r| <= delta` and `delta·(|r| - delta/2)` otherwise; the gradient is the
/// residual clipped to `[-delta, delta]`.
pub fn huber_loss(prediction: &[f64], target: &[f64], delta: f64) -> Result<LossValue> {
    if prediction.len() != target.len() {
        return Err(Error::invalid(format!(
            "prediction has length {}, target {}",
            prediction.len(),
            target.len()
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("huber delta must be positive, got {delta}")));
    }
    let mut value = 0.0;
    let gradient = prediction
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let r = p - t;
            if r.abs() <= delta {
                value += 0.5 * r * r;
                r
            } else {
                value += delta * (r.abs() - 0.5 * delta);
                delta * r.signum()
            }
        })
        .collect();
    Ok(LossValue { value, gradient })
}

/// `-log softmax(logits)[class]` with gradient `softmax(logits) - onehot(class)`.
pub fn softmax_cross_entropy(logits: &[f64], class: usize) -> Result<LossValue> {
    if class >= logits.len() {
        return Err(Error::invalid(format!(
            "class {class} out of range for {} logits",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let value = sum.ln() - (logits[class] - max);
    let gradient = exps
        .iter()
        .enumerate()
        .map(|(i, e)| e / sum - if i == class { 1.0 } else { 0.0 })
        .collect();
    Ok(LossValue { value, gradient })
}

/// Numerically stable softmax.
pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn huber_identity_is_zero() {
        let l = huber_loss(&[1.0, -2.0], &[1.0, -2.0], 1.0).unwrap();
        assert_eq!(l.value, 0.0);
        assert_eq!(l.gradient, vec![0.0, 0.0]);
    }

    #[test]
    fn huber_branches() {
        let quad = huber_loss(&[0.5], &[0.0], 1.0).unwrap();
        assert_eq!(quad.value, 0.125);
        assert_eq!(quad.gradient, vec![0.5]);

        let lin = huber_loss(&[3.0], &[0.0], 1.0).unwrap();
        assert_eq!(lin.value, 2.5);
        assert_eq!(lin.gradient, vec![1.0]);

        let neg = huber_loss(&[0.0], &[3.0], 1.0).unwrap();
        assert_eq!(neg.value, 2.5);
        assert_eq!(neg.gradient, vec![-1.0]);

        let summed = huber_loss(&[0.5, 3.0], &[0.0, 0.0], 1.0).unwrap();
        assert_eq!(summed.value, 2.625);
    }

    #[test]
    fn huber_rejects_bad_arguments() {
        assert!(huber_loss(&[1.0], &[1.0, 2.0], 1.0).is_err());
        assert!(huber_loss(&[1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn cross_entropy_reference_values() {
        let uniform = softmax_cross_entropy(&[0.0, 0.0, 0.0], 1).unwrap();
        assert!((uniform.value - 3f64.ln()).abs() < 1e-12);

        let saturated = softmax_cross_entropy(&[10.0, -10.0, -10.0], 0).unwrap();
        assert!(saturated.value < 1e-4);

        // Direct formula oracle: -ln(e^3 / (e^1 + e^2 + e^3)).
        let direct = -(3f64.exp() / (1f64.exp() + 2f64.exp() + 3f64.exp())).ln();
        let l = softmax_cross_entropy(&[1.0, 2.0, 3.0], 2).unwrap();
        assert!((l.value - direct).abs() < 1e-12);
        assert!((direct - 0.407_605_964_444_380_1).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_rejects_out_of_range_class() {
        assert!(matches!(
            softmax_cross_entropy(&[0.0, 0.0, 0.0], 3),
            Err(Error::InvalidInput(_))
        ));
    }

    proptest! {
        #[test]
        fn huber_gradient_bounded_and_continuous(r in -50.0f64..50.0, delta in 0.01f64..5.0) {
            let l = huber_loss(&[r], &[0.0], delta).unwrap();
            prop_assert!(l.value >= 0.0);
            prop_assert!(l.gradient[0].abs() <= delta);
            // Continuity across a tiny step in the residual.
            let h = 1e-9;
            let l2 = huber_loss(&[r + h], &[0.0], delta).unwrap();
            prop_assert!((l2.value - l.value).abs() <= delta * h * 1.0001 + 1e-12);
            prop_assert!((l2.gradient[0] - l.gradient[0]).abs() <= h * 1.0001 + 1e-12);
        }

        #[test]
        fn cross_entropy_gradient_sums_to_zero(
            logits in proptest::collection::vec(-30.0f64..30.0, 3),
            class in 0usize..3,
        ) {
            let l = softmax_cross_entropy(&logits, class).unwrap();
            prop_assert!(l.value >= 0.0);
            prop_assert!(l.gradient.iter().sum::<f64>().abs() < 1e-12);
        }
    }
}
