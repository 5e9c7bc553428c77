use super::{huber_loss, softmax_cross_entropy, LossValue, Mlp};
use crate::Result;

/// Loss applied to the network output during a gradient check.
#[derive(Debug, Clone, PartialEq)]
pub enum LossSpec {
    Huber { target: Vec<f64>, delta: f64 },
    /// Softmax cross-entropy over consecutive groups of three logits, one
    /// class per group, summed.
    CrossEntropy { classes: Vec<usize> },
    /// Constantly zero.
    Zero,
}

impl LossSpec {
    pub fn evaluate(&self, output: &[f64]) -> Result<LossValue> {
        match self {
            LossSpec::Huber { target, delta } => huber_loss(output, target, *delta),
            LossSpec::CrossEntropy { classes } => grouped_cross_entropy(output, classes),
            LossSpec::Zero => Ok(LossValue {
                value: 0.0,
                gradient: vec![0.0; output.len()],
            }),
        }
    }
}

pub(crate) fn grouped_cross_entropy(output: &[f64], classes: &[usize]) -> Result<LossValue> {
    if output.len() != 3 * classes.len() {
        return Err(crate::Error::invalid(format!(
            "{} logits cannot hold {} three-way groups",
            output.len(),
            classes.len()
        )));
    }
    let mut value = 0.0;
    let mut gradient = Vec::with_capacity(output.len());
    for (logits, &class) in output.chunks_exact(3).zip(classes) {
        let l = softmax_cross_entropy(logits, class)?;
        value += l.value;
        gradient.extend(l.gradient);
    }
    Ok(LossValue { value, gradient })
}

/// Largest relative error between backprop gradients and central finite
/// differences, over every parameter.
///
/// Relative error is `|a - n| / max(|a|, |n|, 1e-6)`, so parameters whose
/// true gradient vanishes are compared absolutely at the `1e-6` scale.
pub fn gradient_check(net: &Mlp, input: &[f64], loss: &LossSpec, epsilon: f64) -> Result<f64> {
    if !(1e-6..=1e-3).contains(&epsilon) {
        return Err(crate::Error::invalid(format!(
            "finite-difference epsilon {epsilon} outside [1e-6, 1e-3]"
        )));
    }
    let out = net.forward(input)?;
    let l = loss.evaluate(&out)?;
    let analytic = net.gradients(&[input], &[&l.gradient])?;

    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for i in 0..net.param_count() {
        let original = probe.params()[i];
        probe.params_mut()[i] = original + epsilon;
        let plus = loss.evaluate(&probe.forward(input)?)?.value;
        probe.params_mut()[i] = original - epsilon;
        let minus = loss.evaluate(&probe.forward(input)?)?.value;
        probe.params_mut()[i] = original;

        let numeric = (plus - minus) / (2.0 * epsilon);
        let a = analytic.0[i];
        let scale = a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((a - numeric).abs() / scale);
    }
    Ok(worst)
}
