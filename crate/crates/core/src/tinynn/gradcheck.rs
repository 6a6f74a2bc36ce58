use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::loss::LossSpec;
use super::network::DenseNetwork;

/// Maximum relative error between backpropagated gradients and central
/// differences `(f(θ+ε) − f(θ−ε)) / 2ε`, over every parameter.
///
/// Relative error is `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn grad_check<T: Scalar>(
    net: &DenseNetwork<T>,
    loss: &LossSpec<T>,
    input: &[T],
    epsilon: T,
) -> Result<T> {
    if epsilon.partial_cmp(&T::zero()) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::input("epsilon must be positive"));
    }
    let head = net.head();
    let logits = net.logits(input)?;
    let logit_grad = loss.logit_grad(head, &logits)?;
    let x = ndarray::ArrayView2::from_shape((1, input.len()), input)
        .map_err(|e| Error::input(e.to_string()))?;
    let g = ndarray::Array2::from_shape_vec((1, logit_grad.len()), logit_grad)
        .map_err(|e| Error::input(e.to_string()))?;
    let analytic = net.gradients(x, g.view())?.flat();

    let eval = |n: &DenseNetwork<T>| -> Result<T> { loss.value(head, &n.logits(input)?) };
    let mut probe = net.clone();
    let two_eps = epsilon + epsilon;
    let floor = T::lit(1e-8);
    let mut worst = T::zero();
    for (i, &a) in analytic.iter().enumerate() {
        let original = probe.parameter(i);
        probe.set_parameter(i, original + epsilon);
        let plus = eval(&probe)?;
        probe.set_parameter(i, original - epsilon);
        let minus = eval(&probe)?;
        probe.set_parameter(i, original);
        let numeric = (plus - minus) / two_eps;
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::tinynn::OutputHead;
    use rand::Rng;

    fn random_input(seed: u64, n: usize) -> Vec<f64> {
        let mut r = rng::substream(seed, 99, 0);
        (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn random_softmax_net_passes() {
        let net = DenseNetwork::<f64>::new(&[5, 7, 6, 2], OutputHead::Softmax2, 21).unwrap();
        let err = grad_check(&net, &LossSpec::CrossEntropy { label: 1 }, &random_input(1, 5), 1e-5).unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn linear_net_quadratic_loss_is_exact() {
        let net = DenseNetwork::<f64>::new(&[4, 1], OutputHead::SigmoidScalar, 8).unwrap();
        let loss = LossSpec::QuadraticLogits { target: vec![0.3] };
        let err = grad_check(&net, &loss, &random_input(2, 4), 1e-5).unwrap();
        assert!(err < 1e-9, "relative error {err}");
    }

    #[test]
    fn zero_net_symmetric_loss_has_zero_gradients() {
        // posterior is [0.5, 0.5]; the symmetric target makes the loss flat
        let net = DenseNetwork::<f64>::zeros(&[3, 4, 2], OutputHead::Softmax2).unwrap();
        let loss = LossSpec::QuadraticLogits { target: vec![0.0, 0.0] };
        let err = grad_check(&net, &loss, &[0.2, -0.4, 0.9], 1e-5).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn rejects_nonpositive_epsilon() {
        let net = DenseNetwork::<f64>::zeros(&[1, 1], OutputHead::SigmoidScalar).unwrap();
        let loss = LossSpec::QuadraticLogits { target: vec![0.0] };
        assert!(grad_check(&net, &loss, &[1.0], 0.0).is_err());
    }
}
