use ndarray::Zip;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::network::{DenseNetwork, Gradients};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moments for one network, with bias correction.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub first_moment: Gradients<T>,
    pub second_moment: Gradients<T>,
    pub step_count: u64,
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(net: &DenseNetwork<T>, config: AdamConfig) -> Self {
        AdamState {
            first_moment: Gradients::zeros_like(net),
            second_moment: Gradients::zeros_like(net),
            step_count: 0,
            learning_rate: T::lit(config.learning_rate),
            beta1: T::lit(config.beta1),
            beta2: T::lit(config.beta2),
            epsilon: T::lit(config.epsilon),
        }
    }

    /// Apply one update in place.
    pub fn step(&mut self, net: &mut DenseNetwork<T>, grads: &Gradients<T>) -> Result<()> {
        if !grads.matches_shape(net) || !self.first_moment.matches_shape(net) {
            return Err(Error::input("gradient/moment shapes do not match network"));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let one = T::one();
        let correction1 = one - b1.powi(t);
        let correction2 = one - b2.powi(t);
        let lr = self.learning_rate;

        let update = move |p: &mut T, m: &mut T, v: &mut T, g: &T| {
            *m = b1 * *m + (one - b1) * *g;
            *v = b2 * *v + (one - b2) * *g * *g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };

        for (l, (w, b)) in net.params_mut().enumerate() {
            Zip::from(w)
                .and(&mut self.first_moment.weights[l])
                .and(&mut self.second_moment.weights[l])
                .and(&grads.weights[l])
                .for_each(update);
            Zip::from(b)
                .and(&mut self.first_moment.biases[l])
                .and(&mut self.second_moment.biases[l])
                .and(&grads.biases[l])
                .for_each(update);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tinynn::OutputHead;
    use ndarray::array;

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let mut net = DenseNetwork::<f64>::new(&[3, 4, 2], OutputHead::Softmax2, 4).unwrap();
        let before = net.clone();
        let mut state = AdamState::new(&net, AdamConfig::default());
        let zero = Gradients::zeros_like(&net);
        for _ in 0..5 {
            state.step(&mut net, &zero).unwrap();
        }
        assert_eq!(net, before);
        assert_eq!(state.step_count, 5);
    }

    #[test]
    fn first_step_with_unit_gradient_moves_by_learning_rate() {
        // m1 = 0.1, v1 = 0.001; bias-corrected ratio 1 / (1 + eps)
        let mut net = DenseNetwork::from_parts(
            vec![1, 1],
            OutputHead::SigmoidScalar,
            vec![array![[0.0f64]]],
            vec![array![0.0]],
        )
        .unwrap();
        let config = AdamConfig { learning_rate: 0.1, ..AdamConfig::default() };
        let mut state = AdamState::new(&net, config);
        let grads = Gradients { weights: vec![array![[1.0]]], biases: vec![array![1.0]] };
        state.step(&mut net, &grads).unwrap();
        let expected = -0.1 / (1.0 + 1e-8);
        assert!((net.weights()[0][[0, 0]] - expected).abs() < 1e-15);
        assert!((net.biases()[0][0] - expected).abs() < 1e-15);
        // constant gradient keeps the ratio at one
        state.step(&mut net, &grads).unwrap();
        assert!((net.weights()[0][[0, 0]] - 2.0 * expected).abs() < 1e-9);
        assert_eq!(state.step_count, 2);
    }

    #[test]
    fn rejects_mismatched_gradients() {
        let mut net = DenseNetwork::<f64>::zeros(&[2, 2], OutputHead::Softmax2).unwrap();
        let other = DenseNetwork::<f64>::zeros(&[3, 2], OutputHead::Softmax2).unwrap();
        let mut state = AdamState::new(&net, AdamConfig::default());
        assert!(state.step(&mut net, &Gradients::zeros_like(&other)).is_err());
    }
}
