use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;

/// Activation applied to the last layer's pre-activations (logits).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputHead {
    /// Two logits mapped through softmax to a posterior pair.
    Softmax2,
    /// One logit mapped through the logistic function.
    SigmoidScalar,
}

impl OutputHead {
    pub fn output_dim(self) -> usize {
        match self {
            OutputHead::Softmax2 => 2,
            OutputHead::SigmoidScalar => 1,
        }
    }

    /// Map one row of logits to head outputs in place.
    pub(crate) fn activate<T: Scalar>(self, logits: &mut [T]) {
        match self {
            OutputHead::Softmax2 => softmax_in_place(logits),
            OutputHead::SigmoidScalar => {
                for z in logits.iter_mut() {
                    *z = sigmoid(*z);
                }
            }
        }
    }
}

pub(crate) fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Logistic function clamped to the open interval (0, 1).
pub(crate) fn sigmoid<T: Scalar>(z: T) -> T {
    let s = if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    };
    let eps = T::epsilon();
    s.max(T::min_positive_value()).min(T::one() - eps)
}

/// Fully connected network. Layer `l` maps `layer_dims[l]` inputs to
/// `layer_dims[l + 1]` outputs with a weight matrix of shape `(out, in)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseNetwork<T> {
    layer_dims: Vec<usize>,
    head: OutputHead,
    pub(crate) weights: Vec<Array2<T>>,
    pub(crate) biases: Vec<Array1<T>>,
}

/// Per-layer activations recorded during a batched forward pass.
///
/// `activations[0]` is the input batch, `activations[l]` for hidden `l` is
/// post-ReLU, and the last entry holds the raw logits.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    pub activations: Vec<Array2<T>>,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn logits(&self) -> &Array2<T> {
        self.activations.last().expect("cache holds at least the input")
    }
}

/// Gradients (or any per-parameter quantity) shaped like a network.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<Array2<T>>,
    pub biases: Vec<Array1<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(net: &DenseNetwork<T>) -> Self {
        Gradients {
            weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    /// Parameters in the canonical flat order: per layer, weights row-major then biases.
    pub fn flat(&self) -> Vec<T> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }

    pub fn matches_shape(&self, net: &DenseNetwork<T>) -> bool {
        self.weights.len() == net.weights.len()
            && self.weights.iter().zip(&net.weights).all(|(a, b)| a.dim() == b.dim())
            && self.biases.iter().zip(&net.biases).all(|(a, b)| a.dim() == b.dim())
    }
}

fn validate_dims(layer_dims: &[usize], head: OutputHead) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::input(format!(
            "need at least input and output dims, got {layer_dims:?}"
        )));
    }
    if layer_dims.contains(&0) {
        return Err(Error::input(format!("zero-width layer in {layer_dims:?}")));
    }
    let out = *layer_dims.last().unwrap();
    if out != head.output_dim() {
        return Err(Error::input(format!(
            "{head:?} head needs output dim {}, got {out}",
            head.output_dim()
        )));
    }
    Ok(())
}

impl<T: Scalar> DenseNetwork<T> {
    /// He-initialized network (normal, variance `2 / fan_in`) with zero biases.
    pub fn new(layer_dims: &[usize], head: OutputHead, seed: u64) -> Result<Self> {
        validate_dims(layer_dims, head)?;
        let mut weights = Vec::with_capacity(layer_dims.len() - 1);
        let mut biases = Vec::with_capacity(layer_dims.len() - 1);
        for (l, pair) in layer_dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let std = (2.0 / fan_in as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            let mut stream = rng::substream(seed, rng::domain("tinynn/init"), l as u64);
            let w = Array2::from_shape_simple_fn((fan_out, fan_in), || {
                T::lit(normal.sample(&mut stream))
            });
            weights.push(w);
            biases.push(Array1::zeros(fan_out));
        }
        Ok(DenseNetwork {
            layer_dims: layer_dims.to_vec(),
            head,
            weights,
            biases,
        })
    }

    /// All parameters zero.
    pub fn zeros(layer_dims: &[usize], head: OutputHead) -> Result<Self> {
        validate_dims(layer_dims, head)?;
        let weights = layer_dims
            .windows(2)
            .map(|p| Array2::zeros((p[1], p[0])))
            .collect();
        let biases = layer_dims[1..].iter().map(|&n| Array1::zeros(n)).collect();
        Ok(DenseNetwork {
            layer_dims: layer_dims.to_vec(),
            head,
            weights,
            biases,
        })
    }

    /// Assemble from explicit parameters, checking every shape and value.
    pub fn from_parts(
        layer_dims: Vec<usize>,
        head: OutputHead,
        weights: Vec<Array2<T>>,
        biases: Vec<Array1<T>>,
    ) -> Result<Self> {
        validate_dims(&layer_dims, head)?;
        let layers = layer_dims.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(Error::input(format!(
                "expected {layers} layers, got {} weight and {} bias arrays",
                weights.len(),
                biases.len()
            )));
        }
        for (l, pair) in layer_dims.windows(2).enumerate() {
            if weights[l].dim() != (pair[1], pair[0]) || biases[l].len() != pair[1] {
                return Err(Error::input(format!("layer {l} parameter shape mismatch")));
            }
        }
        let finite = weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && biases.iter().all(|b| b.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::input("non-finite parameter"));
        }
        Ok(DenseNetwork {
            layer_dims,
            head,
            weights,
            biases,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn head(&self) -> OutputHead {
        self.head
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn weights(&self) -> &[Array2<T>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<T>] {
        &self.biases
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims.windows(2).map(|p| p[0] * p[1] + p[1]).sum()
    }

    /// Batched forward pass keeping every layer's activations for [`Self::backward`].
    pub fn forward_cached(&self, inputs: ArrayView2<T>) -> Result<ForwardCache<T>> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::input(format!(
                "input has {} features, network expects {}",
                inputs.ncols(),
                self.input_dim()
            )));
        }
        let last = self.weights.len() - 1;
        let mut activations = Vec::with_capacity(self.weights.len() + 1);
        activations.push(inputs.to_owned());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = activations[l].dot(&w.t());
            z += b;
            if l < last {
                z.mapv_inplace(|v| v.max(T::zero()));
            }
            activations.push(z);
        }
        Ok(ForwardCache { activations })
    }

    /// Head outputs for a batch: one row per input.
    pub fn forward_batch(&self, inputs: ArrayView2<T>) -> Result<Array2<T>> {
        let mut out = self.forward_cached(inputs)?.activations.pop().unwrap();
        for mut row in out.axis_iter_mut(Axis(0)) {
            self.head
                .activate(row.as_slice_mut().expect("standard layout"));
        }
        Ok(out)
    }

    /// Head outputs for one input vector.
    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        let view = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::input(e.to_string()))?;
        Ok(self.forward_batch(view)?.into_raw_vec_and_offset().0)
    }

    /// Raw logits for one input vector.
    pub fn logits(&self, input: &[T]) -> Result<Vec<T>> {
        let view = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::input(e.to_string()))?;
        let cache = self.forward_cached(view)?;
        Ok(cache.logits().iter().copied().collect())
    }

    /// Reverse-mode gradients given the loss gradient with respect to the
    /// logits of every row in the cached batch. Gradients are summed over
    /// rows; scale `logit_grads` to average. ReLU's derivative at 0 is 0.
    pub fn backward(&self, cache: &ForwardCache<T>, logit_grads: ArrayView2<T>) -> Result<Gradients<T>> {
        let batch = cache.activations[0].nrows();
        let out_dim = *self.layer_dims.last().unwrap();
        if logit_grads.dim() != (batch, out_dim) || cache.activations.len() != self.weights.len() + 1 {
            return Err(Error::input(format!(
                "logit gradient shape {:?} does not match batch {batch} x {out_dim}",
                logit_grads.dim()
            )));
        }
        let mut grads = Gradients::zeros_like(self);
        let mut delta = logit_grads.to_owned();
        for l in (0..self.weights.len()).rev() {
            let input = &cache.activations[l];
            grads.weights[l] = delta.t().dot(input);
            grads.biases[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut upstream = delta.dot(&self.weights[l]);
                Zip::from(&mut upstream).and(input).for_each(|g, &a| {
                    if a <= T::zero() {
                        *g = T::zero();
                    }
                });
                delta = upstream;
            }
        }
        Ok(grads)
    }

    /// Convenience: forward then backward on a batch.
    pub fn gradients(&self, inputs: ArrayView2<T>, logit_grads: ArrayView2<T>) -> Result<Gradients<T>> {
        let cache = self.forward_cached(inputs)?;
        self.backward(&cache, logit_grads)
    }

    /// Parameter at `index` in the canonical flat order of [`Gradients::flat`].
    pub fn parameter(&self, index: usize) -> T {
        *self.locate(index).0
    }

    pub fn set_parameter(&mut self, index: usize, value: T) {
        let (_, l, slot) = self.locate(index);
        match slot {
            Slot::Weight(i) => *self.weights[l].iter_mut().nth(i).unwrap() = value,
            Slot::Bias(i) => self.biases[l][i] = value,
        }
    }

    fn locate(&self, mut index: usize) -> (&T, usize, Slot) {
        for l in 0..self.weights.len() {
            let nw = self.weights[l].len();
            if index < nw {
                return (self.weights[l].iter().nth(index).unwrap(), l, Slot::Weight(index));
            }
            index -= nw;
            let nb = self.biases[l].len();
            if index < nb {
                return (&self.biases[l][index], l, Slot::Bias(index));
            }
            index -= nb;
        }
        panic!("parameter index out of range");
    }

    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = (&mut Array2<T>, &mut Array1<T>)> {
        self.weights.iter_mut().zip(self.biases.iter_mut())
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

#[derive(Clone, Copy)]
enum Slot {
    Weight(usize),
    Bias(usize),
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    const CLASSIFIER_SHAPE: [usize; 5] = [32, 100, 100, 100, 2];

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = DenseNetwork::<f64>::new(&CLASSIFIER_SHAPE, OutputHead::Softmax2, 11).unwrap();
        let b = DenseNetwork::<f64>::new(&CLASSIFIER_SHAPE, OutputHead::Softmax2, 11).unwrap();
        let c = DenseNetwork::<f64>::new(&CLASSIFIER_SHAPE, OutputHead::Softmax2, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.biases.iter().all(|b| b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn init_variance_is_he_scaled() {
        let net = DenseNetwork::<f64>::new(&[200, 200, 2], OutputHead::Softmax2, 3).unwrap();
        let w = &net.weights[0];
        let n = w.len() as f64;
        let mean = w.sum() / n;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 2.0 / 200.0).abs() < 0.001, "var {var}");
    }

    #[test]
    fn classifier_architecture_parameter_count() {
        let net = DenseNetwork::<f64>::new(&CLASSIFIER_SHAPE, OutputHead::Softmax2, 0).unwrap();
        let expected = 32 * 100 + 100 + 100 * 100 + 100 + 100 * 100 + 100 + 100 * 2 + 2;
        assert_eq!(expected, 23_702);
        assert_eq!(net.param_count(), expected);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(DenseNetwork::<f64>::new(&[], OutputHead::Softmax2, 0).is_err());
        assert!(DenseNetwork::<f64>::new(&[3], OutputHead::Softmax2, 0).is_err());
        assert!(DenseNetwork::<f64>::new(&[2, 0, 2], OutputHead::Softmax2, 0).is_err());
        assert!(DenseNetwork::<f64>::new(&[2, 2], OutputHead::SigmoidScalar, 0).is_err());
        assert!(DenseNetwork::<f64>::new(&[2, 1], OutputHead::Softmax2, 0).is_err());
    }

    #[test]
    fn zero_network_outputs_are_uniform() {
        let soft = DenseNetwork::<f64>::zeros(&[4, 3, 2], OutputHead::Softmax2).unwrap();
        assert_eq!(soft.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.5, 0.5]);
        let sig = DenseNetwork::<f64>::zeros(&[4, 3, 1], OutputHead::SigmoidScalar).unwrap();
        assert_eq!(sig.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.5]);
    }

    #[test]
    fn forward_rejects_wrong_input_length() {
        let net = DenseNetwork::<f64>::zeros(&[4, 2], OutputHead::Softmax2).unwrap();
        assert!(matches!(net.forward(&[1.0; 3]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn softmax_normalizes_for_random_networks() {
        use rand::Rng;
        let mut inputs = rng::substream(5, 0, 0);
        for seed in 0..1000u64 {
            let net = DenseNetwork::<f64>::new(&[6, 8, 2], OutputHead::Softmax2, seed).unwrap();
            let x: Vec<f64> = (0..6).map(|_| inputs.random_range(-3.0..3.0)).collect();
            let out = net.forward(&x).unwrap();
            assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(out.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }

    #[test]
    fn sigmoid_stays_in_open_interval() {
        for z in [-1e4, -800.0, -40.0, 0.0, 40.0, 800.0, 1e4] {
            let s = sigmoid::<f64>(z);
            assert!(s > 0.0 && s < 1.0, "sigmoid({z}) = {s}");
        }
    }

    #[test]
    fn zero_logit_gradient_gives_zero_parameter_gradients() {
        let net = DenseNetwork::<f64>::new(&[3, 5, 2], OutputHead::Softmax2, 1).unwrap();
        let x = array![[0.1, 0.2, 0.3], [1.0, -1.0, 0.5]];
        let g = net.gradients(x.view(), Array2::zeros((2, 2)).view()).unwrap();
        assert!(g.flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_weight_squared_error_matches_closed_form() {
        // y = w x + b, L = (y - t)^2 / 2 => dL/dw = (y - t) x, dL/db = y - t
        let (w, b, x, t): (f64, f64, f64, f64) = (0.7, -0.2, 1.5, 2.0);
        let net = DenseNetwork::from_parts(
            vec![1, 1],
            OutputHead::SigmoidScalar,
            vec![array![[w]]],
            vec![array![b]],
        )
        .unwrap();
        let y = w * x + b;
        let g = net
            .gradients(array![[x]].view(), array![[y - t]].view())
            .unwrap();
        assert!((g.weights[0][[0, 0]] - (y - t) * x).abs() < 1e-15);
        assert!((g.biases[0][0] - (y - t)).abs() < 1e-15);
    }

    #[test]
    fn backward_rejects_mismatched_gradient_shape() {
        let net = DenseNetwork::<f64>::zeros(&[2, 2], OutputHead::Softmax2).unwrap();
        let x = array![[0.0, 1.0]];
        assert!(net.gradients(x.view(), Array2::zeros((1, 1)).view()).is_err());
    }

    #[test]
    fn flat_parameter_access_round_trips() {
        let mut net = DenseNetwork::<f64>::new(&[3, 4, 2], OutputHead::Softmax2, 9).unwrap();
        let flat = Gradients { weights: net.weights.clone(), biases: net.biases.clone() }.flat();
        assert_eq!(flat.len(), net.param_count());
        for (i, v) in flat.iter().enumerate() {
            assert_eq!(net.parameter(i), *v);
        }
        net.set_parameter(13, 42.0);
        assert_eq!(net.parameter(13), 42.0);
    }

    #[test]
    fn generic_over_f32() {
        let net = DenseNetwork::<f32>::new(&[3, 4, 2], OutputHead::Softmax2, 2).unwrap();
        let out = net.forward(&[0.1, 0.2, 0.3]).unwrap();
        assert!((out[0] + out[1] - 1.0).abs() < 1e-6);
    }
}
