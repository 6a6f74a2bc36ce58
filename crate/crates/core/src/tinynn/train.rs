use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;

use super::adam::{AdamConfig, AdamState};
use super::loss::LossSpec;
use super::network::DenseNetwork;

/// Mini-batch training settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainHyper {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        Ok(())
    }
}

/// Per-row loss chooser used by [`fit`].
pub trait BatchLoss<T> {
    fn loss_for(&self, row: usize) -> LossSpec<T>;
}

impl<T, F: Fn(usize) -> LossSpec<T>> BatchLoss<T> for F {
    fn loss_for(&self, row: usize) -> LossSpec<T> {
        self(row)
    }
}

/// Mini-batch Adam on the mean of per-row losses.
///
/// Returns the mean training loss of each epoch, accumulated while the
/// epoch runs. `on_epoch` sees the network after every epoch.
pub fn fit<T, L, E>(
    net: &mut DenseNetwork<T>,
    inputs: ArrayView2<T>,
    hyper: &TrainHyper,
    loss: &L,
    mut on_epoch: E,
) -> Result<Vec<T>>
where
    T: Scalar,
    L: BatchLoss<T>,
    E: FnMut(usize, &DenseNetwork<T>),
{
    hyper.validate()?;
    let n = inputs.nrows();
    if n == 0 {
        return Err(Error::input("empty training set"));
    }
    let head = net.head();
    let out_dim = head.output_dim();
    let mut adam = AdamState::new(
        net,
        AdamConfig {
            learning_rate: hyper.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(hyper.epochs);

    for epoch in 0..hyper.epochs {
        if hyper.shuffle {
            let mut stream = rng::substream(hyper.seed, rng::domain("tinynn/shuffle"), epoch as u64);
            order.sort_unstable();
            order.shuffle(&mut stream);
        }
        let mut total = T::zero();
        for batch in order.chunks(hyper.batch_size) {
            let x = inputs.select(Axis(0), batch);
            let cache = net.forward_cached(x.view())?;
            let logits = cache.logits();
            let scale = T::one() / T::lit(batch.len() as f64);
            let mut grad = Array2::zeros((batch.len(), out_dim));
            for (i, &row) in batch.iter().enumerate() {
                let spec = loss.loss_for(row);
                let z = logits.row(i);
                let z = z.as_slice().expect("standard layout");
                total += spec.value(head, z)?;
                for (g, d) in grad.row_mut(i).iter_mut().zip(spec.logit_grad(head, z)?) {
                    *g = d * scale;
                }
            }
            let grads = net.backward(&cache, grad.view())?;
            adam.step(net, &grads)?;
        }
        history.push(total / T::lit(n as f64));
        on_epoch(epoch, net);
    }
    if !net.all_finite() {
        return Err(Error::input("training diverged to non-finite parameters"));
    }
    Ok(history)
}

/// Cross-entropy training of a softmax network on class labels.
pub fn train_supervised<T: Scalar>(
    net: &mut DenseNetwork<T>,
    samples: ArrayView2<T>,
    labels: &[usize],
    hyper: &TrainHyper,
) -> Result<Vec<T>> {
    if samples.nrows() == 0 {
        return Err(Error::input("empty dataset"));
    }
    if labels.len() != samples.nrows() {
        return Err(Error::input(format!(
            "{} labels for {} samples",
            labels.len(),
            samples.nrows()
        )));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::input("labels must be 0 or 1"));
    }
    fit(
        net,
        samples,
        hyper,
        &|row: usize| LossSpec::CrossEntropy { label: labels[row] },
        |_, _| {},
    )
}
