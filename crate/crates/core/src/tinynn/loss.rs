use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::network::{sigmoid, softmax_in_place, OutputHead};

/// Probabilities are floored here before any logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

pub fn log_floored<T: Scalar>(p: T) -> T {
    p.max(T::lit(PROB_FLOOR)).ln()
}

/// `-ln posterior[label]`, floored. Panics if `label` is out of range.
pub fn cross_entropy_loss<T: Scalar>(posterior: &[T], label: usize) -> T {
    -log_floored(posterior[label])
}

/// Per-sample loss, evaluated from the final layer's logits.
#[derive(Clone, Debug, PartialEq)]
pub enum LossSpec<T> {
    /// Softmax head; cross-entropy against a class index.
    CrossEntropy { label: usize },
    /// Sigmoid head; negated membership log-likelihood:
    /// `-weight * ln m` for members, `-weight * ln(1 - m)` otherwise.
    Membership { member: bool, weight: T },
    /// Any head; `½‖logits − target‖²`, ignoring the head activation.
    QuadraticLogits { target: Vec<T> },
}

impl<T: Scalar> LossSpec<T> {
    fn check_head(&self, head: OutputHead, logits: &[T]) -> Result<()> {
        let ok = match self {
            LossSpec::CrossEntropy { label } => head == OutputHead::Softmax2 && *label < logits.len(),
            LossSpec::Membership { .. } => head == OutputHead::SigmoidScalar,
            LossSpec::QuadraticLogits { target } => target.len() == logits.len(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::input(format!("loss {self:?} incompatible with {head:?} head")))
        }
    }

    pub fn value(&self, head: OutputHead, logits: &[T]) -> Result<T> {
        self.check_head(head, logits)?;
        Ok(match self {
            LossSpec::CrossEntropy { label } => {
                let mut p = logits.to_vec();
                softmax_in_place(&mut p);
                cross_entropy_loss(&p, *label)
            }
            LossSpec::Membership { member, weight } => {
                let m = sigmoid(logits[0]);
                let p = if *member { m } else { T::one() - m };
                -*weight * log_floored(p)
            }
            LossSpec::QuadraticLogits { target } => {
                let half = T::lit(0.5);
                logits
                    .iter()
                    .zip(target)
                    .map(|(&z, &t)| half * (z - t) * (z - t))
                    .fold(T::zero(), |a, b| a + b)
            }
        })
    }

    /// Derivative of the unfloored loss with respect to each logit. It
    /// matches [`Self::value`] wherever the floor is inactive and keeps
    /// pulling confidently wrong samples back where it is not.
    pub fn logit_grad(&self, head: OutputHead, logits: &[T]) -> Result<Vec<T>> {
        self.check_head(head, logits)?;
        Ok(match self {
            LossSpec::CrossEntropy { label } => {
                let mut p = logits.to_vec();
                softmax_in_place(&mut p);
                p[*label] -= T::one();
                p
            }
            LossSpec::Membership { member, weight } => {
                let m = sigmoid(logits[0]);
                let g = if *member { -*weight * (T::one() - m) } else { *weight * m };
                vec![g]
            }
            LossSpec::QuadraticLogits { target } => {
                logits.iter().zip(target).map(|(&z, &t)| z - t).collect()
            }
        })
    }
}
