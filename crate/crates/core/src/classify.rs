//! The provider's target classifier and the adversary's surrogate.

use std::f64::consts::TAU;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rfsim::{PairedObservation, SignalSample, FEATURES, SYMBOLS};
use crate::scalar::Scalar;
use crate::tinynn::{train_supervised, DenseNetwork, FeatureScaling, ModelDocument, OutputHead, TrainHyper};

/// Input, three hidden layers of 100, and a two-way softmax.
pub const CLASSIFIER_DIMS: [usize; 5] = [FEATURES, 100, 100, 100, 2];

/// Phases divided by 2π, powers by the strong-scenario received power.
pub const DEFAULT_SCALING: FeatureScaling = FeatureScaling {
    phase_divisor: TAU,
    power_divisor: 10.0,
};

const PREDICT_CHUNK: usize = 2048;

pub fn scaled_features<T: Scalar>(sample: &SignalSample, scaling: &FeatureScaling) -> [T; FEATURES] {
    let mut out = [T::zero(); FEATURES];
    for k in 0..SYMBOLS {
        out[k] = T::lit(sample.phases[k] / scaling.phase_divisor);
        out[SYMBOLS + k] = T::lit(sample.powers[k] / scaling.power_divisor);
    }
    out
}

pub fn feature_matrix<T: Scalar>(samples: &[SignalSample], scaling: &FeatureScaling) -> Array2<T> {
    let mut m = Array2::zeros((samples.len(), FEATURES));
    for (mut row, s) in m.axis_iter_mut(Axis(0)).zip(samples) {
        row.assign(&ndarray::ArrayView1::from(&scaled_features::<T>(s, scaling)));
    }
    m
}

/// Argmax of a posterior pair; exact ties go to class 0 (deny service).
pub fn decide<T: Scalar>(posterior: [T; 2]) -> u8 {
    u8::from(posterior[1] > posterior[0])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierRole {
    Target,
    Surrogate,
}

/// A softmax network together with the feature scaling it was trained on.
#[derive(Clone, Debug, PartialEq)]
pub struct Classifier<T> {
    pub network: DenseNetwork<T>,
    pub scaling: FeatureScaling,
}

impl<T: Scalar> Classifier<T> {
    pub fn new(network: DenseNetwork<T>, scaling: FeatureScaling) -> Result<Self> {
        if network.input_dim() != FEATURES || network.head() != OutputHead::Softmax2 {
            return Err(Error::input(format!(
                "classifier needs a {FEATURES}-input softmax network, got {:?} {:?}",
                network.layer_dims(),
                network.head()
            )));
        }
        Ok(Classifier { network, scaling })
    }

    pub fn predict_posterior(&self, sample: &SignalSample) -> Result<[T; 2]> {
        let out = self.network.forward(&scaled_features::<T>(sample, &self.scaling))?;
        Ok([out[0], out[1]])
    }

    pub fn predict_label(&self, sample: &SignalSample) -> Result<u8> {
        Ok(decide(self.predict_posterior(sample)?))
    }

    /// Posteriors for many samples, evaluated in batches.
    pub fn predict_batch(&self, samples: &[SignalSample]) -> Result<Vec<[T; 2]>> {
        let mut out = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(PREDICT_CHUNK) {
            let x = feature_matrix::<T>(chunk, &self.scaling);
            let y = self.network.forward_batch(x.view())?;
            out.extend(y.rows().into_iter().map(|r| [r[0], r[1]]));
        }
        Ok(out)
    }

    pub fn predict_labels(&self, samples: &[SignalSample]) -> Result<Vec<u8>> {
        Ok(self.predict_batch(samples)?.into_iter().map(decide).collect())
    }

    pub fn to_document(&self) -> ModelDocument<T> {
        ModelDocument::from_network(&self.network, Some(self.scaling))
    }

    pub fn from_document(doc: &ModelDocument<T>) -> Result<Self> {
        let scaling = doc
            .scaling
            .ok_or_else(|| Error::input("classifier document lacks feature scaling"))?;
        Classifier::new(doc.to_network()?, scaling)
    }
}

/// Fraction of samples whose predicted label equals `class_label`.
pub fn classification_accuracy<T: Scalar>(clf: &Classifier<T>, samples: &[SignalSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::input("accuracy of an empty dataset"));
    }
    let correct = clf
        .predict_labels(samples)?
        .iter()
        .zip(samples)
        .filter(|(p, s)| **p == s.class_label)
        .count();
    Ok(correct as f64 / samples.len() as f64)
}

/// Fraction of paired transmissions on which the target (provider view) and
/// the surrogate (adversary view) output the same label.
pub fn label_agreement<T: Scalar>(
    target: &Classifier<T>,
    surrogate: &Classifier<T>,
    pairs: &[PairedObservation],
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::input("agreement over an empty set"));
    }
    let provider: Vec<_> = pairs.iter().map(|p| p.provider_view.clone()).collect();
    let adversary: Vec<_> = pairs.iter().map(|p| p.adversary_view.clone()).collect();
    let a = target.predict_labels(&provider)?;
    let b = surrogate.predict_labels(&adversary)?;
    Ok(a.iter().zip(&b).filter(|(x, y)| x == y).count() as f64 / pairs.len() as f64)
}

/// Adversary views labelled by whether the provider granted service,
/// i.e. by the target's decision on the provider view.
pub fn label_by_target<T: Scalar>(target: &Classifier<T>, pairs: &[PairedObservation]) -> Result<Vec<SignalSample>> {
    let provider: Vec<_> = pairs.iter().map(|p| p.provider_view.clone()).collect();
    let granted = target.predict_labels(&provider)?;
    Ok(pairs
        .iter()
        .zip(granted)
        .map(|(p, label)| SignalSample {
            class_label: label,
            ..p.adversary_view.clone()
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSizes {
    pub train: usize,
    pub test: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierReport {
    pub role: ClassifierRole,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Surrogate only: label agreement with the target on paired test data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreement_with_target: Option<f64>,
    /// Target only: share of unauthorized QPSK transmissions it accepts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unauthorized_grant_rate: Option<f64>,
    pub loss_history: Vec<f64>,
    pub dataset_sizes: DatasetSizes,
    pub seed: u64,
}

fn check_balance(samples: &[SignalSample]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::input("empty training set"));
    }
    let ones = samples.iter().filter(|s| s.class_label == 1).count() as f64;
    let share = ones / samples.len() as f64;
    if !(0.45..=0.55).contains(&share) {
        return Err(Error::config(format!(
            "class-1 share {share:.3} outside the 45-55% balance window"
        )));
    }
    Ok(())
}

fn train_classifier<T: Scalar>(
    role: ClassifierRole,
    train: &[SignalSample],
    test: &[SignalSample],
    hyper: &TrainHyper,
) -> Result<(Classifier<T>, ClassifierReport)> {
    check_balance(train)?;
    let x = feature_matrix::<T>(train, &DEFAULT_SCALING);
    let labels: Vec<usize> = train.iter().map(|s| usize::from(s.class_label)).collect();
    let mut net = DenseNetwork::new(&CLASSIFIER_DIMS, OutputHead::Softmax2, hyper.seed)?;
    let history = train_supervised(&mut net, x.view(), &labels, hyper)?;
    let clf = Classifier::new(net, DEFAULT_SCALING)?;
    let report = ClassifierReport {
        role,
        train_accuracy: classification_accuracy(&clf, train)?,
        test_accuracy: classification_accuracy(&clf, test)?,
        agreement_with_target: None,
        unauthorized_grant_rate: None,
        loss_history: history.into_iter().map(Scalar::to_f64_lossy).collect(),
        dataset_sizes: DatasetSizes {
            train: train.len(),
            test: test.len(),
        },
        seed: hyper.seed,
    };
    Ok((clf, report))
}

/// Train the provider's classifier on its received training signals and
/// evaluate it on held-out provider views.
pub fn train_target<T: Scalar>(
    provider_train: &[SignalSample],
    provider_test: &[SignalSample],
    hyper: &TrainHyper,
) -> Result<(Classifier<T>, ClassifierReport)> {
    train_classifier(ClassifierRole::Target, provider_train, provider_test, hyper)
}

/// Train the adversary's surrogate on overheard signals labelled by observed
/// access, and evaluate it on fresh adversary views.
pub fn train_surrogate<T: Scalar>(
    surrogate_train: &[SignalSample],
    adversary_test: &[SignalSample],
    hyper: &TrainHyper,
) -> Result<(Classifier<T>, ClassifierReport)> {
    train_classifier(ClassifierRole::Surrogate, surrogate_train, adversary_test, hyper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rfsim::{generate_scenario_data, DatasetCounts, PopulationSpec, Receiver};

    fn sample(label: u8) -> SignalSample {
        SignalSample {
            phases: [0.5; SYMBOLS],
            powers: [10.0; SYMBOLS],
            class_label: label,
            tx_id: 0,
            member: false,
            view: Receiver::Provider,
        }
    }

    fn zero_classifier() -> Classifier<f64> {
        Classifier::new(DenseNetwork::zeros(&CLASSIFIER_DIMS, OutputHead::Softmax2).unwrap(), DEFAULT_SCALING).unwrap()
    }

    #[test]
    fn zero_network_ties_to_class_zero() {
        let clf = zero_classifier();
        assert_eq!(clf.predict_posterior(&sample(1)).unwrap(), [0.5, 0.5]);
        assert_eq!(clf.predict_label(&sample(1)).unwrap(), 0);
    }

    #[test]
    fn accuracy_edge_cases() {
        let clf = zero_classifier();
        assert_eq!(classification_accuracy(&clf, &[sample(0)]).unwrap(), 1.0);
        assert_eq!(classification_accuracy(&clf, &[sample(1)]).unwrap(), 0.0);
        assert!(classification_accuracy(&clf, &[]).is_err());
    }

    #[test]
    fn scaling_and_shape_checks() {
        let f = scaled_features::<f64>(&sample(0), &DEFAULT_SCALING);
        assert!((f[0] - 0.5 / TAU).abs() < 1e-15);
        assert_eq!(f[SYMBOLS], 1.0);
        let wrong = DenseNetwork::<f64>::zeros(&[4, 2], OutputHead::Softmax2).unwrap();
        assert!(Classifier::new(wrong, DEFAULT_SCALING).is_err());
    }

    #[test]
    fn imbalanced_training_set_rejected() {
        let mut train: Vec<_> = (0..60).map(|_| sample(1)).collect();
        train.extend((0..40).map(|_| sample(0)));
        let err = train_target::<f64>(&train, &train, &TrainHyper::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn random_network_is_near_chance_on_balanced_data() {
        // zero-mean random labels make any fixed classifier ~50% accurate
        let pop = PopulationSpec::default().draw(6).unwrap();
        let counts = DatasetCounts { provider_train: 2, surrogate_train: 2, provider_test: 10000, member_eval: 1, nonmember_eval: 2 };
        let data = generate_scenario_data(&pop, &counts, 6).unwrap();
        let clf = Classifier::new(DenseNetwork::<f64>::new(&CLASSIFIER_DIMS, OutputHead::Softmax2, 1).unwrap(), DEFAULT_SCALING)
            .unwrap();
        let mut r = crate::rng::substream(6, 1, 0);
        let test: Vec<_> = data
            .provider_test
            .iter()
            .map(|p| SignalSample { class_label: rand::Rng::random_range(&mut r, 0..=1u8), ..p.provider_view.clone() })
            .collect();
        let acc = classification_accuracy(&clf, &test).unwrap();
        assert!((acc - 0.5).abs() < 0.05, "accuracy {acc}");
    }

    #[test]
    fn desk_scale_target_training() {
        let pop = PopulationSpec::default().draw(2).unwrap();
        let counts = DatasetCounts { provider_train: 800, surrogate_train: 200, provider_test: 1000, member_eval: 100, nonmember_eval: 100 };
        let data = generate_scenario_data(&pop, &counts, 2).unwrap();
        let hyper = TrainHyper { epochs: 30, seed: 4, ..TrainHyper::default() };
        let test: Vec<_> = data.provider_test.iter().map(|p| p.provider_view.clone()).collect();
        let (clf, report) = train_target::<f64>(&data.provider_train, &test, &hyper).unwrap();
        assert!(report.loss_history.last().unwrap() < &report.loss_history[0]);
        assert!(report.train_accuracy >= 0.99, "train accuracy {}", report.train_accuracy);
        assert!(report.test_accuracy >= 0.95, "test accuracy {}", report.test_accuracy);

        // flipping every label complements the accuracy
        let flipped: Vec<_> = test.iter().map(|s| SignalSample { class_label: 1 - s.class_label, ..s.clone() }).collect();
        let a = classification_accuracy(&clf, &test).unwrap();
        let b = classification_accuracy(&clf, &flipped).unwrap();
        assert!((a + b - 1.0).abs() < 1e-12);

        let posteriors = clf.predict_batch(&test[..10]).unwrap();
        for (p, s) in posteriors.iter().zip(&test) {
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
            assert_eq!(*p, clf.predict_posterior(s).unwrap());
        }

        let doc = clf.to_document();
        let back = Classifier::<f64>::from_document(&ModelDocument::from_json(&doc.to_json()).unwrap()).unwrap();
        assert_eq!(classification_accuracy(&back, &test).unwrap(), a);

        let labelled = label_by_target(&clf, &data.surrogate_train).unwrap();
        assert!(labelled.iter().all(|s| s.view == Receiver::Adversary));
    }
}
