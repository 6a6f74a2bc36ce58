//! Black-box membership inference through the surrogate classifier.
//!
//! The inference model `m(X, Ŷ)` sees a sample's scaled features together
//! with the surrogate's posterior and outputs the probability that the
//! sample's provider-side counterpart was in the target's training data.
//! It is fitted by maximizing the empirical gain
//!
//! ```text
//! G(m) = ½ · mean_{members} ln m(x) + ½ · mean_{non-members} ln(1 − m(x))
//! ```

use std::collections::HashSet;

use ndarray::{s, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::classify::{feature_matrix, Classifier};
use crate::error::{Error, Result};
use crate::rfsim::{SignalSample, FEATURES};
use crate::rng;
use crate::scalar::Scalar;
use crate::tinynn::{fit, log_floored, DenseNetwork, FeatureScaling, LossSpec, ModelDocument, OutputHead, TrainHyper};

/// Scaled features plus the surrogate's two posterior components.
pub const MIA_INPUT_DIM: usize = FEATURES + 2;
pub const MIA_DIMS: [usize; 4] = [MIA_INPUT_DIM, 100, 100, 1];
pub const DECISION_THRESHOLD: f64 = 0.5;

/// Inference input for one sample.
pub fn mia_input<T: Scalar>(sample: &SignalSample, surrogate: &Classifier<T>) -> Result<Vec<T>> {
    let mut v: Vec<T> = crate::classify::scaled_features(sample, &surrogate.scaling).to_vec();
    v.extend(surrogate.predict_posterior(sample)?);
    Ok(v)
}

/// Inference inputs for many samples, one row each.
pub fn mia_inputs<T: Scalar>(samples: &[SignalSample], surrogate: &Classifier<T>) -> Result<Array2<T>> {
    let mut m = Array2::zeros((samples.len(), MIA_INPUT_DIM));
    m.slice_mut(s![.., ..FEATURES])
        .assign(&feature_matrix::<T>(samples, &surrogate.scaling));
    for (i, p) in surrogate.predict_batch(samples)?.into_iter().enumerate() {
        m[[i, FEATURES]] = p[0];
        m[[i, FEATURES + 1]] = p[1];
    }
    Ok(m)
}

/// `G = 1/(2|D|) Σ_D ln m + 1/(2|D̄|) Σ_D̄ ln(1 − m)`, logs floored at 1e-12.
pub fn empirical_gain<T: Scalar>(member_probs: &[T], nonmember_probs: &[T]) -> Result<T> {
    if member_probs.is_empty() || nonmember_probs.is_empty() {
        return Err(Error::input("empirical gain needs members and non-members"));
    }
    let half = T::lit(0.5);
    let mean = |xs: &mut dyn Iterator<Item = T>, n: usize| xs.fold(T::zero(), |a, b| a + b) / T::lit(n as f64);
    let a = mean(&mut member_probs.iter().map(|&m| log_floored(m)), member_probs.len());
    let b = mean(
        &mut nonmember_probs.iter().map(|&m| log_floored(T::one() - m)),
        nonmember_probs.len(),
    );
    Ok(half * a + half * b)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MiaModel<T> {
    pub network: DenseNetwork<T>,
    pub scaling: FeatureScaling,
    pub decision_threshold: f64,
}

impl<T: Scalar> MiaModel<T> {
    pub fn new(network: DenseNetwork<T>, scaling: FeatureScaling) -> Result<Self> {
        if network.input_dim() != MIA_INPUT_DIM || network.head() != OutputHead::SigmoidScalar {
            return Err(Error::input(format!(
                "inference model needs a {MIA_INPUT_DIM}-input sigmoid network, got {:?} {:?}",
                network.layer_dims(),
                network.head()
            )));
        }
        Ok(MiaModel {
            network,
            scaling,
            decision_threshold: DECISION_THRESHOLD,
        })
    }

    /// Membership probability and decision; exactly 0.5 is a non-member.
    pub fn infer_membership(&self, surrogate: &Classifier<T>, sample: &SignalSample) -> Result<(T, bool)> {
        let p = self.network.forward(&mia_input(sample, surrogate)?)?[0];
        Ok((p, p > T::lit(self.decision_threshold)))
    }

    pub fn probabilities(&self, surrogate: &Classifier<T>, samples: &[SignalSample]) -> Result<Vec<T>> {
        if samples.is_empty() {
            return Ok(Vec::new());
        }
        let x = mia_inputs(samples, surrogate)?;
        Ok(self.network.forward_batch(x.view())?.column(0).to_vec())
    }

    pub fn gain(&self, surrogate: &Classifier<T>, members: &[SignalSample], nonmembers: &[SignalSample]) -> Result<T> {
        empirical_gain(
            &self.probabilities(surrogate, members)?,
            &self.probabilities(surrogate, nonmembers)?,
        )
    }

    pub fn to_document(&self) -> ModelDocument<T> {
        ModelDocument::from_network(&self.network, Some(self.scaling))
    }

    pub fn from_document(doc: &ModelDocument<T>) -> Result<Self> {
        let scaling = doc
            .scaling
            .ok_or_else(|| Error::input("inference model document lacks feature scaling"))?;
        MiaModel::new(doc.to_network()?, scaling)
    }
}

/// Indices into the member and non-member lists for fitting and testing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MembershipSplit {
    pub train_members: Vec<usize>,
    pub test_members: Vec<usize>,
    pub train_nonmembers: Vec<usize>,
    pub test_nonmembers: Vec<usize>,
}

impl MembershipSplit {
    /// Random half/half split of each side.
    pub fn halves(members: usize, nonmembers: usize, seed: u64) -> Self {
        let mut r = rng::substream(seed, rng::domain("mia/split"), 0);
        let mut split_one = |n: usize| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut r);
            let test = idx.split_off(n / 2);
            (idx, test)
        };
        let (train_members, test_members) = split_one(members);
        let (train_nonmembers, test_nonmembers) = split_one(nonmembers);
        MembershipSplit {
            train_members,
            test_members,
            train_nonmembers,
            test_nonmembers,
        }
    }

    fn check_partition(train: &[usize], test: &[usize], n: usize, side: &str) -> Result<()> {
        if train.is_empty() || test.is_empty() {
            return Err(Error::config(format!("{side} split has an empty partition")));
        }
        let mut seen = vec![false; n];
        for &i in train.iter().chain(test) {
            if i >= n || seen[i] {
                return Err(Error::config(format!("{side} split is not a partition of 0..{n}")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::config(format!("{side} split does not cover 0..{n}")));
        }
        Ok(())
    }
}

/// Adversary-view members and non-members with a train/test split.
#[derive(Clone, Debug, PartialEq)]
pub struct MembershipDataset {
    pub members: Vec<SignalSample>,
    pub nonmembers: Vec<SignalSample>,
    pub split: MembershipSplit,
}

fn sample_key(s: &SignalSample) -> Vec<u64> {
    s.features().iter().map(|v| v.to_bits()).collect()
}

impl MembershipDataset {
    pub fn new(members: Vec<SignalSample>, nonmembers: Vec<SignalSample>, split: MembershipSplit) -> Result<Self> {
        MembershipSplit::check_partition(&split.train_members, &split.test_members, members.len(), "member")?;
        MembershipSplit::check_partition(&split.train_nonmembers, &split.test_nonmembers, nonmembers.len(), "non-member")?;
        let keys: HashSet<_> = members.iter().map(sample_key).collect();
        if nonmembers.iter().any(|s| keys.contains(&sample_key(s))) {
            return Err(Error::input("a sample appears as both member and non-member"));
        }
        Ok(MembershipDataset {
            members,
            nonmembers,
            split,
        })
    }

    fn pick(samples: &[SignalSample], idx: &[usize]) -> Vec<SignalSample> {
        idx.iter().map(|&i| samples[i].clone()).collect()
    }

    pub fn train_members(&self) -> Vec<SignalSample> {
        Self::pick(&self.members, &self.split.train_members)
    }
    pub fn test_members(&self) -> Vec<SignalSample> {
        Self::pick(&self.members, &self.split.test_members)
    }
    pub fn train_nonmembers(&self) -> Vec<SignalSample> {
        Self::pick(&self.nonmembers, &self.split.train_nonmembers)
    }
    pub fn test_nonmembers(&self) -> Vec<SignalSample> {
        Self::pick(&self.nonmembers, &self.split.test_nonmembers)
    }
}

/// Per-epoch empirical gain on the fitting and held-out partitions.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainHistory {
    pub train: Vec<f64>,
    pub test: Vec<f64>,
}

/// Fit `m` by Adam descent on the negated empirical gain over the training
/// partition. Each row's loss is weighted so the batch mean is an unbiased
/// estimate of `−G`.
pub fn train_mia<T: Scalar>(
    surrogate: &Classifier<T>,
    dataset: &MembershipDataset,
    hyper: &TrainHyper,
) -> Result<(MiaModel<T>, GainHistory)> {
    let (train_m, train_n) = (dataset.train_members(), dataset.train_nonmembers());
    let (test_m, test_n) = (dataset.test_members(), dataset.test_nonmembers());
    if train_m.is_empty() || train_n.is_empty() {
        return Err(Error::config("degenerate membership split"));
    }
    let xm = mia_inputs(&train_m, surrogate)?;
    let xn = mia_inputs(&train_n, surrogate)?;
    let x = ndarray::concatenate(Axis(0), &[xm.view(), xn.view()]).map_err(|e| Error::input(e.to_string()))?;
    let test_xm = mia_inputs(&test_m, surrogate)?;
    let test_xn = mia_inputs(&test_n, surrogate)?;

    let n_members = train_m.len();
    let total = x.nrows() as f64;
    let member_weight = T::lit(total / (2.0 * n_members as f64));
    let nonmember_weight = T::lit(total / (2.0 * train_n.len() as f64));
    let loss = |row: usize| {
        if row < n_members {
            LossSpec::Membership { member: true, weight: member_weight }
        } else {
            LossSpec::Membership { member: false, weight: nonmember_weight }
        }
    };

    let mut net = DenseNetwork::new(&MIA_DIMS, OutputHead::SigmoidScalar, hyper.seed)?;
    let mut history = GainHistory::default();
    let mut failure = None;
    let gain_of = |net: &DenseNetwork<T>, a: &Array2<T>, b: &Array2<T>| -> Result<f64> {
        let pa = net.forward_batch(a.view())?.column(0).to_vec();
        let pb = net.forward_batch(b.view())?.column(0).to_vec();
        Ok(empirical_gain(&pa, &pb)?.to_f64_lossy())
    };
    let train_xm = x.slice(s![..n_members, ..]).to_owned();
    let train_xn = x.slice(s![n_members.., ..]).to_owned();
    fit(&mut net, x.view(), hyper, &loss, |_, net| {
        let r = gain_of(net, &train_xm, &train_xn).and_then(|train| {
            let test = if test_xm.nrows() > 0 && test_xn.nrows() > 0 {
                gain_of(net, &test_xm, &test_xn)?
            } else {
                f64::NAN
            };
            Ok((train, test))
        });
        match r {
            Ok((train, test)) => {
                history.train.push(train);
                history.test.push(test);
            }
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((MiaModel::new(net, surrogate.scaling)?, history))
}

/// 2×2 confusion matrix. Row 0 is the real non-members, row 1 the real
/// members; column 0 is predicted non-member, column 1 predicted member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfusionMatrix<T> {
    pub counts: [[u64; 2]; 2],
    pub rates: [[T; 2]; 2],
}

impl<T: Scalar> ConfusionMatrix<T> {
    pub fn from_counts(counts: [[u64; 2]; 2]) -> Result<Self> {
        let mut rates = [[T::zero(); 2]; 2];
        for (row, c) in counts.iter().enumerate() {
            let n = c[0] + c[1];
            if n == 0 {
                return Err(Error::input("confusion matrix row without samples"));
            }
            for col in 0..2 {
                rates[row][col] = T::lit(c[col] as f64) / T::lit(n as f64);
            }
        }
        Ok(ConfusionMatrix { counts, rates })
    }

    /// Matrix known only through its row-normalized rates.
    pub fn from_rates(rates: [[T; 2]; 2]) -> Result<Self> {
        for row in &rates {
            if (row[0] + row[1] - T::one()).abs() > T::lit(1e-9) || row.iter().any(|&r| r < T::zero()) {
                return Err(Error::input("confusion rates must be non-negative rows summing to 1"));
            }
        }
        Ok(ConfusionMatrix {
            counts: [[0; 2]; 2],
            rates,
        })
    }

    /// Unweighted mean of the non-member and member recall.
    pub fn accuracy(&self) -> T {
        (self.rates[0][0] + self.rates[1][1]) * T::lit(0.5)
    }

    pub fn nonmember_recall(&self) -> T {
        self.rates[0][0]
    }

    pub fn member_recall(&self) -> T {
        self.rates[1][1]
    }

    /// CSV in the layout `Real \ Predicted, non-member, member`.
    pub fn to_table_csv(&self) -> String {
        let r = &self.rates;
        format!(
            "real\\predicted,non-member,member\nnon-member,{:.4},{:.4}\nmember,{:.4},{:.4}\n",
            r[0][0], r[0][1], r[1][0], r[1][1]
        )
    }

    /// Plain-text table for terminals.
    pub fn render(&self) -> String {
        let r = &self.rates;
        format!(
            "Real \\ Predicted | non-member | member\n\
             -----------------+------------+-------\n\
             non-member       | {:<10.4} | {:.4}\n\
             member           | {:<10.4} | {:.4}\n",
            r[0][0], r[0][1], r[1][0], r[1][1]
        )
    }
}

/// Confusion matrix of the inference model on held-out members and non-members.
pub fn evaluate_mia<T: Scalar>(
    model: &MiaModel<T>,
    surrogate: &Classifier<T>,
    members_test: &[SignalSample],
    nonmembers_test: &[SignalSample],
) -> Result<ConfusionMatrix<T>> {
    if members_test.is_empty() || nonmembers_test.is_empty() {
        return Err(Error::input("evaluation needs members and non-members"));
    }
    let threshold = T::lit(model.decision_threshold);
    let count = |samples: &[SignalSample]| -> Result<[u64; 2]> {
        let mut c = [0u64; 2];
        for p in model.probabilities(surrogate, samples)? {
            c[usize::from(p > threshold)] += 1;
        }
        Ok(c)
    };
    ConfusionMatrix::from_counts([count(nonmembers_test)?, count(members_test)?])
}

/// Likelihood-ratio baseline: member iff the training density exceeds the
/// general density at `x`; confidence `P_train / (P_train + P_general)`.
pub fn naive_likelihood_mia<X: ?Sized, F, G>(density_train: F, density_general: G, x: &X) -> Result<(bool, f64)>
where
    F: Fn(&X) -> f64,
    G: Fn(&X) -> f64,
{
    let (pt, pg) = (density_train(x), density_general(x));
    if !(pt >= 0.0 && pg >= 0.0 && pt.is_finite() && pg.is_finite()) {
        return Err(Error::UndefinedInput(format!("densities must be finite and non-negative, got {pt}, {pg}")));
    }
    if pt + pg == 0.0 {
        return Err(Error::UndefinedInput("both densities vanish".into()));
    }
    Ok((pt > pg, pt / (pt + pg)))
}
