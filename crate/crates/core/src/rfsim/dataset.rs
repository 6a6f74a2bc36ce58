use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

use super::channel::transmit_paired;
use super::modulation::random_bits;
use super::population::{Period, Population, UserRole};
use super::{PairedObservation, SignalSample};

/// Sample budget of one scenario.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetCounts {
    pub provider_train: usize,
    pub surrogate_train: usize,
    pub provider_test: usize,
    pub member_eval: usize,
    pub nonmember_eval: usize,
}

impl Default for DatasetCounts {
    fn default() -> Self {
        DatasetCounts {
            provider_train: 8000,
            surrogate_train: 1000,
            provider_test: 10000,
            member_eval: 1000,
            nonmember_eval: 1000,
        }
    }
}

impl DatasetCounts {
    pub fn validate(&self) -> Result<()> {
        let halves = [
            ("provider_train", self.provider_train),
            ("surrogate_train", self.surrogate_train),
            ("provider_test", self.provider_test),
            ("nonmember_eval", self.nonmember_eval),
        ];
        for (name, n) in halves {
            if n == 0 || n % 2 != 0 {
                return Err(Error::config(format!("{name} must be a positive even count, got {n}")));
            }
        }
        if self.member_eval == 0 || self.member_eval > self.provider_train / 2 {
            return Err(Error::config(format!(
                "member_eval must be in 1..={}, got {}",
                self.provider_train / 2,
                self.member_eval
            )));
        }
        Ok(())
    }
}

/// Every dataset one scenario needs.
#[derive(Clone, Debug, PartialEq)]
pub struct DataBundle {
    /// Provider views used to train the target classifier, class 1 first.
    pub provider_train: Vec<SignalSample>,
    /// Both views of every class-1 training transmission.
    pub paired_class1_train: Vec<PairedObservation>,
    /// Adversary views of randomly chosen class-1 training transmissions.
    pub member_eval: Vec<SignalSample>,
    /// Adversary views of fresh authorized (first half) and unauthorized QPSK transmissions.
    pub nonmember_eval: Vec<SignalSample>,
    /// Fresh transmissions the adversary overhears, authorized then other users.
    /// Labels are ground truth until relabelled by the target's decisions.
    pub surrogate_train: Vec<PairedObservation>,
    /// Fresh transmissions for testing both classifiers.
    pub provider_test: Vec<PairedObservation>,
}

/// `count` fresh transmissions from the users of `role`, assigned
/// round-robin. Transmission `i` draws from the substream `(seed, tag, i)`.
pub fn sample_transmissions(
    population: &Population,
    role: UserRole,
    period: Period,
    tag: &str,
    count: usize,
    seed: u64,
) -> Result<Vec<PairedObservation>> {
    let users = population.users(role);
    if users.is_empty() {
        return Err(Error::config(format!("no users with role {role:?}")));
    }
    let domain = rng::domain(tag);
    (0..count)
        .map(|i| {
            let user = users[i % users.len()];
            let mut stream: Stream = rng::substream(seed, domain, i as u64);
            let device = &population.devices[user];
            let links = population.links(user, period);
            let bits = random_bits(device.modulation, &mut stream);
            transmit_paired(device, &links.provider, &links.adversary, &bits, &population.noise, &mut stream)
        })
        .collect()
}

struct Generator<'a> {
    population: &'a Population,
    seed: u64,
}

impl Generator<'_> {
    fn transmissions(&self, role: UserRole, period: Period, tag: &str, count: usize) -> Result<Vec<PairedObservation>> {
        sample_transmissions(self.population, role, period, tag, count, self.seed)
    }
}

fn mark_member(mut pair: PairedObservation) -> PairedObservation {
    pair.provider_view.member = true;
    pair.adversary_view.member = true;
    pair
}

/// Generate all scenario datasets from a drawn population.
///
/// Training-time transmissions use the training-period channels; everything
/// observed after deployment (non-members, surrogate data, test data) uses
/// the deployment-period channels.
pub fn generate_scenario_data(population: &Population, counts: &DatasetCounts, seed: u64) -> Result<DataBundle> {
    counts.validate()?;
    let g = Generator { population, seed };

    let half = counts.provider_train / 2;
    let paired_class1_train: Vec<_> = g
        .transmissions(UserRole::Authorized, Period::Training, "data/train/class1", half)?
        .into_iter()
        .map(mark_member)
        .collect();
    let class0 = g.transmissions(UserRole::Other, Period::Training, "data/train/class0", half)?;
    let provider_train = paired_class1_train
        .iter()
        .map(|p| p.provider_view.clone())
        .chain(class0.into_iter().map(|p| mark_member(p).provider_view))
        .collect();

    let mut select = rng::substream(seed, rng::domain("data/members/select"), 0);
    let member_eval = index::sample(&mut select, half, counts.member_eval)
        .into_iter()
        .map(|i| paired_class1_train[i].adversary_view.clone())
        .collect();

    let nm = counts.nonmember_eval / 2;
    let nonmember_eval = g
        .transmissions(UserRole::Authorized, Period::Deployment, "data/nonmember/authorized", nm)?
        .into_iter()
        .chain(g.transmissions(UserRole::Unauthorized, Period::Deployment, "data/nonmember/unauthorized", nm)?)
        .map(|p| p.adversary_view)
        .collect();

    let paired = |tag1: &str, tag0: &str, total: usize| -> Result<Vec<PairedObservation>> {
        let mut v = g.transmissions(UserRole::Authorized, Period::Deployment, tag1, total / 2)?;
        v.extend(g.transmissions(UserRole::Other, Period::Deployment, tag0, total / 2)?);
        Ok(v)
    };
    let surrogate_train = paired("data/surrogate/class1", "data/surrogate/class0", counts.surrogate_train)?;
    let provider_test = paired("data/test/class1", "data/test/class0", counts.provider_test)?;

    Ok(DataBundle {
        provider_train,
        paired_class1_train,
        member_eval,
        nonmember_eval,
        surrogate_train,
        provider_test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rfsim::{PopulationSpec, Receiver, FEATURES};

    fn small_counts() -> DatasetCounts {
        DatasetCounts {
            provider_train: 400,
            surrogate_train: 100,
            provider_test: 200,
            member_eval: 60,
            nonmember_eval: 60,
        }
    }

    fn bundle(seed: u64, counts: &DatasetCounts) -> DataBundle {
        let pop = PopulationSpec::default().draw(seed).unwrap();
        generate_scenario_data(&pop, counts, seed).unwrap()
    }

    #[test]
    fn default_counts_and_composition() {
        let b = bundle(1, &DatasetCounts::default());
        assert_eq!(b.provider_train.len(), 8000);
        assert_eq!(b.provider_train.iter().filter(|s| s.class_label == 1).count(), 4000);
        assert_eq!(b.paired_class1_train.len(), 4000);
        assert_eq!(b.member_eval.len(), 1000);
        assert_eq!(b.nonmember_eval.len(), 1000);
        assert_eq!(b.surrogate_train.len(), 1000);
        assert_eq!(b.provider_test.len(), 10000);
        // nonmembers: 500 authorized QPSK + 500 unauthorized QPSK
        let authorized = b.nonmember_eval.iter().filter(|s| s.tx_id < 3).count();
        let unauthorized = b.nonmember_eval.iter().filter(|s| (6..9).contains(&s.tx_id)).count();
        assert_eq!((authorized, unauthorized), (500, 500));
    }

    #[test]
    fn views_and_membership_flags() {
        let b = bundle(2, &small_counts());
        assert!(b.provider_train.iter().all(|s| s.member && s.view == Receiver::Provider));
        assert!(b.member_eval.iter().all(|s| s.member && s.view == Receiver::Adversary && s.class_label == 1));
        assert!(b.nonmember_eval.iter().all(|s| !s.member && s.view == Receiver::Adversary));
        for p in b.surrogate_train.iter().chain(&b.provider_test).chain(&b.paired_class1_train) {
            assert_eq!(p.provider_view.class_label, p.adversary_view.class_label);
            assert_eq!(p.provider_view.tx_id, p.adversary_view.tx_id);
            assert_eq!(p.provider_view.features().len(), FEATURES);
        }
    }

    #[test]
    fn members_come_from_training_and_are_disjoint_from_nonmembers() {
        let b = bundle(3, &small_counts());
        for m in &b.member_eval {
            assert!(b.paired_class1_train.iter().any(|p| &p.adversary_view == m));
            assert!(!b.nonmember_eval.iter().any(|n| n.features() == m.features()));
        }
        let mut ids: Vec<_> = b.member_eval.iter().map(|s| s.phases).collect();
        ids.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ids.dedup();
        assert_eq!(ids.len(), b.member_eval.len());
    }

    #[test]
    fn same_seed_same_bundle() {
        assert_eq!(bundle(4, &small_counts()), bundle(4, &small_counts()));
        assert_ne!(bundle(4, &small_counts()), bundle(5, &small_counts()));
    }

    #[test]
    fn invalid_counts_rejected() {
        let pop = PopulationSpec::default().draw(0).unwrap();
        let odd = DatasetCounts { provider_train: 401, ..small_counts() };
        assert!(matches!(generate_scenario_data(&pop, &odd, 0), Err(Error::InvalidConfig(_))));
        let too_many = DatasetCounts { member_eval: 201, ..small_counts() };
        assert!(generate_scenario_data(&pop, &too_many, 0).is_err());
    }
}
