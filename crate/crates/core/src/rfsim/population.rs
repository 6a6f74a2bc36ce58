use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

use super::channel::snr_to_received_power;
use super::{wrap_phase, ChannelLink, DeviceProfile, Modulation, NoiseModel, Receiver};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserRole {
    /// QPSK users the provider grants service to (class 1).
    Authorized,
    /// BPSK users making up class 0 of the training data.
    Other,
    /// QPSK users that never appear in training.
    Unauthorized,
}

/// When a transmission happens. Channels are static within a period; the
/// deployment period sees the training channels after a bounded drift.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Period {
    Training,
    Deployment,
}

/// Change of the adversary's reception between the training and deployment
/// periods: every adversary link gains `±gain_db` and rotates by
/// `±phase_rad`, with one sign per quantity for the whole population.
/// Provider links are static.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDrift {
    pub gain_db: f64,
    pub phase_rad: f64,
}

impl Default for ChannelDrift {
    fn default() -> Self {
        ChannelDrift {
            gain_db: 0.7,
            phase_rad: std::f64::consts::FRAC_PI_4,
        }
    }
}

/// Resolved parameters for drawing a user population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub authorized_users: usize,
    pub other_users: usize,
    pub unauthorized_users: usize,
    pub snr_authorized_db: f64,
    pub snr_others_db: f64,
    /// Users sit on distinct provider-side power rungs, in random order:
    /// rung `k` (centred on zero) receives `nominal · (1 + power_step · k)`.
    pub power_step: f64,
    /// Adversary-side power is the provider's plus a per-user jitter uniform
    /// within `± adversary_power_jitter · nominal`, then scaled by one offset
    /// uniform within `± adversary_snr_offset_db` and shared by all users.
    pub adversary_snr_offset_db: f64,
    pub adversary_power_jitter: f64,
    pub drift: ChannelDrift,
    /// All QPSK users share one provider-side received power. At the adversary
    /// they differ only by the per-user jitter, and no adversary power drifts.
    pub equal_qpsk_power: bool,
    /// All QPSK users share one combined phase `φ_device + φ_link` at each
    /// receiver, and no adversary phase drifts.
    pub equal_qpsk_phase: bool,
    pub noise: NoiseModel,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        PopulationSpec {
            authorized_users: 3,
            other_users: 3,
            unauthorized_users: 3,
            snr_authorized_db: 10.0,
            snr_others_db: 10.0,
            power_step: 0.2,
            adversary_snr_offset_db: 1.0,
            adversary_power_jitter: 0.05,
            drift: ChannelDrift::default(),
            equal_qpsk_power: false,
            equal_qpsk_phase: false,
            noise: NoiseModel::default(),
        }
    }
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if self.authorized_users == 0 || self.other_users == 0 || self.unauthorized_users == 0 {
            return Err(Error::config("every user group needs at least one user"));
        }
        let finite = [
            self.snr_authorized_db,
            self.snr_others_db,
            self.power_step,
            self.adversary_snr_offset_db,
            self.adversary_power_jitter,
            self.drift.gain_db,
            self.drift.phase_rad,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("non-finite population parameter"));
        }
        if self.power_step < 0.0 || self.adversary_snr_offset_db < 0.0 || self.adversary_power_jitter < 0.0 {
            return Err(Error::config("power step, offset and jitter must be non-negative"));
        }
        let reach = self.power_step * (self.total_users() - 1) as f64 / 2.0 + self.adversary_power_jitter;
        if reach >= 1.0 {
            return Err(Error::config(format!(
                "power rungs plus jitter reach {reach} of nominal power; must stay below 1"
            )));
        }
        if self.drift.gain_db < 0.0 || self.drift.phase_rad < 0.0 {
            return Err(Error::config("drift magnitudes must be non-negative"));
        }
        if self.equal_qpsk_power && self.snr_authorized_db != self.snr_others_db {
            return Err(Error::config(
                "equal QPSK power contradicts different authorized/other SNRs",
            ));
        }
        if self.equal_qpsk_power && self.equal_qpsk_phase {
            return Err(Error::config(
                "equal QPSK power and phase together make authorized users indistinguishable",
            ));
        }
        Ok(())
    }

    pub fn total_users(&self) -> usize {
        self.authorized_users + self.other_users + self.unauthorized_users
    }

    /// Draw devices and channels. Every random value is drawn in a fixed
    /// order regardless of the constraint flags, so scenarios sharing a
    /// seed share their unconstrained draws.
    pub fn draw(&self, seed: u64) -> Result<Population> {
        self.validate()?;
        let mut r = rng::substream(seed, rng::domain("rfsim/population"), 0);
        let floor = self.noise.noise_floor;

        let adv_scale = 10f64.powf(r.random_range(-1.0..=1.0) * self.adversary_snr_offset_db / 10.0);
        let mut sign = || if r.random_bool(0.5) { 1.0 } else { -1.0 };
        let gain_drift = 10f64.powf(sign() * self.drift.gain_db / 10.0);
        let phase_drift = sign() * self.drift.phase_rad;
        let common_provider_phase = r.random_range(0.0..std::f64::consts::TAU);
        let common_adversary_phase = r.random_range(0.0..std::f64::consts::TAU);

        let groups = [
            (UserRole::Authorized, self.authorized_users),
            (UserRole::Other, self.other_users),
            (UserRole::Unauthorized, self.unauthorized_users),
        ];
        let mut devices = Vec::new();
        let mut roles = Vec::new();
        let mut training = Vec::new();
        let mut deployment = Vec::new();

        // Rung offsets: with equal QPSK power, QPSK users stay on the centre
        // rung and BPSK users take the others.
        let total = self.total_users();
        let centre = (total - 1) as f64 / 2.0;
        let mut rungs: Vec<f64> = (0..total).map(|k| (k as f64 - centre) * self.power_step).collect();
        rungs.shuffle(&mut r);
        if self.equal_qpsk_power {
            let (zero, _) = rungs
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .expect("non-empty population");
            rungs.remove(zero);
        }
        let mut rungs = rungs.into_iter();

        for (role, count) in groups {
            for _ in 0..count {
                let id = devices.len() as u32;
                let modulation = match role {
                    UserRole::Other => Modulation::Bpsk,
                    _ => Modulation::Qpsk,
                };
                let device_phase = r.random_range(0.0..std::f64::consts::TAU);
                let jitter = r.random_range(-1.0..=1.0) * self.adversary_power_jitter;
                let provider_phase = r.random_range(0.0..std::f64::consts::TAU);
                let adversary_phase = r.random_range(0.0..std::f64::consts::TAU);

                let device = DeviceProfile::new(id, device_phase, 1.0, modulation, role == UserRole::Authorized)?;
                let qpsk = modulation == Modulation::Qpsk;
                let fix_power = qpsk && self.equal_qpsk_power;
                let fix_phase = qpsk && self.equal_qpsk_phase;

                let nominal = match role {
                    UserRole::Authorized => self.snr_authorized_db,
                    _ => self.snr_others_db,
                };
                let nominal_power = snr_to_received_power(nominal, floor)?;
                let rung = if fix_power { 0.0 } else { rungs.next().expect("one rung per user") };
                let provider_power = nominal_power * (1.0 + rung);
                let adversary_power = (provider_power + jitter * nominal_power) * adv_scale;
                let (provider_phase, adversary_phase) = if fix_phase {
                    (common_provider_phase - device_phase, common_adversary_phase - device_phase)
                } else {
                    (provider_phase, adversary_phase)
                };
                let p = device.transmit_power;
                let provider_gain = provider_power / p;
                let adversary_gain = adversary_power / p;

                // an equalized quantity is held for every user across periods
                let gain_step = if self.equal_qpsk_power { 1.0 } else { gain_drift };
                let phase_step = if self.equal_qpsk_phase { 0.0 } else { phase_drift };

                training.push(UserLinks {
                    provider: ChannelLink::new(id, Receiver::Provider, provider_gain, provider_phase)?,
                    adversary: ChannelLink::new(id, Receiver::Adversary, adversary_gain, adversary_phase)?,
                });
                deployment.push(UserLinks {
                    provider: ChannelLink::new(id, Receiver::Provider, provider_gain, provider_phase)?,
                    adversary: ChannelLink::new(
                        id,
                        Receiver::Adversary,
                        adversary_gain * gain_step,
                        wrap_phase(adversary_phase + phase_step),
                    )?,
                });
                devices.push(device);
                roles.push(role);
            }
        }
        Ok(Population {
            devices,
            roles,
            training,
            deployment,
            noise: self.noise,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserLinks {
    pub provider: ChannelLink,
    pub adversary: ChannelLink,
}

/// Devices and their links, indexed by device id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub devices: Vec<DeviceProfile>,
    pub roles: Vec<UserRole>,
    pub training: Vec<UserLinks>,
    pub deployment: Vec<UserLinks>,
    pub noise: NoiseModel,
}

impl Population {
    pub fn users(&self, role: UserRole) -> Vec<usize> {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == role)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn links(&self, user: usize, period: Period) -> &UserLinks {
        match period {
            Period::Training => &self.training[user],
            Period::Deployment => &self.deployment[user],
        }
    }

    /// Received power `g·p` of a user at a receiver.
    pub fn received_power(&self, user: usize, rx: Receiver, period: Period) -> f64 {
        let links = self.links(user, period);
        let link = match rx {
            Receiver::Provider => &links.provider,
            Receiver::Adversary => &links.adversary,
        };
        link.gain * self.devices[user].transmit_power
    }

    /// Combined phase `wrap(φ_device + φ_link)` of a user at a receiver.
    pub fn combined_phase(&self, user: usize, rx: Receiver, period: Period) -> f64 {
        let links = self.links(user, period);
        let link = match rx {
            Receiver::Provider => &links.provider,
            Receiver::Adversary => &links.adversary,
        };
        wrap_phase(self.devices[user].phase_shift_rad + link.phase_offset_rad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_population_layout() {
        let pop = PopulationSpec::default().draw(3).unwrap();
        assert_eq!(pop.devices.len(), 9);
        assert_eq!(pop.users(UserRole::Authorized), vec![0, 1, 2]);
        assert_eq!(pop.users(UserRole::Other), vec![3, 4, 5]);
        assert_eq!(pop.users(UserRole::Unauthorized), vec![6, 7, 8]);
        for (i, d) in pop.devices.iter().enumerate() {
            assert_eq!(d.id as usize, i);
            assert_eq!(d.authorized, i < 3);
            assert_eq!(d.modulation == Modulation::Bpsk, (3..6).contains(&i));
        }
        assert_eq!(pop, PopulationSpec::default().draw(3).unwrap());
    }

    #[test]
    fn provider_powers_on_distinct_rungs() {
        let spec = PopulationSpec::default();
        let pop = spec.draw(11).unwrap();
        let nominal = 10.0;
        let mut rungs: Vec<f64> = (0..9)
            .map(|u| (pop.received_power(u, Receiver::Provider, Period::Training) / nominal - 1.0) / spec.power_step)
            .collect();
        rungs.sort_by(f64::total_cmp);
        for (k, r) in rungs.iter().enumerate() {
            assert!((r - (k as f64 - 4.0)).abs() < 1e-9, "{rungs:?}");
        }
        let scale = pop.received_power(0, Receiver::Adversary, Period::Training)
            / pop.received_power(0, Receiver::Provider, Period::Training);
        let bound = 10f64.powf(spec.adversary_snr_offset_db / 10.0);
        for u in 0..9 {
            let prov = pop.received_power(u, Receiver::Provider, Period::Training);
            let adv = pop.received_power(u, Receiver::Adversary, Period::Training);
            assert!(adv / prov <= bound * (1.0 + 0.1) && adv / prov >= (1.0 - 0.1) / bound);
            assert!((adv - prov * scale).abs() <= 2.0 * spec.adversary_power_jitter * nominal * bound);
        }
    }

    #[test]
    fn drift_moves_adversary_links_only() {
        let spec = PopulationSpec::default();
        let pop = spec.draw(5).unwrap();
        let mut signs = std::collections::BTreeSet::new();
        for u in 0..9 {
            let prov = pop.links(u, Period::Training).provider.clone();
            assert_eq!(pop.links(u, Period::Deployment).provider, prov);
            let rx = Receiver::Adversary;
            let ratio = pop.received_power(u, rx, Period::Deployment) / pop.received_power(u, rx, Period::Training);
            let db = 10.0 * ratio.log10();
            assert!((db.abs() - spec.drift.gain_db).abs() < 1e-9);
            let dphi = wrap_phase(
                pop.combined_phase(u, rx, Period::Deployment) - pop.combined_phase(u, rx, Period::Training)
                    + std::f64::consts::PI,
            ) - std::f64::consts::PI;
            assert!((dphi.abs() - spec.drift.phase_rad).abs() < 1e-9);
            signs.insert((db > 0.0, dphi > 0.0));
        }
        assert_eq!(signs.len(), 1, "drift is common to all users");
    }

    #[test]
    fn equalized_quantities_do_not_drift() {
        let power = PopulationSpec { equal_qpsk_power: true, ..PopulationSpec::default() }.draw(2).unwrap();
        let phase = PopulationSpec { equal_qpsk_phase: true, ..PopulationSpec::default() }.draw(2).unwrap();
        for u in [0, 1, 2, 6, 7, 8] {
            let rx = Receiver::Adversary;
            assert!((power.received_power(u, rx, Period::Training) - power.received_power(u, rx, Period::Deployment)).abs() < 1e-9);
            assert!((phase.combined_phase(u, rx, Period::Training) - phase.combined_phase(u, rx, Period::Deployment)).abs() < 1e-9);
        }
    }

    #[test]
    fn contradictory_flags_rejected() {
        let spec = PopulationSpec { equal_qpsk_power: true, snr_authorized_db: 3.0, ..PopulationSpec::default() };
        assert!(matches!(spec.draw(0), Err(Error::InvalidConfig(_))));
        let both = PopulationSpec { equal_qpsk_power: true, equal_qpsk_phase: true, ..PopulationSpec::default() };
        assert!(both.draw(0).is_err());
        let empty = PopulationSpec { unauthorized_users: 0, ..PopulationSpec::default() };
        assert!(empty.draw(0).is_err());
        let steep = PopulationSpec { power_step: 0.25, ..PopulationSpec::default() };
        assert!(steep.draw(0).is_err());
    }
}
