use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rfsim::{ChannelDrift, DatasetCounts, NoiseModel, PopulationSpec};
use crate::rng;
use crate::tinynn::TrainHyper;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Every user has its own power and phase; strong signals.
    FullStrong,
    /// All QPSK users share one received power; phases differ.
    SamePower,
    /// All QPSK users share one combined phase; powers differ.
    SamePhase,
    /// Authorized users at 3 dB, everyone else at 10 dB.
    WeakAuthorized,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::FullStrong,
        Scenario::SamePower,
        Scenario::SamePhase,
        Scenario::WeakAuthorized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::FullStrong => "full-strong",
            Scenario::SamePower => "same-power",
            Scenario::SamePhase => "same-phase",
            Scenario::WeakAuthorized => "weak-authorized",
        }
    }

    fn default_authorized_snr_db(self) -> f64 {
        match self {
            Scenario::WeakAuthorized => 3.0,
            _ => 10.0,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown scenario `{s}` (expected one of full-strong, same-power, same-phase, weak-authorized)"
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UserCounts {
    pub authorized: usize,
    pub others: usize,
    pub unauthorized: usize,
}

impl Default for UserCounts {
    fn default() -> Self {
        UserCounts {
            authorized: 3,
            others: 3,
            unauthorized: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSettings {
    pub power_step: f64,
    pub adversary_snr_offset_db: f64,
    pub adversary_power_jitter: f64,
    pub drift: ChannelDrift,
}

impl Default for ChannelSettings {
    fn default() -> Self {
        let p = PopulationSpec::default();
        ChannelSettings {
            power_step: p.power_step,
            adversary_snr_offset_db: p.adversary_snr_offset_db,
            adversary_power_jitter: p.adversary_power_jitter,
            drift: p.drift,
        }
    }
}

/// Optimizer budget for one network; the seed comes from the scenario seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl TrainSettings {
    pub fn classifier() -> Self {
        TrainSettings {
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-3,
        }
    }

    /// Smaller batches and a larger step: the surrogate sees 1000 samples
    /// against the target's 8000 and must still resolve close power levels.
    pub fn surrogate() -> Self {
        TrainSettings {
            epochs: 100,
            batch_size: 16,
            learning_rate: 3e-3,
        }
    }

    pub fn inference() -> Self {
        TrainSettings {
            epochs: 200,
            batch_size: 64,
            learning_rate: 3e-3,
        }
    }

    pub fn hyper(&self, seed: u64) -> TrainHyper {
        TrainHyper {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed,
            shuffle: true,
        }
    }
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self::classifier()
    }
}

fn default_surrogate() -> TrainSettings {
    TrainSettings::surrogate()
}

fn default_inference() -> TrainSettings {
    TrainSettings::inference()
}

fn default_snr_others() -> f64 {
    10.0
}

/// Everything needed to reproduce one scenario run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub seed: u64,
    #[serde(default)]
    pub counts: DatasetCounts,
    /// Defaults to 10 dB, or 3 dB in the weak-authorized scenario.
    #[serde(default)]
    pub snr_authorized_db: Option<f64>,
    #[serde(default = "default_snr_others")]
    pub snr_others_db: f64,
    #[serde(default)]
    pub users: UserCounts,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub channel: ChannelSettings,
    #[serde(default)]
    pub target_training: TrainSettings,
    #[serde(default = "default_surrogate")]
    pub surrogate_training: TrainSettings,
    #[serde(default = "default_inference")]
    pub mia_training: TrainSettings,
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario, seed: u64) -> Self {
        ScenarioConfig {
            scenario,
            seed,
            counts: DatasetCounts::default(),
            snr_authorized_db: None,
            snr_others_db: default_snr_others(),
            users: UserCounts::default(),
            noise: NoiseModel::default(),
            channel: ChannelSettings::default(),
            target_training: TrainSettings::classifier(),
            surrogate_training: TrainSettings::surrogate(),
            mia_training: TrainSettings::inference(),
        }
    }

    pub fn with_scenario(&self, scenario: Scenario, seed: u64) -> Self {
        ScenarioConfig {
            scenario,
            seed,
            ..self.clone()
        }
    }

    pub fn authorized_snr_db(&self) -> f64 {
        self.snr_authorized_db
            .unwrap_or_else(|| self.scenario.default_authorized_snr_db())
    }

    pub fn validate(&self) -> Result<()> {
        self.counts.validate()?;
        apply_scenario_constraints(self)?.validate()?;
        self.target_training.hyper(0).validate()?;
        self.surrogate_training.hyper(0).validate()?;
        self.mia_training.hyper(0).validate()?;
        Ok(())
    }

    pub fn seeds(&self) -> StageSeeds {
        let s = self.seed;
        StageSeeds {
            scenario: s,
            population: rng::derive(s, "population"),
            data: rng::derive(s, "data"),
            target: rng::derive(s, "target"),
            surrogate: rng::derive(s, "surrogate"),
            mia_split: rng::derive(s, "mia/split"),
            mia: rng::derive(s, "mia"),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }
}

/// Seeds handed to each stage, all derived from the scenario seed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSeeds {
    pub scenario: u64,
    pub population: u64,
    pub data: u64,
    pub target: u64,
    pub surrogate: u64,
    pub mia_split: u64,
    pub mia: u64,
}

/// Translate a scenario into population parameters.
pub fn apply_scenario_constraints(config: &ScenarioConfig) -> Result<PopulationSpec> {
    let authorized = config.authorized_snr_db();
    let others = config.snr_others_db;
    let mut spec = PopulationSpec {
        authorized_users: config.users.authorized,
        other_users: config.users.others,
        unauthorized_users: config.users.unauthorized,
        snr_authorized_db: authorized,
        snr_others_db: others,
        power_step: config.channel.power_step,
        adversary_snr_offset_db: config.channel.adversary_snr_offset_db,
        adversary_power_jitter: config.channel.adversary_power_jitter,
        drift: config.channel.drift,
        equal_qpsk_power: false,
        equal_qpsk_phase: false,
        noise: config.noise,
    };
    match config.scenario {
        Scenario::FullStrong => {}
        Scenario::SamePower => spec.equal_qpsk_power = true,
        Scenario::SamePhase => spec.equal_qpsk_phase = true,
        Scenario::WeakAuthorized => {
            if authorized >= others {
                return Err(Error::config(format!(
                    "weak-authorized needs authorized SNR below others ({authorized} >= {others} dB)"
                )));
            }
        }
    }
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rfsim::{snr_to_received_power, Modulation, Period, Receiver, UserRole};

    fn qpsk_users(pop: &crate::rfsim::Population) -> Vec<usize> {
        (0..pop.devices.len()).filter(|&u| pop.devices[u].modulation == Modulation::Qpsk).collect()
    }

    #[test]
    fn same_power_equalizes_qpsk_received_power() {
        let spec = apply_scenario_constraints(&ScenarioConfig::new(Scenario::SamePower, 4)).unwrap();
        let pop = spec.draw(4).unwrap();
        let spread = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
        for period in [Period::Training, Period::Deployment] {
            let provider: Vec<f64> =
                qpsk_users(&pop).iter().map(|&u| pop.received_power(u, Receiver::Provider, period)).collect();
            assert_eq!(spread(&provider), 0.0);
            // the adversary sees only its own per-user jitter
            let adversary: Vec<f64> =
                qpsk_users(&pop).iter().map(|&u| pop.received_power(u, Receiver::Adversary, period)).collect();
            let bound = 2.0 * spec.adversary_power_jitter * 10.0 * 10f64.powf(spec.adversary_snr_offset_db / 10.0);
            assert!(spread(&adversary) > 0.0 && spread(&adversary) <= bound);
            let phases: Vec<f64> = qpsk_users(&pop).iter().map(|&u| pop.combined_phase(u, Receiver::Provider, period)).collect();
            assert!(phases.windows(2).any(|w| (w[0] - w[1]).abs() > 1e-6));
        }
    }

    #[test]
    fn same_phase_equalizes_combined_phase() {
        let spec = apply_scenario_constraints(&ScenarioConfig::new(Scenario::SamePhase, 4)).unwrap();
        let pop = spec.draw(4).unwrap();
        for period in [Period::Training, Period::Deployment] {
            for rx in [Receiver::Provider, Receiver::Adversary] {
                let phases: Vec<f64> = qpsk_users(&pop).iter().map(|&u| pop.combined_phase(u, rx, period)).collect();
                for w in phases.windows(2) {
                    let d = (w[0] - w[1]).abs();
                    assert!(d.min(std::f64::consts::TAU - d) < 1e-12, "{phases:?}");
                }
            }
        }
        let powers: Vec<f64> = qpsk_users(&pop).iter().map(|&u| pop.received_power(u, Receiver::Provider, Period::Training)).collect();
        assert!(powers.windows(2).any(|w| (w[0] - w[1]).abs() > 1e-6));
    }

    #[test]
    fn weak_authorized_snr_levels() {
        let cfg = ScenarioConfig::new(Scenario::WeakAuthorized, 0);
        let spec = apply_scenario_constraints(&cfg).unwrap();
        let weak = snr_to_received_power(spec.snr_authorized_db, 1.0).unwrap();
        let strong = snr_to_received_power(spec.snr_others_db, 1.0).unwrap();
        assert!((weak - 1.9953).abs() < 1e-4);
        assert!((strong - 10.0).abs() < 1e-12);
        // nominal levels before the per-user rungs
        let flat = ScenarioConfig { channel: ChannelSettings { power_step: 0.0, ..ChannelSettings::default() }, ..cfg };
        let pop = apply_scenario_constraints(&flat).unwrap().draw(0).unwrap();
        for u in pop.users(UserRole::Authorized) {
            assert!((pop.received_power(u, Receiver::Provider, Period::Training) - weak).abs() < 1e-12);
        }
        for u in pop.users(UserRole::Other) {
            assert!((pop.received_power(u, Receiver::Provider, Period::Training) - strong).abs() < 1e-12);
        }
    }

    #[test]
    fn contradictions_are_config_errors() {
        let mut cfg = ScenarioConfig::new(Scenario::SamePower, 0);
        cfg.snr_authorized_db = Some(3.0);
        assert!(matches!(apply_scenario_constraints(&cfg), Err(Error::InvalidConfig(_))));
        let mut weak = ScenarioConfig::new(Scenario::WeakAuthorized, 0);
        weak.snr_authorized_db = Some(12.0);
        assert!(apply_scenario_constraints(&weak).is_err());
    }

    #[test]
    fn config_json_defaults_and_unknown_keys() {
        let cfg = ScenarioConfig::from_json(r#"{"scenario":"same-phase","seed":3}"#).unwrap();
        assert_eq!(cfg, ScenarioConfig::new(Scenario::SamePhase, 3));
        let err = ScenarioConfig::from_json(r#"{"scenario":"same-phase","seed":3,"bogus":1}"#).unwrap_err();
        assert!(err.is_config());
        assert!(ScenarioConfig::from_json(r#"{"scenario":"nope","seed":3}"#).is_err());
        let round = ScenarioConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(round, cfg);
    }

    #[test]
    fn scenario_names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
        }
        assert!("bogus".parse::<Scenario>().is_err());
    }

    #[test]
    fn stage_seeds_differ() {
        let s = ScenarioConfig::new(Scenario::FullStrong, 7).seeds();
        let all = [s.population, s.data, s.target, s.surrogate, s.mia_split, s.mia];
        let mut uniq = all.to_vec();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), all.len());
    }
}
