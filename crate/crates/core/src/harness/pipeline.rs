use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classify::{
    label_agreement, label_by_target, train_surrogate, train_target, ClassifierReport,
};
use crate::error::{Result, StageExt};
use crate::mia::{evaluate_mia, train_mia, GainHistory, MembershipDataset, MembershipSplit};
use crate::rfsim::{
    generate_scenario_data, sample_transmissions, DataBundle, Period, Population, SignalSample, UserRole,
};
use crate::{Classifier, Confusion, InferenceModel};

use super::config::{apply_scenario_constraints, Scenario, ScenarioConfig, StageSeeds};

pub const REPORT_FORMAT_VERSION: u32 = 1;

const POPULATION_NOTE: &str = "devices and channels are redrawn for every scenario and seed";

/// Output of the data-generation stage.
#[derive(Clone, Debug)]
pub struct GeneratedData {
    pub population: Population,
    pub data: DataBundle,
}

/// Output of the classifier stage.
#[derive(Clone, Debug)]
pub struct TrainedClassifiers {
    pub target: Classifier,
    pub surrogate: Classifier,
    /// Adversary views labelled by the target's decisions.
    pub surrogate_train: Vec<SignalSample>,
    pub target_report: ClassifierReport,
    pub surrogate_report: ClassifierReport,
    pub target_seconds: f64,
    pub surrogate_seconds: f64,
}

/// Output of the attack stage.
#[derive(Clone, Debug)]
pub struct AttackOutcome {
    pub membership: MembershipDataset,
    pub model: InferenceModel,
    pub gain_history: GainHistory,
    pub confusion: Confusion,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MiaReport {
    pub confusion: Confusion,
    pub accuracy: f64,
    pub member_recall: f64,
    pub nonmember_recall: f64,
    pub train_members: usize,
    pub train_nonmembers: usize,
    pub test_members: usize,
    pub test_nonmembers: usize,
    pub gain_history: GainHistory,
}

/// Deterministic record of one scenario run. Wall-clock timings live in
/// [`Timing`] so that reports are byte-identical across reruns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioReport {
    pub format_version: u32,
    pub config: ScenarioConfig,
    pub seeds: StageSeeds,
    pub population_note: String,
    pub target: ClassifierReport,
    pub surrogate: ClassifierReport,
    pub mia: MiaReport,
}

impl ScenarioReport {
    pub fn scenario(&self) -> Scenario {
        self.config.scenario
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timing {
    pub generate_seconds: f64,
    pub target_seconds: f64,
    pub surrogate_seconds: f64,
    pub mia_seconds: f64,
    pub total_seconds: f64,
}

/// Everything a scenario run produced.
#[derive(Clone, Debug)]
pub struct ScenarioRun {
    pub generated: GeneratedData,
    pub classifiers: TrainedClassifiers,
    pub attack: AttackOutcome,
    pub report: ScenarioReport,
    pub timing: Timing,
}

pub fn generate(config: &ScenarioConfig) -> Result<GeneratedData> {
    let inner = || -> Result<GeneratedData> {
        config.validate()?;
        let seeds = config.seeds();
        let population = apply_scenario_constraints(config)?.draw(seeds.population)?;
        let data = generate_scenario_data(&population, &config.counts, seeds.data)?;
        Ok(GeneratedData { population, data })
    };
    inner().stage("generate")
}

fn views(pairs: &[crate::rfsim::PairedObservation]) -> (Vec<SignalSample>, Vec<SignalSample>) {
    pairs
        .iter()
        .map(|p| (p.provider_view.clone(), p.adversary_view.clone()))
        .unzip()
}

/// Transmissions drawn to measure how often the target admits unauthorized users.
pub const UNAUTHORIZED_PROBE: usize = 1000;

/// Share of fresh unauthorized QPSK transmissions the target accepts as
/// authorized. Recorded only; nothing downstream depends on it.
pub fn unauthorized_grant_rate(target: &Classifier, population: &Population, seed: u64) -> Result<f64> {
    let probe: Vec<SignalSample> = sample_transmissions(
        population,
        UserRole::Unauthorized,
        Period::Deployment,
        "probe/unauthorized",
        UNAUTHORIZED_PROBE,
        seed,
    )?
    .into_iter()
    .map(|p| p.provider_view)
    .collect();
    let granted = target.predict_labels(&probe)?.iter().filter(|&&l| l == 1).count();
    Ok(granted as f64 / probe.len() as f64)
}

pub fn train_classifiers(config: &ScenarioConfig, generated: &GeneratedData) -> Result<TrainedClassifiers> {
    let seeds = config.seeds();
    let data = &generated.data;
    let (test_provider, test_adversary) = views(&data.provider_test);

    let start = Instant::now();
    let (target, target_report) = train_target(
        &data.provider_train,
        &test_provider,
        &config.target_training.hyper(seeds.target),
    )
    .stage("train_target")?;
    let mut target_report = target_report;
    target_report.unauthorized_grant_rate =
        Some(unauthorized_grant_rate(&target, &generated.population, seeds.data).stage("train_target")?);
    let target_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let surrogate_stage = || -> Result<_> {
        let surrogate_train = label_by_target(&target, &data.surrogate_train)?;
        let (surrogate, mut report) = train_surrogate(
            &surrogate_train,
            &test_adversary,
            &config.surrogate_training.hyper(seeds.surrogate),
        )?;
        report.agreement_with_target = Some(label_agreement(&target, &surrogate, &data.provider_test)?);
        Ok((surrogate, report, surrogate_train))
    };
    let (surrogate, surrogate_report, surrogate_train) = surrogate_stage().stage("train_surrogate")?;
    let surrogate_seconds = start.elapsed().as_secs_f64();

    Ok(TrainedClassifiers {
        target,
        surrogate,
        surrogate_train,
        target_report,
        surrogate_report,
        target_seconds,
        surrogate_seconds,
    })
}

/// Fit and evaluate the inference model on a prepared membership dataset.
pub fn attack_with(
    surrogate: &Classifier,
    membership: MembershipDataset,
    config: &ScenarioConfig,
) -> Result<AttackOutcome> {
    let start = Instant::now();
    let (model, gain_history) =
        train_mia(surrogate, &membership, &config.mia_training.hyper(config.seeds().mia)).stage("train_mia")?;
    let confusion = evaluate_mia(&model, surrogate, &membership.test_members(), &membership.test_nonmembers())
        .stage("evaluate_mia")?;
    Ok(AttackOutcome {
        membership,
        model,
        gain_history,
        confusion,
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn attack(config: &ScenarioConfig, data: &DataBundle, classifiers: &TrainedClassifiers) -> Result<AttackOutcome> {
    let split = MembershipSplit::halves(
        data.member_eval.len(),
        data.nonmember_eval.len(),
        config.seeds().mia_split,
    );
    let membership = MembershipDataset::new(data.member_eval.clone(), data.nonmember_eval.clone(), split)
        .stage("train_mia")?;
    attack_with(&classifiers.surrogate, membership, config)
}

pub fn build_report(config: &ScenarioConfig, classifiers: &TrainedClassifiers, attack: &AttackOutcome) -> ScenarioReport {
    let split = &attack.membership.split;
    let c = &attack.confusion;
    ScenarioReport {
        format_version: REPORT_FORMAT_VERSION,
        config: config.clone(),
        seeds: config.seeds(),
        population_note: POPULATION_NOTE.to_string(),
        target: classifiers.target_report.clone(),
        surrogate: classifiers.surrogate_report.clone(),
        mia: MiaReport {
            confusion: c.clone(),
            accuracy: c.accuracy(),
            member_recall: c.member_recall(),
            nonmember_recall: c.nonmember_recall(),
            train_members: split.train_members.len(),
            train_nonmembers: split.train_nonmembers.len(),
            test_members: split.test_members.len(),
            test_nonmembers: split.test_nonmembers.len(),
            gain_history: attack.gain_history.clone(),
        },
    }
}

/// Generate data, train both classifiers, then fit and evaluate the attack.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun> {
    let start = Instant::now();
    let generated = generate(config)?;
    let generate_seconds = start.elapsed().as_secs_f64();
    let classifiers = train_classifiers(config, &generated)?;
    let attack = attack(config, &generated.data, &classifiers)?;
    let report = build_report(config, &classifiers, &attack);
    let timing = Timing {
        generate_seconds,
        target_seconds: classifiers.target_seconds,
        surrogate_seconds: classifiers.surrogate_seconds,
        mia_seconds: attack.seconds,
        total_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(ScenarioRun {
        generated,
        classifiers,
        attack,
        report,
        timing,
    })
}
