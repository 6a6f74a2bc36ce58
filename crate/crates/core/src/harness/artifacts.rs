//! On-disk layout: `<out>/<scenario>/<seed>/{datasets/*.csv, models/*.json, report.json}`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::{classification_accuracy, label_agreement, ClassifierReport};
use crate::error::{Error, Result};
use crate::fsio::{read_json, write_atomic, write_json};
use crate::mia::{evaluate_mia, GainHistory, MembershipDataset, MembershipSplit};
use crate::rfsim::{read_samples, write_samples, DataBundle, PairedObservation, Population, SignalSample};
use crate::tinynn::ModelDocument;
use crate::{Classifier, Confusion, InferenceModel};

use super::config::Scenario;
use super::pipeline::{AttackOutcome, GeneratedData, ScenarioReport, Timing, TrainedClassifiers, REPORT_FORMAT_VERSION};

pub fn run_dir(out: &Path, scenario: Scenario, seed: u64) -> PathBuf {
    out.join(scenario.name()).join(seed.to_string())
}

fn datasets(dir: &Path) -> PathBuf {
    dir.join("datasets")
}

fn models(dir: &Path) -> PathBuf {
    dir.join("models")
}

fn pair_up(provider: Vec<SignalSample>, adversary: Vec<SignalSample>, what: &Path) -> Result<Vec<PairedObservation>> {
    if provider.len() != adversary.len() {
        return Err(Error::load(what, "provider and adversary files differ in length"));
    }
    Ok(provider
        .into_iter()
        .zip(adversary)
        .map(|(provider_view, adversary_view)| PairedObservation {
            provider_view,
            adversary_view,
        })
        .collect())
}

fn write_pairs(dir: &Path, stem: &str, pairs: &[PairedObservation]) -> Result<()> {
    let (p, a): (Vec<_>, Vec<_>) = pairs
        .iter()
        .map(|x| (x.provider_view.clone(), x.adversary_view.clone()))
        .unzip();
    write_samples(&dir.join(format!("{stem}_provider.csv")), &p)?;
    write_samples(&dir.join(format!("{stem}_adversary.csv")), &a)
}

fn read_pairs(dir: &Path, stem: &str) -> Result<Vec<PairedObservation>> {
    let p = read_samples(&dir.join(format!("{stem}_provider.csv")))?;
    let a = read_samples(&dir.join(format!("{stem}_adversary.csv")))?;
    pair_up(p, a, &dir.join(format!("{stem}_adversary.csv")))
}

pub fn save_generated(dir: &Path, generated: &GeneratedData) -> Result<()> {
    let d = datasets(dir);
    let data = &generated.data;
    write_json(&d.join("population.json"), &generated.population)?;
    write_samples(&d.join("provider_train.csv"), &data.provider_train)?;
    let class1_adversary: Vec<_> = data.paired_class1_train.iter().map(|p| p.adversary_view.clone()).collect();
    write_samples(&d.join("class1_train_adversary.csv"), &class1_adversary)?;
    write_samples(&d.join("member_eval.csv"), &data.member_eval)?;
    write_samples(&d.join("nonmember_eval.csv"), &data.nonmember_eval)?;
    write_pairs(&d, "surrogate_pool", &data.surrogate_train)?;
    write_pairs(&d, "test", &data.provider_test)
}

pub fn load_generated(dir: &Path) -> Result<GeneratedData> {
    let d = datasets(dir);
    let population: Population = read_json(&d.join("population.json"))?;
    let provider_train = read_samples(&d.join("provider_train.csv"))?;
    let class1_path = d.join("class1_train_adversary.csv");
    let class1_adversary = read_samples(&class1_path)?;
    if class1_adversary.len() > provider_train.len() {
        return Err(Error::load(&class1_path, "more class-1 views than training samples"));
    }
    let class1_provider = provider_train[..class1_adversary.len()].to_vec();
    let data = DataBundle {
        paired_class1_train: pair_up(class1_provider, class1_adversary, &class1_path)?,
        provider_train,
        member_eval: read_samples(&d.join("member_eval.csv"))?,
        nonmember_eval: read_samples(&d.join("nonmember_eval.csv"))?,
        surrogate_train: read_pairs(&d, "surrogate_pool")?,
        provider_test: read_pairs(&d, "test")?,
    };
    Ok(GeneratedData { population, data })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifierReports {
    target: ClassifierReport,
    surrogate: ClassifierReport,
}

fn load_model(path: &Path) -> Result<ModelDocument<f64>> {
    ModelDocument::load(path)
}

pub fn save_classifiers(dir: &Path, c: &TrainedClassifiers) -> Result<()> {
    let m = models(dir);
    write_atomic(&m.join("target.json"), c.target.to_document().to_json().as_bytes())?;
    write_atomic(&m.join("surrogate.json"), c.surrogate.to_document().to_json().as_bytes())?;
    write_json(
        &m.join("classifier_reports.json"),
        &ClassifierReports {
            target: c.target_report.clone(),
            surrogate: c.surrogate_report.clone(),
        },
    )?;
    write_samples(&datasets(dir).join("surrogate_train.csv"), &c.surrogate_train)
}

pub fn load_classifiers(dir: &Path) -> Result<TrainedClassifiers> {
    let m = models(dir);
    let target_path = m.join("target.json");
    let surrogate_path = m.join("surrogate.json");
    let target = Classifier::from_document(&load_model(&target_path)?).map_err(|e| Error::load(&target_path, e))?;
    let surrogate =
        Classifier::from_document(&load_model(&surrogate_path)?).map_err(|e| Error::load(&surrogate_path, e))?;
    let reports: ClassifierReports = read_json(&m.join("classifier_reports.json"))?;
    Ok(TrainedClassifiers {
        target,
        surrogate,
        surrogate_train: read_samples(&datasets(dir).join("surrogate_train.csv"))?,
        target_report: reports.target,
        surrogate_report: reports.surrogate,
        target_seconds: 0.0,
        surrogate_seconds: 0.0,
    })
}

pub fn save_attack(dir: &Path, a: &AttackOutcome) -> Result<()> {
    let m = models(dir);
    write_atomic(&m.join("mia.json"), a.model.to_document().to_json().as_bytes())?;
    write_json(&m.join("gain_history.json"), &a.gain_history)?;
    write_json(&datasets(dir).join("mia_split.json"), &a.membership.split)
}

/// Restore the attack stage and recompute its confusion matrix.
pub fn load_attack(dir: &Path, data: &DataBundle, surrogate: &Classifier) -> Result<AttackOutcome> {
    let mia_path = models(dir).join("mia.json");
    let model = InferenceModel::from_document(&load_model(&mia_path)?).map_err(|e| Error::load(&mia_path, e))?;
    let split_path = datasets(dir).join("mia_split.json");
    let split: MembershipSplit = read_json(&split_path)?;
    let membership = MembershipDataset::new(data.member_eval.clone(), data.nonmember_eval.clone(), split)
        .map_err(|e| Error::load(&split_path, e))?;
    let gain_history: GainHistory = read_json(&models(dir).join("gain_history.json"))?;
    let confusion = evaluate_mia(&model, surrogate, &membership.test_members(), &membership.test_nonmembers())?;
    Ok(AttackOutcome {
        membership,
        model,
        gain_history,
        confusion,
        seconds: 0.0,
    })
}

/// Confusion-matrix export: `{scenario, counts, rates, accuracy, seed}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfusionExport {
    pub scenario: Scenario,
    pub counts: [[u64; 2]; 2],
    pub rates: [[f64; 2]; 2],
    pub accuracy: f64,
    pub seed: u64,
}

impl ConfusionExport {
    pub fn new(scenario: Scenario, seed: u64, c: &Confusion) -> Self {
        ConfusionExport {
            scenario,
            counts: c.counts,
            rates: c.rates,
            accuracy: c.accuracy(),
            seed,
        }
    }
}

pub fn save_report(dir: &Path, report: &ScenarioReport, timing: Option<&Timing>) -> Result<()> {
    write_json(&dir.join("report.json"), report)?;
    let c = &report.mia.confusion;
    write_json(
        &dir.join("confusion.json"),
        &ConfusionExport::new(report.config.scenario, report.config.seed, c),
    )?;
    write_atomic(&dir.join("confusion.csv"), c.to_table_csv().as_bytes())?;
    if let Some(t) = timing {
        write_json(&dir.join("timing.json"), t)?;
    }
    Ok(())
}

pub fn load_report(path: &Path) -> Result<ScenarioReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let probe: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::load(path, e))?;
    match probe.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(REPORT_FORMAT_VERSION) => {}
        Some(v) => return Err(Error::load(path, format!("unsupported report format version {v}"))),
        None => return Err(Error::load(path, "missing report format_version")),
    }
    serde_json::from_value(probe).map_err(|e| Error::load(path, e))
}

/// Evaluation numbers recomputed from restored artifacts.
#[derive(Clone, Debug, PartialEq)]
pub struct Reevaluation {
    pub target_test_accuracy: f64,
    pub surrogate_test_accuracy: f64,
    pub agreement: f64,
    pub confusion: Confusion,
}

pub fn reevaluate(dir: &Path) -> Result<Reevaluation> {
    let generated = load_generated(dir)?;
    let classifiers = load_classifiers(dir)?;
    let attack = load_attack(dir, &generated.data, &classifiers.surrogate)?;
    let (provider, adversary): (Vec<_>, Vec<_>) = generated
        .data
        .provider_test
        .iter()
        .map(|p| (p.provider_view.clone(), p.adversary_view.clone()))
        .unzip();
    Ok(Reevaluation {
        target_test_accuracy: classification_accuracy(&classifiers.target, &provider)?,
        surrogate_test_accuracy: classification_accuracy(&classifiers.surrogate, &adversary)?,
        agreement: label_agreement(&classifiers.target, &classifiers.surrogate, &generated.data.provider_test)?,
        confusion: attack.confusion,
    })
}
