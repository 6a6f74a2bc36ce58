//! Scenario configuration, end-to-end runs, persistence, and the
//! cross-scenario ordering summary.

mod artifacts;
mod config;
mod pipeline;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageExt};
use crate::mia::{MembershipDataset, MembershipSplit};
use crate::rfsim::{sample_transmissions, Period, UserRole};
use crate::{rng, Classifier, Confusion};

pub use artifacts::{
    load_attack, load_classifiers, load_generated, load_report, reevaluate, run_dir, save_attack,
    save_classifiers, save_generated, save_report, ConfusionExport, Reevaluation,
};
pub use config::{
    apply_scenario_constraints, ChannelSettings, Scenario, ScenarioConfig, StageSeeds, TrainSettings, UserCounts,
};
pub use pipeline::{
    attack, attack_with, build_report, generate, run_scenario, train_classifiers, AttackOutcome, GeneratedData,
    MiaReport, ScenarioReport, ScenarioRun, Timing, TrainedClassifiers, REPORT_FORMAT_VERSION,
};

/// Persist every artifact of a finished run under `dir`.
pub fn save_run(dir: &std::path::Path, run: &ScenarioRun) -> Result<()> {
    save_generated(dir, &run.generated)?;
    save_classifiers(dir, &run.classifiers)?;
    save_attack(dir, &run.attack)?;
    save_report(dir, &run.report, Some(&run.timing))
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    pub claim: String,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingSummary {
    pub seeds: Vec<u64>,
    pub accuracies: BTreeMap<Scenario, Vec<f64>>,
    pub medians: BTreeMap<Scenario, f64>,
    pub checks: Vec<OrderingCheck>,
}

impl OrderingSummary {
    pub fn from_reports(seeds: &[u64], reports: &[ScenarioReport]) -> Self {
        let mut accuracies: BTreeMap<Scenario, Vec<f64>> = BTreeMap::new();
        for r in reports {
            accuracies.entry(r.scenario()).or_default().push(r.mia.accuracy);
        }
        let medians: BTreeMap<_, _> = accuracies.iter().map(|(s, v)| (*s, median(v))).collect();
        let m = |s: Scenario| medians.get(&s).copied().unwrap_or(f64::NAN);
        let (full, phase, power, weak) = (
            m(Scenario::FullStrong),
            m(Scenario::SamePhase),
            m(Scenario::SamePower),
            m(Scenario::WeakAuthorized),
        );
        let check = |claim: &str, holds: bool| OrderingCheck {
            claim: claim.to_string(),
            holds,
        };
        let checks = vec![
            check("median(full-strong) > median(same-phase)", full > phase),
            check("median(same-phase) > median(same-power)", phase > power),
            check("median(same-power) > 0.55", power > 0.55),
            check("median(weak-authorized) < median(full-strong)", weak < full),
        ];
        OrderingSummary {
            seeds: seeds.to_vec(),
            accuracies,
            medians,
            checks,
        }
    }

    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

/// One finished (scenario, seed) cell of [`run_all`].
#[derive(Clone, Debug)]
pub struct Cell {
    pub report: ScenarioReport,
    pub timing: Timing,
}

/// Run every scenario for every seed. `on_run` sees each full run before
/// its data is dropped (for persistence or extra analysis).
pub fn run_all<F>(base: &ScenarioConfig, seeds: &[u64], mut on_run: F) -> Result<(Vec<Cell>, OrderingSummary)>
where
    F: FnMut(&ScenarioRun) -> Result<()>,
{
    if seeds.len() < 3 {
        return Err(Error::config(format!("run-all needs at least 3 seeds, got {}", seeds.len())));
    }
    let mut cells = Vec::with_capacity(seeds.len() * Scenario::ALL.len());
    for &seed in seeds {
        for scenario in Scenario::ALL {
            let run = run_scenario(&base.with_scenario(scenario, seed)).map_err(|e| Error::Stage {
                stage: scenario.name(),
                source: Box::new(e),
            })?;
            on_run(&run)?;
            cells.push(Cell {
                report: run.report,
                timing: run.timing,
            });
        }
    }
    let reports: Vec<_> = cells.iter().map(|c| c.report.clone()).collect();
    let summary = OrderingSummary::from_reports(seeds, &reports);
    Ok((cells, summary))
}

/// Membership attack where "members" and "non-members" are two disjoint
/// draws from the same deployment-time distribution (half authorized,
/// half unauthorized QPSK). A sound attack scores near 0.5 here.
pub fn null_control(config: &ScenarioConfig, surrogate: &Classifier, population: &crate::rfsim::Population) -> Result<Confusion> {
    let inner = || -> Result<Confusion> {
        let seed = rng::derive(config.seed, "null-control");
        let half = config.counts.member_eval / 2;
        let draw = |side: &str| -> Result<Vec<_>> {
            let mut v = sample_transmissions(population, UserRole::Authorized, Period::Deployment, &format!("null/{side}/authorized"), half, seed)?;
            v.extend(sample_transmissions(population, UserRole::Unauthorized, Period::Deployment, &format!("null/{side}/unauthorized"), half, seed)?);
            Ok(v.into_iter().map(|p| p.adversary_view).collect())
        };
        let members: Vec<_> = draw("members")?;
        let nonmembers: Vec<_> = draw("nonmembers")?;
        let split = MembershipSplit::halves(members.len(), nonmembers.len(), rng::derive(seed, "split"));
        let dataset = MembershipDataset::new(members, nonmembers, split)?;
        Ok(attack_with(surrogate, dataset, config)?.confusion)
    };
    inner().stage("null_control")
}
