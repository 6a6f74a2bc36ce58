//! `airmia`: generate data, train classifiers, run the membership attack
//! and inspect reports from the command line.
//!
//! Exit status: 0 on success, 2 on usage or configuration errors, 1 on
//! runtime failures.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use airmia::harness::{
    self, load_classifiers, load_generated, load_report, run_dir, save_attack, save_classifiers, save_generated,
    save_report, save_run, ConfusionExport, OrderingSummary, Scenario, ScenarioConfig, ScenarioReport,
};
use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::CliConfig;

#[derive(Parser, Debug)]
#[command(name = "airmia", version, about = "Over-the-air membership inference simulation")]
struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output root; runs land in `<out>/<scenario>/<seed>/`.
    #[arg(long, global = true, env = "AIRMIA_OUT", value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Copy)]
struct Cell {
    #[arg(long, value_parser = parse_scenario)]
    scenario: Option<Scenario>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw the population and write every dataset.
    Gen(Cell),
    /// Train the target and surrogate classifiers on generated data.
    Train(Cell),
    /// Train and evaluate the membership inference model.
    Attack(Cell),
    /// Run one scenario end to end.
    Run(Cell),
    /// Run every scenario for every seed and check the orderings.
    RunAll {
        /// Comma-separated seed list, at least three.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Print the confusion matrix of a stored report.
    Report {
        /// A report.json file or the run directory holding it.
        path: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse().map_err(|e: airmia::Error| e.to_string())
}

enum Failure {
    Config(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<airmia::Error>() {
            Some(inner) if inner.is_config() => Failure::Config(inner.to_string()),
            _ => Failure::Runtime(e),
        }
    }
}

/// Library errors already spell out their sources; other errors carry
/// context layers that need the full chain.
fn describe(e: &anyhow::Error) -> String {
    match e.downcast_ref::<airmia::Error>() {
        Some(inner) => inner.to_string(),
        None => format!("{e:#}"),
    }
}

impl From<airmia::Error> for Failure {
    fn from(e: airmia::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

type Outcome = Result<(), Failure>;

struct Session {
    file: CliConfig,
    out: PathBuf,
}

impl Session {
    fn new(cli: &Cli) -> Result<Self, Failure> {
        let file = match &cli.config {
            Some(path) => CliConfig::load(path).map_err(Failure::Config)?,
            None => CliConfig::default(),
        };
        let out = cli.out.clone().or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
        Ok(Session { file, out })
    }

    fn scenario_config(&self, cell: Cell) -> Result<ScenarioConfig, Failure> {
        let base = &self.file.experiment;
        let cfg = base.with_scenario(cell.scenario.unwrap_or(base.scenario), cell.seed.unwrap_or(base.seed));
        cfg.validate()?;
        Ok(cfg)
    }

    fn dir(&self, cfg: &ScenarioConfig) -> PathBuf {
        run_dir(&self.out, cfg.scenario, cfg.seed)
    }
}

fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, text).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// The stage-by-stage subcommands reuse the config `gen` stored, so later
/// stages cannot silently disagree with the data on disk.
fn stored_config(dir: &Path) -> Result<ScenarioConfig, Failure> {
    let path = dir.join("config.json");
    if !path.exists() {
        return Err(Failure::Config(format!("{} not found; run `gen` first", path.display())));
    }
    Ok(ScenarioConfig::load(&path)?)
}

fn summary_line(r: &ScenarioReport) -> String {
    format!(
        "{} seed {}: target {:.4} surrogate {:.4} agreement {:.4} | MIA accuracy {:.4} (member recall {:.4}, non-member recall {:.4})",
        r.config.scenario,
        r.config.seed,
        r.target.test_accuracy,
        r.surrogate.test_accuracy,
        r.surrogate.agreement_with_target.unwrap_or(f64::NAN),
        r.mia.accuracy,
        r.mia.member_recall,
        r.mia.nonmember_recall,
    )
}

fn gen(ctx: &Session, cell: Cell) -> Outcome {
    let cfg = ctx.scenario_config(cell)?;
    let dir = ctx.dir(&cfg);
    let generated = harness::generate(&cfg)?;
    save_generated(&dir, &generated)?;
    write_json_atomic(&dir.join("config.json"), &cfg)?;
    println!("{} seed {}: datasets written to {}", cfg.scenario, cfg.seed, dir.display());
    Ok(())
}

fn train(ctx: &Session, cell: Cell) -> Outcome {
    let dir = ctx.dir(&ctx.scenario_config(cell)?);
    let cfg = stored_config(&dir)?;
    let generated = load_generated(&dir)?;
    let classifiers = harness::train_classifiers(&cfg, &generated)?;
    save_classifiers(&dir, &classifiers)?;
    println!(
        "{} seed {}: target {:.4} (grants {:.4} of unauthorized) surrogate {:.4} ({:.1}s + {:.1}s)",
        cfg.scenario,
        cfg.seed,
        classifiers.target_report.test_accuracy,
        classifiers.target_report.unauthorized_grant_rate.unwrap_or(f64::NAN),
        classifiers.surrogate_report.test_accuracy,
        classifiers.target_seconds,
        classifiers.surrogate_seconds,
    );
    Ok(())
}

fn attack(ctx: &Session, cell: Cell) -> Outcome {
    let dir = ctx.dir(&ctx.scenario_config(cell)?);
    let cfg = stored_config(&dir)?;
    let generated = load_generated(&dir)?;
    let classifiers = load_classifiers(&dir)?;
    let outcome = harness::attack(&cfg, &generated.data, &classifiers)?;
    save_attack(&dir, &outcome)?;
    let report = harness::build_report(&cfg, &classifiers, &outcome);
    save_report(&dir, &report, None)?;
    println!("{}", summary_line(&report));
    Ok(())
}

fn run(ctx: &Session, cell: Cell) -> Outcome {
    let cfg = ctx.scenario_config(cell)?;
    let dir = ctx.dir(&cfg);
    let result = harness::run_scenario(&cfg)?;
    save_run(&dir, &result)?;
    write_json_atomic(&dir.join("config.json"), &cfg)?;
    println!("{} -> {}", summary_line(&result.report), dir.display());
    Ok(())
}

fn run_all(ctx: &Session, seeds: Option<Vec<u64>>) -> Outcome {
    let seeds = seeds.unwrap_or_else(|| ctx.file.seeds.clone());
    let base = &ctx.file.experiment;
    base.validate()?;
    let mut stdout = std::io::stdout().lock();
    let (_, summary) = harness::run_all(base, &seeds, |r| {
        let dir = run_dir(&ctx.out, r.report.config.scenario, r.report.config.seed);
        save_run(&dir, r)?;
        let cfg_path = dir.join("config.json");
        write_json_atomic(&cfg_path, &r.report.config)
            .map_err(|e| airmia::Error::Io { path: cfg_path, source: std::io::Error::other(format!("{e:#}")) })?;
        // one complete line per cell
        let _ = writeln!(stdout, "{}", summary_line(&r.report));
        let _ = stdout.flush();
        Ok(())
    })?;
    print_summary(&mut stdout, &summary);
    write_json_atomic(&ctx.out.join("summary.json"), &summary)?;
    Ok(())
}

fn print_summary(w: &mut impl Write, s: &OrderingSummary) {
    let _ = writeln!(w, "\nMIA test accuracy over seeds {:?}", s.seeds);
    for (scenario, accs) in &s.accuracies {
        let list: Vec<String> = accs.iter().map(|a| format!("{a:.4}")).collect();
        let _ = writeln!(w, "  {:<16} median {:.4}  [{}]", scenario.name(), s.medians[scenario], list.join(", "));
    }
    for c in &s.checks {
        let _ = writeln!(w, "  {:<6}{}", if c.holds { "holds" } else { "FAILS" }, c.claim);
    }
}

fn report(path: &Path, json: bool) -> Outcome {
    let file = if path.is_dir() { path.join("report.json") } else { path.to_path_buf() };
    let r = load_report(&file)?;
    let export = ConfusionExport::new(r.config.scenario, r.config.seed, &r.mia.confusion);
    if json {
        let text = serde_json::to_string_pretty(&export).map_err(anyhow::Error::from)?;
        println!("{text}");
        return Ok(());
    }
    let rt = &export.rates;
    println!("{} seed {}: MIA test accuracy {:.4}", export.scenario, export.seed, export.accuracy);
    println!("{:<18}{:>12}{:>12}", "Real \\ Predicted", "non-member", "member");
    println!("{:<18}{:>12.4}{:>12.4}", "non-member", rt[0][0], rt[0][1]);
    println!("{:<18}{:>12.4}{:>12.4}", "member", rt[1][0], rt[1][1]);
    Ok(())
}

fn dispatch(cli: Cli) -> Outcome {
    if let Command::Report { path, json } = &cli.command {
        return report(path, *json);
    }
    let ctx = Session::new(&cli)?;
    match cli.command {
        Command::Gen(c) => gen(&ctx, c),
        Command::Train(c) => train(&ctx, c),
        Command::Attack(c) => attack(&ctx, c),
        Command::Run(c) => run(&ctx, c),
        Command::RunAll { seeds } => run_all(&ctx, seeds),
        Command::Report { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(1)
        }
    }
}
