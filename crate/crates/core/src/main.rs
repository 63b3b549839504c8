use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde::Serialize;

use nutaxis::family::run_family;
use nutaxis::monitor::{audit_family, AuditOptions};
use nutaxis::output::{write_run, RunReport, Verdict};
use nutaxis::scenario::{parse_scenario, Scenario};
use nutaxis::stepper::StepperParams;
use nutaxis::study::{default_probe, refinement_study, RefinementStudy};

/// Elliptic rate window and per-level residual reduction required of a refinement study.
const ELLIPTIC_RATE: (f64, f64) = (1.7, 2.3);
const RESIDUAL_REDUCTION: f64 = 1.5;

#[derive(Parser)]
#[command(
    name = "nutaxis",
    version,
    about = "Regularized nutrient-taxis runs with estimate auditing"
)]
struct Cli {
    /// Suppress progress messages.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the eps family of a scenario and audit every trajectory.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Step safety factor; values above 1 are accepted and may break positivity.
        #[arg(long)]
        cfl: Option<f64>,
        /// Override the scenario's snapshot count.
        #[arg(long)]
        snapshots: Option<usize>,
    },
    /// Rerun a scenario at n, 2n, 4n, ... and tabulate discretization errors.
    Converge {
        scenario: PathBuf,
        #[arg(long)]
        levels: u32,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Exit 2: the run could not be set up (bad input, unusable output directory).
struct Setup(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Setup {
    fn from(e: E) -> Self {
        Setup(e.into())
    }
}

fn load(path: &Path) -> Result<Scenario, Setup> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading scenario {}", path.display()))?;
    Ok(parse_scenario(&text).with_context(|| format!("parsing {}", path.display()))?)
}

fn require_dir(dir: &Path) -> Result<(), Setup> {
    if !dir.is_dir() {
        return Err(Setup(anyhow::anyhow!(
            "output directory {} does not exist",
            dir.display()
        )));
    }
    Ok(())
}

fn cmd_run(
    path: &Path,
    out: &Path,
    cfl: Option<f64>,
    snapshots: Option<usize>,
    quiet: bool,
) -> Result<bool, Setup> {
    let mut scenario = load(path)?;
    if let Some(k) = snapshots {
        scenario.snapshot_count = k;
        scenario.validate()?;
    }
    require_dir(out)?;
    let defaults = StepperParams::default();
    let params = match cfl {
        Some(r) if r > 1.0 => {
            StepperParams::unchecked(r, defaults.dt_max, defaults.positivity_floor)?
        }
        Some(r) => StepperParams::new(r, defaults.dt_max, defaults.positivity_floor)?,
        None => defaults,
    };

    let started = Instant::now();
    if !quiet {
        eprintln!(
            "running {} eps values on n = {} up to t = {}",
            scenario.eps_schedule.count, scenario.n, scenario.t_end
        );
    }
    let outcome = run_family(&scenario, &params).and_then(|family| {
        let options = AuditOptions::for_schedule(scenario.t_end, scenario.snapshot_count);
        let audit = audit_family(&family, &scenario, &options)?;
        Ok((family, audit))
    });
    let (report, family) = match outcome {
        Ok((family, audit)) => (
            RunReport::completed(&scenario, &params, &family, audit),
            Some(family),
        ),
        Err(e) => {
            eprintln!("error: {e}");
            (RunReport::failed(&scenario, &params, &e), None)
        }
    };
    write_run(out, &report, family.as_ref()).context("writing outputs")?;

    let failures: Vec<_> = report.ledger.iter().filter(|r| !r.pass).collect();
    if !quiet {
        for r in failures.iter().take(20) {
            eprintln!("failed: {} eps = {:?} t = {:?}", r.check, r.eps, r.t);
        }
        if failures.len() > 20 {
            eprintln!("... {} failing rows in total", failures.len());
        }
        eprintln!(
            "{:?} ({} checks, {:.2} s)",
            report.verdict,
            report.ledger.len(),
            started.elapsed().as_secs_f64()
        );
    }
    Ok(report.verdict == Verdict::Pass)
}

#[derive(Serialize)]
struct StudyReport {
    scenario: String,
    study: RefinementStudy,
    residual_reductions: Vec<f64>,
    pass: bool,
}

fn cmd_converge(path: &Path, levels: u32, out: &Path, quiet: bool) -> Result<bool, Setup> {
    if levels < 2 {
        return Err(Setup(anyhow::anyhow!(
            "need at least 2 refinement levels, got {levels}"
        )));
    }
    let scenario = load(path)?;
    require_dir(out)?;
    let params = StepperParams::default();
    let probe = default_probe(&scenario);
    if !quiet {
        eprintln!(
            "refinement study over {levels} levels from n = {}",
            scenario.n
        );
    }
    let study = match refinement_study(&scenario, &params, levels, &probe) {
        Ok(s) => s,
        Err(e) if e.is_numerical() || matches!(e, nutaxis::Error::NotConverging(_)) => {
            eprintln!("error: {e}");
            return Ok(false);
        }
        Err(e) => return Err(e.into()),
    };
    let reductions: Vec<f64> = study
        .levels
        .windows(2)
        .map(|w| w[0].res_u / w[1].res_u)
        .collect();
    let rate_ok = study
        .elliptic_rate
        .is_some_and(|r| (ELLIPTIC_RATE.0..=ELLIPTIC_RATE.1).contains(&r));
    let pass = rate_ok && reductions.iter().all(|&r| r >= RESIDUAL_REDUCTION);

    fs::write(out.join("refinement.csv"), study.to_csv())?;
    let report = StudyReport {
        scenario: scenario.to_toml(),
        study,
        residual_reductions: reductions,
        pass,
    };
    fs::write(
        out.join("refinement.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    if !quiet {
        for r in &report.study.levels {
            eprintln!(
                "n = {:5}  elliptic {:.3e}  res_u {:.3e}  res_v {:.3e}  loggrad {:.3e}",
                r.n, r.elliptic_error, r.res_u, r.res_v, r.loggrad_gap
            );
        }
        eprintln!(
            "rates: elliptic {:?} res_u {:?}; {}",
            report.study.elliptic_rate,
            report.study.res_u_rate,
            if pass { "pass" } else { "fail" }
        );
    }
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            scenario,
            out,
            cfl,
            snapshots,
        } => cmd_run(scenario, out, *cfl, *snapshots, cli.quiet),
        Command::Converge {
            scenario,
            levels,
            out,
        } => cmd_converge(scenario, *levels, out, cli.quiet),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Setup(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
