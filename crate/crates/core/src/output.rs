//! Run report and delimited-text outputs.
//!
//! Every number is written with Rust's shortest round-trip formatting, so
//! parsing a file back yields the exact doubles that were computed.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::error::Error;
use crate::family::{ConvergenceReport, EpsilonFamily};
use crate::monitor::{FamilyAudit, LedgerRow};
use crate::scenario::Scenario;
use crate::stepper::{StepperParams, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryMeta {
    pub eps: f64,
    pub steps: usize,
    pub min_dt: f64,
    pub max_dt: f64,
    pub min_u: f64,
    pub min_v: f64,
    pub max_abs_vx: f64,
    pub wall_time_s: f64,
}

impl TrajectoryMeta {
    pub fn new(eps: f64, traj: &Trajectory) -> Self {
        let a = &traj.audit;
        Self {
            eps,
            steps: a.steps,
            min_dt: a.min_dt,
            max_dt: a.max_dt,
            min_u: a.min_u,
            min_v: a.min_v,
            max_abs_vx: a.max_abs_vx,
            wall_time_s: traj.wall_time.as_secs_f64(),
        }
    }
}

/// Why a run stopped before producing a full audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub message: String,
    pub eps: Option<f64>,
    pub t: Option<f64>,
}

impl From<&Error> for Failure {
    fn from(e: &Error) -> Self {
        Self {
            message: e.to_string(),
            eps: e.failing_eps(),
            t: e.failing_time(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    /// The scenario as a TOML document; parses back to an equal scenario.
    pub scenario: String,
    pub stepper: StepperParams,
    pub trajectories: Vec<TrajectoryMeta>,
    pub audit: Option<FamilyAudit>,
    pub ledger: Vec<LedgerRow>,
    pub convergence: Option<ConvergenceReport>,
    pub verdict: Verdict,
    pub failure: Option<Failure>,
}

impl RunReport {
    pub fn completed(
        scenario: &Scenario,
        params: &StepperParams,
        family: &EpsilonFamily,
        audit: FamilyAudit,
    ) -> Self {
        let trajectories = family
            .eps()
            .iter()
            .zip(family.trajectories())
            .map(|(&e, t)| TrajectoryMeta::new(e, t))
            .collect();
        let ledger = audit.ledger();
        let verdict = if audit.pass && ledger.iter().all(|r| r.pass) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        let convergence = audit.convergence.clone();
        Self {
            scenario: scenario.to_toml(),
            stepper: *params,
            trajectories,
            audit: Some(audit),
            ledger,
            convergence,
            verdict,
            failure: None,
        }
    }

    pub fn failed(scenario: &Scenario, params: &StepperParams, error: &Error) -> Self {
        Self {
            scenario: scenario.to_toml(),
            stepper: *params,
            trajectories: Vec::new(),
            audit: None,
            ledger: Vec::new(),
            convergence: None,
            verdict: Verdict::Fail,
            failure: Some(error.into()),
        }
    }

    pub fn write_json(&self, path: &Path) -> io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        fs::write(path, text)
    }
}

/// `t,x,u,v` rows for every snapshot of one trajectory.
pub fn fields_csv(traj: &Trajectory) -> String {
    let grid = traj.grid();
    let mut out = String::from("t,x,u,v\n");
    for s in &traj.snapshots {
        for (i, x) in grid.centers().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", s.t, x, s.u.values()[i], s.v.values()[i]);
        }
    }
    out
}

pub fn holder_csv(audit: &FamilyAudit) -> String {
    let mut out = String::from("eps,lag,sup_diff,alpha\n");
    for ta in &audit.trajectories {
        if let Some(p) = &ta.holder {
            let alpha = p
                .alpha
                .map_or_else(|| "unconstrained".to_string(), |a| a.to_string());
            for (lag, d) in p.lags.iter().zip(&p.sup_diffs) {
                let _ = writeln!(out, "{},{},{},{}", ta.eps, lag, d, alpha);
            }
        }
    }
    out
}

pub fn convergence_csv(report: Option<&ConvergenceReport>) -> String {
    let mut out = String::from("t,eps_coarse,eps_fine,u_increment,v_increment\n");
    if let Some(r) = report {
        for (j, pair) in r.eps.windows(2).enumerate() {
            for (k, t) in r.probe_times.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    t, pair[0], pair[1], r.u_increments[k][j], r.v_increments[k][j]
                );
            }
        }
    }
    out
}

/// `x,u,v` profile of one snapshot.
pub fn profile_csv(traj: &Trajectory, k: usize) -> String {
    let s = &traj.snapshots[k];
    let mut out = String::from("x,u,v\n");
    for (i, x) in traj.grid().centers().enumerate() {
        let _ = writeln!(out, "{},{},{}", x, s.u.values()[i], s.v.values()[i]);
    }
    out
}

/// Writes the report and, when the family completed, the field, Hölder,
/// convergence and profile files. `dir` must already exist.
pub fn write_run(dir: &Path, report: &RunReport, family: Option<&EpsilonFamily>) -> io::Result<()> {
    if !dir.is_dir() {
        return Err(io::Error::new(
            io::ErrorKind::NotFound,
            format!("output directory {} does not exist", dir.display()),
        ));
    }
    report.write_json(&dir.join("report.json"))?;
    let Some(family) = family else {
        return Ok(());
    };
    for (j, traj) in family.trajectories().iter().enumerate() {
        fs::write(dir.join(format!("fields_eps{j}.csv")), fields_csv(traj))?;
    }
    if let Some(audit) = &report.audit {
        fs::write(dir.join("holder.csv"), holder_csv(audit))?;
    }
    fs::write(
        dir.join("convergence.csv"),
        convergence_csv(report.convergence.as_ref()),
    )?;
    let profiles = dir.join("profiles");
    fs::create_dir_all(&profiles)?;
    let (_, finest) = family.finest();
    for k in 0..finest.snapshots.len() {
        fs::write(profiles.join(format!("t{k}.csv")), profile_csv(finest, k))?;
    }
    Ok(())
}
