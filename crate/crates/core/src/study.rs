//! Grid-refinement study: the same scenario at `n, 2n, 4n, ...` with the
//! step cap and snapshot count scaled alongside.

use serde::Serialize;

use crate::elliptic::solve_nutrient;
use crate::error::{Error, Result};
use crate::family::{extract_limit, run_family};
use crate::grid::{Field, Grid};
use crate::monitor::check_loggrad_identity;
use crate::monitor::{weak_residual, ResidualProbe, WeakResidual};
use crate::scenario::Scenario;
use crate::stepper::{Snapshot, StepperParams};

/// Max-norm error of the discrete nutrient against
/// `v = 1 + cos(pi x / L) / (1 + (pi / L)^2)` for `u = 1`, `f = 1 + cos(pi x / L)`.
pub fn manufactured_elliptic_error(length: f64, n: usize) -> Result<f64> {
    let grid = Grid::new(length, n)?;
    let k = std::f64::consts::PI / length;
    let u = Field::constant(grid, 1.0)?;
    let f = Field::from_fn(grid, |x| 1.0 + (k * x).cos())?;
    let v = solve_nutrient(&u, &f)?;
    let exact = Field::from_fn(grid, |x| 1.0 + (k * x).cos() / (1.0 + k * k))?;
    Ok(v.zip_map(&exact, |a, b| a - b)?.max_abs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRow {
    pub level: u32,
    pub n: usize,
    pub dt_max: f64,
    pub snapshot_count: usize,
    /// Regularization of the run the residuals were measured on.
    pub eps: f64,
    pub elliptic_error: f64,
    pub res_u: f64,
    pub res_v: f64,
    /// Max over snapshots of the log-gradient identity gap.
    pub loggrad_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementStudy {
    pub probe: ResidualProbe,
    pub levels: Vec<LevelRow>,
    pub elliptic_rate: Option<f64>,
    pub res_u_rate: Option<f64>,
    pub res_v_rate: Option<f64>,
    pub loggrad_rate: Option<f64>,
}

/// Least-squares slope of `-log(value)` against `log(n)`; `None` when fewer
/// than two positive values are available.
pub fn fitted_rate(ns: &[usize], values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > 0.0 && v.is_finite())
        .map(|(&n, &v)| ((n as f64).ln(), -v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Residual probe used by the study: centered, covering 80% of the domain,
/// switched off at three quarters of the horizon.
pub fn default_probe(scenario: &Scenario) -> ResidualProbe {
    ResidualProbe::centered(scenario.length, 0.75 * scenario.t_end)
}

/// Snapshots the weak identities are tested on at one level: the extracted
/// limit of a family, or the single run of a one-member schedule.
pub fn limit_snapshots(
    scenario: &Scenario,
    params: &StepperParams,
) -> Result<(f64, Vec<Snapshot>)> {
    let family = run_family(scenario, params)?;
    if family.len() == 1 {
        let (eps, traj) = family.finest();
        return Ok((eps, traj.snapshots.clone()));
    }
    let limit = extract_limit(&family)?;
    Ok((limit.eps, limit.snapshots))
}

pub fn refinement_study(
    scenario: &Scenario,
    params: &StepperParams,
    levels: u32,
    probe: &ResidualProbe,
) -> Result<RefinementStudy> {
    if levels < 2 {
        return Err(Error::Precondition(format!(
            "need at least 2 refinement levels, got {levels}"
        )));
    }
    let mut rows = Vec::with_capacity(levels as usize);
    for level in 0..levels {
        let refined = scenario.refined(level);
        let dt_max = params.dt_max / f64::from(1u32 << level);
        let (eps, snapshots) = limit_snapshots(&refined, &params.with_dt_max(dt_max))?;
        let WeakResidual { res_u, res_v } = weak_residual(&snapshots, probe)?;
        let mut loggrad_gap = 0.0f64;
        for s in &snapshots {
            loggrad_gap = loggrad_gap.max(check_loggrad_identity(&s.u, &s.v, &s.f)?.gap);
        }
        rows.push(LevelRow {
            level,
            n: refined.n,
            dt_max,
            snapshot_count: refined.snapshot_count,
            eps,
            elliptic_error: manufactured_elliptic_error(scenario.length, refined.n)?,
            res_u,
            res_v,
            loggrad_gap,
        });
    }
    let ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    let rate =
        |pick: fn(&LevelRow) -> f64| fitted_rate(&ns, &rows.iter().map(pick).collect::<Vec<_>>());
    Ok(RefinementStudy {
        probe: *probe,
        elliptic_rate: rate(|r| r.elliptic_error),
        res_u_rate: rate(|r| r.res_u),
        res_v_rate: rate(|r| r.res_v),
        loggrad_rate: rate(|r| r.loggrad_gap),
        levels: rows,
    })
}

impl RefinementStudy {
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from(
            "level,n,dt_max,snapshot_count,eps,elliptic_error,res_u,res_v,loggrad_gap\n",
        );
        for r in &self.levels {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.level,
                r.n,
                r.dt_max,
                r.snapshot_count,
                r.eps,
                r.elliptic_error,
                r.res_u,
                r.res_v,
                r.loggrad_gap
            );
        }
        out
    }
}
