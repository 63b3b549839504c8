use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use super::{
    check_consumption, check_harnack, check_loggrad_identity, check_mass_bounds,
    check_pointwise_bounds, check_v_bounds, family_spread, fit_holder_exponent,
    track_lp_dissipation, BoundsContext, FamilySpread, HolderProbe, LpDissipation,
};
use crate::error::Result;
use crate::family::{cauchy_convergence, ConvergenceReport, EpsilonFamily};
use crate::scenario::Scenario;
use crate::stepper::{Snapshot, StepAudit, Trajectory};
use crate::tolerances::EXACT_IDENTITY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    MassBounds,
    Consumption,
    LogGradient,
    Harnack,
    NutrientBounds,
    PointwiseBounds,
    Positivity,
    ExactConsumption,
    ExactMassBalance,
    StepPositivity,
    LpFinite,
    Holder,
    FamilySpread,
    CauchyConvergence,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Check::MassBounds => "mass_bounds",
            Check::Consumption => "consumption",
            Check::LogGradient => "log_gradient",
            Check::Harnack => "harnack",
            Check::NutrientBounds => "nutrient_bounds",
            Check::PointwiseBounds => "pointwise_bounds",
            Check::Positivity => "positivity",
            Check::ExactConsumption => "exact_consumption",
            Check::ExactMassBalance => "exact_mass_balance",
            Check::StepPositivity => "step_positivity",
            Check::LpFinite => "lp_finite",
            Check::Holder => "holder",
            Check::FamilySpread => "family_spread",
            Check::CauchyConvergence => "cauchy_convergence",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub check: Check,
    pub pass: bool,
}

fn outcome(check: Check, pass: bool) -> CheckOutcome {
    CheckOutcome { check, pass }
}

/// Every estimate evaluated on one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRecord {
    pub t: f64,
    pub mass: f64,
    pub mass_lower: f64,
    pub mass_upper: f64,
    pub consumption_gap: f64,
    pub loggrad_lhs: f64,
    pub loggrad_rhs: f64,
    pub loggrad_gap: f64,
    pub sup_v: f64,
    pub inf_v: f64,
    pub harnack_ratio: f64,
    pub harnack_c: f64,
    /// Upper bound on `inf v`.
    pub inf_bound: f64,
    /// Lower bound on `sup v`.
    pub sup_bound: f64,
    pub pointwise_lower: f64,
    pub pointwise_upper: f64,
    /// `(p, int u^p)`.
    pub lp_integrals: Vec<(f64, f64)>,
    /// `(p, int_0^t int u^(p-1) v |u_x|^2)`.
    pub dissipation_accum: Vec<(f64, f64)>,
    pub min_u: f64,
    pub max_vx: f64,
    pub checks: Vec<CheckOutcome>,
}

impl EstimateRecord {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub fn evaluate_snapshot(
    snapshot: &Snapshot,
    ctx: &BoundsContext,
    exponents: &[f64],
) -> Result<EstimateRecord> {
    let (u, v, f, t) = (&snapshot.u, &snapshot.v, &snapshot.f, snapshot.t);
    let mut checks = Vec::with_capacity(8);

    let mass = check_mass_bounds(u, t, ctx);
    checks.push(outcome(Check::MassBounds, mass.pass));
    let consumption = check_consumption(u, v, f)?;
    checks.push(outcome(Check::Consumption, consumption.pass));

    let (min_u, max_u) = {
        let (hi, lo) = u.sup_inf();
        (lo, hi)
    };
    let (_, min_v) = v.sup_inf();
    checks.push(outcome(
        Check::Positivity,
        min_u > 0.0 && min_v > 0.0 && max_u.is_finite(),
    ));

    let bounds = check_v_bounds(v, f, ctx, t)?;
    checks.push(outcome(Check::NutrientBounds, bounds.pass));

    let nan = f64::NAN;
    let (loggrad, harnack, pointwise) = if min_v > 0.0 {
        let lg = check_loggrad_identity(u, v, f)?;
        let hc = check_harnack(u, v, f)?;
        let pw = check_pointwise_bounds(&bounds, &hc);
        checks.push(outcome(Check::LogGradient, lg.pass));
        checks.push(outcome(Check::Harnack, hc.pass));
        checks.push(outcome(Check::PointwiseBounds, pw.pass));
        (
            (lg.lhs, lg.rhs, lg.gap),
            (hc.ratio, hc.constant),
            (pw.lower, pw.upper),
        )
    } else {
        // log-gradient and Harnack quantities are undefined without v > 0
        checks.push(outcome(Check::LogGradient, false));
        checks.push(outcome(Check::Harnack, false));
        checks.push(outcome(Check::PointwiseBounds, false));
        ((nan, nan, nan), (nan, nan), (nan, nan))
    };

    let lp_integrals = exponents
        .iter()
        .map(|&p| Ok((p, u.power_integral(p)?)))
        .collect::<Result<Vec<_>>>()?;
    let dissipation_accum: Vec<(f64, f64)> = exponents
        .iter()
        .copied()
        .zip(snapshot.dissipation.iter().copied())
        .collect();
    let finite = lp_integrals
        .iter()
        .chain(&dissipation_accum)
        .all(|(_, x)| x.is_finite());
    checks.push(outcome(Check::LpFinite, finite));

    let max_vx = v.face_gradient().iter().fold(0.0f64, |m, g| m.max(g.abs()));
    Ok(EstimateRecord {
        t,
        mass: mass.mass,
        mass_lower: mass.lower,
        mass_upper: mass.upper,
        consumption_gap: consumption.gap,
        loggrad_lhs: loggrad.0,
        loggrad_rhs: loggrad.1,
        loggrad_gap: loggrad.2,
        sup_v: bounds.sup_v,
        inf_v: bounds.inf_v,
        harnack_ratio: harnack.0,
        harnack_c: harnack.1,
        inf_bound: bounds.inf_upper,
        sup_bound: bounds.sup_lower,
        pointwise_lower: pointwise.0,
        pointwise_upper: pointwise.1,
        lp_integrals,
        dissipation_accum,
        min_u,
        max_vx,
        checks,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditOptions {
    /// Hölder probe window and lags; skipped when `None`.
    pub holder: Option<((f64, f64), Vec<f64>)>,
}

impl AuditOptions {
    /// Dyadic lags `Δ, 2Δ, 4Δ, 8Δ` of the snapshot spacing `Δ`, kept below
    /// half the horizon and below 1, over the full window.
    pub fn for_schedule(t_end: f64, snapshot_count: usize) -> Self {
        let spacing = t_end / snapshot_count as f64;
        let lags: Vec<f64> = (0..4)
            .map(|k| spacing * f64::from(1u32 << k))
            .filter(|&h| h < 1.0 && h <= 0.5 * t_end)
            .collect();
        let holder = (lags.len() >= 3).then_some(((0.0, t_end), lags));
        Self { holder }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryAudit {
    pub eps: f64,
    pub records: Vec<EstimateRecord>,
    pub steps: StepAuditSummary,
    pub lp: Vec<LpDissipation>,
    pub holder: Option<HolderProbe>,
    /// Trajectory-level checks (exact identities over every step, positivity, Hölder).
    pub checks: Vec<CheckOutcome>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepAuditSummary {
    pub steps: usize,
    pub min_dt: f64,
    pub max_dt: f64,
    pub max_consumption_gap: f64,
    pub max_mass_balance_gap: f64,
    pub min_u: f64,
    pub min_v: f64,
    pub max_abs_vx: f64,
    pub floor_hits: usize,
}

impl From<&StepAudit> for StepAuditSummary {
    fn from(a: &StepAudit) -> Self {
        Self {
            steps: a.steps,
            min_dt: a.min_dt,
            max_dt: a.max_dt,
            max_consumption_gap: a.max_consumption_gap,
            max_mass_balance_gap: a.max_mass_balance_gap,
            min_u: a.min_u,
            min_v: a.min_v,
            max_abs_vx: a.max_abs_vx,
            floor_hits: a.floor_hits,
        }
    }
}

pub fn audit_trajectory(
    trajectory: &Trajectory,
    ctx: &BoundsContext,
    options: &AuditOptions,
) -> Result<TrajectoryAudit> {
    let records = trajectory
        .snapshots
        .iter()
        .map(|s| evaluate_snapshot(s, ctx, &trajectory.lp_exponents))
        .collect::<Result<Vec<_>>>()?;
    let lp = trajectory
        .lp_exponents
        .iter()
        .map(|&p| track_lp_dissipation(trajectory, p))
        .collect::<Result<Vec<_>>>()?;
    let holder = match &options.holder {
        Some((window, lags)) => Some(fit_holder_exponent(trajectory, *window, lags)?),
        None => None,
    };
    let a = &trajectory.audit;
    let mut checks = vec![
        outcome(
            Check::ExactConsumption,
            a.max_consumption_gap <= EXACT_IDENTITY,
        ),
        outcome(
            Check::ExactMassBalance,
            a.max_mass_balance_gap <= EXACT_IDENTITY,
        ),
        outcome(Check::StepPositivity, a.min_u > 0.0 && a.min_v > 0.0),
        outcome(Check::LpFinite, lp.iter().all(LpDissipation::is_finite)),
    ];
    if let Some(probe) = &holder {
        checks.push(outcome(Check::Holder, probe.pass));
    }
    let pass = checks.iter().all(|c| c.pass) && records.iter().all(EstimateRecord::pass);
    Ok(TrajectoryAudit {
        eps: ctx.eps,
        records,
        steps: a.into(),
        lp,
        holder,
        checks,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyAudit {
    pub trajectories: Vec<TrajectoryAudit>,
    pub spreads: Vec<FamilySpread>,
    /// Serialized at the top level of the run report instead.
    #[serde(skip)]
    pub convergence: Option<ConvergenceReport>,
    pub checks: Vec<CheckOutcome>,
    pub pass: bool,
}

/// One line of the flattened pass/fail ledger.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerRow {
    pub eps: Option<f64>,
    pub t: Option<f64>,
    pub check: Check,
    pub pass: bool,
}

impl FamilyAudit {
    pub fn ledger(&self) -> Vec<LedgerRow> {
        let mut rows = Vec::new();
        for ta in &self.trajectories {
            for r in &ta.records {
                rows.extend(r.checks.iter().map(|c| LedgerRow {
                    eps: Some(ta.eps),
                    t: Some(r.t),
                    check: c.check,
                    pass: c.pass,
                }));
            }
            rows.extend(ta.checks.iter().map(|c| LedgerRow {
                eps: Some(ta.eps),
                t: None,
                check: c.check,
                pass: c.pass,
            }));
        }
        rows.extend(self.checks.iter().map(|c| LedgerRow {
            eps: None,
            t: None,
            check: c.check,
            pass: c.pass,
        }));
        rows
    }

    pub fn failures(&self) -> Vec<LedgerRow> {
        self.ledger().into_iter().filter(|r| !r.pass).collect()
    }
}

/// Audits every member of the family (in parallel), then the family-level
/// spread and Cauchy-in-eps checks.
pub fn audit_family(
    family: &EpsilonFamily,
    scenario: &Scenario,
    options: &AuditOptions,
) -> Result<FamilyAudit> {
    let grid = *family.trajectories()[0].grid();
    let trajectories = family
        .eps()
        .par_iter()
        .zip(family.trajectories().par_iter())
        .map(|(&eps, traj)| {
            let ctx = BoundsContext::from_scenario(scenario, &grid, eps)?;
            audit_trajectory(traj, &ctx, options)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut checks = Vec::new();
    let mut spreads = Vec::new();
    let mut convergence = None;
    if family.len() >= 2 {
        for &p in &family.trajectories()[0].lp_exponents {
            let s = family_spread(family, p)?;
            checks.push(outcome(Check::FamilySpread, s.pass));
            spreads.push(s);
        }
        let report = cauchy_convergence(family, 1.0)?;
        checks.push(outcome(Check::CauchyConvergence, report.converging));
        convergence = Some(report);
    }
    let pass = trajectories.iter().all(|t| t.pass) && checks.iter().all(|c| c.pass);
    Ok(FamilyAudit {
        trajectories,
        spreads,
        convergence,
        checks,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::run_family;
    use crate::scenario::parse_scenario;
    use crate::stepper::StepperParams;

    fn bump_scenario() -> Scenario {
        parse_scenario(
            r#"
L = 1.0
n = 60
t_end = 0.5
snapshot_count = 16
lp_exponents = [2.0]
u0_spec = { kind = "gaussian_clipped", a = 1.0, center = 0.4, width = 0.15 }
f_spec = { g = { kind = "one_plus_cosine", amplitude = 0.5, k = 1 }, s = { kind = "linear_ramp", rate = 0.5 } }
eps_schedule = { eps0 = 0.2, count = 3, ratio = 0.5 }
"#,
        )
        .unwrap()
    }

    #[test]
    fn uncorrupted_family_passes_everything() {
        let s = bump_scenario();
        let family = run_family(&s, &StepperParams::default()).unwrap();
        let audit = audit_family(
            &family,
            &s,
            &AuditOptions::for_schedule(s.t_end, s.snapshot_count),
        )
        .unwrap();
        assert!(audit.pass, "failures: {:?}", audit.failures());
        assert!(audit.trajectories.iter().all(|t| t.holder.is_some()));
        let rows = audit.ledger();
        assert!(rows.len() > 3 * 17 * 8);
    }

    #[test]
    fn corrupted_snapshot_fails_its_checks() {
        let s = bump_scenario();
        let family = run_family(&s, &StepperParams::default()).unwrap();
        let traj = &family.trajectories()[0];
        let grid = *traj.grid();
        let ctx = BoundsContext::from_scenario(&s, &grid, family.eps()[0]).unwrap();
        let mut snap = traj.last().clone();
        snap.u = snap.u.scaled(0.1).unwrap();
        let record = evaluate_snapshot(&snap, &ctx, &[2.0]).unwrap();
        let failed: Vec<Check> = record
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.check)
            .collect();
        assert!(failed.contains(&Check::MassBounds));
        assert!(failed.contains(&Check::Consumption));
    }

    #[test]
    fn holder_lags_follow_schedule() {
        let opts = AuditOptions::for_schedule(1.0, 64);
        let (_, lags) = opts.holder.unwrap();
        assert_eq!(lags, vec![1.0 / 64.0, 1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0]);
        assert!(AuditOptions::for_schedule(1.0, 2).holder.is_none());
    }
}
