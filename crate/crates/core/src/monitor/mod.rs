//! Discrete analogues of the a-priori estimates and identities satisfied by
//! the regularized solutions, evaluated per snapshot, per trajectory and per
//! eps family.

mod holder;
mod suite;
mod weak;

pub use holder::{fit_holder_exponent, HolderProbe};
pub use suite::{
    audit_family, audit_trajectory, evaluate_snapshot, AuditOptions, Check, CheckOutcome,
    EstimateRecord, FamilyAudit, LedgerRow, StepAuditSummary, TrajectoryAudit,
};
pub use weak::{weak_residual, ResidualProbe, WeakResidual};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::EpsilonFamily;
use crate::grid::{Field, Grid};
use crate::scenario::{Scenario, TemporalProfile};
use crate::stepper::Trajectory;
use crate::tolerances::{
    BOUND_RELATIVE, EXACT_IDENTITY, FAMILY_SPREAD, HARNACK_RELATIVE, SATURATION_RELATIVE,
};

/// Scenario data the bounds depend on, for one member of the eps family.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsContext {
    pub length: f64,
    /// `int u0` of the unregularized datum.
    pub u0_mass: f64,
    pub eps: f64,
    /// Max of the spatial supply profile over the cells.
    pub supply_max: f64,
    pub supply_time: TemporalProfile,
}

impl BoundsContext {
    pub fn from_scenario(scenario: &Scenario, grid: &Grid, eps: f64) -> Result<Self> {
        Ok(Self {
            length: grid.length(),
            u0_mass: scenario.u0_field(grid)?.integrate(),
            eps,
            supply_max: scenario.supply_profile_max(grid),
            supply_time: scenario.f_spec.s.clone(),
        })
    }

    /// `||f||_{L^inf(Omega x (0, t))}` on the grid.
    pub fn supply_sup(&self, t: f64) -> f64 {
        self.supply_max * self.supply_time.sup_up_to(t)
    }

    /// Initial mass of the regularized datum, `int u0 + eps |Omega|`.
    pub fn regularized_mass(&self) -> f64 {
        self.u0_mass + self.eps * self.length
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassCheck {
    pub mass: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

/// `int u0 <= int u(t) <= |Omega| (1 + ||f|| t) + int u0 + eps |Omega|`.
pub fn check_mass_bounds(u: &Field, t: f64, ctx: &BoundsContext) -> MassCheck {
    let mass = u.integrate();
    let lower = ctx.u0_mass;
    let upper = ctx.length * (1.0 + ctx.supply_sup(t) * t) + ctx.u0_mass + ctx.eps * ctx.length;
    let tol = BOUND_RELATIVE * mass.abs();
    MassCheck {
        mass,
        lower,
        upper,
        pass: lower - tol <= mass && mass <= upper + tol,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsumptionCheck {
    pub gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// `int u v = int f`, exact for the discrete solve.
pub fn check_consumption(u: &Field, v: &Field, f: &Field) -> Result<ConsumptionCheck> {
    u.ensure_same_grid(f)?;
    let supply = f.integrate();
    let gap = (u.integrate_product(v)? - supply).abs();
    let tolerance = EXACT_IDENTITY * (1.0 + supply);
    Ok(ConsumptionCheck {
        gap,
        tolerance,
        pass: gap <= tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogGradCheck {
    /// `int f / v + int |v_x|^2 / v^2`.
    pub lhs: f64,
    /// `int u`.
    pub rhs: f64,
    pub gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Identity obtained by testing the nutrient equation with `1 / v`.
///
/// Face values of `v` are arithmetic means, so the discrete identity holds
/// only up to truncation; the tolerance is `h (1 + int u)`.
pub fn check_loggrad_identity(u: &Field, v: &Field, f: &Field) -> Result<LogGradCheck> {
    u.ensure_same_grid(v)?;
    u.ensure_same_grid(f)?;
    ensure_positive(v)?;
    let h = v.grid().spacing();
    let supply_term = f.integrate_product(&v.map(f64::recip)?)?;
    let grad = v.face_gradient();
    let mean = v.face_average();
    let gradient_term: f64 = h
        * (1..v.len())
            .map(|j| (grad[j] / mean[j]).powi(2))
            .sum::<f64>();
    let lhs = supply_term + gradient_term;
    let rhs = u.integrate();
    let gap = (lhs - rhs).abs();
    let tolerance = h * (1.0 + rhs);
    Ok(LogGradCheck {
        lhs,
        rhs,
        gap,
        tolerance,
        pass: gap <= tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HarnackCheck {
    pub sup_v: f64,
    pub inf_v: f64,
    pub ratio: f64,
    /// `exp(|Omega| (int u + int f / v))`.
    pub constant: f64,
    pub pass: bool,
}

/// `sup v <= C inf v` with the explicit constant `C = exp(|Omega| (int u + int f/v))`.
pub fn check_harnack(u: &Field, v: &Field, f: &Field) -> Result<HarnackCheck> {
    u.ensure_same_grid(v)?;
    u.ensure_same_grid(f)?;
    ensure_positive(v)?;
    let (sup_v, inf_v) = v.sup_inf();
    let ratio = sup_v / inf_v;
    let exponent =
        v.grid().length() * (u.integrate() + f.integrate_product(&v.map(f64::recip)?)?);
    let constant = exponent.exp();
    Ok(HarnackCheck {
        sup_v,
        inf_v,
        ratio,
        constant,
        pass: ratio <= constant * (1.0 + HARNACK_RELATIVE),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VBoundsCheck {
    pub inf_v: f64,
    pub sup_v: f64,
    /// Upper bound on `inf v`: `int f / (int u0 + eps |Omega|)`.
    pub inf_upper: f64,
    /// Lower bound on `sup v`: `int f / (|Omega| ||f|| t + int u0 + eps |Omega|)`.
    pub sup_lower: f64,
    pub saturated: bool,
    pub pass: bool,
}

/// Upper bound for `inf v` and lower bound for `sup v` at time `t`, with the
/// mass of the regularized datum in the denominators.
pub fn check_v_bounds(v: &Field, f: &Field, ctx: &BoundsContext, t: f64) -> Result<VBoundsCheck> {
    v.ensure_same_grid(f)?;
    let (sup_v, inf_v) = v.sup_inf();
    let supply = f.integrate();
    let base = ctx.regularized_mass();
    let inf_upper = if base > 0.0 {
        supply / base
    } else {
        f64::INFINITY
    };
    let sup_lower = supply / (ctx.length * ctx.supply_sup(t) * t + base);
    let inf_ok = inf_v <= inf_upper * (1.0 + BOUND_RELATIVE);
    let sup_ok = sup_v >= sup_lower * (1.0 - BOUND_RELATIVE);
    let near = |a: f64, b: f64| (a - b).abs() <= SATURATION_RELATIVE * b.abs();
    Ok(VBoundsCheck {
        inf_v,
        sup_v,
        inf_upper,
        sup_lower,
        saturated: near(inf_v, inf_upper) || near(sup_v, sup_lower),
        pass: inf_ok && sup_ok,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointwiseCheck {
    /// `sup_lower / C`.
    pub lower: f64,
    /// `C inf_upper`.
    pub upper: f64,
    pub pass: bool,
}

/// Two-sided pointwise bounds `c1(t) <= v <= c2(t)` from combining the
/// Harnack constant with the inf/sup bounds.
pub fn check_pointwise_bounds(bounds: &VBoundsCheck, harnack: &HarnackCheck) -> PointwiseCheck {
    let lower = bounds.sup_lower / harnack.constant;
    let upper = harnack.constant * bounds.inf_upper;
    let pass = bounds.inf_v >= lower * (1.0 - BOUND_RELATIVE)
        && bounds.sup_v <= upper * (1.0 + BOUND_RELATIVE);
    PointwiseCheck { lower, upper, pass }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LpDissipation {
    pub p: f64,
    /// `max_t int u^p`.
    pub max_power_integral: f64,
    /// `int_0^T int u^(p-1) v |u_x|^2`.
    pub dissipation: f64,
    /// `int_0^T int |(u^((p+1)/2))_x|^2`.
    pub power_gradient: f64,
}

impl LpDissipation {
    pub fn is_finite(&self) -> bool {
        self.max_power_integral.is_finite()
            && self.dissipation.is_finite()
            && self.power_gradient.is_finite()
    }
}

pub fn track_lp_dissipation(trajectory: &Trajectory, p: f64) -> Result<LpDissipation> {
    if !(p > 1.0) {
        return Err(Error::Domain(format!("p must exceed 1, got {p}")));
    }
    let k = trajectory.exponent_index(p).ok_or_else(|| {
        Error::Precondition(format!("exponent {p} was not tracked during the run"))
    })?;
    let mut max_power_integral = 0.0f64;
    for s in &trajectory.snapshots {
        max_power_integral = max_power_integral.max(s.u.power_integral(p)?);
    }
    let last = trajectory.last();
    Ok(LpDissipation {
        p,
        max_power_integral,
        dissipation: last.dissipation[k],
        power_gradient: last.power_gradient[k],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilySpread {
    pub p: f64,
    pub per_eps: Vec<LpDissipation>,
    pub power_spread: f64,
    pub dissipation_spread: f64,
    pub gradient_spread: f64,
    pub pass: bool,
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, 0.0f64), |(lo, hi), x| {
        (lo.min(x), hi.max(x))
    });
    if hi <= f64::MIN_POSITIVE {
        1.0
    } else if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Checks that the Lp and dissipation integrals of all family members share
/// a common bound within [`FAMILY_SPREAD`].
pub fn family_spread(family: &EpsilonFamily, p: f64) -> Result<FamilySpread> {
    let per_eps = family
        .trajectories()
        .iter()
        .map(|t| track_lp_dissipation(t, p))
        .collect::<Result<Vec<_>>>()?;
    let power_spread = spread(per_eps.iter().map(|d| d.max_power_integral));
    let dissipation_spread = spread(per_eps.iter().map(|d| d.dissipation));
    let gradient_spread = spread(per_eps.iter().map(|d| d.power_gradient));
    let pass = per_eps.iter().all(LpDissipation::is_finite)
        && power_spread <= FAMILY_SPREAD
        && dissipation_spread <= FAMILY_SPREAD
        && gradient_spread <= FAMILY_SPREAD;
    Ok(FamilySpread {
        p,
        per_eps,
        power_spread,
        dissipation_spread,
        gradient_spread,
        pass,
    })
}

fn ensure_positive(v: &Field) -> Result<()> {
    match v.values().iter().position(|&x| !(x > 0.0)) {
        Some(i) => Err(Error::Domain(format!(
            "nutrient must be strictly positive, v[{i}] = {}",
            v.values()[i]
        ))),
        None => Ok(()),
    }
}
