//! Explicit conservative finite-volume stepper for
//! `u_t = (u v u_x)_x - (u^2 v v_x)_x + u v` with no-flux ends.
//!
//! Face `j` (between cells `j-1` and `j`) carries
//! `F_j = D_j (u_j - u_{j-1}) / h - u_up W_j` with `D_j` the arithmetic mean of
//! `u v` over the two cells, `W_j = D_j (v_j - v_{j-1}) / h` and `u_up` the
//! upwind value of `u` for the sign of `W_j`. Cell update:
//! `u_i += dt / h (F_{i+1} - F_i) + dt u_i v_i`.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::elliptic::solve_nutrient;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Cells below this value after a step are treated as a positivity failure.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FluxField {
    faces: Vec<f64>,
}

impl FluxField {
    pub fn faces(&self) -> &[f64] {
        &self.faces
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepperParams {
    pub cfl: f64,
    pub dt_max: f64,
    /// Diagnostic threshold on `min u`; never used to modify the solution.
    pub positivity_floor: f64,
}

impl Default for StepperParams {
    fn default() -> Self {
        Self {
            cfl: 0.5,
            dt_max: 1e-2,
            positivity_floor: 0.0,
        }
    }
}

impl StepperParams {
    pub fn new(cfl: f64, dt_max: f64, positivity_floor: f64) -> Result<Self> {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::Precondition(format!(
                "cfl must lie in (0, 1], got {cfl}"
            )));
        }
        Self::unchecked(cfl, dt_max, positivity_floor)
    }

    /// Accepts any positive `cfl`, including values that void the positivity
    /// guarantee. Used to provoke and observe scheme failures.
    pub fn unchecked(cfl: f64, dt_max: f64, positivity_floor: f64) -> Result<Self> {
        if !(cfl > 0.0 && cfl.is_finite()) {
            return Err(Error::Precondition(format!(
                "cfl must be positive, got {cfl}"
            )));
        }
        if !(dt_max > 0.0 && dt_max.is_finite()) {
            return Err(Error::Precondition(format!(
                "dt_max must be positive, got {dt_max}"
            )));
        }
        if !(positivity_floor >= 0.0) {
            return Err(Error::Precondition(format!(
                "positivity_floor must be nonnegative, got {positivity_floor}"
            )));
        }
        Ok(Self {
            cfl,
            dt_max,
            positivity_floor,
        })
    }

    pub fn with_dt_max(self, dt_max: f64) -> Self {
        Self { dt_max, ..self }
    }
}

/// Face diffusion coefficients `D_j` and taxis velocities `W_j`; boundary entries zero.
fn face_coefficients(u: &Field, v: &Field) -> (Vec<f64>, Vec<f64>) {
    let n = u.len();
    let h = u.grid().spacing();
    let (uu, vv) = (u.values(), v.values());
    let mut d = vec![0.0; n + 1];
    let mut w = vec![0.0; n + 1];
    for j in 1..n {
        d[j] = 0.5 * (uu[j - 1] * vv[j - 1] + uu[j] * vv[j]);
        w[j] = d[j] * (vv[j] - vv[j - 1]) / h;
    }
    (d, w)
}

pub fn compute_flux(u: &Field, v: &Field) -> Result<FluxField> {
    u.ensure_same_grid(v)?;
    let n = u.len();
    let h = u.grid().spacing();
    let uu = u.values();
    let (d, w) = face_coefficients(u, v);
    let mut faces = vec![0.0; n + 1];
    for j in 1..n {
        let upwind = if w[j] > 0.0 { uu[j - 1] } else { uu[j] };
        faces[j] = d[j] * (uu[j] - uu[j - 1]) / h - upwind * w[j];
    }
    Ok(FluxField { faces })
}

/// Largest step keeping every cell update a nonnegative combination, times `cfl`.
///
/// Cell `i` loses `dt/h^2 (D_i + D_{i+1}) + dt/h (W_{i+1}^+ + W_i^-)` of its own
/// value; the bound makes that fraction at most `cfl`. Capped by `dt_max`.
pub fn stable_dt(u: &Field, v: &Field, params: &StepperParams) -> f64 {
    let n = u.len();
    let h = u.grid().spacing();
    let (d, w) = face_coefficients(u, v);
    let rate = (0..n).fold(0.0f64, |m, i| {
        let diffusive = (d[i] + d[i + 1]) / (h * h);
        let outflow = (w[i + 1].max(0.0) + (-w[i]).max(0.0)) / h;
        m.max(diffusive + outflow)
    });
    let bound = if rate > 0.0 {
        (1.0 / rate).min(params.dt_max)
    } else {
        params.dt_max
    };
    params.cfl * bound
}

/// One explicit Euler step. Fails rather than clipping if a cell turns negative.
pub fn step(u: &Field, v: &Field, dt: f64) -> Result<Field> {
    let flux = compute_flux(u, v)?;
    let h = u.grid().spacing();
    let faces = flux.faces();
    let next: Vec<f64> = (0..u.len())
        .map(|i| {
            let ui = u.values()[i];
            ui + dt / h * (faces[i + 1] - faces[i]) + dt * ui * v.values()[i]
        })
        .collect();
    if let Some((cell, &value)) = next
        .iter()
        .enumerate()
        .find(|(_, &x)| x < -NEGATIVITY_TOLERANCE || x.is_nan())
    {
        return Err(Error::PositivityViolation { cell, value });
    }
    Field::new(*u.grid(), next)
}

/// Time-dependent nutrient supply sampled on a grid.
pub trait Forcing: Sync {
    fn field(&self, grid: &Grid, t: f64) -> Result<Field>;
}

impl<F> Forcing for F
where
    F: Fn(&Grid, f64) -> Result<Field> + Sync,
{
    fn field(&self, grid: &Grid, t: f64) -> Result<Field> {
        self(grid, t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdvanceOptions {
    /// Number of uniform snapshot intervals; snapshots land exactly on `k t_end / count`.
    pub snapshot_count: usize,
    /// Exponents `p > 1` whose dissipation integrals are accumulated every step.
    pub lp_exponents: Vec<f64>,
}

impl Default for AdvanceOptions {
    fn default() -> Self {
        Self {
            snapshot_count: 16,
            lp_exponents: vec![2.0],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub u: Field,
    pub v: Field,
    pub f: Field,
    /// Steps taken before this snapshot.
    pub step: usize,
    /// `sum dt * int(u v)` up to `t`.
    pub reaction_total: f64,
    /// `int_0^t int u^(p-1) v |u_x|^2`, one entry per tracked exponent.
    pub dissipation: Vec<f64>,
    /// `int_0^t int |(u^((p+1)/2))_x|^2`, one entry per tracked exponent.
    pub power_gradient: Vec<f64>,
}

/// Per-step bookkeeping of the exactly conserved discrete identities.
#[derive(Debug, Clone, PartialEq)]
pub struct StepAudit {
    pub steps: usize,
    pub min_dt: f64,
    pub max_dt: f64,
    /// `max |int(u v) - int(f)| / int(f)` over all elliptic solves.
    pub max_consumption_gap: f64,
    /// `max |Δ int(u) - dt int(u v)| / int(u_next)` over all steps.
    pub max_mass_balance_gap: f64,
    pub min_u: f64,
    pub min_v: f64,
    pub max_abs_vx: f64,
    /// Steps whose `min u` fell below the configured positivity floor.
    pub floor_hits: usize,
}

impl StepAudit {
    fn new() -> Self {
        Self {
            steps: 0,
            min_dt: f64::INFINITY,
            max_dt: 0.0,
            max_consumption_gap: 0.0,
            max_mass_balance_gap: 0.0,
            min_u: f64::INFINITY,
            min_v: f64::INFINITY,
            max_abs_vx: 0.0,
            floor_hits: 0,
        }
    }

    fn observe_state(&mut self, u: &Field, v: &Field, f: &Field, floor: f64) -> Result<f64> {
        let consumption = u.integrate_product(v)?;
        let supply = f.integrate();
        let gap = (consumption - supply).abs();
        let rel = if supply > 0.0 { gap / supply } else { gap };
        self.max_consumption_gap = self.max_consumption_gap.max(rel);
        let (_, umin) = u.sup_inf();
        let (_, vmin) = v.sup_inf();
        self.min_u = self.min_u.min(umin);
        self.min_v = self.min_v.min(vmin);
        if umin < floor {
            self.floor_hits += 1;
        }
        let vx = v.face_gradient().iter().fold(0.0f64, |m, g| m.max(g.abs()));
        self.max_abs_vx = self.max_abs_vx.max(vx);
        Ok(consumption)
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub audit: StepAudit,
    pub lp_exponents: Vec<f64>,
    pub params: StepperParams,
    /// Wall-clock time spent in [`advance`].
    pub wall_time: Duration,
}

impl Trajectory {
    pub fn grid(&self) -> &Grid {
        self.snapshots[0].u.grid()
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn t_end(&self) -> f64 {
        self.snapshots.last().map_or(0.0, |s| s.t)
    }

    pub fn initial(&self) -> &Snapshot {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots
            .last()
            .expect("trajectory has at least one snapshot")
    }

    /// Index of `p` among the tracked exponents.
    pub fn exponent_index(&self, p: f64) -> Option<usize> {
        self.lp_exponents
            .iter()
            .position(|&q| (q - p).abs() < 1e-12)
    }
}

fn pow_real(x: f64, p: f64) -> f64 {
    if p.fract() == 0.0 {
        x.powi(p as i32)
    } else if (2.0 * p).fract() == 0.0 {
        x.sqrt().powi((2.0 * p) as i32)
    } else {
        x.powf(p)
    }
}

struct Accumulators {
    dissipation: Vec<f64>,
    power_gradient: Vec<f64>,
}

impl Accumulators {
    fn add(&mut self, exponents: &[f64], u: &Field, v: &Field, dt: f64) {
        let h = u.grid().spacing();
        let ux = u.center_gradient();
        let n = u.len();
        for (k, &p) in exponents.iter().enumerate() {
            let weighted: f64 = (0..n)
                .map(|i| pow_real(u.values()[i], p - 1.0) * v.values()[i] * ux[i] * ux[i])
                .sum();
            self.dissipation[k] += dt * h * weighted;

            let z: Vec<f64> = u
                .values()
                .iter()
                .map(|&x| pow_real(x, 0.5 * (p + 1.0)))
                .collect();
            let grad: f64 = z.windows(2).map(|w| ((w[1] - w[0]) / h).powi(2)).sum();
            self.power_gradient[k] += dt * h * grad;
        }
    }
}

/// Runs the coupled system from `u0` to `t_end`: elliptic solve, stable step,
/// conservative update, repeated; snapshots land exactly on the uniform schedule.
pub fn advance(
    u0: &Field,
    forcing: &dyn Forcing,
    t_end: f64,
    params: &StepperParams,
    options: &AdvanceOptions,
) -> Result<Trajectory> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Precondition(format!(
            "t_end must be positive, got {t_end}"
        )));
    }
    if options.snapshot_count == 0 {
        return Err(Error::Precondition(
            "snapshot_count must be at least 1".into(),
        ));
    }
    if let Some(&p) = options.lp_exponents.iter().find(|&&p| !(p > 1.0)) {
        return Err(Error::Precondition(format!(
            "tracked exponents must exceed 1, got {p}"
        )));
    }
    if let Some(i) = u0.values().iter().position(|&x| x < 0.0) {
        return Err(Error::Domain(format!("initial datum negative at cell {i}")));
    }

    let started = Instant::now();
    let grid = *u0.grid();
    let exponents = options.lp_exponents.clone();
    let mut acc = Accumulators {
        dissipation: vec![0.0; exponents.len()],
        power_gradient: vec![0.0; exponents.len()],
    };
    let mut audit = StepAudit::new();
    let mut snapshots = Vec::with_capacity(options.snapshot_count + 1);
    let snap_time = |k: usize| t_end * k as f64 / options.snapshot_count as f64;

    let mut u = u0.clone();
    let mut t = 0.0;
    let mut next_snap = 0usize;
    let mut reaction_total = 0.0;
    let annotate = |t: f64| {
        move |e: Error| Error::AtTime {
            t,
            source: Box::new(e),
        }
    };

    loop {
        let f = forcing.field(&grid, t).map_err(annotate(t))?;
        let v = solve_nutrient(&u, &f).map_err(annotate(t))?;
        let consumption = audit
            .observe_state(&u, &v, &f, params.positivity_floor)
            .map_err(annotate(t))?;

        if t >= snap_time(next_snap) {
            snapshots.push(Snapshot {
                t,
                u: u.clone(),
                v: v.clone(),
                f: f.clone(),
                step: audit.steps,
                reaction_total,
                dissipation: acc.dissipation.clone(),
                power_gradient: acc.power_gradient.clone(),
            });
            next_snap += 1;
            if next_snap > options.snapshot_count {
                break;
            }
        }

        let target = snap_time(next_snap);
        let mut dt = stable_dt(&u, &v, params);
        let lands = t + dt >= target - 1e-12 * t_end;
        if lands {
            dt = target - t;
        }
        let next = step(&u, &v, dt).map_err(annotate(t))?;

        let mass_before = u.integrate();
        let mass_after = next.integrate();
        let added = dt * consumption;
        let scale = mass_after.abs().max(f64::MIN_POSITIVE);
        audit.max_mass_balance_gap = audit
            .max_mass_balance_gap
            .max(((mass_after - mass_before) - added).abs() / scale);
        audit.steps += 1;
        audit.min_dt = audit.min_dt.min(dt);
        audit.max_dt = audit.max_dt.max(dt);
        acc.add(&exponents, &u, &v, dt);
        reaction_total += added;

        u = next;
        t = if lands { target } else { t + dt };
    }

    Ok(Trajectory {
        snapshots,
        audit,
        lp_exponents: exponents,
        params: *params,
        wall_time: started.elapsed(),
    })
}
