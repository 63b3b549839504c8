//! The eps-regularized family: one trajectory per `eps` from `u0 + eps`,
//! Cauchy-in-eps diagnostics and selection of the limit candidate.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::scenario::Scenario;
use crate::stepper::{advance, AdvanceOptions, Snapshot, StepperParams, Trajectory};
use crate::tolerances::CAUCHY_SLACK;

const TIME_MATCH: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct EpsilonFamily {
    eps: Vec<f64>,
    trajectories: Vec<Trajectory>,
}

impl EpsilonFamily {
    /// Assembles a family from finished runs. `eps` must be nonincreasing in
    /// `(0, 1)`; repeated entries are allowed and give zero increments.
    pub fn from_parts(eps: Vec<f64>, trajectories: Vec<Trajectory>) -> Result<Self> {
        if eps.is_empty() || eps.len() != trajectories.len() {
            return Err(Error::Precondition(format!(
                "need one trajectory per eps, got {} eps and {} trajectories",
                eps.len(),
                trajectories.len()
            )));
        }
        if let Some(e) = eps.iter().find(|&&e| !(e > 0.0 && e < 1.0)) {
            return Err(Error::Precondition(format!(
                "eps must lie in (0, 1), got {e}"
            )));
        }
        if eps.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Precondition(
                "eps values must be nonincreasing".into(),
            ));
        }
        let grid = *trajectories[0].grid();
        if trajectories.iter().any(|t| *t.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { eps, trajectories })
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    pub fn finest(&self) -> (f64, &Trajectory) {
        let last = self.len() - 1;
        (self.eps[last], &self.trajectories[last])
    }
}

/// Runs every `eps` of the scenario's schedule in parallel on a shared grid
/// and snapshot schedule.
pub fn run_family(scenario: &Scenario, params: &StepperParams) -> Result<EpsilonFamily> {
    let eps = scenario.eps_values();
    run_family_with(scenario, params, &eps)
}

/// Same as [`run_family`] with an explicit `eps` list (strictly decreasing).
pub fn run_family_with(
    scenario: &Scenario,
    params: &StepperParams,
    eps: &[f64],
) -> Result<EpsilonFamily> {
    scenario.validate()?;
    if eps.is_empty() {
        return Err(Error::Precondition("empty eps list".into()));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition(
            "eps values must be strictly decreasing".into(),
        ));
    }
    let grid = scenario.grid()?;
    let options = AdvanceOptions {
        snapshot_count: scenario.snapshot_count,
        lp_exponents: scenario.lp_exponents.clone(),
    };
    let forcing = |g: &crate::grid::Grid, t: f64| scenario.supply(g, t);
    let results: Vec<Result<Trajectory>> = eps
        .par_iter()
        .map(|&e| {
            let u0 = scenario.initial_field(&grid, e)?;
            advance(&u0, &forcing, scenario.t_end, params, &options)
        })
        .collect();
    let mut trajectories = Vec::with_capacity(eps.len());
    for (&e, r) in eps.iter().zip(results) {
        trajectories.push(r.map_err(|source| Error::Family {
            eps: e,
            source: Box::new(source),
        })?);
    }
    EpsilonFamily::from_parts(eps.to_vec(), trajectories)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub q: f64,
    pub eps: Vec<f64>,
    pub probe_times: Vec<f64>,
    /// `u_increments[k][j] = ||u_{eps_j} - u_{eps_{j+1}}||_q` at probe time `k`.
    pub u_increments: Vec<Vec<f64>>,
    /// Max-norm distance of consecutive nutrient fields, same layout.
    pub v_increments: Vec<Vec<f64>>,
    /// Increments nonincreasing within the slack factor at every probe time.
    pub converging: bool,
    /// Increments nonincreasing without slack at every probe time.
    pub strictly_monotone: bool,
    /// Last increment per probe time, attached to the limit candidate as its error estimate.
    pub error_estimate: Vec<f64>,
}

fn max_abs_diff(a: &Field, b: &Field) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn cauchy_convergence(family: &EpsilonFamily, q: f64) -> Result<ConvergenceReport> {
    if family.len() < 2 {
        return Err(Error::Precondition(
            "convergence in eps needs at least two trajectories".into(),
        ));
    }
    if !(q >= 1.0) {
        return Err(Error::Domain(format!("q must be >= 1, got {q}")));
    }
    let times = family.trajectories[0].times();
    for t in &family.trajectories[1..] {
        let other = t.times();
        if other.len() != times.len()
            || other
                .iter()
                .zip(&times)
                .any(|(a, b)| (a - b).abs() > TIME_MATCH * b.abs().max(1.0))
        {
            return Err(Error::Precondition(
                "trajectories have mismatched snapshot schedules".into(),
            ));
        }
    }

    let mut u_increments = Vec::with_capacity(times.len());
    let mut v_increments = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        let mut du = Vec::with_capacity(family.len() - 1);
        let mut dv = Vec::with_capacity(family.len() - 1);
        for pair in family.trajectories.windows(2) {
            let (a, b) = (&pair[0].snapshots[k], &pair[1].snapshots[k]);
            du.push(a.u.zip_map(&b.u, |x, y| x - y)?.lp_norm(q)?);
            dv.push(max_abs_diff(&a.v, &b.v));
        }
        u_increments.push(du);
        v_increments.push(dv);
    }
    let converging = u_increments
        .iter()
        .all(|d| d.windows(2).all(|w| w[1] <= CAUCHY_SLACK * w[0]));
    let strictly_monotone = u_increments
        .iter()
        .all(|d| d.windows(2).all(|w| w[1] <= w[0]));
    let error_estimate = u_increments.iter().map(|d| *d.last().unwrap()).collect();
    Ok(ConvergenceReport {
        q,
        eps: family.eps.clone(),
        probe_times: times,
        u_increments,
        v_increments,
        converging,
        strictly_monotone,
        error_estimate,
    })
}

/// Finest-eps run offered as the limit pair, with the last Cauchy increment
/// as its error estimate.
#[derive(Debug, Clone)]
pub struct LimitCandidate {
    pub eps: f64,
    pub snapshots: Vec<Snapshot>,
    pub error_estimate: Vec<f64>,
    pub report: ConvergenceReport,
}

impl LimitCandidate {
    /// `(u, v)` at every probe time.
    pub fn pairs(&self) -> impl Iterator<Item = (f64, &Field, &Field)> {
        self.snapshots.iter().map(|s| (s.t, &s.u, &s.v))
    }
}

pub fn extract_limit(family: &EpsilonFamily) -> Result<LimitCandidate> {
    extract_limit_with(family, 1.0)
}

pub fn extract_limit_with(family: &EpsilonFamily, q: f64) -> Result<LimitCandidate> {
    let report = cauchy_convergence(family, q)?;
    if !report.converging {
        return Err(Error::NotConverging(Box::new(report)));
    }
    let (eps, finest) = family.finest();
    Ok(LimitCandidate {
        eps,
        snapshots: finest.snapshots.clone(),
        error_estimate: report.error_estimate.clone(),
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    fn homogeneous(eps0: f64, count: usize) -> Scenario {
        parse_scenario(&format!(
            r#"
L = 1.0
n = 20
t_end = 0.5
snapshot_count = 4
lp_exponents = [2.0]
u0_spec = {{ kind = "constant", a = 1.0 }}
f_spec = {{ g = {{ kind = "constant", value = 1.0 }}, s = {{ kind = "constant" }} }}
eps_schedule = {{ eps0 = {eps0}, count = {count}, ratio = 0.5 }}
"#
        ))
        .unwrap()
    }

    #[test]
    fn initial_data_are_shifted_by_eps() {
        let family = run_family(&homogeneous(0.5, 2), &StepperParams::default()).unwrap();
        let u0 = &family.trajectories()[0].initial().u;
        let u1 = &family.trajectories()[1].initial().u;
        assert!(u0.values().iter().all(|&x| x == 1.5));
        assert!(u1.values().iter().all(|&x| x == 1.25));
    }

    #[test]
    fn homogeneous_increments_are_closed_form() {
        let family = run_family(&homogeneous(0.4, 4), &StepperParams::default()).unwrap();
        for q in [1.0, 2.0] {
            let report = cauchy_convergence(&family, q).unwrap();
            for row in &report.u_increments {
                for (j, d) in row.iter().enumerate() {
                    let exact = family.eps()[j] - family.eps()[j + 1];
                    assert!((d - exact).abs() < 1e-10, "q={q} {d} vs {exact}");
                }
            }
            assert!(report.converging);
        }
        let limit = extract_limit(&family).unwrap();
        assert_eq!(limit.eps, 0.05);
        for (t, u, _) in limit.pairs() {
            let closed = 1.0 + t;
            let err = u
                .values()
                .iter()
                .fold(0.0f64, |m, x| m.max((x - closed).abs()));
            assert!(err <= limit.error_estimate[0] + 1e-9);
        }
    }

    #[test]
    fn repeated_eps_gives_zero_increments() {
        let s = homogeneous(0.3, 1);
        let one = run_family(&s, &StepperParams::default()).unwrap();
        let t = one.trajectories()[0].clone();
        let family =
            EpsilonFamily::from_parts(vec![0.3, 0.3, 0.3], vec![t.clone(), t.clone(), t]).unwrap();
        let report = cauchy_convergence(&family, 2.0).unwrap();
        assert!(report.u_increments.iter().flatten().all(|&d| d == 0.0));
        assert!(report.converging);
    }

    #[test]
    fn single_eps_family_refused() {
        let family = run_family(&homogeneous(0.3, 1), &StepperParams::default()).unwrap();
        assert!(matches!(
            extract_limit(&family),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn mismatched_schedules_rejected() {
        let a = run_family(&homogeneous(0.4, 1), &StepperParams::default()).unwrap();
        let mut s = homogeneous(0.2, 1);
        s.snapshot_count = 5;
        let b = run_family(&s, &StepperParams::default()).unwrap();
        let family = EpsilonFamily::from_parts(
            vec![0.4, 0.2],
            vec![a.trajectories()[0].clone(), b.trajectories()[0].clone()],
        )
        .unwrap();
        assert!(cauchy_convergence(&family, 1.0).is_err());
    }

    #[test]
    fn diverging_family_refused_with_report() {
        let s = homogeneous(0.4, 1);
        let params = StepperParams::default();
        let run = |e: f64| run_family_with(&s, &params, &[e]).unwrap().trajectories()[0].clone();
        // increments 0.01 then 0.3: not nonincreasing
        let family =
            EpsilonFamily::from_parts(vec![0.4, 0.39, 0.09], vec![run(0.4), run(0.39), run(0.09)])
                .unwrap();
        match extract_limit(&family) {
            Err(Error::NotConverging(report)) => assert!(!report.converging),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn failure_names_the_eps() {
        let mut s = parse_scenario(
            r#"
L = 1.0
n = 40
t_end = 0.5
snapshot_count = 4
lp_exponents = []
u0_spec = { kind = "plateau", a = 1.0, x_left = 0.3, x_right = 0.7 }
f_spec = { g = { kind = "constant", value = 1.0 }, s = { kind = "constant" } }
eps_schedule = { eps0 = 0.1, count = 2, ratio = 0.5 }
"#,
        )
        .unwrap();
        s.n = 40;
        let params = StepperParams::unchecked(5.0, 1e-2, 0.0).unwrap();
        match run_family(&s, &params) {
            Err(Error::Family { eps, source }) => {
                assert_eq!(eps, 0.1);
                assert!(source.failing_time().is_some());
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
