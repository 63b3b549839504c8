//! Acceptance criteria 1-8, run as a plain binary so every criterion prints
//! its own pass/fail line.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nutaxis::family::{cauchy_convergence, run_family, run_family_with, EpsilonFamily};
use nutaxis::monitor::{
    audit_family, check_consumption, check_harnack, check_loggrad_identity, check_mass_bounds,
    check_pointwise_bounds, check_v_bounds, evaluate_snapshot, family_spread, fit_holder_exponent,
    AuditOptions, BoundsContext, Check,
};
use nutaxis::scenario::{parse_scenario, Scenario};
use nutaxis::stepper::{StepperParams, Trajectory};
use nutaxis::study::{default_probe, fitted_rate, manufactured_elliptic_error, refinement_study};
use nutaxis::tolerances::EXACT_IDENTITY;
use nutaxis::Field;

const HOMOGENEOUS: &str = include_str!("../../../scenarios/homogeneous.toml");
const PLATEAU: &str = include_str!("../../../scenarios/plateau.toml");

/// Dyadic lags `1/64 .. 1/8`.
const LAGS: [f64; 4] = [1.0 / 64.0, 1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0];

struct Runs {
    homogeneous: Scenario,
    homogeneous_family: EpsilonFamily,
    homogeneous_time: Duration,
    plateau: Scenario,
    plateau_family: EpsilonFamily,
    plateau_time: Duration,
}

impl Runs {
    fn new() -> Self {
        let params = StepperParams::default();
        let homogeneous = parse_scenario(HOMOGENEOUS).unwrap();
        let started = Instant::now();
        let homogeneous_family = run_family(&homogeneous, &params).unwrap();
        let homogeneous_time = started.elapsed();
        let plateau = parse_scenario(PLATEAU).unwrap();
        let started = Instant::now();
        let plateau_family = run_family(&plateau, &params).unwrap();
        let plateau_time = started.elapsed();
        Self {
            homogeneous,
            homogeneous_family,
            homogeneous_time,
            plateau,
            plateau_family,
            plateau_time,
        }
    }

    fn homogeneous_run(&self) -> &Trajectory {
        &self.homogeneous_family.trajectories()[0]
    }
}

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn homogeneous_exactness(runs: &Runs) -> Outcome {
    let eps = runs.homogeneous_family.eps()[0];
    let last = runs.homogeneous_run().last();
    let u_exact = 1.0 + eps + last.t;
    let du = last
        .u
        .values()
        .iter()
        .fold(0.0f64, |m, u| m.max((u - u_exact).abs()));
    let dv = last
        .v
        .values()
        .iter()
        .fold(0.0f64, |m, v| m.max((v - 1.0 / u_exact).abs()));
    let secs = runs.homogeneous_time.as_secs_f64();
    ensure(
        runs.homogeneous.n == 200
            && (last.t - 1.0).abs() < 1e-12
            && du <= 1e-4
            && dv <= 1e-4
            && secs < 5.0,
        format!("|u - {u_exact}| = {du:.2e}, |v - 1/u| = {dv:.2e}, runtime {secs:.2} s"),
    )
}

fn elliptic_manufactured(_: &Runs) -> Outcome {
    let ns = [50, 100, 200];
    let errs: Vec<f64> = ns
        .iter()
        .map(|&n| manufactured_elliptic_error(1.0, n).unwrap())
        .collect();
    let rate = fitted_rate(&ns, &errs).unwrap();
    let shown: Vec<String> = errs.iter().map(|e| format!("{e:.3e}")).collect();
    ensure(
        (rate - 2.0).abs() <= 0.3,
        format!("errors {shown:?}, rate {rate:.3}"),
    )
}

fn exact_identities(runs: &Runs) -> Outcome {
    let families = [&runs.homogeneous_family, &runs.plateau_family];
    let mut consumption = 0.0f64;
    let mut mass = 0.0f64;
    let mut steps = 0;
    for family in families {
        for t in family.trajectories() {
            consumption = consumption.max(t.audit.max_consumption_gap);
            mass = mass.max(t.audit.max_mass_balance_gap);
            steps += t.audit.steps;
        }
    }
    ensure(
        consumption <= 1e-10 && mass <= 1e-10,
        format!("{steps} steps: consumption gap {consumption:.2e}, mass-balance gap {mass:.2e}"),
    )
}

fn estimate_suite(runs: &Runs) -> Outcome {
    let s = &runs.plateau;
    let started = Instant::now();
    let audit = audit_family(
        &runs.plateau_family,
        s,
        &AuditOptions::for_schedule(s.t_end, s.snapshot_count),
    )
    .unwrap();
    let secs = (runs.plateau_time + started.elapsed()).as_secs_f64();
    let rows = audit.ledger();
    let failures: Vec<String> = audit
        .failures()
        .iter()
        .map(|r| format!("{} eps={:?} t={:?}", r.check, r.eps, r.t))
        .collect();
    let spread = audit
        .spreads
        .iter()
        .map(|s| {
            s.power_spread
                .max(s.dissipation_spread)
                .max(s.gradient_spread)
        })
        .fold(0.0f64, f64::max);
    let positive = runs
        .plateau_family
        .trajectories()
        .iter()
        .all(|t| t.audit.min_u > 0.0 && t.audit.min_v > 0.0);
    ensure(
        audit.pass
            && failures.is_empty()
            && runs.plateau_family.len() == 4
            && s.n == 200
            && positive
            && secs < 60.0,
        format!(
            "{} checks, failures {:?}, max family spread {spread:.3}, runtime {secs:.1} s",
            rows.len(),
            failures
        ),
    )
}

fn negative_controls(runs: &Runs) -> Outcome {
    let family = &runs.plateau_family;
    let (eps, traj) = (family.eps()[0], &family.trajectories()[0]);
    let ctx = BoundsContext::from_scenario(&runs.plateau, traj.grid(), eps).unwrap();
    let snap = &traj.snapshots[traj.snapshots.len() / 2];
    let (u, v, f, t) = (&snap.u, &snap.v, &snap.f, snap.t);
    let mut failed_as_expected = Vec::new();
    let mut missed = Vec::new();
    let mut expect_fail = |name: &str, pass: bool| {
        if pass {
            missed.push(name.to_string());
        } else {
            failed_as_expected.push(name.to_string());
        }
    };

    // clean snapshot first: every control below must flip a passing check
    let clean = evaluate_snapshot(snap, &ctx, &[2.0]).unwrap();
    if !clean.pass() {
        return Err(format!("uncorrupted snapshot fails: {:?}", clean.checks));
    }

    // drained below the initial mass int u0
    let drained = u.scaled(0.8 * ctx.u0_mass / u.integrate()).unwrap();
    expect_fail(
        "mass (drained u)",
        check_mass_bounds(&drained, t, &ctx).pass,
    );

    let mut bumped = v.values().to_vec();
    bumped[7] += 0.1;
    let bumped = Field::new(*v.grid(), bumped).unwrap();
    expect_fail(
        "consumption (perturbed solve)",
        check_consumption(u, &bumped, f).unwrap().pass,
    );
    expect_fail(
        "log-gradient (perturbed solve)",
        check_loggrad_identity(u, &bumped, f).unwrap().pass,
    );

    let scaled = v.scaled(10.0).unwrap();
    let bounds = check_v_bounds(&scaled, f, &ctx, t).unwrap();
    expect_fail("inf/sup bounds (scaled v)", bounds.pass);
    let harnack = check_harnack(u, &scaled, f).unwrap();
    expect_fail(
        "pointwise bounds (scaled v)",
        check_pointwise_bounds(&bounds, &harnack).pass,
    );

    let mut spike = v.values().to_vec();
    spike[3] *= 1e6;
    let spike = Field::new(*v.grid(), spike).unwrap();
    expect_fail(
        "harnack (spiked v)",
        check_harnack(u, &spike, f).unwrap().pass,
    );

    let mut negative = snap.clone();
    let mut vals = negative.u.values().to_vec();
    vals[0] = -1e-3;
    negative.u = Field::new(*u.grid(), vals).unwrap();
    let record = evaluate_snapshot(&negative, &ctx, &[2.0]).unwrap();
    let positivity = record
        .checks
        .iter()
        .find(|c| c.check == Check::Positivity)
        .unwrap();
    expect_fail("positivity (negative u cell)", positivity.pass);

    // period-3 jumps in v make every dyadic lag see the same difference
    let mut jumpy = traj.clone();
    for (k, s) in jumpy.snapshots.iter_mut().enumerate() {
        if k % 3 == 0 {
            s.v = s.v.scaled(1.5).unwrap();
        }
    }
    let probe = fit_holder_exponent(&jumpy, (0.0, 1.0), &LAGS).unwrap();
    expect_fail("holder (jumping v)", probe.pass);

    let mut inflated = family.trajectories()[3].clone();
    for s in &mut inflated.snapshots {
        s.u = s.u.scaled(3.0).unwrap();
    }
    let mut members = family.trajectories().to_vec();
    members[3] = inflated;
    let corrupted = EpsilonFamily::from_parts(family.eps().to_vec(), members).unwrap();
    expect_fail(
        "family spread (inflated member)",
        family_spread(&corrupted, 2.0).unwrap().pass,
    );

    ensure(
        missed.is_empty(),
        format!("failed as expected: {failed_as_expected:?}; missed: {missed:?}"),
    )
}

fn holder_exponent(runs: &Runs) -> Outcome {
    let mut alphas = Vec::new();
    let mut ok = true;
    for family in [&runs.homogeneous_family, &runs.plateau_family] {
        for t in family.trajectories() {
            let probe = fit_holder_exponent(t, (0.0, 1.0), &LAGS).unwrap();
            ok &= probe.pass && probe.alpha.is_some_and(|a| a >= 0.2);
            alphas.push(probe.alpha);
        }
    }
    ensure(
        ok,
        format!("alpha (homogeneous, then plateau eps family): {alphas:.3?}"),
    )
}

fn cauchy_in_eps(runs: &Runs) -> Outcome {
    let plateau = cauchy_convergence(&runs.plateau_family, 1.0).unwrap();
    let nonincreasing = plateau
        .u_increments
        .iter()
        .all(|d| d.windows(2).all(|w| w[1] <= w[0]));

    let eps = [0.4, 0.2, 0.1, 0.05];
    let family = run_family_with(&runs.homogeneous, &StepperParams::default(), &eps).unwrap();
    let report = cauchy_convergence(&family, 1.0).unwrap();
    let mut worst = 0.0f64;
    for row in &report.u_increments {
        for (j, d) in row.iter().enumerate() {
            let exact = (eps[j] - eps[j + 1]) * runs.homogeneous.length;
            worst = worst.max((d - exact).abs());
        }
    }
    ensure(
        // round-off accumulated over ~10^5 steps, not a modeling gap
        nonincreasing && plateau.eps == eps && worst <= EXACT_IDENTITY,
        format!(
            "plateau increments nonincreasing at all {} probe times: {nonincreasing}; \
             homogeneous deviation from closed form {worst:.2e}",
            plateau.probe_times.len()
        ),
    )
}

fn weak_refinement(runs: &Runs) -> Outcome {
    let mut base = runs.plateau.clone();
    base.n = 50;
    base.snapshot_count = 16;
    let probe = default_probe(&base);
    let study = refinement_study(&base, &StepperParams::default(), 3, &probe).unwrap();
    let ratios = |pick: fn(&nutaxis::study::LevelRow) -> f64| -> Vec<f64> {
        study
            .levels
            .windows(2)
            .map(|w| pick(&w[0]) / pick(&w[1]))
            .collect()
    };
    let ru = ratios(|r| r.res_u);
    let rv = ratios(|r| r.res_v);
    let ns: Vec<usize> = study.levels.iter().map(|r| r.n).collect();
    ensure(
        ru.iter().chain(&rv).all(|&r| r >= 1.5),
        format!("n = {ns:?}: res_u reductions {ru:.2?}, res_v reductions {rv:.2?}"),
    )
}

fn main() -> ExitCode {
    let started = Instant::now();
    let runs = Runs::new();
    let criteria: [(&str, fn(&Runs) -> Outcome); 8] = [
        ("homogeneous reduction exactness", homogeneous_exactness),
        ("elliptic manufactured solution rate", elliptic_manufactured),
        ("exact discrete identities on every step", exact_identities),
        ("estimate suite on the plateau family", estimate_suite),
        ("negative controls", negative_controls),
        ("Hölder exponent in time", holder_exponent),
        ("Cauchy convergence in eps", cauchy_in_eps),
        ("weak residual refinement", weak_refinement),
    ];
    let mut failed = 0;
    for (k, (name, criterion)) in criteria.iter().enumerate() {
        match criterion(&runs) {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {detail}", k + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1} s",
        criteria.len() - failed,
        criteria.len(),
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
