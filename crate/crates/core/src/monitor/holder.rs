use serde::Serialize;

use crate::error::{Error, Result};
use crate::stepper::Trajectory;
use crate::tolerances::{HOLDER_MIN_ALPHA, HOLDER_ZERO};

/// Forward-difference probe `δ_h v(x, t) = v(x, t + h) - v(x, t)` over a
/// time window, with a log-log fit of its sup against the lag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderProbe {
    pub window: (f64, f64),
    /// Lags, decreasing.
    pub lags: Vec<f64>,
    /// `max_{x, t} |δ_h v|` per lag.
    pub sup_diffs: Vec<f64>,
    /// Fitted exponent; `None` when every difference vanishes.
    pub alpha: Option<f64>,
    /// RMS residual of the log-log fit.
    pub fit_residual: f64,
    pub pass: bool,
}

pub fn fit_holder_exponent(
    trajectory: &Trajectory,
    window: (f64, f64),
    lags: &[f64],
) -> Result<HolderProbe> {
    if lags.len() < 3 {
        return Err(Error::Precondition(format!(
            "Hölder fit needs at least 3 lags, got {}",
            lags.len()
        )));
    }
    let (t0, t1) = window;
    let span = trajectory.t_end();
    let slack = 1e-9 * span.max(1.0);
    if !(t0 >= -slack && t1 <= span + slack && t0 < t1) {
        return Err(Error::Precondition(format!(
            "window ({t0}, {t1}) not inside trajectory span [0, {span}]"
        )));
    }
    let times = trajectory.times();
    if times.len() < 2 {
        return Err(Error::Precondition(
            "trajectory has a single snapshot".into(),
        ));
    }
    let spacing = times[1] - times[0];

    let mut lags = lags.to_vec();
    lags.sort_by(|a, b| b.total_cmp(a));
    let mut sup_diffs = Vec::with_capacity(lags.len());
    for &h in &lags {
        if !(h > 0.0 && h < 1.0) || h >= t1 - t0 {
            return Err(Error::Precondition(format!(
                "lag {h} must lie in (0, 1) and below the window length {}",
                t1 - t0
            )));
        }
        let offset = (h / spacing).round() as usize;
        if offset == 0 || (offset as f64 * spacing - h).abs() > 1e-9 * h.max(spacing) {
            return Err(Error::Precondition(format!(
                "lag {h} is not a multiple of the snapshot spacing {spacing}"
            )));
        }
        let mut sup = 0.0f64;
        for k in 0..times.len().saturating_sub(offset) {
            let (ta, tb) = (times[k], times[k + offset]);
            if ta < t0 - slack || tb > t1 + slack {
                continue;
            }
            let a = &trajectory.snapshots[k].v;
            let b = &trajectory.snapshots[k + offset].v;
            for (x, y) in a.values().iter().zip(b.values()) {
                sup = sup.max((y - x).abs());
            }
        }
        sup_diffs.push(sup);
    }

    let scale = trajectory
        .snapshots
        .iter()
        .map(|s| s.v.max_abs())
        .fold(1.0f64, f64::max);
    let points: Vec<(f64, f64)> = lags
        .iter()
        .zip(&sup_diffs)
        .filter(|(_, &d)| d > HOLDER_ZERO * scale)
        .map(|(&h, &d)| (h.ln(), d.ln()))
        .collect();
    if points.len() < 2 {
        return Ok(HolderProbe {
            window,
            lags,
            sup_diffs,
            alpha: None,
            fit_residual: 0.0,
            pass: true,
        });
    }
    let (slope, intercept) = least_squares(&points);
    let fit_residual = (points
        .iter()
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        / points.len() as f64)
        .sqrt();
    Ok(HolderProbe {
        window,
        lags,
        sup_diffs,
        alpha: Some(slope),
        fit_residual,
        pass: slope >= HOLDER_MIN_ALPHA,
    })
}

fn least_squares(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Field, Grid};
    use crate::stepper::{advance, AdvanceOptions, StepperParams};

    fn homogeneous(supply: f64) -> Trajectory {
        let g = Grid::new(1.0, 16).unwrap();
        let u0 = Field::constant(g, 1.01).unwrap();
        let forcing = move |g: &Grid, _t: f64| Field::constant(*g, supply);
        advance(
            &u0,
            &forcing,
            1.0,
            &StepperParams::default(),
            &AdvanceOptions {
                snapshot_count: 64,
                lp_exponents: vec![],
            },
        )
        .unwrap()
    }

    const LAGS: [f64; 4] = [1.0 / 64.0, 1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0];

    #[test]
    fn homogeneous_nutrient_is_lipschitz_in_time() {
        let probe = fit_holder_exponent(&homogeneous(1.0), (0.0, 1.0), &LAGS).unwrap();
        let alpha = probe.alpha.unwrap();
        assert!((alpha - 1.0).abs() < 0.05, "alpha {alpha}");
        assert!(probe.pass);
        assert_eq!(probe.lags[0], 1.0 / 8.0);
        // v(t) = 1/(1.01 + t): the largest lag-h difference sits at the window start
        let exact = 1.0 / 1.01 - 1.0 / (1.01 + 0.125);
        assert!((probe.sup_diffs[0] - exact).abs() < 1e-10);
    }

    #[test]
    fn constant_nutrient_is_unconstrained() {
        let probe = fit_holder_exponent(&homogeneous(0.0), (0.0, 1.0), &LAGS).unwrap();
        assert_eq!(probe.alpha, None);
        assert!(probe.pass);
        assert!(probe.sup_diffs.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn window_shift_leaves_exponent_nearly_unchanged() {
        let traj = homogeneous(1.0);
        let lags = [1.0 / 64.0, 1.0 / 32.0, 1.0 / 16.0];
        let a = fit_holder_exponent(&traj, (0.0, 0.5), &lags)
            .unwrap()
            .alpha
            .unwrap();
        let b = fit_holder_exponent(&traj, (0.5, 1.0), &lags)
            .unwrap()
            .alpha
            .unwrap();
        assert!((a - b).abs() < 0.02, "{a} vs {b}");
    }

    #[test]
    fn precondition_errors() {
        let traj = homogeneous(1.0);
        assert!(fit_holder_exponent(&traj, (0.0, 1.0), &LAGS[..2]).is_err());
        assert!(fit_holder_exponent(&traj, (0.0, 2.0), &LAGS).is_err());
        assert!(fit_holder_exponent(&traj, (0.0, 0.1), &LAGS).is_err());
        assert!(fit_holder_exponent(&traj, (0.0, 1.0), &[0.01, 0.02, 0.03]).is_err());
    }
}
