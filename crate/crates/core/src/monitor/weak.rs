use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stepper::Snapshot;

/// Separable test function `phi(x, t) = amplitude B((x - center)/width) B(t / t_cut)`
/// with `B(r) = exp(1 - 1/(1 - r^2))` on `|r| < 1`.
///
/// `phi` is smooth, vanishes near both ends of the domain and for `t >= t_cut`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualProbe {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
    pub t_cut: f64,
}

/// `(B, B', B'')` at `r`.
fn bump_derivatives(r: f64) -> (f64, f64, f64) {
    let q = 1.0 - r * r;
    if q <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let b = (1.0 - 1.0 / q).exp();
    let d1 = -2.0 * r / (q * q);
    let d2 = 4.0 * r * r / q.powi(4) - 2.0 / (q * q) - 8.0 * r * r / q.powi(3);
    (b, b * d1, b * d2)
}

impl ResidualProbe {
    /// Probe centered in `(0, length)` covering 80% of it, cut off at `t_cut`.
    pub fn centered(length: f64, t_cut: f64) -> Self {
        Self {
            center: 0.5 * length,
            width: 0.4 * length,
            amplitude: 1.0,
            t_cut,
        }
    }

    pub fn validate(&self, length: f64, span_end: f64) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite() && self.amplitude.is_finite()) {
            return Err(Error::Support(format!(
                "need finite amplitude and positive width, got {self:?}"
            )));
        }
        if !(self.center - self.width > 0.0 && self.center + self.width < length) {
            return Err(Error::Support(format!(
                "spatial support [{}, {}] must lie strictly inside (0, {length})",
                self.center - self.width,
                self.center + self.width
            )));
        }
        if !(self.t_cut > 0.0 && self.t_cut <= span_end) {
            return Err(Error::Support(format!(
                "temporal cutoff {} must lie in (0, {span_end}]",
                self.t_cut
            )));
        }
        Ok(())
    }

    /// `(b, b_x, b_xx)` of the spatial profile.
    pub fn space(&self, x: f64) -> (f64, f64, f64) {
        let (b, d1, d2) = bump_derivatives((x - self.center) / self.width);
        let a = self.amplitude;
        (
            a * b,
            a * d1 / self.width,
            a * d2 / (self.width * self.width),
        )
    }

    /// `(s, s_t)` of the temporal envelope.
    pub fn time(&self, t: f64) -> (f64, f64) {
        let (s, d1, _) = bump_derivatives(t / self.t_cut);
        (s, d1 / self.t_cut)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeakResidual {
    /// Imbalance of the space-time identity for the population.
    pub res_u: f64,
    /// Max over snapshots of the imbalance of the nutrient identity.
    pub res_v: f64,
}

/// Evaluates both weak identities of the limit problem on a sequence of
/// snapshots (a trajectory or a limit candidate).
///
/// Space integrals use the midpoint rule at cell centers (`v_x` from averaged
/// face gradients) and the time integral the trapezoid rule over snapshots.
/// The initial term uses the first snapshot, i.e. the datum the run actually
/// started from. The nutrient identity is tested with the spatial profile of
/// the probe, at every snapshot.
pub fn weak_residual(snapshots: &[Snapshot], probe: &ResidualProbe) -> Result<WeakResidual> {
    let first = snapshots
        .first()
        .ok_or_else(|| Error::Precondition("no snapshots".into()))?;
    let grid = *first.u.grid();
    let span_end = snapshots.last().unwrap().t;
    probe.validate(grid.length(), span_end)?;
    if probe.amplitude == 0.0 {
        return Ok(WeakResidual {
            res_u: 0.0,
            res_v: 0.0,
        });
    }

    let h = grid.spacing();
    let centers: Vec<(f64, f64, f64)> = grid.centers().map(|x| probe.space(x)).collect();
    let face_dx: Vec<f64> = (0..=grid.cells())
        .map(|j| probe.space(grid.face(j)).1)
        .collect();

    let mut density = Vec::with_capacity(snapshots.len());
    let mut res_v = 0.0f64;
    for snap in snapshots {
        let (u, v, f) = (&snap.u, &snap.v, &snap.f);
        u.ensure_same_grid(v)?;
        u.ensure_same_grid(f)?;
        let (s, st) = probe.time(snap.t);
        let vx = v.center_gradient();
        let mut acc = 0.0;
        for i in 0..grid.cells() {
            let (b, bx, bxx) = centers[i];
            let (ui, vi) = (u.values()[i], v.values()[i]);
            let u2v = ui * ui * vi;
            acc += ui * b * st
                + s * (0.5 * ui * ui * vx[i] * bx
                    + 0.5 * u2v * bxx
                    + u2v * vx[i] * bx
                    + ui * vi * b);
        }
        density.push((snap.t, h * acc));

        let grad = v.face_gradient();
        let diffusion: f64 = h * (1..grid.cells()).map(|j| grad[j] * face_dx[j]).sum::<f64>();
        let reaction = h
            * (0..grid.cells())
                .map(|i| (u.values()[i] * v.values()[i] - f.values()[i]) * centers[i].0)
                .sum::<f64>();
        res_v = res_v.max((diffusion + reaction).abs());
    }

    let time_integral: f64 = density
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum();
    let (s0, _) = probe.time(first.t);
    let initial = h * first
        .u
        .values()
        .iter()
        .zip(&centers)
        .map(|(u, c)| u * c.0 * s0)
        .sum::<f64>();
    Ok(WeakResidual {
        res_u: (time_integral + initial).abs(),
        res_v,
    })
}
