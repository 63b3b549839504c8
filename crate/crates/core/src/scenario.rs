//! Scenario documents: domain, initial datum, supply, eps schedule and
//! sampling. Hypotheses on the data are enforced at parse time.
//!
//! The document is TOML with the keys `L`, `n`, `t_end`, `u0_spec`, `f_spec`,
//! `eps_schedule`, `snapshot_count`, `lp_exponents`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, MIN_CELLS};

/// Nonnegative Lipschitz initial population profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialProfile {
    Constant {
        a: f64,
    },
    /// Trapezoid supported on `[x_left, x_right]`, equal to `a` on the middle
    /// half and linear on the outer quarters.
    Plateau {
        a: f64,
        x_left: f64,
        x_right: f64,
    },
    /// Gaussian shifted down to vanish at two widths from the center, rescaled to peak `a`.
    GaussianClipped {
        a: f64,
        center: f64,
        width: f64,
    },
}

const GAUSS_CUT: f64 = 4.0;

impl InitialProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            InitialProfile::Constant { a } => a,
            InitialProfile::Plateau { a, x_left, x_right } => {
                let ramp = 0.25 * (x_right - x_left);
                let d = (x - x_left).min(x_right - x);
                a * (d / ramp).clamp(0.0, 1.0)
            }
            InitialProfile::GaussianClipped { a, center, width } => {
                let r = (x - center) / width;
                let floor = (-GAUSS_CUT).exp();
                a * (((-r * r).exp() - floor) / (1.0 - floor)).max(0.0)
            }
        }
    }

    fn validate(&self, length: f64) -> Result<()> {
        let a = match *self {
            InitialProfile::Constant { a } => a,
            InitialProfile::Plateau { a, x_left, x_right } => {
                if !(0.0 <= x_left && x_left < x_right && x_right <= length) {
                    return Err(Error::Scenario {
                        key: "u0_spec.x_left".into(),
                        message: format!(
                            "need 0 <= x_left < x_right <= L, got [{x_left}, {x_right}] with L = {length}"
                        ),
                    });
                }
                a
            }
            InitialProfile::GaussianClipped { a, center, width } => {
                if !(width > 0.0 && width.is_finite()) {
                    return Err(scenario_err(
                        "u0_spec.width",
                        format!("must be positive, got {width}"),
                    ));
                }
                if !center.is_finite() {
                    return Err(scenario_err("u0_spec.center", "must be finite"));
                }
                a
            }
        };
        if !a.is_finite() {
            return Err(scenario_err("u0_spec.a", "must be finite"));
        }
        if a < 0.0 {
            return Err(Error::Hypothesis {
                which: "h1",
                message: format!("u0 must be nonnegative, amplitude u0_spec.a = {a}"),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpatialProfile {
    Constant {
        value: f64,
    },
    /// `amplitude (1 + cos(k pi x / L))`.
    OnePlusCosine {
        amplitude: f64,
        k: u32,
    },
    /// Smooth compactly supported bump `amplitude exp(1 - 1/(1 - r^2))`, `r = (x - center)/width`.
    Bump {
        amplitude: f64,
        center: f64,
        width: f64,
    },
}

impl SpatialProfile {
    pub fn eval(&self, x: f64, length: f64) -> f64 {
        match *self {
            SpatialProfile::Constant { value } => value,
            SpatialProfile::OnePlusCosine { amplitude, k } => {
                amplitude * (1.0 + (k as f64 * PI * x / length).cos())
            }
            SpatialProfile::Bump {
                amplitude,
                center,
                width,
            } => amplitude * smooth_bump((x - center) / width),
        }
    }
}

/// `exp(1 - 1/(1 - r^2))` on `|r| < 1`, zero outside; equals 1 at `r = 0`.
pub fn smooth_bump(r: f64) -> f64 {
    let q = 1.0 - r * r;
    if q <= 0.0 {
        0.0
    } else {
        (1.0 - 1.0 / q).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TemporalProfile {
    Constant,
    /// `1 + rate t`.
    LinearRamp {
        rate: f64,
    },
    /// `exp(-rate t)`.
    ExponentialDecay {
        rate: f64,
    },
}

impl TemporalProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TemporalProfile::Constant => 1.0,
            TemporalProfile::LinearRamp { rate } => 1.0 + rate * t,
            TemporalProfile::ExponentialDecay { rate } => (-rate * t).exp(),
        }
    }

    /// `sup_{0 <= s <= t}` of the profile (it is monotone).
    pub fn sup_up_to(&self, t: f64) -> f64 {
        self.eval(0.0).max(self.eval(t))
    }
}

/// Separable supply `f(x, t) = g(x) s(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupplySpec {
    pub g: SpatialProfile,
    pub s: TemporalProfile,
}

impl SupplySpec {
    pub fn eval(&self, x: f64, t: f64, length: f64) -> f64 {
        self.g.eval(x, length) * self.s.eval(t)
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        let h2 = |message: String| Error::Hypothesis {
            which: "h2",
            message,
        };
        match self.g {
            SpatialProfile::Constant { value } => {
                if !value.is_finite() {
                    return Err(scenario_err("f_spec.g.value", "must be finite"));
                }
                if value < 0.0 {
                    return Err(h2(format!(
                        "f must be nonnegative, f_spec.g.value = {value}"
                    )));
                }
                if value == 0.0 {
                    return Err(h2(
                        "f must not vanish identically (f \u{2262} 0), f_spec.g.value = 0".into(),
                    ));
                }
            }
            SpatialProfile::OnePlusCosine { amplitude, .. } => {
                if !amplitude.is_finite() {
                    return Err(scenario_err("f_spec.g.amplitude", "must be finite"));
                }
                if amplitude <= 0.0 {
                    return Err(h2(format!(
                        "f must be nonnegative and not identically zero, f_spec.g.amplitude = {amplitude}"
                    )));
                }
            }
            SpatialProfile::Bump {
                amplitude,
                center,
                width,
            } => {
                if !(width > 0.0 && width.is_finite()) || !center.is_finite() {
                    return Err(scenario_err(
                        "f_spec.g.width",
                        format!("need a finite positive width, got {width}"),
                    ));
                }
                if !(amplitude > 0.0 && amplitude.is_finite()) {
                    return Err(h2(format!(
                        "f must be nonnegative and not identically zero, f_spec.g.amplitude = {amplitude}"
                    )));
                }
            }
        }
        match self.s {
            TemporalProfile::Constant => {}
            TemporalProfile::LinearRamp { rate } => {
                if !(rate >= 0.0 && rate.is_finite()) {
                    return Err(h2(format!(
                        "a ramp with rate {rate} turns f negative; f_spec.s.rate must be >= 0"
                    )));
                }
            }
            TemporalProfile::ExponentialDecay { rate } => {
                if !rate.is_finite() {
                    return Err(scenario_err("f_spec.s.rate", "must be finite"));
                }
            }
        }
        let sampled: f64 = grid.centers().map(|x| self.g.eval(x, grid.length())).sum();
        if sampled <= 0.0 {
            return Err(h2(
                "f vanishes on every cell of the grid (f \u{2262} 0 fails discretely)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsSchedule {
    pub eps0: f64,
    pub count: usize,
    pub ratio: f64,
}

impl EpsSchedule {
    pub fn values(&self) -> Vec<f64> {
        (0..self.count)
            .map(|j| self.eps0 * self.ratio.powi(j as i32))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0 && self.eps0 < 1.0) {
            return Err(scenario_err(
                "eps_schedule.eps0",
                format!("must lie in (0, 1), got {}", self.eps0),
            ));
        }
        if self.count == 0 {
            return Err(scenario_err("eps_schedule.count", "must be at least 1"));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(scenario_err(
                "eps_schedule.ratio",
                format!(
                    "schedule must be strictly decreasing, need 0 < ratio < 1, got {}",
                    self.ratio
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(rename = "L")]
    pub length: f64,
    pub n: usize,
    pub t_end: f64,
    pub u0_spec: InitialProfile,
    pub f_spec: SupplySpec,
    pub eps_schedule: EpsSchedule,
    pub snapshot_count: usize,
    pub lp_exponents: Vec<f64>,
}

fn scenario_err(key: &str, message: impl Into<String>) -> Error {
    Error::Scenario {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        let key = missing_key(&message).unwrap_or_else(|| "<document>".to_string());
        Error::Scenario { key, message }
    })?;
    scenario.validate()?;
    Ok(scenario)
}

fn missing_key(message: &str) -> Option<String> {
    let rest = message.split("missing field `").nth(1)?;
    Some(rest.split('`').next()?.to_string())
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(scenario_err(
                "L",
                format!("must be positive, got {}", self.length),
            ));
        }
        if self.n < MIN_CELLS {
            return Err(scenario_err(
                "n",
                format!("need at least {MIN_CELLS} cells, got {}", self.n),
            ));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(scenario_err(
                "t_end",
                format!("must be positive, got {}", self.t_end),
            ));
        }
        if self.snapshot_count == 0 {
            return Err(scenario_err("snapshot_count", "must be at least 1"));
        }
        if let Some(p) = self
            .lp_exponents
            .iter()
            .find(|&&p| !(p > 1.0 && p.is_finite()))
        {
            return Err(scenario_err(
                "lp_exponents",
                format!("every exponent must exceed 1, got {p}"),
            ));
        }
        self.eps_schedule.validate()?;
        self.u0_spec.validate(self.length)?;
        self.f_spec.validate(&self.grid()?)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.length, self.n)
    }

    pub fn eps_values(&self) -> Vec<f64> {
        self.eps_schedule.values()
    }

    /// `u0` sampled on `grid`, without regularization.
    pub fn u0_field(&self, grid: &Grid) -> Result<Field> {
        Field::from_fn(*grid, |x| self.u0_spec.eval(x))
    }

    /// Regularized initial datum `u0 + eps`.
    pub fn initial_field(&self, grid: &Grid, eps: f64) -> Result<Field> {
        Field::from_fn(*grid, |x| self.u0_spec.eval(x) + eps)
    }

    pub fn supply(&self, grid: &Grid, t: f64) -> Result<Field> {
        Field::from_fn(*grid, |x| self.f_spec.eval(x, t, self.length))
    }

    /// `sup` of the sampled supply over cells and over `[0, t]`.
    pub fn supply_sup(&self, grid: &Grid, t: f64) -> f64 {
        self.supply_profile_max(grid) * self.f_spec.s.sup_up_to(t)
    }

    /// Max of the spatial supply profile `g` over the cells.
    pub fn supply_profile_max(&self, grid: &Grid) -> f64 {
        grid.centers()
            .map(|x| self.f_spec.g.eval(x, self.length))
            .fold(0.0f64, f64::max)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    /// Copy at the `level`-th dyadic refinement: `n` and `snapshot_count` scaled by `2^level`.
    pub fn refined(&self, level: u32) -> Scenario {
        let factor = 1usize << level;
        Scenario {
            n: self.n * factor,
            snapshot_count: self.snapshot_count * factor,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PLATEAU: &str = r#"
L = 1.0
n = 200
t_end = 1.0
snapshot_count = 64
lp_exponents = [2.0]

[u0_spec]
kind = "plateau"
a = 1.0
x_left = 0.25
x_right = 0.75

[f_spec.g]
kind = "constant"
value = 1.0

[f_spec.s]
kind = "constant"

[eps_schedule]
eps0 = 0.4
count = 4
ratio = 0.5
"#;

    #[test]
    fn parses_plateau_document() {
        let s = parse_scenario(PLATEAU).unwrap();
        assert_eq!(s.n, 200);
        assert_eq!(
            s.u0_spec,
            InitialProfile::Plateau {
                a: 1.0,
                x_left: 0.25,
                x_right: 0.75
            }
        );
        assert_eq!(s.eps_values(), vec![0.4, 0.2, 0.1, 0.05]);
    }

    #[test]
    fn zero_supply_rejected_as_h2() {
        let text = PLATEAU.replace("value = 1.0", "value = 0.0");
        let err = parse_scenario(&text).unwrap_err();
        assert!(
            matches!(err, Error::Hypothesis { which: "h2", .. }),
            "{err}"
        );
        assert!(err.to_string().contains("(h2)"));
    }

    #[test]
    fn negative_amplitude_rejected_as_h1() {
        let text = PLATEAU.replace("a = 1.0", "a = -1.0");
        assert!(matches!(
            parse_scenario(&text),
            Err(Error::Hypothesis { which: "h1", .. })
        ));
    }

    #[test]
    fn missing_t_end_named() {
        let text = PLATEAU.replace("t_end = 1.0\n", "");
        match parse_scenario(&text) {
            Err(Error::Scenario { key, .. }) => assert_eq!(key, "t_end"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn structural_errors_name_their_key() {
        let cases = [
            (PLATEAU.replace("n = 200", "n = 3"), "n"),
            (PLATEAU.replace("L = 1.0", "L = 0.0"), "L"),
            (
                PLATEAU.replace("ratio = 0.5", "ratio = 1.0"),
                "eps_schedule.ratio",
            ),
            (
                PLATEAU.replace("eps0 = 0.4", "eps0 = 1.5"),
                "eps_schedule.eps0",
            ),
            (
                PLATEAU.replace("lp_exponents = [2.0]", "lp_exponents = [1.0]"),
                "lp_exponents",
            ),
        ];
        for (text, expected) in cases {
            match parse_scenario(&text) {
                Err(Error::Scenario { key, .. }) => assert_eq!(key, expected),
                other => panic!("{expected}: unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn plateau_is_compactly_supported_and_lipschitz() {
        let s = parse_scenario(PLATEAU).unwrap();
        let grid = s.grid().unwrap();
        let u0 = s.u0_field(&grid).unwrap();
        assert_eq!(u0.sup_inf(), (1.0, 0.0));
        let lip = u0
            .face_gradient()
            .iter()
            .fold(0.0f64, |m, g| m.max(g.abs()));
        assert!(lip <= 1.0 / (0.25 * 0.5) + 1e-9);
        let reg = s.initial_field(&grid, 0.1).unwrap();
        assert_eq!(reg.sup_inf().1, 0.1);
    }

    #[test]
    fn clipped_gaussian_bounds() {
        let g = Grid::new(1.0, 100).unwrap();
        let p = InitialProfile::GaussianClipped {
            a: 2.0,
            center: 0.5,
            width: 0.1,
        };
        let f = Field::from_fn(g, |x| p.eval(x)).unwrap();
        let (sup, inf) = f.sup_inf();
        assert!(sup <= 2.0);
        assert_eq!(inf, 0.0);
    }

    #[test]
    fn supply_sup_tracks_time_profile() {
        let mut s = parse_scenario(PLATEAU).unwrap();
        let g = s.grid().unwrap();
        assert_eq!(s.supply_sup(&g, 3.0), 1.0);
        s.f_spec.s = TemporalProfile::LinearRamp { rate: 2.0 };
        assert_eq!(s.supply_sup(&g, 0.5), 2.0);
        s.f_spec.s = TemporalProfile::ExponentialDecay { rate: 2.0 };
        assert_eq!(s.supply_sup(&g, 0.5), 1.0);
    }

    #[test]
    fn refined_scales_resolution() {
        let s = parse_scenario(PLATEAU).unwrap().refined(2);
        assert_eq!((s.n, s.snapshot_count), (800, 256));
    }

    fn arb_scenario() -> impl Strategy<Value = Scenario> {
        (
            0.1..10.0f64,
            4usize..500,
            0.01..5.0f64,
            prop_oneof![
                (0.0..3.0f64).prop_map(|a| InitialProfile::Constant { a }),
                (0.0..3.0f64, 0.0..0.4f64, 0.6..1.0f64).prop_map(|(a, l, r)| {
                    InitialProfile::Plateau {
                        a,
                        x_left: l,
                        x_right: r,
                    }
                }),
                (0.0..3.0f64, 0.0..1.0f64, 0.01..1.0f64).prop_map(|(a, c, w)| {
                    InitialProfile::GaussianClipped {
                        a,
                        center: c,
                        width: w,
                    }
                }),
            ],
            prop_oneof![
                (0.01..3.0f64).prop_map(|value| SpatialProfile::Constant { value }),
                (0.01..3.0f64, 0u32..5)
                    .prop_map(|(amplitude, k)| SpatialProfile::OnePlusCosine { amplitude, k }),
            ],
            prop_oneof![
                Just(TemporalProfile::Constant),
                (0.0..2.0f64).prop_map(|rate| TemporalProfile::LinearRamp { rate }),
                (-1.0..2.0f64).prop_map(|rate| TemporalProfile::ExponentialDecay { rate }),
            ],
            (0.01..0.99f64, 1usize..8, 0.05..0.95f64),
            (1usize..200, proptest::collection::vec(1.01..6.0f64, 0..4)),
        )
            .prop_map(
                |(len, n, t_end, u0, g, s, (eps0, count, ratio), (snaps, lps))| {
                    let u0_spec = match u0 {
                        InitialProfile::Plateau { a, x_left, x_right } => InitialProfile::Plateau {
                            a,
                            x_left: x_left * len,
                            x_right: x_right * len,
                        },
                        other => other,
                    };
                    Scenario {
                        length: len,
                        n,
                        t_end,
                        u0_spec,
                        f_spec: SupplySpec { g, s },
                        eps_schedule: EpsSchedule { eps0, count, ratio },
                        snapshot_count: snaps,
                        lp_exponents: lps,
                    }
                },
            )
    }

    proptest! {
        #[test]
        fn toml_round_trip(s in arb_scenario()) {
            prop_assume!(s.validate().is_ok());
            let back = parse_scenario(&s.to_toml()).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
