//! Thresholds shared by the monitor, the CLI verdicts and the acceptance suite.
//!
//! Identities that telescope exactly in the discretization get machine-level
//! tolerances; identities broken by nonlinear weights get truncation-order
//! tolerances.

/// Exact discrete identities (consumption, mass balance), relative.
pub const EXACT_IDENTITY: f64 = 1e-10;

/// Relative slack on the mass bounds and the pointwise nutrient bounds.
pub const BOUND_RELATIVE: f64 = 1e-8;

/// Relative slack on the Harnack ratio.
pub const HARNACK_RELATIVE: f64 = 1e-6;

/// Relative gap below which a bound counts as saturated.
pub const SATURATION_RELATIVE: f64 = 1e-6;

/// Smallest acceptable fitted time-Hölder exponent of the nutrient.
pub const HOLDER_MIN_ALPHA: f64 = 0.2;

/// Slack factor on nonincreasing Cauchy increments across the eps family.
pub const CAUCHY_SLACK: f64 = 1.1;

/// Allowed max/min spread of the Lp and dissipation integrals across the eps family.
pub const FAMILY_SPREAD: f64 = 2.0;

/// Sup differences below this are treated as zero by the Hölder fit.
pub const HOLDER_ZERO: f64 = 1e-13;
