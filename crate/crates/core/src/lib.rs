//! Regularized simulation and estimate verification for the 1D doubly
//! degenerate parabolic-elliptic nutrient-taxis system
//!
//! ```text
//! u_t = (u v u_x)_x - (u^2 v v_x)_x + u v,
//! 0   = v_xx - u v + f(x, t),
//! ```
//!
//! on `(0, L)` with no-flux ends. Approximate solutions come from the family
//! of problems started at `u0 + eps`; every run is audited against the
//! integral identities and bounds those solutions are known to satisfy.

pub mod elliptic;
pub mod error;
pub mod family;
pub mod grid;
pub mod monitor;
pub mod output;
pub mod scenario;
pub mod stepper;
pub mod study;
pub mod tolerances;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
