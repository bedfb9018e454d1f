//! Optimal control of a simplified follicle maturation model.
//!
//! Cells carry an age, a maturity and a mass. Maturity is driven by a
//! bounded control `u(t)` in `[w, 1]`; mass grows at rate `cs` until the
//! maturity crosses the threshold `ys`, after which it is frozen. The crate
//! simulates finite ensembles of point masses exactly, computes costates of
//! the hybrid maximum principle (including the jump at threshold crossings),
//! searches single-switch bang-bang controls, evaluates the measure-valued
//! limit and studies a mollified version of the discontinuous gain.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoint;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod measure;
pub mod model;
pub mod optimizer;
pub mod params;
pub mod presets;
pub mod quadrature;
pub mod regularized;
pub mod report;
pub mod riccati;

pub use control::{Control, Segment};
pub use dynamics::{simulate, Ensemble, Particle, Trajectory};
pub use error::{ModelError, Result};
pub use integrator::{Dopri, Tolerance};
pub use params::{AssumptionReport, ModelParams};
pub use riccati::{MaturityPath, Riccati};
