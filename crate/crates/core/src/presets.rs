//! Named instances used by the tests, the benchmarks and the example configs.

use crate::dynamics::{Ensemble, Particle};
use crate::error::Result;
use crate::measure::{DensityGrid, InitialMeasure};
use crate::params::ModelParams;

/// Horizon of [`two_mass`]. Short enough that the terminal maturity of the
/// first mass to cross still depends on the switch.
pub const TWO_MASS_HORIZON: f64 = 1.3;

/// Horizon and start maturity of [`short_horizon_single`].
pub const SHORT_HORIZON: f64 = 0.4;
pub const SHORT_HORIZON_START: f64 = 5.0;

/// One unit mass at maturity 0 with the default constants.
pub fn single(cs: f64) -> Result<Ensemble> {
    Ensemble::single(ModelParams::standard(cs), Particle::new(0.0, 0.0, 1.0))
}

/// One unit mass at maturity 5 and horizon 0.4. The terminal maturity is
/// far from saturation, so a small gain favours `u = 1` throughout.
pub fn short_horizon_single(cs: f64) -> Result<Ensemble> {
    Ensemble::single(
        ModelParams::standard(cs).with_horizon(SHORT_HORIZON),
        Particle::new(0.0, SHORT_HORIZON_START, 1.0),
    )
}

/// Unit masses at maturities 0 and 3, horizon 1.3.
pub fn two_mass(cs: f64) -> Result<Ensemble> {
    Ensemble::new(
        ModelParams::standard(cs).with_horizon(TWO_MASS_HORIZON),
        vec![Particle::new(0.0, 0.0, 1.0), Particle::new(0.0, 3.0, 1.0)],
    )
}

/// Unit density on `[0, 1] x [0, ys]`.
pub fn uniform_density(params: &ModelParams) -> Result<InitialMeasure> {
    InitialMeasure::density(DensityGrid::uniform(params.ys, 1.0), params)
}
