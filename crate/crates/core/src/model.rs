//! Scalar maturation flow and threshold exit times.

use crate::control::Control;
use crate::error::{ModelError, Result};
use crate::integrator::Dopri;
use crate::params::ModelParams;
use crate::riccati::MaturityPath;

pub fn velocity_a(params: &ModelParams, y: f64) -> f64 {
    params.a(y)
}

pub fn velocity_b(params: &ModelParams, y: f64) -> f64 {
    params.b(y)
}

pub fn gain_c(params: &ModelParams, y: f64) -> f64 {
    params.c(y)
}

pub fn asymptotic_maturity(params: &ModelParams) -> f64 {
    params.asymptotic_maturity()
}

fn check_range(value: f64, lo: f64, hi: f64) -> Result<()> {
    if value >= lo && value <= hi {
        Ok(())
    } else {
        Err(ModelError::Domain { value, lo, hi })
    }
}

fn check_time(params: &ModelParams, control: &Control, t: f64) -> Result<()> {
    if t < control.start() || t > control.end() {
        return Err(ModelError::Consistency(format!(
            "time {t} outside the control domain [{}, {}] (t1 = {})",
            control.start(),
            control.end(),
            params.t1
        )));
    }
    Ok(())
}

/// Maturity at `t` of a cell starting at `y0`, by the closed-form flow.
pub fn maturation_flow(params: &ModelParams, t: f64, y0: f64, control: &Control) -> Result<f64> {
    check_range(y0, 0.0, params.asymptotic_maturity())?;
    check_time(params, control, t)?;
    Ok(MaturityPath::new(params, y0, control).value(t))
}

/// Same quantity as [`maturation_flow`] from the adaptive integrator,
/// integrating each constant piece of the control separately.
pub fn maturation_flow_integrated(
    params: &ModelParams,
    t: f64,
    y0: f64,
    control: &Control,
    solver: &Dopri,
) -> Result<f64> {
    check_range(y0, 0.0, params.asymptotic_maturity())?;
    check_time(params, control, t)?;
    let mut y = y0;
    for seg in control.segments() {
        if seg.start >= t {
            break;
        }
        let end = seg.end.min(t);
        let sol = solver.solve(
            |_, s: &[f64; 1]| [params.velocity(s[0], seg.u)],
            seg.start,
            [y],
            end,
            &[],
        )?;
        y = sol.last()[0];
    }
    Ok(y)
}

/// Time at which the maturity first reaches `ys`, or
/// [`ModelParams::no_exit_sentinel`] when that does not happen by the end
/// of the control.
pub fn exit_time(params: &ModelParams, y0: f64, control: &Control) -> Result<f64> {
    check_range(y0, 0.0, params.ys)?;
    Ok(MaturityPath::new(params, y0, control)
        .first_crossing(params.ys)
        .unwrap_or_else(|| params.no_exit_sentinel()))
}
