//! Model constants and the standing assumptions on them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Scalar constants of the simplified maturation model.
///
/// Velocities are `a(y) = -y^2` and `b(y) = c1*y + c2`; cells below the
/// threshold `ys` gain mass at rate `cs`. Controls take values in `[w, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(default = "defaults::t0")]
    pub t0: f64,
    #[serde(default = "defaults::t1")]
    pub t1: f64,
    #[serde(default = "defaults::c1")]
    pub c1: f64,
    #[serde(default = "defaults::c2")]
    pub c2: f64,
    /// Proliferation rate. Has no default: it must always be supplied.
    pub cs: f64,
    #[serde(default = "defaults::ys")]
    pub ys: f64,
    #[serde(default = "defaults::w")]
    pub w: f64,
}

mod defaults {
    pub fn t0() -> f64 {
        0.0
    }
    pub fn t1() -> f64 {
        17.0
    }
    pub fn c1() -> f64 {
        11.892
    }
    pub fn c2() -> f64 {
        2.288
    }
    pub fn ys() -> f64 {
        6.0
    }
    pub fn w() -> f64 {
        0.5
    }
}

/// Quantities behind the admissibility and optimality hypotheses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionReport {
    /// `ys^2 / (c1*ys + c2)`; must be below `w`, which must be below 1.
    pub threshold_ratio: f64,
    /// `2*ys - c1`, required positive by the bang-bang result.
    pub curvature_margin: f64,
    /// `(a(ys) + b(ys)) / ys`; the bang-bang result needs `cs` strictly above it.
    pub gain_threshold: f64,
    /// Exit time of a mass starting at maturity 0 under `u = w`.
    pub slowest_exit: f64,
    pub exits_before_horizon: bool,
    pub curvature_ok: bool,
    pub gain_ok: bool,
}

impl AssumptionReport {
    /// All sufficient conditions for a single-switch optimum.
    pub fn sufficient_conditions(&self) -> bool {
        self.exits_before_horizon && self.curvature_ok && self.gain_ok
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "threshold_ratio = {:.6}", self.threshold_ratio)?;
        writeln!(
            f,
            "curvature_margin = {:.6} ({})",
            self.curvature_margin,
            ok(self.curvature_ok)
        )?;
        writeln!(
            f,
            "gain_threshold = {:.6} ({})",
            self.gain_threshold,
            ok(self.gain_ok)
        )?;
        writeln!(
            f,
            "slowest_exit = {:.6} ({})",
            self.slowest_exit,
            ok(self.exits_before_horizon)
        )?;
        write!(
            f,
            "sufficient_conditions = {}",
            if self.sufficient_conditions() {
                "satisfied"
            } else {
                "not satisfied"
            }
        )
    }
}

fn ok(flag: bool) -> &'static str {
    if flag {
        "ok"
    } else {
        "violated"
    }
}

impl ModelParams {
    /// Default constants with the given proliferation rate.
    pub fn standard(cs: f64) -> Self {
        Self {
            t0: defaults::t0(),
            t1: defaults::t1(),
            c1: defaults::c1(),
            c2: defaults::c2(),
            cs,
            ys: defaults::ys(),
            w: defaults::w(),
        }
    }

    pub fn with_cs(self, cs: f64) -> Self {
        Self { cs, ..self }
    }

    pub fn with_horizon(self, t1: f64) -> Self {
        Self { t1, ..self }
    }

    /// Hard constraints. Violations make the model ill-posed.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("t0", self.t0),
            ("t1", self.t1),
            ("c1", self.c1),
            ("c2", self.c2),
            ("cs", self.cs),
            ("ys", self.ys),
            ("w", self.w),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(invalid(name, format!("{value} is not finite")));
            }
        }
        for (name, value) in [("c1", self.c1), ("c2", self.c2), ("ys", self.ys)] {
            if value <= 0.0 {
                return Err(invalid(name, format!("must be positive, got {value}")));
            }
        }
        if self.cs < 0.0 {
            return Err(invalid("cs", format!("must be nonnegative, got {}", self.cs)));
        }
        if self.t1 <= self.t0 {
            return Err(invalid(
                "t1",
                format!("final time {} must exceed initial time {}", self.t1, self.t0),
            ));
        }
        let ratio = self.threshold_ratio();
        if ratio >= 1.0 {
            return Err(invalid(
                "ys",
                format!("ys^2/(c1*ys + c2) = {ratio} must be below 1"),
            ));
        }
        if self.w <= ratio || self.w >= 1.0 {
            return Err(invalid(
                "w",
                format!("lower control bound {} must lie in ({ratio}, 1)", self.w),
            ));
        }
        Ok(())
    }

    pub fn threshold_ratio(&self) -> f64 {
        self.ys * self.ys / (self.c1 * self.ys + self.c2)
    }

    /// Evaluates the hypotheses without failing; call after [`validate`](Self::validate).
    pub fn assumptions(&self) -> AssumptionReport {
        let curvature_margin = 2.0 * self.ys - self.c1;
        let gain_threshold = self.velocity(self.ys, 1.0) / self.ys;
        let slowest_exit = crate::riccati::Riccati::new(self, self.w)
            .time_to_reach(0.0, self.ys)
            .map(|tau| self.t0 + tau)
            .unwrap_or(f64::INFINITY);
        AssumptionReport {
            threshold_ratio: self.threshold_ratio(),
            curvature_margin,
            gain_threshold,
            slowest_exit,
            exits_before_horizon: self.t1 > slowest_exit,
            curvature_ok: curvature_margin > 0.0,
            gain_ok: self.cs > gain_threshold,
        }
    }

    pub fn a(&self, y: f64) -> f64 {
        -y * y
    }

    pub fn b(&self, y: f64) -> f64 {
        self.c1 * y + self.c2
    }

    /// Proliferation gain; zero on and above the threshold.
    pub fn c(&self, y: f64) -> f64 {
        if y < self.ys {
            self.cs
        } else {
            0.0
        }
    }

    /// Maturation velocity `a(y) + b(y) u`.
    pub fn velocity(&self, y: f64, u: f64) -> f64 {
        self.a(y) + self.b(y) * u
    }

    /// `d/dy (a(y) + b(y) u)`.
    pub fn velocity_dy(&self, y: f64, u: f64) -> f64 {
        -2.0 * y + self.c1 * u
    }

    /// Positive root of `a(y) + b(y) = 0`.
    pub fn asymptotic_maturity(&self) -> f64 {
        0.5 * (self.c1 + (self.c1 * self.c1 + 4.0 * self.c2).sqrt())
    }

    /// Smallest maturation velocity over `[0, ys] x [w, 1]`.
    ///
    /// The velocity increases with `u` and is concave in `y`, so the minimum
    /// sits at `u = w` on one of the two ends.
    pub fn min_velocity(&self) -> f64 {
        self.velocity(0.0, self.w).min(self.velocity(self.ys, self.w))
    }

    /// Exit-time value used for masses that never reach the threshold.
    pub fn no_exit_sentinel(&self) -> f64 {
        self.t1 + 1.0
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        let params: Self =
            toml::from_str(text).map_err(|e| invalid("config", e.message().to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn to_config_string(&self) -> String {
        // serializing a flat struct of floats cannot fail
        toml::to_string(self).expect("flat parameter struct serializes")
    }
}

fn invalid(name: &'static str, reason: String) -> ModelError {
    ModelError::InvalidParams { name, reason }
}
