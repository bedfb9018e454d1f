//! Right-continuous piecewise-constant controls.

use crate::error::{ModelError, Result};
use crate::params::ModelParams;

/// Times closer than this to a breakpoint are treated as the breakpoint.
pub const BREAKPOINT_SNAP: f64 = 1e-9;

/// One constant piece `[start, end)` of a step control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub u: f64,
}

/// Step control `u(t) = values[k]` on `[breakpoints[k], breakpoints[k+1])`.
///
/// The last value also holds at the right end of the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Control {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl Control {
    /// `breakpoints` includes both ends of the domain, so it is one longer
    /// than `values`. Values must lie in `[w, 1]`.
    pub fn new(params: &ModelParams, breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || breakpoints.len() != values.len() + 1 {
            return Err(ModelError::InvalidControl(format!(
                "{} breakpoints for {} values",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(ModelError::InvalidControl(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if (breakpoints[0] - params.t0).abs() > 0.0 {
            return Err(ModelError::InvalidControl(format!(
                "control starts at {} instead of t0 = {}",
                breakpoints[0], params.t0
            )));
        }
        let tol = 1e-12;
        if let Some(&u) = values
            .iter()
            .find(|&&u| !(u >= params.w - tol && u <= 1.0 + tol))
        {
            return Err(ModelError::InvalidControl(format!(
                "value {u} outside [{}, 1]",
                params.w
            )));
        }
        let values = values.into_iter().map(|u| u.clamp(params.w, 1.0)).collect();
        Ok(Self { breakpoints, values })
    }

    pub fn constant(params: &ModelParams, u: f64) -> Result<Self> {
        Self::new(params, vec![params.t0, params.t1], vec![u])
    }

    /// `w` on `[t0, t*)` and `1` on `[t*, t1]`. Switch times at or outside the
    /// ends give the constant controls.
    pub fn bang_bang(params: &ModelParams, tstar: f64) -> Self {
        Self::two_level(params, tstar, params.w, 1.0)
    }

    /// `1` then `w`, the mirror family.
    pub fn reverse_bang_bang(params: &ModelParams, tstar: f64) -> Self {
        Self::two_level(params, tstar, 1.0, params.w)
    }

    fn two_level(params: &ModelParams, tstar: f64, first: f64, second: f64) -> Self {
        let (t0, t1) = (params.t0, params.t1);
        if tstar <= t0 {
            Self {
                breakpoints: vec![t0, t1],
                values: vec![second],
            }
        } else if tstar >= t1 {
            Self {
                breakpoints: vec![t0, t1],
                values: vec![first],
            }
        } else {
            Self {
                breakpoints: vec![t0, tstar, t1],
                values: vec![first, second],
            }
        }
    }

    pub fn start(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn end(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Interior breakpoints, i.e. the switching times.
    pub fn switches(&self) -> &[f64] {
        &self.breakpoints[1..self.breakpoints.len() - 1]
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.values.iter().enumerate().map(|(k, &u)| Segment {
            start: self.breakpoints[k],
            end: self.breakpoints[k + 1],
            u,
        })
    }

    fn index_at(&self, t: f64) -> usize {
        // number of interior breakpoints <= t
        self.switches().partition_point(|&b| b <= t)
    }

    /// Right-continuous evaluation.
    pub fn value_at(&self, t: f64) -> f64 {
        self.values[self.index_at(t)]
    }

    /// `u(t - 0)`.
    pub fn left_value(&self, t: f64) -> f64 {
        let k = self.switches().partition_point(|&b| b < t);
        self.values[k]
    }

    /// Left and right limits at `t`, snapping to a switch within [`BREAKPOINT_SNAP`].
    pub fn one_sided_values(&self, t: f64) -> (f64, f64) {
        match self.nearest_switch(t) {
            Some(k) => (self.values[k], self.values[k + 1]),
            None => {
                let u = self.value_at(t);
                (u, u)
            }
        }
    }

    fn nearest_switch(&self, t: f64) -> Option<usize> {
        self.switches()
            .iter()
            .position(|&b| (b - t).abs() <= BREAKPOINT_SNAP)
    }

    /// Restricts to `[t0, new_end]`.
    pub fn truncated(&self, new_end: f64) -> Result<Self> {
        if !(new_end > self.start() && new_end <= self.end()) {
            return Err(ModelError::InvalidControl(format!(
                "cannot truncate [{}, {}] at {new_end}",
                self.start(),
                self.end()
            )));
        }
        let k = self.switches().partition_point(|&b| b < new_end);
        let mut breakpoints = self.breakpoints[..=k].to_vec();
        breakpoints.push(new_end);
        Ok(Self {
            breakpoints,
            values: self.values[..=k].to_vec(),
        })
    }

    /// Appends a constant piece `u` on `(end, new_end]`.
    pub fn extended(&self, new_end: f64, u: f64) -> Result<Self> {
        if new_end < self.end() {
            return Err(ModelError::InvalidControl(format!(
                "extension end {new_end} precedes control end {}",
                self.end()
            )));
        }
        let mut out = self.clone();
        if new_end > self.end() {
            out.breakpoints.push(new_end);
            out.values.push(u);
        }
        Ok(out)
    }

    /// Checks that the control covers exactly `[t0, t1]`.
    pub fn check_domain(&self, params: &ModelParams) -> Result<()> {
        let scale = params.t1.abs().max(1.0);
        if (self.end() - params.t1).abs() > 1e-12 * scale || self.start() != params.t0 {
            return Err(ModelError::Consistency(format!(
                "control covers [{}, {}] but the horizon is [{}, {}]",
                self.start(),
                self.end(),
                params.t0,
                params.t1
            )));
        }
        Ok(())
    }

    /// `sum |u_k| * length_k`.
    pub fn integral(&self) -> f64 {
        self.segments().map(|s| s.u * (s.end - s.start)).sum()
    }
}
