//! Closed-form maturation under constant and step controls.
//!
//! With `u` fixed the maturity obeys `y' = -y^2 + c1 u y + c2 u`, which
//! factors as `-(y - upper)(y - lower)` with `lower < 0 < upper`. The
//! solution is carried as a deviation from `upper` so that states that have
//! saturated against the equilibrium keep their (tiny) distance to it.

use crate::control::Control;
use crate::params::ModelParams;

/// Constant-control Riccati flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Riccati {
    pub u: f64,
    pub upper: f64,
    pub lower: f64,
    gap: f64,
}

impl Riccati {
    pub fn new(params: &ModelParams, u: f64) -> Self {
        let p = params.c1 * u;
        let q = params.c2 * u;
        let upper = 0.5 * (p + (p * p + 4.0 * q).sqrt());
        // product of the roots is -q
        let lower = -q / upper;
        Self {
            u,
            upper,
            lower,
            gap: upper - lower,
        }
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn velocity(&self, y: f64) -> f64 {
        -(y - self.upper) * (y - self.lower)
    }

    /// `y(tau) - upper` given `y(0) - upper = dev0`, for `y(0) > lower`.
    pub fn deviation_after(&self, dev0: f64, tau: f64) -> f64 {
        let decay = (-self.gap * tau).exp();
        let one_minus = -(-self.gap * tau).exp_m1();
        self.gap * dev0 * decay / (self.gap + dev0 * one_minus)
    }

    pub fn advance(&self, y0: f64, tau: f64) -> f64 {
        self.upper + self.deviation_after(y0 - self.upper, tau)
    }

    /// `y(tau) - y(0)` without cancellation.
    pub fn increment(&self, dev0: f64, tau: f64) -> f64 {
        let one_minus = -(-self.gap * tau).exp_m1();
        -dev0 * one_minus * (self.gap + dev0) / (self.gap + dev0 * one_minus)
    }

    /// Time needed to go from `y0` up to `target`; `None` when the target is
    /// at or beyond the equilibrium.
    pub fn time_to_reach(&self, y0: f64, target: f64) -> Option<f64> {
        if y0 >= target {
            return Some(0.0);
        }
        if target >= self.upper || y0 <= self.lower {
            return None;
        }
        let log_ratio = |y: f64| ((y - self.lower) / (self.upper - y)).ln();
        Some((log_ratio(target) - log_ratio(y0)) / self.gap)
    }

    /// `exp(int_0^tau d/dy velocity(y(s)) ds)`, the sensitivity of the flow
    /// to its initial value; equals `velocity(y(tau)) / velocity(y(0))` away
    /// from equilibrium.
    pub fn sensitivity(&self, dev0: f64, tau: f64) -> f64 {
        let dev = self.deviation_after(dev0, tau);
        let decay = (-self.gap * tau).exp();
        // v(y) = -dev (dev + gap)
        if dev0 == 0.0 {
            return decay;
        }
        (dev * (dev + self.gap)) / (dev0 * (dev0 + self.gap))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Piece {
    start: f64,
    end: f64,
    flow: Riccati,
    dev0: f64,
}

impl Piece {
    fn deviation(&self, t: f64) -> f64 {
        self.flow.deviation_after(self.dev0, t - self.start)
    }

    fn value(&self, t: f64) -> f64 {
        self.flow.upper + self.deviation(t)
    }
}

/// Maturity along a step control, evaluated piece by piece in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct MaturityPath {
    pieces: Vec<Piece>,
}

impl MaturityPath {
    pub fn new(params: &ModelParams, y0: f64, control: &Control) -> Self {
        let mut pieces: Vec<Piece> = Vec::with_capacity(control.values().len());
        let mut y_dev: Option<(f64, f64)> = None; // (upper, deviation) at piece end
        for seg in control.segments() {
            let flow = Riccati::new(params, seg.u);
            let dev0 = match y_dev {
                None => y0 - flow.upper,
                Some((upper, dev)) if upper == flow.upper => dev,
                Some((upper, dev)) => (upper - flow.upper) + dev,
            };
            let piece = Piece {
                start: seg.start,
                end: seg.end,
                flow,
                dev0,
            };
            y_dev = Some((flow.upper, piece.deviation(seg.end)));
            pieces.push(piece);
        }
        Self { pieces }
    }

    pub fn start(&self) -> f64 {
        self.pieces[0].start
    }

    pub fn end(&self) -> f64 {
        self.pieces.last().unwrap().end
    }

    fn piece_index(&self, t: f64) -> usize {
        let k = self.pieces.partition_point(|p| p.end <= t);
        k.min(self.pieces.len() - 1)
    }

    pub fn value(&self, t: f64) -> f64 {
        let t = t.clamp(self.start(), self.end());
        self.pieces[self.piece_index(t)].value(t)
    }

    /// Current control level and `y(t) - upper(u)`.
    pub fn deviation(&self, t: f64) -> (Riccati, f64) {
        let t = t.clamp(self.start(), self.end());
        let piece = &self.pieces[self.piece_index(t)];
        (piece.flow, piece.deviation(t))
    }

    pub fn velocity(&self, t: f64) -> f64 {
        let (flow, dev) = self.deviation(t);
        -dev * (dev + flow.gap)
    }

    /// `y(tb) - y(ta)` for `ta <= tb`, summed piecewise without cancellation.
    pub fn increment(&self, ta: f64, tb: f64) -> f64 {
        let (ta, tb) = (ta.clamp(self.start(), self.end()), tb.clamp(self.start(), self.end()));
        if tb <= ta {
            return 0.0;
        }
        let mut total = 0.0;
        for piece in &self.pieces {
            let lo = ta.max(piece.start);
            let hi = tb.min(piece.end);
            if hi > lo {
                total += piece.flow.increment(piece.deviation(lo), hi - lo);
            }
        }
        total
    }

    /// `exp(int_{ta}^{tb} d/dy velocity ds)`, product over pieces.
    pub fn sensitivity(&self, ta: f64, tb: f64) -> f64 {
        let mut total = 1.0;
        for piece in &self.pieces {
            let lo = ta.max(piece.start);
            let hi = tb.min(piece.end);
            if hi > lo {
                total *= piece.flow.sensitivity(piece.deviation(lo), hi - lo);
            }
        }
        total
    }

    /// First time the maturity reaches `target`.
    ///
    /// A crossing computed within `1e-12` (relative) past the end of a piece
    /// is attributed to that piece's end, so a switch placed exactly at the
    /// exit time is recognised as such.
    pub fn first_crossing(&self, target: f64) -> Option<f64> {
        for piece in &self.pieces {
            let y_start = piece.value(piece.start);
            if y_start >= target {
                return Some(piece.start);
            }
            let Some(tau) = piece.flow.time_to_reach(y_start, target) else {
                continue;
            };
            let hit = piece.start + tau;
            let snap = 1e-12 * piece.end.abs().max(1.0);
            if hit <= piece.end {
                return Some(hit);
            }
            if hit - piece.end <= snap {
                return Some(piece.end);
            }
        }
        None
    }
}
