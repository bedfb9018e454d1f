//! Adaptive Dormand–Prince 5(4) integration with dense output.
//!
//! Works forward or backward in time on fixed-size states. Used as the
//! independent check on the closed-form flows and for the costate solves.

use crate::error::{ModelError, Result};

/// Absolute/relative error tolerance of the step controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-12,
            rel: 1e-10,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Shampine's continuous extension
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

type State<const N: usize> = [f64; N];

fn axpy<const N: usize>(y: &State<N>, h: f64, terms: &[(f64, &State<N>)]) -> State<N> {
    let mut out = *y;
    for (coef, k) in terms {
        if *coef == 0.0 {
            continue;
        }
        for i in 0..N {
            out[i] += h * coef * k[i];
        }
    }
    out
}

/// Result of one full Dormand–Prince step.
struct Step<const N: usize> {
    y_new: State<N>,
    f_new: State<N>,
    err: f64,
    dense: [State<N>; 5],
}

fn dp_step<const N: usize, F>(
    f: &mut F,
    t: f64,
    y: &State<N>,
    k1: &State<N>,
    h: f64,
    tol: Tolerance,
) -> Step<N>
where
    F: FnMut(f64, &State<N>) -> State<N>,
{
    let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, k1)]));
    let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(t + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(
        t + C5 * h,
        &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    );
    let k6 = f(
        t + h,
        &axpy(
            y,
            h,
            &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        ),
    );
    let y_new = axpy(
        y,
        h,
        &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
    );
    let k7 = f(t + h, &y_new);

    let mut sum = 0.0;
    for i in 0..N {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = tol.abs + tol.rel * y[i].abs().max(y_new[i].abs());
        sum += (e / sc) * (e / sc);
    }
    let err = (sum / N as f64).sqrt();

    let mut dense = [[0.0; N]; 5];
    for i in 0..N {
        let diff = y_new[i] - y[i];
        let bspl = h * k1[i] - diff;
        dense[0][i] = y[i];
        dense[1][i] = diff;
        dense[2][i] = bspl;
        dense[3][i] = diff - h * k7[i] - bspl;
        dense[4][i] = h
            * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    Step {
        y_new,
        f_new: k7,
        err,
        dense,
    }
}

/// Accepted step with its continuous extension.
#[derive(Debug, Clone)]
struct DenseStep<const N: usize> {
    t: f64,
    h: f64,
    coef: [State<N>; 5],
}

impl<const N: usize> DenseStep<N> {
    fn eval(&self, t: f64) -> State<N> {
        let th = (t - self.t) / self.h;
        let th1 = 1.0 - th;
        let c = &self.coef;
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = c[0][i] + th * (c[1][i] + th1 * (c[2][i] + th * (c[3][i] + th1 * c[4][i])));
        }
        out
    }
}

/// Trajectory produced by [`Dopri::solve`]: accepted nodes plus dense output.
#[derive(Debug, Clone)]
pub struct Solution<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<State<N>>,
    steps: Vec<DenseStep<N>>,
}

impl<const N: usize> Solution<N> {
    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn last(&self) -> State<N> {
        *self.states.last().unwrap()
    }

    /// State at `t`; exact at nodes, 4th-order interpolation between them.
    pub fn at(&self, t: f64) -> State<N> {
        if self.steps.is_empty() {
            return self.states[0];
        }
        let forward = self.t_end() >= self.t_start();
        // exact hits on nodes, which include every requested stop
        let idx = if forward {
            self.times.partition_point(|&s| s < t)
        } else {
            self.times.partition_point(|&s| s > t)
        };
        if idx < self.times.len() && self.times[idx] == t {
            return self.states[idx];
        }
        let k = idx.saturating_sub(1).min(self.steps.len() - 1);
        self.steps[k].eval(t)
    }

    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }
}

/// Adaptive Dormand–Prince 5(4) integrator.
#[derive(Debug, Clone, Copy)]
pub struct Dopri {
    pub tol: Tolerance,
    pub max_steps: usize,
    /// Upper bound on |h|; `None` means the span length.
    pub max_step: Option<f64>,
}

impl Default for Dopri {
    fn default() -> Self {
        Self {
            tol: Tolerance::default(),
            max_steps: 2_000_000,
            max_step: None,
        }
    }
}

impl Dopri {
    pub fn with_tolerance(tol: Tolerance) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    /// Integrates from `t0` to `t_end` (either direction), landing exactly
    /// on every time in `stops` that lies inside the span.
    pub fn solve<const N: usize, F>(
        &self,
        mut f: F,
        t0: f64,
        y0: State<N>,
        t_end: f64,
        stops: &[f64],
    ) -> Result<Solution<N>>
    where
        F: FnMut(f64, &State<N>) -> State<N>,
    {
        let (sol, _) = self.run(&mut f, t0, y0, t_end, stops, None::<&mut fn(f64, &State<N>) -> f64>)?;
        Ok(sol)
    }

    /// Like [`solve`](Self::solve) but stops at the first upward zero of
    /// `event` (from negative to nonnegative), returning its time.
    pub fn solve_until<const N: usize, F, G>(
        &self,
        mut f: F,
        t0: f64,
        y0: State<N>,
        t_end: f64,
        mut event: G,
    ) -> Result<(Solution<N>, Option<f64>)>
    where
        F: FnMut(f64, &State<N>) -> State<N>,
        G: FnMut(f64, &State<N>) -> f64,
    {
        self.run(&mut f, t0, y0, t_end, &[], Some(&mut event))
    }

    fn run<const N: usize, F, G>(
        &self,
        f: &mut F,
        t0: f64,
        y0: State<N>,
        t_end: f64,
        stops: &[f64],
        mut event: Option<&mut G>,
    ) -> Result<(Solution<N>, Option<f64>)>
    where
        F: FnMut(f64, &State<N>) -> State<N>,
        G: FnMut(f64, &State<N>) -> f64,
    {
        let mut sol = Solution {
            times: vec![t0],
            states: vec![y0],
            steps: Vec::new(),
        };
        let span = t_end - t0;
        if span == 0.0 {
            return Ok((sol, None));
        }
        let dir = span.signum();
        let mut targets: Vec<f64> = stops
            .iter()
            .copied()
            .filter(|&s| (s - t0) * dir > 0.0 && (t_end - s) * dir > 0.0)
            .collect();
        targets.push(t_end);
        targets.sort_by(|a, b| ((a - t0) * dir).total_cmp(&((b - t0) * dir)));
        targets.dedup();

        let max_h = self.max_step.unwrap_or(span.abs()).min(span.abs());
        let mut t = t0;
        let mut y = y0;
        let mut k1 = f(t, &y);
        let mut h = dir * self.initial_step(f, t, &y, &k1, max_h);
        let mut g_prev = event.as_mut().map(|g| g(t, &y));
        let mut steps = 0usize;

        for &target in &targets {
            while (target - t) * dir > 0.0 {
                steps += 1;
                if steps > self.max_steps {
                    return Err(ModelError::Integration {
                        t,
                        reason: format!("exceeded {} steps", self.max_steps),
                    });
                }
                let remaining = target - t;
                let mut last = false;
                if (h.abs()) >= remaining.abs() * (1.0 - 1e-12) {
                    h = remaining;
                    last = true;
                }
                let step = dp_step(f, t, &y, &k1, h, self.tol);
                if !step.err.is_finite() {
                    h *= 0.25;
                    if h.abs() < 1e-15 * t.abs().max(1.0) {
                        return Err(ModelError::Integration {
                            t,
                            reason: "non-finite derivative".into(),
                        });
                    }
                    continue;
                }
                if step.err <= 1.0 {
                    let t_new = if last { target } else { t + h };
                    if let (Some(g), Some(gp)) = (event.as_mut(), g_prev) {
                        let g_new = g(t_new, &step.y_new);
                        if gp < 0.0 && g_new >= 0.0 {
                            let (te, ye) = locate_event(f, &mut **g, t, &y, &k1, h, gp, g_new);
                            let partial = dp_step(f, t, &y, &k1, te - t, self.tol);
                            sol.steps.push(DenseStep {
                                t,
                                h: te - t,
                                coef: partial.dense,
                            });
                            sol.times.push(te);
                            sol.states.push(ye);
                            return Ok((sol, Some(te)));
                        }
                        g_prev = Some(g_new);
                    }
                    sol.steps.push(DenseStep {
                        t,
                        h,
                        coef: step.dense,
                    });
                    t = t_new;
                    y = step.y_new;
                    k1 = step.f_new;
                    sol.times.push(t);
                    sol.states.push(y);
                    let fac = (0.9 * step.err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
                    h = dir * (h.abs() * fac).min(max_h);
                } else {
                    let fac = (0.9 * step.err.powf(-0.2)).clamp(0.1, 1.0);
                    h *= fac;
                    if h.abs() < 1e-15 * t.abs().max(1.0) {
                        return Err(ModelError::Integration {
                            t,
                            reason: "step size underflow".into(),
                        });
                    }
                }
            }
        }
        Ok((sol, None))
    }

    fn initial_step<const N: usize, F>(
        &self,
        f: &mut F,
        t: f64,
        y: &State<N>,
        k1: &State<N>,
        max_h: f64,
    ) -> f64
    where
        F: FnMut(f64, &State<N>) -> State<N>,
    {
        let scale = |v: f64| self.tol.abs + self.tol.rel * v.abs();
        let d0 = norm(y.iter().map(|&v| v / scale(v)));
        let d1 = norm(y.iter().zip(k1).map(|(&v, &k)| k / scale(v)));
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(max_h);
        let y1 = axpy(y, h0, &[(1.0, k1)]);
        let k2 = f(t + h0, &y1);
        let d2 = norm(y.iter().zip(k1.iter().zip(&k2)).map(|(&v, (&a, &b))| (b - a) / scale(v))) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(max_h).max(1e-12 * max_h)
    }
}

fn norm(it: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    (sum / n.max(1) as f64).sqrt()
}

/// Finds the event time inside an accepted step by bracketing on fresh
/// single steps of shortened length, each accurate to the step's own order.
#[allow(clippy::too_many_arguments)]
fn locate_event<const N: usize, F, G>(
    f: &mut F,
    g: &mut G,
    t: f64,
    y: &State<N>,
    k1: &State<N>,
    h: f64,
    g_lo: f64,
    g_hi: f64,
) -> (f64, State<N>)
where
    F: FnMut(f64, &State<N>) -> State<N>,
    G: FnMut(f64, &State<N>) -> f64,
{
    let tol = Tolerance::default();
    let mut lo = 0.0;
    let mut hi = h;
    let (mut glo, mut ghi) = (g_lo, g_hi);
    let mut side = 0i32;
    let mut best = (h, dp_step(f, t, y, k1, h, tol).y_new);
    for _ in 0..200 {
        // Illinois-modified regula falsi
        let mut s = lo + (hi - lo) * (glo / (glo - ghi));
        if !(s > lo.min(hi) && s < lo.max(hi)) {
            s = 0.5 * (lo + hi);
        }
        let ys = dp_step(f, t, y, k1, s, tol).y_new;
        let gs = g(t + s, &ys);
        if gs >= 0.0 {
            hi = s;
            ghi = gs;
            best = (s, ys);
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        } else {
            lo = s;
            glo = gs;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        }
        if (hi - lo).abs() <= 4.0 * f64::EPSILON * (t.abs() + h.abs()).max(1e-300) || gs == 0.0 {
            break;
        }
    }
    (t + best.0, best.1)
}
