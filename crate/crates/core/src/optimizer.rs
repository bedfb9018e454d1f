//! Search over single-switch bang-bang controls.
//!
//! `J(BangBang(t*))` is smooth in `t*` between the exit times of the masses
//! under `u = w` and kinked at them, so the sweep tags every grid point with
//! the number of exits that precede it and refinement works per segment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::control::Control;
use crate::dynamics::{simulate, uniform_grid, Ensemble};
use crate::error::{ModelError, Result};
use crate::measure::{cost_measure, InitialMeasure};
use crate::model::exit_time;
use crate::params::ModelParams;

/// Default sweep resolution.
pub const DEFAULT_GRID: usize = 1024;
/// Costs closer than this are ties.
pub const TIE_TOL: f64 = 1e-9;
/// Default seed of the random falsification trials.
pub const DEFAULT_SEED: u64 = 20_240_917;

/// Problem whose cost is minimized: a finite ensemble or an initial measure.
#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Particles(Ensemble),
    Measure {
        params: ModelParams,
        rho0: InitialMeasure,
    },
}

impl Problem {
    pub fn params(&self) -> &ModelParams {
        match self {
            Self::Particles(e) => e.params(),
            Self::Measure { params, .. } => params,
        }
    }

    pub fn cost(&self, control: &Control) -> Result<f64> {
        match self {
            Self::Particles(e) => Ok(simulate(e, control)?.cost()),
            Self::Measure { params, rho0 } => Ok(cost_measure(params, rho0, control)?.cost),
        }
    }

    pub fn bang_bang_cost(&self, tstar: f64) -> Result<f64> {
        self.cost(&Control::bang_bang(self.params(), tstar))
    }

    /// Exit times under `u = w` inside `(t0, t1]`, ascending. Density
    /// measures have a continuum of them and no kinks; none are returned.
    pub fn exit_boundaries(&self) -> Result<Vec<f64>> {
        let p = *self.params();
        let starts: Vec<f64> = match self {
            Self::Particles(e) => e.particles().iter().map(|q| q.x2).collect(),
            Self::Measure {
                rho0: InitialMeasure::Particles(pts),
                ..
            } => pts.iter().map(|q| q.y).collect(),
            Self::Measure { .. } => Vec::new(),
        };
        let slow = Control::constant(&p, p.w)?;
        let mut out = Vec::new();
        for y in starts {
            let e = exit_time(&p, y.min(p.ys), &slow)?;
            if e > p.t0 && e <= p.t1 {
                out.push(e);
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        Ok(out)
    }
}

/// Bang-bang costs over a uniform grid of switching times.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Number of exit boundaries at or before each grid point.
    pub segment_index: Vec<usize>,
    pub exits: Vec<f64>,
    pub argmin: usize,
    pub hypotheses: bool,
    pub t0: f64,
    pub t1: f64,
}

impl SweepResult {
    pub fn t_argmin(&self) -> f64 {
        self.grid[self.argmin]
    }

    pub fn j_min(&self) -> f64 {
        self.values[self.argmin]
    }

    pub fn cell(&self) -> f64 {
        (self.t1 - self.t0) / (self.grid.len() - 1) as f64
    }

    /// Number of distinct segments visited by the grid.
    pub fn segment_count(&self) -> usize {
        let mut idx = self.segment_index.clone();
        idx.dedup();
        idx.len()
    }

    /// `[start, end]` of every segment.
    pub fn segments(&self) -> Vec<(f64, f64)> {
        let mut b = vec![self.t0];
        b.extend(self.exits.iter().copied().filter(|&e| e > self.t0 && e < self.t1));
        b.push(self.t1);
        b.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

fn segment_of(exits: &[f64], t: f64) -> usize {
    exits.partition_point(|&e| e <= t)
}

/// Evaluates `J(BangBang(t*))` on `n` uniformly spaced switching times
/// covering `[t0, t1]`. The argmin is the first minimal grid point.
pub fn sweep(problem: &Problem, n: usize) -> Result<SweepResult> {
    let p = *problem.params();
    let grid = uniform_grid(p.t0, p.t1, n);
    let values = grid
        .par_iter()
        .map(|&t| problem.bang_bang_cost(t))
        .collect::<Result<Vec<_>>>()?;
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(ModelError::Consistency(format!("non-finite cost {v}")));
    }
    let exits = problem.exit_boundaries()?;
    let segment_index = grid.iter().map(|&t| segment_of(&exits, t)).collect();
    Ok(SweepResult {
        argmin: argmin(&values),
        grid,
        values,
        segment_index,
        exits,
        hypotheses: p.assumptions().sufficient_conditions(),
        t0: p.t0,
        t1: p.t1,
    })
}

/// Index of the first smallest value.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = k;
        }
    }
    best
}

/// Golden-section search for a minimum of `f` on `[a, b]`; stops when the
/// bracket is shorter than `tol`. On ties the left point is kept.
pub fn golden_section_min(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (a, b);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        if b - a <= f64::EPSILON * a.abs().max(b.abs()).max(1.0) {
            break;
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    [(c, fc), (x, fx), (d, fd)]
        .into_iter()
        .fold((x, fx), |best, cand| if cand.1 < best.1 { cand } else { best })
}

/// A refined switching time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub tstar: f64,
    pub cost: f64,
    pub segment: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refined {
    pub best: Candidate,
    /// Every candidate within [`TIE_TOL`] of the best, ascending in time.
    pub ties: Vec<Candidate>,
    /// No sampled neighbour at distance `1e-6` is lower.
    pub local_min: bool,
}

/// Refines the sweep argmin with an arbitrary objective `f`; used with the
/// bang-bang cost by [`refine`].
pub fn refine_with(sweep: &SweepResult, f: impl Fn(f64) -> f64 + Sync, tol: f64) -> Refined {
    let h = sweep.cell();
    let mut cands: Vec<Candidate> = sweep
        .segments()
        .into_par_iter()
        .enumerate()
        .map(|(seg, (lo, hi))| {
            // best grid point of this segment
            let mut best_t = lo;
            let mut best_v = f64::INFINITY;
            for (k, &t) in sweep.grid.iter().enumerate() {
                if t >= lo && t <= hi && sweep.values[k] < best_v {
                    best_v = sweep.values[k];
                    best_t = t;
                }
            }
            let a = (best_t - h).max(lo);
            let b = (best_t + h).min(hi);
            let mut best = if b > a {
                let (x, v) = golden_section_min(&f, a, b, tol);
                (x, v)
            } else {
                (best_t, f(best_t))
            };
            for end in [lo, hi] {
                let v = f(end);
                if v < best.1 || (v == best.1 && end < best.0) {
                    best = (end, v);
                }
            }
            Candidate {
                tstar: best.0,
                cost: best.1,
                segment: seg,
            }
        })
        .collect();
    cands.sort_by(|a, b| a.tstar.total_cmp(&b.tstar));
    let best = cands
        .iter()
        .copied()
        .fold(cands[0], |acc, c| if c.cost < acc.cost { c } else { acc });
    let mut ties: Vec<Candidate> = cands
        .iter()
        .copied()
        .filter(|c| c.cost <= best.cost + TIE_TOL)
        .collect();
    ties.dedup_by(|a, b| (a.tstar - b.tstar).abs() <= 10.0 * tol);
    let delta = 1e-6;
    let local_min = [best.tstar - delta, best.tstar + delta]
        .into_iter()
        .filter(|&t| t >= sweep.t0 && t <= sweep.t1)
        .all(|t| f(t) >= best.cost);
    Refined {
        best,
        ties,
        local_min,
    }
}

/// Refines the switching time to `1e-8` per segment.
pub fn refine(problem: &Problem, sweep: &SweepResult) -> Refined {
    refine_with(
        sweep,
        |t| problem.bang_bang_cost(t).unwrap_or(f64::INFINITY),
        1e-9,
    )
}

/// Result of the mirror-family sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReverseCheck {
    pub best_reverse: f64,
    pub best_reverse_t: f64,
    pub forward_min: f64,
    /// The reverse family does not beat the forward optimum.
    pub pass: bool,
}

/// Sweeps the `1 -> w` family once and compares it with `j_min`.
pub fn reverse_family_check(problem: &Problem, n: usize, j_min: f64) -> Result<ReverseCheck> {
    let p = *problem.params();
    let grid = uniform_grid(p.t0, p.t1, n);
    let values = grid
        .par_iter()
        .map(|&t| problem.cost(&Control::reverse_bang_bang(&p, t)))
        .collect::<Result<Vec<_>>>()?;
    let k = argmin(&values);
    Ok(ReverseCheck {
        best_reverse: values[k],
        best_reverse_t: grid[k],
        forward_min: j_min,
        pass: values[k] >= j_min - TIE_TOL,
    })
}

/// Random admissible step control with at most `max_segments` pieces.
pub fn random_step_control(params: &ModelParams, rng: &mut impl Rng, max_segments: usize) -> Control {
    let k = rng.gen_range(1..=max_segments.max(1));
    let mut cuts: Vec<f64> = (0..k - 1)
        .map(|_| rng.gen_range(params.t0..params.t1))
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut bps = vec![params.t0];
    bps.extend(cuts.into_iter().filter(|&c| c > params.t0));
    bps.push(params.t1);
    let extreme = rng.gen_bool(0.5);
    let vals = (0..bps.len() - 1)
        .map(|_| {
            if extreme {
                if rng.gen_bool(0.5) {
                    params.w
                } else {
                    1.0
                }
            } else {
                rng.gen_range(params.w..=1.0)
            }
        })
        .collect();
    Control::new(params, bps, vals).expect("sampled control is admissible")
}

/// Summary of the random-control falsification run.
#[derive(Debug, Clone, PartialEq)]
pub struct FalsifyReport {
    pub seed: u64,
    pub trials: usize,
    pub j_min: f64,
    pub violations: usize,
    /// Smallest `J(random) - J_min`.
    pub min_margin: f64,
    /// Margins at the 0, 10, 50, 90 and 100 percent quantiles.
    pub quantiles: [f64; 5],
}

impl FalsifyReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Samples `trials` step controls (at most 8 pieces) and counts those that
/// beat `j_min` by more than [`TIE_TOL`]. Trials 0 and 1 are the constants
/// `1` and `w`. Trial `k` draws from stream `k` of the seeded generator.
pub fn falsify_with_step_controls(
    problem: &Problem,
    trials: usize,
    seed: u64,
    j_min: f64,
) -> Result<FalsifyReport> {
    let p = *problem.params();
    let mut margins = (0..trials)
        .into_par_iter()
        .map(|k| {
            let u = match k {
                0 => Control::constant(&p, 1.0)?,
                1 => Control::constant(&p, p.w)?,
                _ => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(k as u64);
                    random_step_control(&p, &mut rng, 8)
                }
            };
            Ok(problem.cost(&u)? - j_min)
        })
        .collect::<Result<Vec<f64>>>()?;
    let violations = margins.iter().filter(|&&m| m < -TIE_TOL).count();
    margins.sort_by(f64::total_cmp);
    let q = |f: f64| -> f64 {
        if margins.is_empty() {
            f64::NAN
        } else {
            margins[((margins.len() - 1) as f64 * f).round() as usize]
        }
    };
    Ok(FalsifyReport {
        seed,
        trials,
        j_min,
        violations,
        min_margin: q(0.0),
        quantiles: [q(0.0), q(0.1), q(0.5), q(0.9), q(1.0)],
    })
}
