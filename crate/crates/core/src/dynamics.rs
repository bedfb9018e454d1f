//! Forward simulation of weighted point masses.
//!
//! Each mass carries an age `x1`, a maturity `x2` and a weight `x3`. The
//! maturity follows the closed-form flow, the weight grows at rate `cs`
//! until the maturity first reaches `ys` and is frozen afterwards.

use crate::control::Control;
use crate::error::{ModelError, Result};
use crate::integrator::{Dopri, Solution};
use crate::params::ModelParams;
use crate::riccati::MaturityPath;

/// Initial state of one mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl Particle {
    pub fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Self { x1, x2, x3 }
    }
}

/// Masses ordered by strictly increasing initial maturity.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    params: ModelParams,
    particles: Vec<Particle>,
}

impl Ensemble {
    pub fn new(params: ModelParams, particles: Vec<Particle>) -> Result<Self> {
        params.validate()?;
        if particles.is_empty() {
            return Err(ModelError::InvalidEnsemble("no particles".into()));
        }
        let ybar = params.asymptotic_maturity();
        for (k, p) in particles.iter().enumerate() {
            if !(p.x1.is_finite() && p.x2.is_finite() && p.x3.is_finite()) {
                return Err(ModelError::InvalidEnsemble(format!("particle {k} is not finite")));
            }
            if !(p.x3 > 0.0) {
                return Err(ModelError::InvalidEnsemble(format!(
                    "particle {k} has nonpositive weight {}",
                    p.x3
                )));
            }
            if !(p.x2 >= 0.0 && p.x2 < ybar) {
                return Err(ModelError::InvalidEnsemble(format!(
                    "particle {k} has maturity {} outside [0, {ybar})",
                    p.x2
                )));
            }
        }
        if let Some(k) = particles.windows(2).position(|p| !(p[1].x2 > p[0].x2)) {
            return Err(ModelError::InvalidEnsemble(format!(
                "initial maturities must be strictly increasing (particles {k} and {}); merge equal ones",
                k + 1
            )));
        }
        Ok(Self { params, particles })
    }

    pub fn single(params: ModelParams, particle: Particle) -> Result<Self> {
        Self::new(params, vec![particle])
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.particles.iter().map(|p| p.x3).sum()
    }

    /// Same masses under different parameters.
    pub fn with_params(&self, params: ModelParams) -> Result<Self> {
        Self::new(params, self.particles.clone())
    }

    /// Multiplies every initial weight by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let particles = self
            .particles
            .iter()
            .map(|p| Particle { x3: p.x3 * factor, ..*p })
            .collect();
        Self::new(self.params, particles)
    }
}

/// Semi-analytic trajectory of an ensemble; every state query is exact up to
/// rounding.
#[derive(Debug, Clone)]
pub struct Trajectory {
    params: ModelParams,
    control: Control,
    initial: Vec<Particle>,
    paths: Vec<MaturityPath>,
    exits: Vec<f64>,
}

/// Runs the hybrid forward dynamics. The control must cover `[t0, t1]`.
pub fn simulate(ens: &Ensemble, control: &Control) -> Result<Trajectory> {
    let params = *ens.params();
    control.check_domain(&params)?;
    let mut paths = Vec::with_capacity(ens.len());
    let mut exits = Vec::with_capacity(ens.len());
    for p in ens.particles() {
        let path = MaturityPath::new(&params, p.x2, control);
        let exit = if p.x2 >= params.ys {
            params.t0
        } else {
            path.first_crossing(params.ys)
                .unwrap_or_else(|| params.no_exit_sentinel())
        };
        paths.push(path);
        exits.push(exit);
    }
    Ok(Trajectory {
        params,
        control: control.clone(),
        initial: ens.particles().to_vec(),
        paths,
        exits,
    })
}

impl Trajectory {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn control(&self) -> &Control {
        &self.control
    }

    pub fn len(&self) -> usize {
        self.initial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.initial.is_empty()
    }

    pub fn initial(&self) -> &[Particle] {
        &self.initial
    }

    pub fn path(&self, k: usize) -> &MaturityPath {
        &self.paths[k]
    }

    /// Exit times, with the sentinel `t1 + 1` for masses that never exit.
    pub fn exit_times(&self) -> &[f64] {
        &self.exits
    }

    pub fn exited(&self, k: usize) -> bool {
        self.exits[k] <= self.params.t1
    }

    pub fn age(&self, k: usize, t: f64) -> f64 {
        self.initial[k].x1 + (t - self.params.t0)
    }

    pub fn maturity(&self, k: usize, t: f64) -> f64 {
        self.paths[k].value(t)
    }

    /// Log-growth `cs (min(t, exit) - t0)` of the weight.
    pub fn log_growth(&self, k: usize, t: f64) -> f64 {
        self.params.cs * (t.min(self.exits[k]) - self.params.t0).max(0.0)
    }

    pub fn mass(&self, k: usize, t: f64) -> f64 {
        self.initial[k].x3 * self.log_growth(k, t).exp()
    }

    pub fn state(&self, k: usize, t: f64) -> [f64; 3] {
        [self.age(k, t), self.maturity(k, t), self.mass(k, t)]
    }

    /// `M(t) = sum_k x2 x3`.
    pub fn maturity_moment(&self, t: f64) -> f64 {
        (0..self.len()).map(|k| self.maturity(k, t) * self.mass(k, t)).sum()
    }

    /// `M(tb) - M(ta)` assembled from per-mass increments, so that tiny
    /// changes near saturation are not lost to cancellation.
    pub fn moment_increment(&self, ta: f64, tb: f64) -> f64 {
        (0..self.len())
            .map(|k| {
                let dy = self.paths[k].increment(ta, tb);
                let m_a = self.mass(k, ta);
                let dm = m_a * (self.log_growth(k, tb) - self.log_growth(k, ta)).exp_m1();
                dy * (m_a + dm) + self.maturity(k, ta) * dm
            })
            .sum()
    }

    /// `J = -sum_k x2(t1) x3(t1)`.
    pub fn cost(&self) -> f64 {
        -self.maturity_moment(self.params.t1)
    }

    /// Uniform grid of `n >= 2` times over `[t0, t1]`.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        uniform_grid(self.params.t0, self.params.t1, n)
    }

    /// The states of all masses at time `t`.
    pub fn snapshot(&self, t: f64) -> Vec<[f64; 3]> {
        (0..self.len()).map(|k| self.state(k, t)).collect()
    }
}

pub(crate) fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let h = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|j| if j == n - 1 { b } else { a + h * j as f64 })
        .collect()
}

/// Terminal cost of the ensemble under `control`.
pub fn cost_j(ens: &Ensemble, control: &Control) -> Result<f64> {
    Ok(simulate(ens, control)?.cost())
}

/// Running-cost density `f0 = -((a + b u) x3 + c x2 x3)`, the negative time
/// derivative of `x2 x3`.
pub fn running_cost(params: &ModelParams, x: &[f64; 3], u: f64, gain: f64) -> f64 {
    -(params.velocity(x[1], u) * x[2] + gain * x[1] * x[2])
}

/// The cost written as `sum_k int f0 dt - sum_k x2(t0) x3(t0)`, with the
/// integral evaluated by the adaptive integrator along the exact trajectory.
pub fn cost_running_form(traj: &Trajectory, solver: &Dopri) -> Result<f64> {
    let p = traj.params;
    let mut total = 0.0;
    for k in 0..traj.len() {
        let mut stops: Vec<f64> = traj.control.switches().to_vec();
        if traj.exited(k) {
            stops.push(traj.exits[k]);
        }
        stops.sort_by(f64::total_cmp);
        let mut acc = 0.0;
        let mut t_prev = p.t0;
        for &t_next in stops.iter().chain(std::iter::once(&p.t1)) {
            if t_next <= t_prev {
                continue;
            }
            let mid = 0.5 * (t_prev + t_next);
            let u = traj.control.value_at(mid);
            let gain = if mid < traj.exits[k] { p.cs } else { 0.0 };
            let sol = solver.solve(
                |t, _: &[f64; 1]| [running_cost(&p, &traj.state(k, t), u, gain)],
                t_prev,
                [0.0],
                t_next,
                &[],
            )?;
            acc += sol.last()[0];
            t_prev = t_next;
        }
        let x0 = traj.initial[k];
        total += acc - x0.x2 * x0.x3;
    }
    Ok(total)
}

/// Trajectory of one mass from the adaptive integrator, with the crossing
/// located by event detection.
#[derive(Debug, Clone)]
pub struct IntegratedParticle {
    pieces: Vec<Solution<3>>,
    pub exit: Option<f64>,
}

impl IntegratedParticle {
    pub fn state(&self, t: f64) -> [f64; 3] {
        let k = self
            .pieces
            .partition_point(|s| s.t_end() < t)
            .min(self.pieces.len() - 1);
        self.pieces[k].at(t)
    }

    pub fn last(&self) -> [f64; 3] {
        self.pieces.last().unwrap().last()
    }
}

/// Integrates the hybrid vector field of each mass numerically. Independent
/// of the closed forms; used to cross-check [`simulate`].
pub fn simulate_integrated(
    ens: &Ensemble,
    control: &Control,
    solver: &Dopri,
) -> Result<Vec<IntegratedParticle>> {
    let p = *ens.params();
    control.check_domain(&p)?;
    ens.particles()
        .iter()
        .map(|part| {
            let mut x = [part.x1, part.x2, part.x3];
            let mut inside = part.x2 < p.ys;
            let mut exit = None;
            let mut pieces = Vec::new();
            for seg in control.segments() {
                let u = seg.u;
                let mut t = seg.start;
                if inside {
                    let (sol, hit) = solver.solve_until(
                        |_, s: &[f64; 3]| [1.0, p.velocity(s[1], u), p.cs * s[2]],
                        t,
                        x,
                        seg.end,
                        |_, s: &[f64; 3]| s[1] - p.ys,
                    )?;
                    x = sol.last();
                    t = sol.t_end();
                    pieces.push(sol);
                    if let Some(te) = hit {
                        inside = false;
                        exit = Some(te);
                        x[1] = p.ys;
                    }
                }
                if !inside && t < seg.end {
                    let sol = solver.solve(
                        |_, s: &[f64; 3]| [1.0, p.velocity(s[1], u), 0.0],
                        t,
                        x,
                        seg.end,
                        &[],
                    )?;
                    x = sol.last();
                    pieces.push(sol);
                }
            }
            Ok(IntegratedParticle { pieces, exit })
        })
        .collect()
}
