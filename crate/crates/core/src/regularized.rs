//! Mollified gain and the regularized control problems.
//!
//! The indicator of `[0, ys)` in the gain is replaced by
//! `chi_i(y) = int_{y - ys}^inf w_i`, with the polynomial kernel
//! `w_i(s) = 30 i sigma^2 (1 - sigma)^2`, `sigma = -s i`, on `[-1/i, 0]`.
//! Its primitive is `P(sigma) = 10 sigma^3 - 15 sigma^4 + 6 sigma^5`, so
//! `chi_i(y) = P(clamp((ys - y) i, 0, 1))`.
//!
//! The dynamics become smooth, the costates have no jump, and across the
//! layer `ys - 1/i <= x2 <= ys` the increment of `psi2` splits into a part
//! `A(i)` that vanishes and a part `B(i)` that lands in the jump bracket.

use rayon::prelude::*;

use crate::adjoint::backward_adjoint;
use crate::control::Control;
use crate::dynamics::{simulate, Ensemble, Particle};
use crate::error::{ModelError, Result};
use crate::integrator::{Dopri, Solution};
use crate::params::ModelParams;
use crate::quadrature::GaussLegendre;
use crate::riccati::MaturityPath;

/// Largest supported mollifier index.
pub const MAX_INDEX: f64 = 1e6;

/// Polynomial mollifier of index `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mollifier {
    i: f64,
}

fn smoothstep(sigma: f64) -> f64 {
    let s = sigma.clamp(0.0, 1.0);
    s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
}

fn bump(sigma: f64) -> f64 {
    if (0.0..=1.0).contains(&sigma) {
        30.0 * sigma * sigma * (1.0 - sigma) * (1.0 - sigma)
    } else {
        0.0
    }
}

impl Mollifier {
    pub fn new(i: f64) -> Result<Self> {
        if !(1.0..=MAX_INDEX).contains(&i) {
            return Err(ModelError::InvalidParams {
                name: "i",
                reason: format!("mollifier index {i} outside [1, {MAX_INDEX}]"),
            });
        }
        Ok(Self { i })
    }

    pub fn index(&self) -> f64 {
        self.i
    }

    /// Kernel `w_i(s)`, supported on `[-1/i, 0]`.
    pub fn kernel(&self, s: f64) -> f64 {
        self.i * bump(-s * self.i)
    }

    /// `chi_i(y)`: 1 below `ys - 1/i`, 0 from `ys` on.
    pub fn chi(&self, ys: f64, y: f64) -> f64 {
        smoothstep((ys - y) * self.i)
    }

    /// `d chi_i / dy`, nonpositive.
    pub fn chi_prime(&self, ys: f64, y: f64) -> f64 {
        -self.i * bump((ys - y) * self.i)
    }

    /// `max |w_i'|`; equals `C i^2` with `C = 30 max |d/ds (s^2 (1 - s)^2)|`.
    pub fn kernel_slope_bound(&self) -> f64 {
        // d/ds s^2(1-s)^2 = 2s(1-s)(1-2s), extremal at s = (3 -+ sqrt 3)/6
        let s = (3.0 - 3f64.sqrt()) / 6.0;
        30.0 * (2.0 * s * (1.0 - s) * (1.0 - 2.0 * s)).abs() * self.i * self.i
    }
}

/// `chi_i(y)` for the given parameters.
pub fn smooth_gain(i: f64, params: &ModelParams, y: f64) -> Result<f64> {
    Ok(Mollifier::new(i)?.chi(params.ys, y))
}

/// A mollified problem: ensemble, index `i` and the reference switching
/// time of the smooth control `z_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedProblem {
    pub ensemble: Ensemble,
    pub mollifier: Mollifier,
    /// `z_i` ramps from `w` to `1` over a window of width `1/i` centred here.
    pub reference_switch: f64,
}

impl RegularizedProblem {
    pub fn new(ensemble: Ensemble, i: f64, reference_switch: f64) -> Result<Self> {
        Ok(Self {
            ensemble,
            mollifier: Mollifier::new(i)?,
            reference_switch,
        })
    }

    pub fn params(&self) -> &ModelParams {
        self.ensemble.params()
    }

    /// `1 / sqrt(i)`.
    pub fn penalty_weight(&self) -> f64 {
        1.0 / self.mollifier.i.sqrt()
    }

    /// Smooth reference control `z_i(t)`.
    pub fn z(&self, t: f64) -> f64 {
        let w = self.params().w;
        let half = 0.5 / self.mollifier.i;
        let s = ((t - self.reference_switch + half) / (2.0 * half)).clamp(0.0, 1.0);
        w + (1.0 - w) * s
    }

    /// `int |u - z_i|^2 dt`, exact on the pieces where both are polynomial.
    pub fn penalty_integral(&self, control: &Control) -> f64 {
        let p = self.params();
        let half = 0.5 / self.mollifier.i;
        let mut cuts: Vec<f64> = control.breakpoints().to_vec();
        cuts.extend([self.reference_switch - half, self.reference_switch + half]);
        cuts.retain(|&t| t >= p.t0 && t <= p.t1);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let u = control.value_at(0.5 * (w[0] + w[1]));
            let g = GaussLegendre::on(2, w[0], w[1]);
            total += g.integrate(|t| (u - self.z(t)).powi(2));
        }
        total
    }
}

/// Times at which a maturity path reaches `ys - 1/i` and `ys`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub t_bar: f64,
    pub t_hat: f64,
}

impl Layer {
    pub fn width(&self) -> f64 {
        self.t_hat - self.t_bar
    }
}

/// Trajectory of the regularized dynamics.
#[derive(Debug, Clone)]
pub struct RegularizedTrajectory {
    params: ModelParams,
    control: Control,
    mollifier: Mollifier,
    initial: Vec<Particle>,
    paths: Vec<MaturityPath>,
    log_mass: Vec<Vec<(f64, Solution<1>)>>,
    layers: Vec<Option<Layer>>,
}

fn cut_points(p: &ModelParams, control: &Control, extra: &[f64]) -> Vec<f64> {
    let mut cuts: Vec<f64> = control.switches().to_vec();
    cuts.extend(extra.iter().copied().filter(|&t| t > p.t0 && t < p.t1));
    cuts.push(p.t0);
    cuts.push(p.t1);
    cuts.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(cuts.len());
    for t in cuts {
        match out.last() {
            Some(&last) if t - last <= 1e-12 * t.abs().max(1.0) => {
                if t == p.t1 {
                    *out.last_mut().unwrap() = t;
                }
            }
            _ => out.push(t),
        }
    }
    out
}

fn piece_lookup<T>(pieces: &[(f64, T)], t: f64) -> &T {
    let k = pieces.partition_point(|(lo, _)| *lo <= t);
    &pieces[k.saturating_sub(1)].1
}

/// Solves `x2' = a + b u`, `x3' = cs chi_i(x2) x3` for every mass.
pub fn simulate_regularized(
    problem: &RegularizedProblem,
    control: &Control,
    solver: &Dopri,
) -> Result<RegularizedTrajectory> {
    let p = *problem.params();
    control.check_domain(&p)?;
    let moll = problem.mollifier;
    let inner = p.ys - 1.0 / moll.i;
    let results = problem
        .ensemble
        .particles()
        .par_iter()
        .map(|part| {
            let path = MaturityPath::new(&p, part.x2, control);
            let t_bar = if part.x2 >= inner { Some(p.t0) } else { path.first_crossing(inner) };
            let t_hat = if part.x2 >= p.ys { Some(p.t0) } else { path.first_crossing(p.ys) };
            let layer = match (t_bar, t_hat) {
                (Some(a), Some(b)) => Some(Layer { t_bar: a, t_hat: b }),
                _ => None,
            };
            let extra: Vec<f64> = [t_bar, t_hat].into_iter().flatten().collect();
            let cuts = cut_points(&p, control, &extra);
            let mut pieces = Vec::with_capacity(cuts.len());
            let mut l = 0.0;
            for w in cuts.windows(2) {
                let sol = solver.solve(
                    |t, _: &[f64; 1]| [p.cs * moll.chi(p.ys, path.value(t))],
                    w[0],
                    [l],
                    w[1],
                    &[],
                )?;
                l = sol.last()[0];
                pieces.push((w[0], sol));
            }
            Ok((path, pieces, layer))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut paths = Vec::new();
    let mut log_mass = Vec::new();
    let mut layers = Vec::new();
    for (path, pieces, layer) in results {
        paths.push(path);
        log_mass.push(pieces);
        layers.push(layer);
    }
    Ok(RegularizedTrajectory {
        params: p,
        control: control.clone(),
        mollifier: moll,
        initial: problem.ensemble.particles().to_vec(),
        paths,
        log_mass,
        layers,
    })
}

impl RegularizedTrajectory {
    pub fn len(&self) -> usize {
        self.initial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.initial.is_empty()
    }

    pub fn maturity(&self, k: usize, t: f64) -> f64 {
        self.paths[k].value(t)
    }

    pub fn mass(&self, k: usize, t: f64) -> f64 {
        self.initial[k].x3 * piece_lookup(&self.log_mass[k], t).at(t)[0].exp()
    }

    pub fn state(&self, k: usize, t: f64) -> [f64; 3] {
        [
            self.initial[k].x1 + t - self.params.t0,
            self.maturity(k, t),
            self.mass(k, t),
        ]
    }

    pub fn layer(&self, k: usize) -> Option<Layer> {
        self.layers[k]
    }

    /// `-sum_k x2(t1) x3(t1)`.
    pub fn terminal_cost(&self) -> f64 {
        let t1 = self.params.t1;
        -(0..self.len())
            .map(|k| self.maturity(k, t1) * self.mass(k, t1))
            .sum::<f64>()
    }
}

/// `J_i(u) = -sum x2(t1) x3(t1) + int |u - z_i|^2 / sqrt(i)`.
pub fn penalized_cost(problem: &RegularizedProblem, traj: &RegularizedTrajectory) -> f64 {
    traj.terminal_cost() + problem.penalty_weight() * problem.penalty_integral(&traj.control)
}

/// Increment of `psi2` across the layer and its two parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSplit {
    pub layer: Layer,
    /// `psi2(t_hat) - psi2(t_bar)`.
    pub delta: f64,
    pub a: f64,
    pub b: f64,
}

/// Costates of one mass in the regularized problem.
#[derive(Debug, Clone)]
pub struct RegularizedParticleAdjoint {
    pieces: Vec<(f64, Solution<4>)>,
    split: Option<LayerSplit>,
}

impl RegularizedParticleAdjoint {
    /// `x3 + psi2`.
    pub fn phi(&self, t: f64) -> f64 {
        piece_lookup(&self.pieces, t).at(t)[0]
    }

    /// `x2 + psi3`.
    pub fn g(&self, t: f64) -> f64 {
        piece_lookup(&self.pieces, t).at(t)[1]
    }

    pub fn split(&self) -> Option<LayerSplit> {
        self.split
    }
}

#[derive(Debug, Clone)]
pub struct RegularizedAdjoint {
    particles: Vec<RegularizedParticleAdjoint>,
}

impl RegularizedAdjoint {
    pub fn particle(&self, k: usize) -> &RegularizedParticleAdjoint {
        &self.particles[k]
    }

    pub fn psi1(&self, _k: usize, _t: f64) -> f64 {
        0.0
    }

    pub fn psi2(&self, traj: &RegularizedTrajectory, k: usize, t: f64) -> f64 {
        self.particles[k].phi(t) - traj.mass(k, t)
    }

    pub fn psi3(&self, traj: &RegularizedTrajectory, k: usize, t: f64) -> f64 {
        self.particles[k].g(t) - traj.maturity(k, t)
    }
}

/// Backward solve of the regularized costates from `psi(t1) = 0`.
///
/// Integrates `Phi = x3 + psi2` and `G = x2 + psi3`:
/// `Phi' = -v_y Phi - cs chi_i' x3 G`, `G' = -cs chi_i G`, together with the
/// running integrals of the `A(i)` and `B(i)` integrands over the layer.
pub fn adjoint_regularized(traj: &RegularizedTrajectory, solver: &Dopri) -> Result<RegularizedAdjoint> {
    let p = traj.params;
    let moll = traj.mollifier;
    let particles = (0..traj.len())
        .into_par_iter()
        .map(|k| {
            let layer = traj.layers[k];
            let extra: Vec<f64> = layer.map(|l| vec![l.t_bar, l.t_hat]).unwrap_or_default();
            let cuts = cut_points(&p, &traj.control, &extra);
            let in_layer = |lo: f64, hi: f64| match layer {
                Some(l) => lo >= l.t_bar - 1e-12 && hi <= l.t_hat + 1e-12 && l.t_hat > l.t_bar,
                None => false,
            };
            let t1 = p.t1;
            let mut state = [traj.mass(k, t1), traj.maturity(k, t1), 0.0, 0.0];
            let mut pieces = Vec::with_capacity(cuts.len());
            for w in cuts.windows(2).rev() {
                let (lo, hi) = (w[0], w[1]);
                let u = traj.control.value_at(0.5 * (lo + hi));
                let acc = in_layer(lo, hi);
                let sol = solver.solve(
                    |t, s: &[f64; 4]| {
                        let y = traj.maturity(k, t);
                        let x3 = traj.mass(k, t);
                        let chi = moll.chi(p.ys, y);
                        let chi_p = moll.chi_prime(p.ys, y);
                        let vy = p.velocity_dy(y, u);
                        let (qa, qb) = if acc {
                            (vy * s[0] + p.cs * chi * x3, p.cs * x3 * s[1] * chi_p)
                        } else {
                            (0.0, 0.0)
                        };
                        [-vy * s[0] - p.cs * chi_p * x3 * s[1], -p.cs * chi * s[1], qa, qb]
                    },
                    hi,
                    state,
                    lo,
                    &[],
                )?;
                state = sol.last();
                pieces.push((lo, sol));
            }
            pieces.reverse();
            let adj = RegularizedParticleAdjoint {
                pieces,
                split: None,
            };
            let split = layer.filter(|l| l.t_hat > l.t_bar).map(|l| {
                let psi2 = |t: f64| adj.phi(t) - traj.mass(k, t);
                let end = piece_lookup(&adj.pieces, l.t_bar).at(l.t_bar);
                LayerSplit {
                    layer: l,
                    delta: psi2(l.t_hat) - psi2(l.t_bar),
                    a: end[2],
                    b: end[3],
                }
            });
            Ok(RegularizedParticleAdjoint { split, ..adj })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegularizedAdjoint { particles })
}

/// One row of the mollifier convergence study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketRow {
    pub i: f64,
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    /// `delta` inside the bracket inflated by `10 / i`.
    pub inside: bool,
    pub layer_width: f64,
}

/// Layer increments of `psi2` for mass `k` along a schedule of indices,
/// compared with the jump bracket of the hybrid problem under the same
/// control.
pub fn jump_bracket_convergence(
    ens: &Ensemble,
    control: &Control,
    k: usize,
    schedule: &[f64],
    solver: &Dopri,
) -> Result<Vec<BracketRow>> {
    let p = *ens.params();
    if k >= ens.len() {
        return Err(ModelError::Consistency(format!("no particle {k}")));
    }
    let hybrid = simulate(ens, control)?;
    let hyb_adj = backward_adjoint(&hybrid, control, solver)?;
    let jump = hyb_adj.particle(k).jump().copied().ok_or_else(|| {
        ModelError::Consistency(format!("particle {k} does not cross the threshold"))
    })?;
    if !(jump.time > p.t0 && jump.time < p.t1) {
        return Err(ModelError::Consistency(format!(
            "crossing at {} is not interior to the horizon",
            jump.time
        )));
    }
    let (lo, hi) = jump.bracket;
    schedule
        .par_iter()
        .map(|&i| {
            let prob = RegularizedProblem::new(ens.clone(), i, jump.time)?;
            let traj = simulate_regularized(&prob, control, solver)?;
            let adj = adjoint_regularized(&traj, solver)?;
            let split = adj.particle(k).split().ok_or_else(|| {
                ModelError::Consistency(format!("particle {k} has no layer for i = {i}"))
            })?;
            let slack = 10.0 / i;
            Ok(BracketRow {
                i,
                a: split.a,
                b: split.b,
                delta: split.delta,
                bracket_lo: lo,
                bracket_hi: hi,
                inside: split.delta >= lo - slack && split.delta <= hi + slack,
                layer_width: split.layer.width(),
            })
        })
        .collect()
}

/// Least-squares slope of `log |y|` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| (x.ln(), y.abs().ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const EXIT_W: f64 = 1.160_909_576_912_811_5;

    fn single(cs: f64) -> Ensemble {
        Ensemble::single(ModelParams::standard(cs), Particle::new(0.0, 0.0, 1.0)).unwrap()
    }

    #[test]
    fn kernel_has_unit_mass_and_support() {
        for i in [1.0, 10.0, 1e3, 1e6] {
            let m = Mollifier::new(i).unwrap();
            let g = GaussLegendre::on(8, -1.0 / i, 0.0);
            assert_abs_diff_eq!(g.integrate(|s| m.kernel(s)), 1.0, epsilon = 1e-12);
            assert_eq!(m.kernel(1e-15), 0.0);
            assert_eq!(m.kernel(-1.0 / i - 1e-12), 0.0);
        }
    }

    #[test]
    fn chi_shape() {
        let m = Mollifier::new(100.0).unwrap();
        assert_eq!(m.chi(6.0, 5.0), 1.0);
        assert_eq!(m.chi(6.0, 6.0 - 0.01), 1.0);
        assert_eq!(m.chi(6.0, 6.0), 0.0);
        assert_eq!(m.chi(6.0, 7.0), 0.0);
        assert_abs_diff_eq!(m.chi(6.0, 5.995), 0.5, epsilon = 1e-12);
        let mut prev = 1.0;
        for j in 0..=200 {
            let y = 5.98 + 0.0001 * j as f64;
            let c = m.chi(6.0, y);
            assert!(c <= prev && (0.0..=1.0).contains(&c));
            prev = c;
            let h = 1e-7;
            let fd = (m.chi(6.0, y + h) - m.chi(6.0, y - h)) / (2.0 * h);
            assert!((fd - m.chi_prime(6.0, y)).abs() < 1e-3 * 100.0);
        }
        let far = Mollifier::new(1e6).unwrap();
        assert_eq!(far.chi(6.0, 5.9), 1.0);
    }

    #[test]
    fn slope_bound_holds() {
        let m = Mollifier::new(50.0).unwrap();
        let bound = m.kernel_slope_bound();
        for j in 1..1000 {
            let s = -(j as f64) / 1000.0 / 50.0;
            let h = 1e-9;
            let d = (m.kernel(s + h) - m.kernel(s - h)) / (2.0 * h);
            assert!(d.abs() <= bound * (1.0 + 1e-4));
        }
    }

    #[test]
    fn rejects_bad_index() {
        assert!(Mollifier::new(0.5).is_err());
        assert!(Mollifier::new(2e6).is_err());
    }

    #[test]
    fn large_index_matches_hybrid() {
        let ens = single(1.0);
        let p = *ens.params();
        let u = Control::bang_bang(&p, EXIT_W);
        let prob = RegularizedProblem::new(ens.clone(), 1e6, EXIT_W).unwrap();
        let reg = simulate_regularized(&prob, &u, &Dopri::default()).unwrap();
        let hyb = simulate(&ens, &u).unwrap();
        assert!((reg.mass(0, 17.0) - hyb.mass(0, 17.0)).abs() < 1e-4);
    }

    #[test]
    fn no_gain_is_hybrid() {
        let ens = single(0.0);
        let p = *ens.params();
        let u = Control::bang_bang(&p, 2.0);
        let prob = RegularizedProblem::new(ens.clone(), 100.0, 2.0).unwrap();
        let reg = simulate_regularized(&prob, &u, &Dopri::default()).unwrap();
        let hyb = simulate(&ens, &u).unwrap();
        for t in [0.0, 1.0, 17.0] {
            assert_eq!(reg.state(0, t), hyb.state(0, t));
        }
        let adj = adjoint_regularized(&reg, &Dopri::default()).unwrap();
        let hadj = backward_adjoint(&hyb, &u, &Dopri::default()).unwrap();
        for t in [0.0, 0.5, 1.5, 10.0] {
            assert!((adj.psi3(&reg, 0, t) - hadj.particle(0).psi3(t)).abs() < 1e-8);
            assert!((adj.psi2(&reg, 0, t) - hadj.particle(0).psi2(&hyb, 0, t)).abs() < 1e-8);
        }
    }

    #[test]
    fn above_threshold_mass_is_constant() {
        let p = ModelParams::standard(3.0);
        let ens = Ensemble::single(p, Particle::new(0.0, 6.5, 2.0)).unwrap();
        let prob = RegularizedProblem::new(ens, 10.0, 0.0).unwrap();
        let u = Control::constant(&p, 1.0).unwrap();
        let reg = simulate_regularized(&prob, &u, &Dopri::default()).unwrap();
        assert_eq!(reg.mass(0, 17.0), 2.0);
    }

    #[test]
    fn conserved_probe() {
        let ens = single(2.0);
        let p = *ens.params();
        let u = Control::bang_bang(&p, EXIT_W);
        let prob = RegularizedProblem::new(ens, 50.0, EXIT_W).unwrap();
        let reg = simulate_regularized(&prob, &u, &Dopri::default()).unwrap();
        let adj = adjoint_regularized(&reg, &Dopri::default()).unwrap();
        let m = prob.mollifier;
        let layer = reg.layer(0).unwrap();
        for t in [0.5, layer.t_bar + 0.3 * layer.width(), layer.t_bar + 0.8 * layer.width()] {
            let h = 1e-6 * layer.width();
            let g = |s: f64| adj.particle(0).g(s);
            let fd = (g(t + h) - g(t - h)) / (2.0 * h);
            let exact = -p.cs * m.chi(p.ys, reg.maturity(0, t)) * g(t);
            assert!((fd - exact).abs() <= 1e-5 * exact.abs(), "t={t} {fd} {exact}");
        }
    }

    #[test]
    fn layer_split_adds_up() {
        let ens = single(7.0);
        let p = *ens.params();
        let u = Control::bang_bang(&p, EXIT_W);
        let rows =
            jump_bracket_convergence(&ens, &u, 0, &[1e2, 1e3], &Dopri::default()).unwrap();
        for r in &rows {
            assert!((r.a + r.b - r.delta).abs() <= 1e-6 * r.delta.abs());
            assert!(r.a < 0.0);
            assert!(r.inside);
            let transit = GaussLegendre::on(8, p.ys - 1.0 / r.i, p.ys)
                .integrate(|y| 1.0 / p.velocity(y, 0.5));
            assert_abs_diff_eq!(r.layer_width, transit, epsilon = 1e-9);
        }
        assert!(rows[1].a.abs() < rows[0].a.abs());
    }

    #[test]
    fn penalty_of_reference_ramp() {
        let ens = single(1.0);
        let p = *ens.params();
        let prob = RegularizedProblem::new(ens, 100.0, 3.0).unwrap();
        let u = Control::bang_bang(&p, 3.0);
        // two triangles of the squared ramp: (1 - w)^2 / (12 i)
        assert_abs_diff_eq!(prob.penalty_integral(&u), 0.25 / 1200.0, epsilon = 1e-15);
        assert_abs_diff_eq!(prob.penalty_weight(), 0.1, epsilon = 1e-15);
        assert_eq!(prob.z(0.0), 0.5);
        assert_eq!(prob.z(17.0), 1.0);
    }
}
