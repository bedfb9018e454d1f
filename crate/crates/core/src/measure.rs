//! Measure-valued solutions by transport along characteristics.
//!
//! A nonnegative initial measure on `[0, 1] x [0, ys]` is pushed forward by
//! `(x, y) -> (x + t - t0, Psi(t, y, u))` and reweighted by
//! `exp(cs (min(t, e(y, u)) - t0))`. Density data are handled by a tensor
//! Gauss–Legendre rule, so every quantity reduces to a weighted sum over
//! points.

use rayon::prelude::*;

use crate::control::Control;
use crate::dynamics::{simulate, Ensemble, Particle};
use crate::error::{ModelError, Result};
use crate::params::ModelParams;
use crate::quadrature::{pairwise_sum, GaussLegendre};
use crate::riccati::MaturityPath;

/// A point mass `weight * delta_(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedPoint {
    pub x: f64,
    pub y: f64,
    pub weight: f64,
}

/// Nonnegative density sampled on a uniform grid over `[0, 1] x [0, ys]`,
/// `values[i * ny + j]` at `(i / (nx - 1), ys j / (ny - 1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub nx: usize,
    pub ny: usize,
    pub ys: f64,
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn new(nx: usize, ny: usize, ys: f64, values: Vec<f64>) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(ModelError::InvalidMeasure(format!(
                "density grid needs at least 2 x 2 samples, got {nx} x {ny}"
            )));
        }
        if values.len() != nx * ny {
            return Err(ModelError::InvalidMeasure(format!(
                "expected {} values, got {}",
                nx * ny,
                values.len()
            )));
        }
        if !(ys > 0.0 && ys.is_finite()) {
            return Err(ModelError::InvalidMeasure(format!("bad ys {ys}")));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(ModelError::InvalidMeasure(format!("negative or non-finite value {v}")));
        }
        Ok(Self { nx, ny, ys, values })
    }

    /// Constant density `value` on `[0, 1] x [0, ys]`.
    pub fn uniform(ys: f64, value: f64) -> Self {
        Self {
            nx: 2,
            ny: 2,
            ys,
            values: vec![value; 4],
        }
    }

    /// Bilinear interpolation; zero outside the rectangle.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) || !(0.0..=self.ys).contains(&y) {
            return 0.0;
        }
        let fx = x * (self.nx - 1) as f64;
        let fy = y / self.ys * (self.ny - 1) as f64;
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        let (sx, sy) = (fx - i as f64, fy - j as f64);
        let v = |i: usize, j: usize| self.values[i * self.ny + j];
        (1.0 - sx) * (1.0 - sy) * v(i, j)
            + sx * (1.0 - sy) * v(i + 1, j)
            + (1.0 - sx) * sy * v(i, j + 1)
            + sx * sy * v(i + 1, j + 1)
    }
}

/// Initial measure in particle or density form.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialMeasure {
    Particles(Vec<WeightedPoint>),
    Density {
        grid: DensityGrid,
        /// Gauss–Legendre nodes per axis.
        nx: usize,
        ny: usize,
    },
}

/// Default tensor rule size per axis.
pub const DEFAULT_NODES: usize = 64;

impl InitialMeasure {
    pub fn particles(points: Vec<WeightedPoint>, params: &ModelParams) -> Result<Self> {
        if points.is_empty() {
            return Err(ModelError::InvalidMeasure("no points".into()));
        }
        for p in &points {
            if !(p.weight >= 0.0 && p.weight.is_finite()) {
                return Err(ModelError::InvalidMeasure(format!("weight {} is negative", p.weight)));
            }
            if !(0.0..=1.0).contains(&p.x) || !(0.0..=params.ys).contains(&p.y) {
                return Err(ModelError::InvalidMeasure(format!(
                    "point ({}, {}) outside [0, 1] x [0, {}]",
                    p.x, p.y, params.ys
                )));
            }
        }
        let m: f64 = points.iter().map(|p| p.weight).sum();
        if !(m > 0.0) {
            return Err(ModelError::InvalidMeasure("total mass is zero".into()));
        }
        Ok(Self::Particles(points))
    }

    pub fn from_ensemble(ens: &Ensemble) -> Result<Self> {
        Self::particles(
            ens.particles()
                .iter()
                .map(|p| WeightedPoint {
                    x: p.x1,
                    y: p.x2,
                    weight: p.x3,
                })
                .collect(),
            ens.params(),
        )
    }

    pub fn density(grid: DensityGrid, params: &ModelParams) -> Result<Self> {
        Self::density_with_rule(grid, params, DEFAULT_NODES, DEFAULT_NODES)
    }

    pub fn density_with_rule(
        grid: DensityGrid,
        params: &ModelParams,
        nx: usize,
        ny: usize,
    ) -> Result<Self> {
        if (grid.ys - params.ys).abs() > 1e-12 * params.ys {
            return Err(ModelError::InvalidMeasure(format!(
                "density grid covers [0, {}] but ys = {}",
                grid.ys, params.ys
            )));
        }
        if nx == 0 || ny == 0 {
            return Err(ModelError::InvalidMeasure("empty quadrature rule".into()));
        }
        let m = Self::Density { grid, nx, ny };
        if !(m.total_mass() > 0.0) {
            return Err(ModelError::InvalidMeasure("total mass is zero".into()));
        }
        Ok(m)
    }

    /// Weighted points: the particles themselves or the quadrature nodes
    /// with weights `density * quadrature weight`.
    pub fn points(&self) -> Vec<WeightedPoint> {
        match self {
            Self::Particles(p) => p.clone(),
            Self::Density { grid, nx, ny } => tensor_points(grid, *nx, *ny),
        }
    }

    pub fn total_mass(&self) -> f64 {
        let w: Vec<f64> = self.points().iter().map(|p| p.weight).collect();
        pairwise_sum(&w)
    }

    /// Points with equal maturity merged; the result is a valid ensemble
    /// whose terminal cost equals [`cost_measure`].
    pub fn to_ensemble(&self, params: &ModelParams) -> Result<Ensemble> {
        let mut pts: Vec<WeightedPoint> =
            self.points().into_iter().filter(|p| p.weight > 0.0).collect();
        pts.sort_by(|a, b| a.y.total_cmp(&b.y));
        let mut merged: Vec<Particle> = Vec::new();
        for p in pts {
            match merged.last_mut() {
                Some(last) if last.x2 == p.y => last.x3 += p.weight,
                _ => merged.push(Particle::new(p.x, p.y, p.weight)),
            }
        }
        Ensemble::new(*params, merged)
    }
}

fn tensor_points(grid: &DensityGrid, nx: usize, ny: usize) -> Vec<WeightedPoint> {
    let gx = GaussLegendre::on(nx, 0.0, 1.0);
    let gy = GaussLegendre::on(ny, 0.0, grid.ys);
    let mut out = Vec::with_capacity(nx * ny);
    for (&x, &wx) in gx.nodes.iter().zip(&gx.weights) {
        for (&y, &wy) in gy.nodes.iter().zip(&gy.weights) {
            out.push(WeightedPoint {
                x,
                y,
                weight: grid.eval(x, y) * wx * wy,
            });
        }
    }
    out
}

/// Characteristic of one point: maturity path, exit time and weight.
struct Characteristic {
    point: WeightedPoint,
    path: MaturityPath,
    exit: f64,
}

impl Characteristic {
    fn new(params: &ModelParams, point: WeightedPoint, control: &Control) -> Self {
        let path = MaturityPath::new(params, point.y, control);
        let exit = if point.y >= params.ys {
            params.t0
        } else {
            path.first_crossing(params.ys)
                .unwrap_or_else(|| params.no_exit_sentinel())
        };
        Self { point, path, exit }
    }

    fn log_growth(&self, params: &ModelParams, t: f64) -> f64 {
        params.cs * (t.min(self.exit) - params.t0).max(0.0)
    }
}

fn characteristics(
    params: &ModelParams,
    rho0: &InitialMeasure,
    control: &Control,
) -> Vec<Characteristic> {
    rho0.points()
        .into_par_iter()
        .map(|p| Characteristic::new(params, p, control))
        .collect()
}

/// `int phi(x + t - t0, Psi(t, y, u)) exp(int_t0^t c(Psi) ds) d rho0(x, y)`.
pub fn pushforward_integrate(
    params: &ModelParams,
    rho0: &InitialMeasure,
    control: &Control,
    t: f64,
    phi: impl Fn(f64, f64) -> f64 + Sync,
) -> Result<f64> {
    if t < control.start() || t > control.end() {
        return Err(ModelError::Consistency(format!(
            "time {t} outside the control domain [{}, {}]",
            control.start(),
            control.end()
        )));
    }
    let chars = characteristics(params, rho0, control);
    let terms: Vec<f64> = chars
        .par_iter()
        .map(|c| {
            c.point.weight
                * phi(c.point.x + t - params.t0, c.path.value(t))
                * c.log_growth(params, t).exp()
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Summary of a measure cost evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureCost {
    pub cost: f64,
    /// Mass that has not reached the threshold by `t1`.
    pub unexited_mass: f64,
}

/// `J = -int Psi(t1, y, u) exp(cs (min(e(y, u), t1) - t0)) d rho0`.
///
/// The integrand does not depend on `x`, so density data are first reduced
/// to their `y` marginal on the `y` quadrature nodes.
pub fn cost_measure(params: &ModelParams, rho0: &InitialMeasure, control: &Control) -> Result<MeasureCost> {
    control.check_domain(params)?;
    let points = marginal_points(rho0);
    let t1 = params.t1;
    let terms: Vec<(f64, f64)> = points
        .par_iter()
        .map(|&(y, w)| {
            let c = Characteristic::new(params, WeightedPoint { x: 0.0, y, weight: w }, control);
            let value = -w * c.path.value(t1) * c.log_growth(params, t1).exp();
            let left = if c.exit > t1 { w } else { 0.0 };
            (value, left)
        })
        .collect();
    let costs: Vec<f64> = terms.iter().map(|t| t.0).collect();
    let left: Vec<f64> = terms.iter().map(|t| t.1).collect();
    Ok(MeasureCost {
        cost: pairwise_sum(&costs),
        unexited_mass: pairwise_sum(&left),
    })
}

/// `(y, weight)` pairs of the `y` marginal.
fn marginal_points(rho0: &InitialMeasure) -> Vec<(f64, f64)> {
    match rho0 {
        InitialMeasure::Particles(p) => p.iter().map(|p| (p.y, p.weight)).collect(),
        InitialMeasure::Density { grid, nx, ny } => {
            let gx = GaussLegendre::on(*nx, 0.0, 1.0);
            let gy = GaussLegendre::on(*ny, 0.0, grid.ys);
            gy.nodes
                .iter()
                .zip(&gy.weights)
                .map(|(&y, &wy)| (y, wy * gx.integrate(|x| grid.eval(x, y))))
                .collect()
        }
    }
}

/// Dirac approximation with `n` points: the nodes of a `m x m`
/// Gauss–Legendre tensor rule with `m = round(sqrt(n))`, weighted by
/// density times quadrature weight. Particle measures are returned as is.
pub fn discretize(rho0: &InitialMeasure, n: usize) -> Result<InitialMeasure> {
    if n == 0 {
        return Err(ModelError::InvalidMeasure("n must be at least 1".into()));
    }
    match rho0 {
        InitialMeasure::Particles(_) => Ok(rho0.clone()),
        InitialMeasure::Density { grid, .. } => {
            let m = ((n as f64).sqrt().round() as usize).max(1);
            Ok(InitialMeasure::Particles(tensor_points(grid, m, m)))
        }
    }
}

/// One level of a Dirac-limit refinement study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementLevel {
    pub level: usize,
    pub n: usize,
    pub cost: f64,
    pub error: f64,
}

/// Costs of `discretize(rho0, n)` for each `n`, compared with a reference
/// tensor rule of `reference_nodes` per axis.
pub fn dirac_refinement(
    params: &ModelParams,
    rho0: &InitialMeasure,
    control: &Control,
    levels: &[usize],
    reference_nodes: usize,
) -> Result<(Vec<RefinementLevel>, f64)> {
    let reference = match rho0 {
        InitialMeasure::Density { grid, .. } => {
            let r = InitialMeasure::Density {
                grid: grid.clone(),
                nx: reference_nodes,
                ny: reference_nodes,
            };
            cost_measure(params, &InitialMeasure::Particles(r.points()), control)?.cost
        }
        InitialMeasure::Particles(_) => cost_measure(params, rho0, control)?.cost,
    };
    let mut out = Vec::with_capacity(levels.len());
    for (level, &n) in levels.iter().enumerate() {
        let disc = discretize(rho0, n)?;
        let n_points = disc.points().len();
        let cost = cost_measure(params, &disc, control)?.cost;
        out.push(RefinementLevel {
            level,
            n: n_points,
            cost,
            error: (cost - reference).abs(),
        });
    }
    Ok((out, reference))
}

/// Result of extending a control by `u = 1` and checking that the maturity
/// moment keeps increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct DualityReport {
    pub extension: (f64, f64),
    pub samples: usize,
    pub min_increment: f64,
    pub all_positive: bool,
}

/// Extends `control` (defined on `[t0, t_tilde]`) by `1` up to `t1` and
/// checks that `M(t) = int y d rho(t)` is strictly increasing on the
/// extension, using finite differences over `samples` intervals.
pub fn duality_check(
    params: &ModelParams,
    rho0: &InitialMeasure,
    control: &Control,
    t1: f64,
    samples: usize,
) -> Result<DualityReport> {
    let t_tilde = control.end();
    if t1 < t_tilde {
        return Err(ModelError::Consistency(format!(
            "extension horizon {t1} precedes control end {t_tilde}"
        )));
    }
    if t1 == t_tilde {
        return Ok(DualityReport {
            extension: (t_tilde, t1),
            samples: 0,
            min_increment: f64::INFINITY,
            all_positive: true,
        });
    }
    let ybar = params.asymptotic_maturity();
    let extended = control.extended(t1, 1.0)?;
    let p = params.with_horizon(t1);
    let chars = characteristics(&p, rho0, &extended);
    if let Some(c) = chars.iter().find(|c| c.path.value(t_tilde) >= ybar) {
        return Err(ModelError::Consistency(format!(
            "mass at maturity {} has reached the equilibrium {ybar}",
            c.path.value(t_tilde)
        )));
    }
    let n = samples.max(1);
    let h = (t1 - t_tilde) / n as f64;
    let mut min_inc = f64::INFINITY;
    for j in 0..n {
        let ta = t_tilde + h * j as f64;
        let tb = if j + 1 == n { t1 } else { t_tilde + h * (j + 1) as f64 };
        let terms: Vec<f64> = chars
            .par_iter()
            .map(|c| {
                let m_a = c.point.weight * c.log_growth(&p, ta).exp();
                let dm = m_a * (c.log_growth(&p, tb) - c.log_growth(&p, ta)).exp_m1();
                let dy = c.path.increment(ta, tb);
                dy * (m_a + dm) + c.path.value(ta) * dm
            })
            .collect();
        min_inc = min_inc.min(pairwise_sum(&terms));
    }
    Ok(DualityReport {
        extension: (t_tilde, t1),
        samples: n,
        min_increment: min_inc,
        all_positive: min_inc > 0.0,
    })
}

/// One entry of an exit-time continuity probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuityEntry {
    pub n: usize,
    pub error: f64,
    pub bound: f64,
}

/// Errors `|e(y0_n, u_n) - e(y0, u)|` along a sequence of perturbed data.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityReport {
    pub limit: f64,
    pub entries: Vec<ContinuityEntry>,
}

impl ContinuityReport {
    pub fn decreasing(&self) -> bool {
        self.entries.windows(2).all(|w| w[1].error <= w[0].error)
    }

    pub fn within_bounds(&self) -> bool {
        self.entries.iter().all(|e| e.error <= e.bound)
    }
}

fn exit_of(params: &ModelParams, y0: f64, control: &Control) -> Result<f64> {
    crate::model::exit_time(params, y0, control)
}

/// Generic probe over explicit `(n, y0_n, u_n)` triples with bounds
/// `bound(n)`.
pub fn exit_time_continuity_probe(
    params: &ModelParams,
    y0: f64,
    control: &Control,
    sequence: &[(usize, f64, Control)],
    bound: impl Fn(usize) -> f64,
) -> Result<ContinuityReport> {
    let limit = exit_of(params, y0, control)?;
    let entries = sequence
        .iter()
        .map(|(n, y, u)| {
            Ok(ContinuityEntry {
                n: *n,
                error: (exit_of(params, *y, u)? - limit).abs(),
                bound: bound(*n),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ContinuityReport { limit, entries })
}

/// Control alternating `w` and `1` on cells of width `1/n` with average
/// `mean`.
pub fn chattering_control(params: &ModelParams, mean: f64, n: usize) -> Result<Control> {
    let theta = (mean - params.w) / (1.0 - params.w);
    if !(0.0..=1.0).contains(&theta) {
        return Err(ModelError::InvalidControl(format!("mean {mean} outside [w, 1]")));
    }
    let h = 1.0 / n as f64;
    let mut bps = vec![params.t0];
    let mut vals = Vec::new();
    let mut k = 0usize;
    loop {
        let start = params.t0 + h * k as f64;
        if start >= params.t1 {
            break;
        }
        let mid = (start + h * (1.0 - theta)).min(params.t1);
        let end = (params.t0 + h * (k + 1) as f64).min(params.t1);
        if mid > start {
            vals.push(params.w);
            bps.push(mid);
        }
        if end > mid {
            vals.push(1.0);
            bps.push(end);
        }
        k += 1;
    }
    // merge the zero-length tail a rounding error may have left
    if let Some(&last) = bps.last() {
        if last < params.t1 {
            *bps.last_mut().unwrap() = params.t1;
        }
    }
    Control::new(params, bps, vals)
}

/// Chattering controls with average `mean` against the constant control
/// `mean`; the error bound is `C / n` with `C` the given constant.
pub fn chattering_probe(
    params: &ModelParams,
    y0: f64,
    mean: f64,
    ns: &[usize],
    constant: f64,
) -> Result<ContinuityReport> {
    let limit = Control::constant(params, mean)?;
    let seq = ns
        .iter()
        .map(|&n| Ok((n, y0, chattering_control(params, mean, n)?)))
        .collect::<Result<Vec<_>>>()?;
    exit_time_continuity_probe(params, y0, &limit, &seq, |n| constant / n as f64)
}

/// Starts `y0 + sign / n` under a fixed control; bound `L / n` with
/// `L = 1 / min velocity`.
pub fn start_perturbation_probe(
    params: &ModelParams,
    y0: f64,
    control: &Control,
    ns: &[usize],
    sign: f64,
) -> Result<ContinuityReport> {
    let lip = 1.0 / params.min_velocity();
    let seq: Vec<_> = ns
        .iter()
        .map(|&n| (n, (y0 + sign / n as f64).clamp(0.0, params.ys), control.clone()))
        .collect();
    exit_time_continuity_probe(params, y0, control, &seq, |n| lip / n as f64)
}

/// Cost of every particle of an ensemble through the measure code path.
pub fn ensemble_cost(ens: &Ensemble, control: &Control) -> Result<f64> {
    let _ = simulate(ens, control)?;
    Ok(cost_measure(ens.params(), &InitialMeasure::from_ensemble(ens)?, control)?.cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::cost_j;
    use approx::assert_abs_diff_eq;

    const EXIT_W: f64 = 1.160_909_576_912_811_5;

    fn uniform(params: &ModelParams) -> InitialMeasure {
        InitialMeasure::density(DensityGrid::uniform(params.ys, 1.0), params).unwrap()
    }

    #[test]
    fn mass_conserved_without_gain() {
        let p = ModelParams::standard(0.0);
        let rho = uniform(&p);
        let u = Control::bang_bang(&p, 2.0);
        let m = pushforward_integrate(&p, &rho, &u, 9.0, |_, _| 1.0).unwrap();
        assert_abs_diff_eq!(m, 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.total_mass(), 6.0, epsilon = 1e-12);
    }

    #[test]
    fn particle_form_matches_dynamics() {
        let p = ModelParams::standard(1.3);
        let ens = Ensemble::new(
            p,
            vec![Particle::new(0.2, 0.5, 1.0), Particle::new(0.9, 4.0, 2.5)],
        )
        .unwrap();
        let u = Control::bang_bang(&p, 0.8);
        let rho = InitialMeasure::from_ensemble(&ens).unwrap();
        let traj = simulate(&ens, &u).unwrap();
        for t in [0.0, 0.5, 3.0, 17.0] {
            let mass = pushforward_integrate(&p, &rho, &u, t, |_, _| 1.0).unwrap();
            assert!((mass - (traj.mass(0, t) + traj.mass(1, t))).abs() < 1e-10);
            let mom = pushforward_integrate(&p, &rho, &u, t, |_, y| y).unwrap();
            assert!((mom - traj.maturity_moment(t)).abs() < 1e-10);
        }
        let j = cost_measure(&p, &rho, &u).unwrap().cost;
        assert!((j - cost_j(&ens, &u).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn identity_pushforward_at_start() {
        let p = ModelParams::standard(2.0);
        let rho = uniform(&p);
        let u = Control::constant(&p, 0.7).unwrap();
        let first = pushforward_integrate(&p, &rho, &u, 0.0, |_, y| y).unwrap();
        assert_abs_diff_eq!(first, 18.0, epsilon = 1e-10);
    }

    #[test]
    fn no_gain_cost_is_mean_flow() {
        let p = ModelParams::standard(0.0);
        let rho = uniform(&p);
        let u = Control::constant(&p, 1.0).unwrap();
        let j = cost_measure(&p, &rho, &u).unwrap().cost;
        let g = GaussLegendre::on(64, 0.0, 6.0);
        let path_mean = g.integrate(|y| MaturityPath::new(&p, y, &u).value(17.0)) / 6.0;
        assert_abs_diff_eq!(j, -6.0 * path_mean, epsilon = 1e-9);
    }

    #[test]
    fn discretization_preserves_mass_and_converges() {
        let p = ModelParams::standard(7.0);
        let rho = uniform(&p);
        let u = Control::bang_bang(&p, EXIT_W);
        let d = discretize(&rho, 256).unwrap();
        assert_eq!(d.points().len(), 256);
        assert_abs_diff_eq!(d.total_mass(), 6.0, epsilon = 1e-12);
        let (levels, reference) =
            dirac_refinement(&p, &rho, &u, &[16, 64, 256, 1024], 100).unwrap();
        assert!(levels.windows(2).all(|w| w[1].error < w[0].error));
        assert!(levels[3].error < 1e-6 * reference.abs(), "{levels:?}");
    }

    #[test]
    fn point_mass_discretization_is_identity() {
        let p = ModelParams::standard(1.0);
        let rho = InitialMeasure::particles(
            vec![WeightedPoint { x: 0.5, y: 1.0, weight: 2.0 }],
            &p,
        )
        .unwrap();
        assert_eq!(discretize(&rho, 1).unwrap(), rho);
    }

    #[test]
    fn cost_is_x_independent() {
        let p = ModelParams::standard(2.0);
        let u = Control::bang_bang(&p, 0.6);
        let a = vec![
            WeightedPoint { x: 0.1, y: 1.0, weight: 1.0 },
            WeightedPoint { x: 0.9, y: 3.0, weight: 2.0 },
        ];
        let b = vec![
            WeightedPoint { x: 0.7, y: 1.0, weight: 1.0 },
            WeightedPoint { x: 0.0, y: 3.0, weight: 2.0 },
        ];
        let ja = cost_measure(&p, &InitialMeasure::particles(a, &p).unwrap(), &u).unwrap();
        let jb = cost_measure(&p, &InitialMeasure::particles(b, &p).unwrap(), &u).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn duality_on_extension() {
        let p = ModelParams::standard(1.0).with_horizon(2.0);
        let rho = uniform(&p);
        let u = Control::constant(&p, 0.5).unwrap();
        let rep = duality_check(&p, &rho, &u, 17.0, 400).unwrap();
        assert!(rep.all_positive, "{rep:?}");
        let empty = duality_check(&p, &rho, &u, 2.0, 10).unwrap();
        assert!(empty.all_positive && empty.samples == 0);
    }

    #[test]
    fn chattering_converges_to_mean() {
        let p = ModelParams::standard(1.0);
        let u = chattering_control(&p, 0.75, 10).unwrap();
        assert_abs_diff_eq!(u.integral(), 0.75 * 17.0, epsilon = 1e-9);
        let rep = chattering_probe(&p, 0.0, 0.75, &[10, 100, 1000, 10000], 1.0).unwrap();
        assert!(rep.decreasing(), "{rep:?}");
        assert!(rep.within_bounds(), "{rep:?}");
    }

    #[test]
    fn start_perturbation_is_lipschitz() {
        let p = ModelParams::standard(1.0);
        let u = Control::constant(&p, 0.7).unwrap();
        for sign in [-1.0, 1.0] {
            let rep = start_perturbation_probe(&p, 2.0, &u, &[1, 10, 100, 1000], sign).unwrap();
            assert!(rep.decreasing() && rep.within_bounds(), "{rep:?}");
        }
        let same = exit_time_continuity_probe(&p, 2.0, &u, &[(1, 2.0, u.clone())], |_| 0.0).unwrap();
        assert_eq!(same.entries[0].error, 0.0);
    }

    #[test]
    fn rejects_bad_measures() {
        let p = ModelParams::standard(1.0);
        assert!(DensityGrid::new(2, 2, 6.0, vec![1.0, -1.0, 0.0, 0.0]).is_err());
        assert!(DensityGrid::new(2, 3, 6.0, vec![1.0; 4]).is_err());
        let bad = vec![WeightedPoint { x: 0.5, y: 7.0, weight: 1.0 }];
        assert!(InitialMeasure::particles(bad, &p).is_err());
        let zero = DensityGrid::uniform(6.0, 0.0);
        assert!(InitialMeasure::density(zero, &p).is_err());
    }
}
