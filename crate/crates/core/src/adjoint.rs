//! Costates of the hybrid maximum principle.
//!
//! The Hamiltonian of one mass is
//! `H = (a + b u)(x3 + psi2) + c x3 (x2 + psi3) + psi1`, so the switching
//! function `Phi = x3 + psi2` obeys `Phi' = -v_y Phi` and `G = x2 + psi3`
//! obeys `G' = -c G`. The backward pass integrates the log-sensitivity
//! `L(t) = int_t^t1 v_y ds` together with `psi3`; `Phi` is recovered as a
//! reference value times `exp(L - L_ref)`, which keeps its sign and relative
//! accuracy even after it has decayed by hundreds of orders of magnitude.
//! `psi2 = Phi - x3` follows.

use std::fmt;

use rayon::prelude::*;

use crate::control::{Control, BREAKPOINT_SNAP};
use crate::dynamics::{simulate, uniform_grid, Ensemble, Trajectory};
use crate::error::{ModelError, Result};
use crate::integrator::{Dopri, Solution};
use crate::params::ModelParams;

/// Costate jump at a threshold crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    /// `psi2(t+0) - psi2(t-0)`.
    pub value: f64,
    pub bracket: (f64, f64),
    /// Control limits `u(t-0)`, `u(t+0)`.
    pub v1: f64,
    pub v2: f64,
    pub phi_minus: f64,
    pub phi_plus: f64,
    /// Residual of the second matching identity, relative to its terms.
    pub residual: f64,
    /// Crossing at the final time: only the half bracket on `-psi2(t1)` applies.
    pub terminal: bool,
}

impl Jump {
    /// Bracket membership with a relative rounding allowance.
    pub fn inside(&self, rel_tol: f64) -> bool {
        let (lo, hi) = self.bracket;
        let slack = rel_tol * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        self.value >= lo - slack && self.value <= hi + slack
    }
}

#[derive(Debug, Clone)]
struct Piece {
    lo: f64,
    sol: Solution<2>,
    phi_ref: f64,
    l_ref: f64,
}

/// Costates of one mass on `[t0, t1]`.
#[derive(Debug, Clone)]
pub struct ParticleAdjoint {
    pieces: Vec<Piece>,
    jump: Option<Jump>,
    exit: f64,
}

impl ParticleAdjoint {
    fn piece(&self, t: f64) -> &Piece {
        let k = self.pieces.partition_point(|p| p.lo <= t);
        &self.pieces[k.saturating_sub(1)]
    }

    pub fn jump(&self) -> Option<&Jump> {
        self.jump.as_ref()
    }

    pub fn exit(&self) -> f64 {
        self.exit
    }

    /// `L(t) = int_t^t1 v_y ds`.
    pub fn log_sensitivity(&self, t: f64) -> f64 {
        self.piece(t).sol.at(t)[0]
    }

    /// `x3 + psi2`, right-continuous at the crossing.
    pub fn phi(&self, t: f64) -> f64 {
        let p = self.piece(t);
        p.phi_ref * (p.sol.at(t)[0] - p.l_ref).exp()
    }

    /// `(Phi(t-0), Phi(t+0))`.
    pub fn phi_limits(&self, t: f64) -> (f64, f64) {
        match &self.jump {
            Some(j) if (t - j.time).abs() <= BREAKPOINT_SNAP => (j.phi_minus, j.phi_plus),
            _ => {
                let v = self.phi(t);
                (v, v)
            }
        }
    }

    pub fn psi1(&self, _t: f64) -> f64 {
        0.0
    }

    pub fn psi3(&self, t: f64) -> f64 {
        self.piece(t).sol.at(t)[1]
    }

    pub fn psi2(&self, traj: &Trajectory, k: usize, t: f64) -> f64 {
        self.phi(t) - traj.mass(k, t)
    }
}

/// Costates of a whole ensemble along a fixed forward trajectory.
#[derive(Debug, Clone)]
pub struct Adjoint {
    particles: Vec<ParticleAdjoint>,
}

/// Integrates the costates backward from `psi(t1) = 0`, applying the jump
/// of `psi2` at each crossing time.
pub fn backward_adjoint(traj: &Trajectory, control: &Control, solver: &Dopri) -> Result<Adjoint> {
    if control != traj.control() {
        return Err(ModelError::Consistency(
            "adjoint control differs from the one used for the trajectory".into(),
        ));
    }
    let particles = (0..traj.len())
        .into_par_iter()
        .map(|k| particle_adjoint(traj, k, solver))
        .collect::<Result<Vec<_>>>()?;
    Ok(Adjoint { particles })
}

fn particle_adjoint(traj: &Trajectory, k: usize, solver: &Dopri) -> Result<ParticleAdjoint> {
    let p = *traj.params();
    let control = traj.control();
    let exit = traj.exit_times()[k];
    let t1 = p.t1;
    let crossing = exit > p.t0 && exit <= t1;

    let mut cuts: Vec<f64> = control.switches().to_vec();
    if crossing {
        cuts.push(exit);
    }
    cuts.push(p.t0);
    cuts.push(t1);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut pieces = Vec::with_capacity(cuts.len());
    let mut state = [0.0, 0.0];
    let mut phi_ref = traj.mass(k, t1);
    let mut l_ref = 0.0;
    let mut jump = None;

    if crossing && exit == t1 {
        let j = compute_jump(traj, k, t1, phi_ref, 0.0, true);
        phi_ref = j.phi_minus;
        jump = Some(j);
    }

    for w in cuts.windows(2).rev() {
        let (lo, hi) = (w[0], w[1]);
        let mid = 0.5 * (lo + hi);
        let u = control.value_at(mid);
        let gain = if mid < exit { p.cs } else { 0.0 };
        let sol = solver.solve(
            |t, s: &[f64; 2]| {
                let y = traj.maturity(k, t);
                [
                    -p.velocity_dy(y, u),
                    -gain * s[1] - p.velocity(y, u) - gain * y,
                ]
            },
            hi,
            state,
            lo,
            &[],
        )?;
        state = sol.last();
        pieces.push(Piece {
            lo,
            sol,
            phi_ref,
            l_ref,
        });
        if crossing && lo == exit && exit < t1 {
            let phi_plus = phi_ref * (state[0] - l_ref).exp();
            let j = compute_jump(traj, k, exit, phi_plus, state[1], false);
            phi_ref = j.phi_minus;
            l_ref = state[0];
            jump = Some(j);
        }
    }
    pieces.reverse();
    Ok(ParticleAdjoint { pieces, jump, exit })
}

/// Solves the Hamiltonian matching condition across the crossing.
///
/// With `S = cs x3 (ys + psi3)` and `Phi+ = Phi(t+0)`,
/// `(a + b v1)(Phi+ - J) + S = (a + b v2) Phi+` gives `J`. The equivalent
/// identity written with `Phi-` is evaluated as a residual.
fn compute_jump(
    traj: &Trajectory,
    k: usize,
    time: f64,
    phi_plus: f64,
    psi3: f64,
    terminal: bool,
) -> Jump {
    let p = traj.params();
    let (v1, v2) = if terminal {
        let u = traj.control().left_value(time);
        (u, u)
    } else {
        traj.control().one_sided_values(time)
    };
    let x3 = traj.mass(k, time);
    let (a, b) = (p.a(p.ys), p.b(p.ys));
    let s = p.cs * x3 * (p.ys + psi3);
    let value = (s + b * phi_plus * (v1 - v2)) / (a + b * v1);
    let phi_minus = phi_plus - value;
    let lhs = value * (a + b * v2);
    let rhs = s + b * phi_minus * (v1 - v2);
    let scale = lhs.abs().max(s.abs()).max((b * phi_minus * (v1 - v2)).abs());
    let residual = if scale > 0.0 { (lhs - rhs).abs() / scale } else { 0.0 };
    let bracket = if terminal {
        // half bracket on -psi2(t1) = J
        (0.0, p.cs * x3 * p.ys / (a + b * p.w))
    } else {
        (s / (a + b), s / (a + b * p.w))
    };
    Jump {
        time,
        value,
        bracket,
        v1,
        v2,
        phi_minus,
        phi_plus,
        residual,
        terminal,
    }
}

impl Adjoint {
    pub fn particle(&self, k: usize) -> &ParticleAdjoint {
        &self.particles[k]
    }

    pub fn particles(&self) -> &[ParticleAdjoint] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// `Phi_N = sum_k b(x2_k) Phi_k`, right-continuous.
    pub fn phi_n(&self, traj: &Trajectory, t: f64) -> f64 {
        let p = traj.params();
        self.particles
            .iter()
            .enumerate()
            .map(|(k, a)| p.b(traj.maturity(k, t)) * a.phi(t))
            .sum()
    }

    /// One-sided limits of `Phi_N` at `t`.
    pub fn phi_n_limits(&self, traj: &Trajectory, t: f64) -> (f64, f64) {
        let p = traj.params();
        self.particles
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(l, r), (k, a)| {
                let b = p.b(traj.maturity(k, t));
                let (pl, pr) = a.phi_limits(t);
                (l + b * pl, r + b * pr)
            })
    }

    /// `d/dt Phi_N = sum_k (c1 x2^2 + 2 c2 x2) Phi_k` between crossings.
    pub fn phi_n_dot(&self, traj: &Trajectory, t: f64) -> f64 {
        let p = traj.params();
        self.particles
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let y = traj.maturity(k, t);
                (p.c1 * y * y + 2.0 * p.c2 * y) * a.phi(t)
            })
            .sum()
    }

    /// Hamiltonian at `t` split as `(control-free part, Phi_N)`, together
    /// with the sum of absolute values of its terms.
    fn hamiltonian_parts(&self, traj: &Trajectory, t: f64) -> (f64, f64, f64) {
        let p = traj.params();
        let mut free = 0.0;
        let mut phi_n = 0.0;
        let mut scale = 0.0;
        for (k, adj) in self.particles.iter().enumerate() {
            let y = traj.maturity(k, t);
            let x3 = traj.mass(k, t);
            let phi = adj.phi(t);
            let c = if t < adj.exit { p.cs } else { 0.0 };
            let a_term = p.a(y) * phi;
            let c_term = c * x3 * (y + adj.psi3(t));
            free += a_term + c_term;
            phi_n += p.b(y) * phi;
            scale += a_term.abs() + c_term.abs() + (p.b(y) * phi).abs();
        }
        (free, phi_n, scale)
    }

    /// Hamiltonian with the control value in use at `t`.
    pub fn hamiltonian_at(&self, traj: &Trajectory, t: f64) -> f64 {
        let (free, phi_n, _) = self.hamiltonian_parts(traj, t);
        free + traj.control().value_at(t) * phi_n
    }

    /// `max_u H` at `t`.
    pub fn max_hamiltonian(&self, traj: &Trajectory, t: f64) -> f64 {
        let (free, phi_n, _) = self.hamiltonian_parts(traj, t);
        let u = if phi_n > 0.0 { 1.0 } else { traj.params().w };
        free + u * phi_n
    }
}

/// `H(x, u, psi)` for one mass with explicit values.
pub fn hamiltonian(params: &ModelParams, x: &[f64; 3], u: f64, psi: &[f64; 3]) -> f64 {
    let (y, m) = (x[1], x[2]);
    params.velocity(y, u) * (m + psi[1]) + params.c(y) * m * (y + psi[2]) + psi[0]
}

/// `u` maximizing [`hamiltonian`]: `1` if `b (x3 + psi2) > 0`, `w` if
/// negative; `None` when the control coefficient vanishes.
pub fn maximizing_control(params: &ModelParams, x: &[f64; 3], psi: &[f64; 3]) -> Option<f64> {
    let coef = params.b(x[1]) * (x[2] + psi[1]);
    if coef > 0.0 {
        Some(1.0)
    } else if coef < 0.0 {
        Some(params.w)
    } else {
        None
    }
}

/// Sampled switching function with its zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingFunction {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Zeros strictly between crossing times, found by bisection.
    pub zeros: Vec<f64>,
    /// `d/dt Phi_N` at each zero.
    pub slopes: Vec<f64>,
    /// Crossing times at which `Phi_N` changes sign by a jump.
    pub jump_sign_changes: Vec<f64>,
}

impl SwitchingFunction {
    /// Every interior zero is an upcrossing.
    pub fn single_upcrossing(&self) -> bool {
        self.slopes.iter().all(|&s| s > 0.0)
    }
}

/// Samples `Phi_N` on a uniform grid of `n` points plus the crossing times
/// and locates its sign changes.
pub fn switching_function(traj: &Trajectory, adj: &Adjoint, n: usize) -> SwitchingFunction {
    let p = traj.params();
    let times = uniform_grid(p.t0, p.t1, n);
    let values = times.iter().map(|&t| adj.phi_n(traj, t)).collect();

    let mut cuts: Vec<f64> = adj
        .particles
        .iter()
        .filter_map(|a| a.jump.map(|j| j.time))
        .filter(|&t| t > p.t0 && t < p.t1)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut zeros = Vec::new();
    let mut jump_sign_changes = Vec::new();
    let mut bounds = vec![p.t0];
    bounds.extend(cuts.iter().copied());
    bounds.push(p.t1);
    let grid = uniform_grid(p.t0, p.t1, n);
    for w in bounds.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mut pts = vec![lo];
        pts.extend(grid.iter().copied().filter(|&t| t > lo && t < hi));
        pts.push(hi);
        // one-sided values at the ends of the open interval
        let eval = |t: f64| -> f64 {
            if t == lo && lo > p.t0 {
                adj.phi_n_limits(traj, t).1
            } else if t == hi && hi < p.t1 {
                adj.phi_n_limits(traj, t).0
            } else {
                adj.phi_n(traj, t)
            }
        };
        let vals: Vec<f64> = pts.iter().map(|&t| eval(t)).collect();
        for j in 0..pts.len() - 1 {
            let (fa, fb) = (vals[j], vals[j + 1]);
            if fa == 0.0 && j > 0 {
                zeros.push(pts[j]);
            } else if fa * fb < 0.0 {
                zeros.push(bisect(|t| adj.phi_n(traj, t), pts[j], pts[j + 1], fa));
            }
        }
    }
    for &tc in &cuts {
        let (l, r) = adj.phi_n_limits(traj, tc);
        if l * r < 0.0 || (l < 0.0 && r == 0.0) || (l == 0.0 && r > 0.0) {
            jump_sign_changes.push(tc);
        }
    }
    zeros.sort_by(f64::total_cmp);
    let slopes = zeros.iter().map(|&t| adj.phi_n_dot(traj, t)).collect();
    SwitchingFunction {
        times,
        values,
        zeros,
        slopes,
        jump_sign_changes,
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

/// One named diagnostic of a certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Outcome of the first-order optimality checks for `BangBang(t*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub tstar: f64,
    pub hypotheses: bool,
    pub hamiltonian: f64,
    pub checks: Vec<Check>,
    pub jumps: Vec<Jump>,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "tstar = {:.12}", self.tstar)?;
        if !self.hypotheses {
            writeln!(f, "note: hypotheses not satisfied")?;
        }
        writeln!(f, "h = {:.6e}", self.hamiltonian)?;
        for c in &self.checks {
            writeln!(
                f,
                "{:<24} value = {:.3e}  threshold = {:.1e}  {}",
                c.name,
                c.value,
                c.threshold,
                if c.pass { "PASS" } else { "FAIL" }
            )?;
        }
        for (k, j) in self.jumps.iter().enumerate() {
            writeln!(
                f,
                "jump {k}: t = {:.12} J = {:.12e} bracket = [{:.12e}, {:.12e}]",
                j.time, j.value, j.bracket.0, j.bracket.1
            )?;
        }
        write!(f, "overall: {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

/// Options of [`certify_bang_bang`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    pub grid: usize,
    /// Half-width of the windows around crossings excluded from the
    /// constancy check.
    pub exclusion: f64,
    pub hamiltonian_tol: f64,
    pub conserved_tol: f64,
    pub residual_tol: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            grid: 2001,
            exclusion: 1e-6,
            hamiltonian_tol: 1e-6,
            conserved_tol: 1e-8,
            residual_tol: 1e-6,
        }
    }
}

/// Runs the forward and backward passes for `BangBang(t*)` and checks the
/// sign pattern of `Phi_N`, constancy of `max_u H`, the jump brackets and
/// the conserved combination `x2 + psi3` above the threshold.
///
/// Constancy is measured as `(max - min)` of `max_u H` over the grid divided
/// by the largest sum of absolute Hamiltonian terms, because `h` itself can
/// vanish to many digits once the maturity saturates.
pub fn certify_bang_bang(
    ens: &Ensemble,
    tstar: f64,
    solver: &Dopri,
    opts: &CertifyOptions,
) -> Result<Certificate> {
    let p = *ens.params();
    let control = Control::bang_bang(&p, tstar);
    let traj = simulate(ens, &control)?;
    let adj = backward_adjoint(&traj, &control, solver)?;
    let exits: Vec<f64> = adj
        .particles
        .iter()
        .filter_map(|a| a.jump.map(|j| j.time))
        .collect();
    let grid = uniform_grid(p.t0, p.t1, opts.grid);

    // (a) sign pattern
    let mut sign_violation: f64 = 0.0;
    for &t in &grid {
        if t <= p.t0 || (t - tstar).abs() <= opts.exclusion {
            continue;
        }
        let v = adj.phi_n(&traj, t);
        let bad = if t < tstar { v >= 0.0 } else { v <= 0.0 };
        if bad {
            sign_violation = sign_violation.max(v.abs()).max(f64::MIN_POSITIVE);
        }
    }

    // (b) Hamiltonian constancy
    let mut h_min = f64::INFINITY;
    let mut h_max = f64::NEG_INFINITY;
    let mut h_sum = 0.0;
    let mut h_count = 0usize;
    let mut scale: f64 = 0.0;
    for &t in &grid {
        if exits.iter().any(|&e| (t - e).abs() <= opts.exclusion) {
            continue;
        }
        let (free, phi_n, s) = adj.hamiltonian_parts(&traj, t);
        let u = if phi_n > 0.0 { 1.0 } else { p.w };
        let h = free + u * phi_n;
        h_min = h_min.min(h);
        h_max = h_max.max(h);
        h_sum += h;
        h_count += 1;
        scale = scale.max(s);
    }
    let h_mean = h_sum / h_count.max(1) as f64;
    let spread = if scale > 0.0 {
        (h_max - h_min) / scale.max(h_mean.abs())
    } else {
        0.0
    };

    // (c) jumps
    let jumps: Vec<Jump> = adj.particles.iter().filter_map(|a| a.jump).collect();
    let bracket_excess = jumps
        .iter()
        .map(|j| {
            let (lo, hi) = j.bracket;
            (lo - j.value).max(j.value - hi).max(0.0) / lo.abs().max(hi.abs()).max(1e-300)
        })
        .fold(0.0, f64::max);
    let residual = jumps.iter().map(|j| j.residual).fold(0.0, f64::max);

    // (d) conserved combination above the threshold
    let mut conserved: f64 = 0.0;
    for (k, a) in adj.particles.iter().enumerate() {
        if a.exit > p.t1 {
            continue;
        }
        let target = traj.maturity(k, p.t1);
        for &t in grid.iter().filter(|&&t| t >= a.exit) {
            conserved = conserved.max((traj.maturity(k, t) + a.psi3(t) - target).abs());
        }
    }

    let checks = vec![
        Check {
            name: "sign_pattern",
            value: sign_violation,
            threshold: 0.0,
            pass: sign_violation == 0.0,
        },
        Check {
            name: "hamiltonian_constancy",
            value: spread,
            threshold: opts.hamiltonian_tol,
            pass: spread < opts.hamiltonian_tol,
        },
        Check {
            name: "jump_bracket",
            value: bracket_excess,
            threshold: 1e-12,
            pass: bracket_excess <= 1e-12,
        },
        Check {
            name: "jump_identity_residual",
            value: residual,
            threshold: opts.residual_tol,
            pass: residual <= opts.residual_tol,
        },
        Check {
            name: "conserved_x2_plus_psi3",
            value: conserved,
            threshold: opts.conserved_tol,
            pass: conserved <= opts.conserved_tol,
        },
    ];
    Ok(Certificate {
        tstar,
        hypotheses: p.assumptions().sufficient_conditions(),
        hamiltonian: h_mean,
        checks,
        jumps,
    })
}

/// One row of an adjoint dump: `t`, then `(psi1, psi2, psi3)` per mass, then
/// `Phi` of the first mass and `Phi_N`.
pub fn adjoint_rows(traj: &Trajectory, adj: &Adjoint, times: &[f64]) -> Vec<Vec<f64>> {
    times
        .iter()
        .map(|&t| {
            let mut row = vec![t];
            for (k, a) in adj.particles.iter().enumerate() {
                row.push(a.psi1(t));
                row.push(a.psi2(traj, k, t));
                row.push(a.psi3(t));
            }
            row.push(adj.particles[0].phi(t));
            row.push(adj.phi_n(traj, t));
            row
        })
        .collect()
}
