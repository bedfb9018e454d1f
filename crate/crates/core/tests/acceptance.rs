//! Acceptance suite. One PASS/FAIL line per criterion; exits nonzero if any
//! criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use follicle_core::adjoint::{backward_adjoint, certify_bang_bang, switching_function, CertifyOptions};
use follicle_core::dynamics::simulate_integrated;
use follicle_core::measure::{dirac_refinement, duality_check};
use follicle_core::model::exit_time;
use follicle_core::optimizer::{
    falsify_with_step_controls, random_step_control, refine, sweep, Problem, DEFAULT_SEED, TIE_TOL,
};
use follicle_core::presets;
use follicle_core::regularized::{jump_bracket_convergence, loglog_slope};
use follicle_core::{simulate, Control, Dopri, Ensemble, ModelError, ModelParams, Particle, Tolerance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Riccati closed forms for a mass starting at 0 with the default constants,
/// under `u = w` and `u = 1`.
const EXIT_W: f64 = 1.160_909_576_912_811_5;
const EXIT_ONE: f64 = 0.340_097_504_947_288_1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    let in_time = took < limit;
    o.detail = format!("{}; runtime {:.3} s (limit {} s)", o.detail, took.as_secs_f64(), limit.as_secs());
    o.pass &= in_time;
    o
}

fn exit_time_closed_form() -> Outcome {
    let p = ModelParams::standard(1.0);
    let slow = exit_time(&p, 0.0, &Control::constant(&p, p.w).unwrap()).unwrap();
    let fast = exit_time(&p, 0.0, &Control::constant(&p, 1.0).unwrap()).unwrap();
    let pass = (slow - EXIT_W).abs() < 1e-6
        && (fast - EXIT_ONE).abs() < 1e-6
        && (slow - 1.1609).abs() < 5e-5
        && (fast - 0.3401).abs() < 5e-5;
    outcome(pass, format!("exit(u=w) = {slow:.10}, exit(u=1) = {fast:.10}"))
}

fn oracle_equivalence() -> Outcome {
    let solver = Dopri::with_tolerance(Tolerance { abs: 1e-13, rel: 1e-13 });
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = ModelParams::standard(rng.gen_range(0.0..8.0));
        let n = rng.gen_range(1..=10);
        let mut y: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..7.0)).collect();
        y.sort_by(f64::total_cmp);
        y.dedup();
        let parts = y
            .iter()
            .map(|&y0| Particle::new(rng.gen_range(0.0..1.0), y0, rng.gen_range(0.1..10.0)))
            .collect();
        let ens = Ensemble::new(p, parts).unwrap();
        let u = random_step_control(&p, &mut rng, 8);
        let exact = simulate(&ens, &u).unwrap();
        let numeric = simulate_integrated(&ens, &u, &solver).unwrap();
        for (k, num) in numeric.iter().enumerate() {
            for j in 0..=200 {
                let t = p.t0 + (p.t1 - p.t0) * j as f64 / 200.0;
                let (a, b) = (exact.state(k, t), num.state(t));
                for c in 0..3 {
                    worst = worst.max((a[c] - b[c]).abs() / a[c].abs().max(1.0));
                }
            }
        }
    }
    outcome(worst < 1e-8, format!("max scaled deviation {worst:.3e} over 100 instances"))
}

fn hmp_certificate() -> Outcome {
    let ens = presets::single(7.0).unwrap();
    let p = *ens.params();
    let tstar = exit_time(&p, 0.0, &Control::constant(&p, p.w).unwrap()).unwrap();
    let opts = CertifyOptions {
        hamiltonian_tol: 1e-6,
        conserved_tol: 1e-8,
        ..CertifyOptions::default()
    };
    let cert = certify_bang_bang(&ens, tstar, &Dopri::default(), &opts).unwrap();
    let names = [
        "sign_pattern",
        "hamiltonian_constancy",
        "jump_bracket",
        "conserved_x2_plus_psi3",
    ];
    let present = names.iter().all(|n| cert.check(n).is_some());
    let detail = cert
        .checks
        .iter()
        .map(|c| format!("{}={:.2e}{}", c.name, c.value, if c.pass { "" } else { "!" }))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(cert.passed() && present && cert.hypotheses, detail)
}

fn falsification() -> Outcome {
    let prob = Problem::Particles(presets::single(7.0).unwrap());
    let s = sweep(&prob, 4096).unwrap();
    let best = refine(&prob, &s).best;
    let rep = falsify_with_step_controls(&prob, 10_000, DEFAULT_SEED, best.cost).unwrap();
    outcome(
        rep.violations == 0 && rep.min_margin >= -TIE_TOL,
        format!(
            "J_min = {:.9} at t* = {:.9}; {} trials, {} violations, min margin {:.3e}, seed {}",
            best.cost, best.tstar, rep.trials, rep.violations, rep.min_margin, rep.seed
        ),
    )
}

fn sweep_structure() -> Outcome {
    let mut notes = Vec::new();
    let small = sweep(&Problem::Particles(presets::short_horizon_single(0.1).unwrap()), 4096).unwrap();
    let a = small.argmin == 0 && small.t_argmin() == small.t0;
    notes.push(format!("(a) argmin {}", small.t_argmin()));

    let strong = sweep(&Problem::Particles(presets::single(7.0).unwrap()), 4096).unwrap();
    let b = (strong.t_argmin() - EXIT_W).abs() <= strong.cell();
    notes.push(format!("(b) argmin {:.6} vs exit {EXIT_W:.6}", strong.t_argmin()));

    let mut c = true;
    for cs in [0.8, 1.0] {
        let ens = presets::two_mass(cs).unwrap();
        let p = *ens.params();
        let prob = Problem::Particles(ens.clone());
        let s = sweep(&prob, 4096).unwrap();
        let under_w = Control::constant(&p, p.w).unwrap();
        let mut expected: Vec<f64> = ens
            .particles()
            .iter()
            .map(|q| exit_time(&p, q.x2, &under_w).unwrap())
            .collect();
        expected.sort_by(f64::total_cmp);
        let segs = s.segments();
        let bounds_ok = segs.len() == 3
            && (segs[0].1 - expected[0]).abs() < 1e-12
            && (segs[1].1 - expected[1]).abs() < 1e-12
            && (segs[1].0 - expected[0]).abs() < 1e-12
            && (segs[2].0 - expected[1]).abs() < 1e-12;
        let best = refine(&prob, &s).best;
        let u = Control::bang_bang(&p, best.tstar);
        let traj = simulate(&ens, &u).unwrap();
        let adj = backward_adjoint(&traj, &u, &Dopri::default()).unwrap();
        let sf = switching_function(&traj, &adj, 4001);
        c &= bounds_ok && sf.single_upcrossing();
        notes.push(format!(
            "(c) cs={cs}: {} segments, t* = {:.6}, zeros {:?}, slopes {:?}",
            segs.len(),
            best.tstar,
            sf.zeros,
            sf.slopes
        ));
    }
    outcome(a && b && c, notes.join("; "))
}

fn duality() -> Outcome {
    let p = ModelParams::standard(7.0);
    let rho0 = presets::uniform_density(&p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut worst = f64::INFINITY;
    let mut all = true;
    for _ in 0..20 {
        let t_tilde = rng.gen_range(p.t0 + 0.1..p.t1 - 0.1);
        let u = random_step_control(&p.with_horizon(t_tilde), &mut rng, 8);
        let rep = duality_check(&p, &rho0, &u, p.t1, 200).unwrap();
        all &= rep.all_positive;
        worst = worst.min(rep.min_increment);
    }
    outcome(all, format!("smallest increment of M over 20 extensions: {worst:.3e}"))
}

fn dirac_limit() -> Outcome {
    let p = ModelParams::standard(7.0);
    let rho0 = presets::uniform_density(&p).unwrap();
    let u = Control::bang_bang(&p, EXIT_W);
    let (levels, reference) = dirac_refinement(&p, &rho0, &u, &[16, 64, 256, 1024], 100).unwrap();
    let decreasing = levels.windows(2).all(|w| w[1].error < w[0].error);
    let finest = levels.last().unwrap().error / reference.abs();
    let errs: Vec<String> = levels.iter().map(|l| format!("n={}:{:.3e}", l.n, l.error)).collect();
    outcome(
        decreasing && finest < 1e-6,
        format!("J_ref = {reference:.9}; {}; finest relative {finest:.3e}", errs.join(" ")),
    )
}

fn mollifier_convergence() -> Outcome {
    let ens = presets::single(7.0).unwrap();
    let p = *ens.params();
    let u = Control::bang_bang(&p, EXIT_W);
    let schedule = [1e2, 1e3, 1e4, 1e5];
    let rows = jump_bracket_convergence(&ens, &u, 0, &schedule, &Dopri::default()).unwrap();
    let a: Vec<f64> = rows.iter().map(|r| r.a).collect();
    let slope = loglog_slope(&schedule, &a);
    let decreasing = a.windows(2).all(|w| w[1].abs() < w[0].abs());
    let inside = rows[2].inside && rows[3].inside;
    let detail = rows
        .iter()
        .map(|r| format!("i={:.0e}: A={:.3e} delta={:.6e} in [{:.6e}, {:.6e}]", r.i, r.a, r.delta, r.bracket_lo, r.bracket_hi))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(
        decreasing && slope <= -0.8 && inside,
        format!("slope {slope:.4}; {detail}"),
    )
}

fn parameter_assumptions() -> Outcome {
    let p = ModelParams::standard(1.0);
    let valid = p.validate().is_ok();
    let rep = p.assumptions();
    let ratio_exact = 36.0 / (11.892 * 6.0 + 2.288);
    let ratio_ok = (rep.threshold_ratio - ratio_exact).abs() < 1e-15
        && (rep.threshold_ratio - 0.4889).abs() < 5e-5
        && rep.threshold_ratio < p.w
        && p.w < 1.0;
    let margin_ok = (rep.curvature_margin - 0.108).abs() < 1e-12 && rep.curvature_margin > 0.0;
    let low_w = ModelParams { w: 0.4, ..p }.validate();
    let rejected = matches!(low_w, Err(ModelError::InvalidParams { name: "w", .. }));
    outcome(
        valid && ratio_ok && margin_ok && rejected,
        format!(
            "ys^2/(c1 ys + c2) = {:.10}, 2 ys - c1 = {:.10}, w = 0.4 -> {}",
            rep.threshold_ratio,
            rep.curvature_margin,
            match low_w {
                Err(e) => e.to_string(),
                Ok(()) => "accepted".into(),
            }
        ),
    )
}

type Criterion = (&'static str, u64, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("1 exit-time closed form", 1, exit_time_closed_form),
        ("2 oracle equivalence", 30, oracle_equivalence),
        ("3 HMP certificate", 5, hmp_certificate),
        ("4 bang-bang falsification", 120, falsification),
        ("5 sweep structure", 60, sweep_structure),
        ("6 duality", 10, duality),
        ("7 Dirac to measure limit", 30, dirac_limit),
        ("8 mollifier convergence", 120, mollifier_convergence),
        ("9 parameter assumptions", 1, parameter_assumptions),
    ];
    let mut failed = 0;
    for (name, limit, f) in criteria {
        let o = timed(Duration::from_secs(limit), f);
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
