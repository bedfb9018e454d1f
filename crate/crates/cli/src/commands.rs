use anyhow::{bail, Result};
use follicle_core::adjoint::{adjoint_rows, backward_adjoint, certify_bang_bang, CertifyOptions};
use follicle_core::measure::{cost_measure, dirac_refinement, pushforward_integrate};
use follicle_core::model::exit_time;
use follicle_core::optimizer::{
    falsify_with_step_controls, refine, reverse_family_check, sweep, Problem, Refined, SweepResult,
};
use follicle_core::regularized::{jump_bracket_convergence, loglog_slope};
use follicle_core::report::{fmt_f64, svg_plot, Series, Table};
use follicle_core::{simulate, Control, Dopri};

use crate::config::ExperimentConfig;
use crate::output::{Output, Report};

/// Result of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Failed,
}

fn uniform(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| if k + 1 == n { t1 } else { t0 + (t1 - t0) * k as f64 / (n - 1) as f64 })
        .collect()
}

fn assumptions(rep: &mut Report, cfg: &ExperimentConfig) {
    let a = cfg.params.assumptions();
    rep.section("assumptions");
    rep.num("threshold_ratio", a.threshold_ratio);
    rep.num("curvature_margin", a.curvature_margin);
    rep.num("gain_threshold", a.gain_threshold);
    rep.num("slowest_exit", a.slowest_exit);
    rep.flag("sufficient_conditions", a.sufficient_conditions());
}

pub fn simulate_cmd(cfg: &ExperimentConfig, out: &mut Output) -> Result<Status> {
    let p = cfg.params;
    let opts = &cfg.simulate;
    let (control, label) = match (opts.u, opts.tstar) {
        (_, Some(t)) => (Control::bang_bang(&p, t), format!("bang-bang w -> 1 at {t}")),
        (u, None) => {
            let u = u.unwrap_or(p.w);
            (Control::constant(&p, u)?, format!("constant {u}"))
        }
    };
    let times = uniform(p.t0, p.t1, opts.samples);
    let mut rep = Report::default();
    rep.text("control", &label);
    match &cfg.problem {
        Problem::Particles(ens) => {
            let traj = simulate(ens, &control)?;
            let mut header = vec!["t".to_string()];
            for k in 0..traj.len() {
                header.extend([format!("x1_{k}"), format!("x2_{k}"), format!("x3_{k}")]);
            }
            let mut table = Table::new(header);
            let mut moments = Table::new(["t", "M", "mass"]);
            for &t in &times {
                let mut row = vec![t];
                for k in 0..traj.len() {
                    row.extend(traj.state(k, t));
                }
                table.push_f64(&row);
                let mass: f64 = (0..traj.len()).map(|k| traj.mass(k, t)).sum();
                moments.push_f64(&[t, traj.maturity_moment(t), mass]);
            }
            out.csv("trajectory.csv", &table)?;
            out.csv("moment.csv", &moments)?;
            rep.int("particles", traj.len());
            rep.list("exit_times", traj.exit_times());
            rep.num("J", traj.cost());
        }
        Problem::Measure { rho0, .. } => {
            let mut moments = Table::new(["t", "M", "mass"]);
            for &t in &times {
                let m = pushforward_integrate(&p, rho0, &control, t, |_, y| y)?;
                let mass = pushforward_integrate(&p, rho0, &control, t, |_, _| 1.0)?;
                moments.push_f64(&[t, m, mass]);
            }
            out.csv("moment.csv", &moments)?;
            let c = cost_measure(&p, rho0, &control)?;
            rep.int("quadrature_points", rho0.points().len());
            rep.num("J", c.cost);
            rep.num("unexited_mass", c.unexited_mass);
        }
    }
    assumptions(&mut rep, cfg);
    out.report("summary.txt", &rep)?;
    print!("{}", rep.as_str());
    Ok(Status::Ok)
}

fn locate(cfg: &ExperimentConfig, grid: usize) -> Result<(SweepResult, Refined)> {
    let s = sweep(&cfg.problem, grid)?;
    let r = refine(&cfg.problem, &s);
    Ok((s, r))
}

pub fn sweep_cmd(cfg: &ExperimentConfig, out: &mut Output) -> Result<Status> {
    let (s, r) = locate(cfg, cfg.sweep.grid)?;
    let mut table = Table::new(["t_star", "J", "segment_index"]);
    for k in 0..s.grid.len() {
        table.push(vec![fmt_f64(s.grid[k]), fmt_f64(s.values[k]), s.segment_index[k].to_string()]);
    }
    out.csv("sweep.csv", &table)?;
    let curve = Series {
        label: "J(BangBang(t*))".into(),
        points: s.grid.iter().copied().zip(s.values.iter().copied()).collect(),
    };
    let svg = svg_plot("cost against switching time", "t*", "J", &[curve], &s.exits, out.preamble());
    out.svg("sweep.svg", &svg)?;

    let mut rep = Report::default();
    rep.int("grid", s.grid.len());
    rep.num("argmin", s.t_argmin());
    rep.num("J_min_grid", s.j_min());
    rep.list("exit_times", &s.exits);
    rep.int("segments", s.segment_count());
    rep.flag("sufficient_conditions", s.hypotheses);
    rep.section("refined");
    rep.num("tstar", r.best.tstar);
    rep.num("J_min", r.best.cost);
    rep.int("segment", r.best.segment);
    rep.flag("local_min", r.local_min);
    rep.list("ties", &r.ties.iter().map(|c| c.tstar).collect::<Vec<_>>());
    let reverse = reverse_family_check(&cfg.problem, s.grid.len(), r.best.cost)?;
    rep.section("reverse_family");
    rep.num("best", reverse.best_reverse);
    rep.num("best_tstar", reverse.best_reverse_t);
    rep.flag("pass", reverse.pass);
    let mut ok = reverse.pass || !s.hypotheses;
    if cfg.sweep.trials > 0 {
        let f = falsify_with_step_controls(&cfg.problem, cfg.sweep.trials, cfg.sweep.seed, r.best.cost)?;
        rep.section("falsification");
        rep.int("seed", f.seed as usize);
        rep.int("trials", f.trials);
        rep.int("violations", f.violations);
        rep.num("min_margin", f.min_margin);
        rep.list("margin_quantiles", &f.quantiles);
        ok &= f.passed() || !s.hypotheses;
    }
    out.report("sweep_report.txt", &rep)?;
    print!("{}", rep.as_str());
    Ok(if ok { Status::Ok } else { Status::Failed })
}

pub fn verify_cmd(cfg: &ExperimentConfig, out: &mut Output) -> Result<Status> {
    let Some(ens) = cfg.ensemble() else {
        bail!("verify needs an ensemble problem");
    };
    let tstar = match cfg.verify.tstar {
        Some(t) => t,
        None => locate(cfg, cfg.verify.grid)?.1.best.tstar,
    };
    let solver = Dopri::default();
    let opts = CertifyOptions {
        grid: cfg.verify.samples,
        ..CertifyOptions::default()
    };
    let cert = certify_bang_bang(ens, tstar, &solver, &opts)?;

    let p = cfg.params;
    let u = Control::bang_bang(&p, tstar);
    let traj = simulate(ens, &u)?;
    let adj = backward_adjoint(&traj, &u, &solver)?;
    let mut header = vec!["t".to_string()];
    for k in 0..ens.len() {
        header.extend([format!("psi1_{k}"), format!("psi2_{k}"), format!("psi3_{k}")]);
    }
    header.extend(["phi_0".to_string(), "phi_N".to_string()]);
    let mut table = Table::new(header);
    for row in adjoint_rows(&traj, &adj, &uniform(p.t0, p.t1, cfg.verify.samples)) {
        table.push_f64(&row);
    }
    out.csv("adjoint.csv", &table)?;

    let mut rep = Report::default();
    rep.num("tstar", cert.tstar);
    rep.flag("hypotheses", cert.hypotheses);
    if !cert.hypotheses {
        rep.text("note", "hypotheses not satisfied; checks are informative only");
    }
    rep.num("hamiltonian", cert.hamiltonian);
    for c in &cert.checks {
        rep.section(&format!("checks.{}", c.name));
        rep.num("value", c.value);
        rep.num("threshold", c.threshold);
        rep.flag("pass", c.pass);
    }
    for (k, j) in cert.jumps.iter().enumerate() {
        rep.section(&format!("jumps.{k}"));
        rep.num("time", j.time);
        rep.num("value", j.value);
        rep.list("bracket", &[j.bracket.0, j.bracket.1]);
    }
    rep.section("overall");
    rep.flag("pass", cert.passed());
    out.report("certificate.txt", &rep)?;
    println!("{cert}");
    if !cert.hypotheses {
        println!("hypotheses not satisfied");
        return Ok(Status::Ok);
    }
    Ok(if cert.passed() { Status::Ok } else { Status::Failed })
}

pub fn converge_cmd(cfg: &ExperimentConfig, out: &mut Output) -> Result<Status> {
    let p = cfg.params;
    let c = &cfg.converge;
    let slow = Control::constant(&p, p.w)?;
    let studied_start = match cfg.ensemble() {
        Some(e) => {
            let Some(q) = e.particles().get(c.particle) else {
                bail!("converge.particle = {} but the ensemble has {} masses", c.particle, e.len());
            };
            q.x2
        }
        None => 0.0,
    };
    let tstar = match c.tstar {
        Some(t) => t,
        None => exit_time(&p, studied_start.min(p.ys), &slow)?.min(p.t1),
    };
    let control = Control::bang_bang(&p, tstar);
    let rho0 = match &cfg.problem {
        Problem::Particles(e) => follicle_core::measure::InitialMeasure::from_ensemble(e)?,
        Problem::Measure { rho0, .. } => rho0.clone(),
    };
    let (levels, reference) = dirac_refinement(&p, &rho0, &control, &c.levels, c.reference_nodes)?;
    let mut table = Table::new(["level", "n", "J", "error"]);
    for l in &levels {
        table.push(vec![l.level.to_string(), l.n.to_string(), fmt_f64(l.cost), fmt_f64(l.error)]);
    }
    out.csv("refinement.csv", &table)?;
    let mut rep = Report::default();
    rep.num("tstar", tstar);
    rep.section("dirac_limit");
    rep.num("J_ref", reference);
    rep.list("errors", &levels.iter().map(|l| l.error).collect::<Vec<_>>());
    let decreasing = levels.windows(2).all(|w| w[1].error < w[0].error);
    rep.flag("decreasing", decreasing);

    let mut ok = true;
    match cfg.ensemble() {
        Some(ens) => {
            let rows = jump_bracket_convergence(ens, &control, c.particle, &c.schedule, &Dopri::default())?;
            let mut table = Table::new(["i", "A_i", "Delta_i", "bracket_lo", "bracket_hi", "inside", "layer_width"]);
            for r in &rows {
                table.push(vec![
                    fmt_f64(r.i),
                    fmt_f64(r.a),
                    fmt_f64(r.delta),
                    fmt_f64(r.bracket_lo),
                    fmt_f64(r.bracket_hi),
                    r.inside.to_string(),
                    fmt_f64(r.layer_width),
                ]);
            }
            out.csv("mollifier.csv", &table)?;
            rep.section("mollifier");
            rep.text("kernel", "30 i s^2 (1 - s)^2, s = -x i on [-1/i, 0]");
            rep.text("reference_control", "ramp of width 1/i centred at the crossing");
            let xs: Vec<f64> = rows.iter().map(|r| r.i).collect();
            let a: Vec<f64> = rows.iter().map(|r| r.a).collect();
            if rows.len() > 1 {
                rep.num("A_rate", loglog_slope(&xs, &a));
            }
            let tail = rows.len().saturating_sub(2);
            let inside = rows[tail..].iter().all(|r| r.inside);
            rep.flag("inside_largest_two", inside);
            ok &= inside;
        }
        None => {
            rep.section("mollifier");
            rep.text("skipped", "the mollifier study needs an ensemble problem");
        }
    }
    out.report("converge_report.txt", &rep)?;
    print!("{}", rep.as_str());
    Ok(if ok { Status::Ok } else { Status::Failed })
}
