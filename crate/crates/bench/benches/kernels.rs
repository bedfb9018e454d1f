use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use follicle_bench::{spread_ensemble, staircase, EXIT_W};
use follicle_core::adjoint::backward_adjoint;
use follicle_core::model::maturation_flow;
use follicle_core::optimizer::{sweep, Problem};
use follicle_core::presets;
use follicle_core::regularized::jump_bracket_convergence;
use follicle_core::{simulate, Control, Dopri, ModelParams};

fn flow(c: &mut Criterion) {
    let p = ModelParams::standard(1.0);
    let u = staircase(&p);
    c.bench_function("flow/staircase", |b| {
        b.iter(|| maturation_flow(&p, black_box(13.7), black_box(0.3), &u).unwrap())
    });
}

fn dynamics(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate");
    for n in [1, 10, 100] {
        let ens = spread_ensemble(2.0, n);
        let u = staircase(ens.params());
        g.bench_with_input(BenchmarkId::from_parameter(n), &ens, |b, ens| {
            b.iter(|| simulate(ens, &u).unwrap().cost())
        });
    }
    g.finish();
}

fn adjoint(c: &mut Criterion) {
    let mut g = c.benchmark_group("adjoint");
    let solver = Dopri::default();
    for n in [1, 10] {
        let ens = spread_ensemble(7.0, n);
        let u = Control::bang_bang(ens.params(), EXIT_W);
        let traj = simulate(&ens, &u).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &traj, |b, traj| {
            b.iter(|| backward_adjoint(traj, &u, &solver).unwrap())
        });
    }
    g.finish();
}

fn sweeps(c: &mut Criterion) {
    let prob = Problem::Particles(presets::two_mass(0.8).unwrap());
    c.bench_function("sweep/two_mass_1024", |b| b.iter(|| sweep(&prob, 1024).unwrap()));
}

fn mollifier(c: &mut Criterion) {
    let ens = presets::single(7.0).unwrap();
    let u = Control::bang_bang(ens.params(), EXIT_W);
    let solver = Dopri::default();
    c.bench_function("mollifier/i_1e4", |b| {
        b.iter(|| jump_bracket_convergence(&ens, &u, 0, &[1e4], &solver).unwrap())
    });
}

criterion_group!(benches, flow, dynamics, adjoint, sweeps, mollifier);
criterion_main!(benches);
