use follicle_core::adjoint::{hamiltonian, maximizing_control};
use follicle_core::measure::{pushforward_integrate, InitialMeasure, WeightedPoint};
use follicle_core::model::{exit_time, maturation_flow, maturation_flow_integrated};
use follicle_core::optimizer::{random_step_control, Problem};
use follicle_core::regularized::Mollifier;
use follicle_core::report::fmt_f64;
use follicle_core::{simulate, Control, Dopri, Ensemble, ModelParams, Particle};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn control(cs: f64, seed: u64) -> (ModelParams, Control) {
    let p = ModelParams::standard(cs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_step_control(&p, &mut rng, 8);
    (p, u)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flow_preserves_order_and_stays_below_equilibrium(
        y0 in 0.0..12.0f64, dy in 1e-6..3.0f64, seed in any::<u64>(), t in 0.0..17.0f64,
    ) {
        let (p, u) = control(1.0, seed);
        let ybar = p.asymptotic_maturity();
        let y1 = (y0 + dy).min(ybar - 1e-9);
        prop_assume!(y1 > y0);
        let a = maturation_flow(&p, t, y0, &u).unwrap();
        let b = maturation_flow(&p, t, y1, &u).unwrap();
        // the slowest equilibrium, root of a(y) + b(y) w
        let cw = p.c1 * p.w;
        let floor = 0.5 * (cw + (cw * cw + 4.0 * p.c2 * p.w).sqrt());
        prop_assert!(a <= b);
        prop_assert!(a >= y0.min(floor) * (1.0 - 1e-12) && b <= ybar);
    }

    #[test]
    fn flow_agrees_with_integrator(y0 in 0.0..12.0f64, seed in any::<u64>(), t in 0.0..17.0f64) {
        let (p, u) = control(1.0, seed);
        let exact = maturation_flow(&p, t, y0, &u).unwrap();
        let numeric = maturation_flow_integrated(&p, t, y0, &u, &Dopri::default()).unwrap();
        prop_assert!((exact - numeric).abs() < 1e-8, "{exact} {numeric}");
    }

    #[test]
    fn flow_is_a_semigroup(y0 in 0.0..6.0f64, s in 0.0..3.0f64, r in 0.0..3.0f64, u in 0.5..1.0f64) {
        let p = ModelParams::standard(1.0);
        let c = Control::constant(&p, u).unwrap();
        let mid = maturation_flow(&p, s, y0, &c).unwrap();
        let two = maturation_flow(&p, r, mid, &c).unwrap();
        let one = maturation_flow(&p, s + r, y0, &c).unwrap();
        prop_assert!((two - one).abs() <= 1e-12 * one.max(1.0));
    }

    #[test]
    fn exit_time_decreases_with_speed_and_start(y0 in 0.0..5.9f64, u in 0.5..0.99f64, du in 1e-3..0.5f64) {
        let p = ModelParams::standard(1.0);
        let slow = exit_time(&p, y0, &Control::constant(&p, u).unwrap()).unwrap();
        let fast = exit_time(&p, y0, &Control::constant(&p, (u + du).min(1.0)).unwrap()).unwrap();
        let later = exit_time(&p, (y0 + 0.05).min(6.0), &Control::constant(&p, u).unwrap()).unwrap();
        prop_assert!(fast < slow);
        prop_assert!(later < slow);
    }

    #[test]
    fn mass_law_and_ordering(
        cs in 0.0..8.0f64, seed in any::<u64>(),
        ys in proptest::collection::btree_set(0u32..1200, 1..8),
    ) {
        let (p, u) = control(cs, seed);
        let parts: Vec<Particle> = ys.iter().map(|&k| Particle::new(0.0, k as f64 / 100.0, 1.0 + k as f64 / 1000.0)).collect();
        let ens = Ensemble::new(p, parts).unwrap();
        let traj = simulate(&ens, &u).unwrap();
        for j in 0..=34 {
            let t = 0.5 * j as f64;
            for k in 0..traj.len() {
                let x3 = traj.mass(k, t);
                let law = traj.initial()[k].x3 * (cs * t.min(traj.exit_times()[k])).exp();
                prop_assert!((x3 - law).abs() <= 1e-12 * law);
                if k > 0 {
                    prop_assert!(traj.maturity(k - 1, t) <= traj.maturity(k, t));
                    prop_assert!(traj.exit_times()[k] <= traj.exit_times()[k - 1]);
                }
            }
        }
    }

    #[test]
    fn bang_bang_cost_is_continuous(tstar in 0.0..16.99f64, cs in 0.0..8.0f64) {
        let prob = Problem::Particles(Ensemble::single(ModelParams::standard(cs), Particle::new(0.0, 1.0, 1.0)).unwrap());
        let h = 1e-7;
        let a = prob.bang_bang_cost(tstar).unwrap();
        let b = prob.bang_bang_cost(tstar + h).unwrap();
        // |dJ/dt*| is bounded by x3 (cs ybar + |v|max) times the exit sensitivity
        let bound = a.abs() * (cs + 1.0) * 10.0 * h;
        prop_assert!((a - b).abs() <= bound, "{a} {b}");
    }

    #[test]
    fn maximizing_control_maximizes(
        y in 0.0..12.0f64, m in 0.1..10.0f64, psi2 in -20.0..20.0f64, psi3 in -20.0..20.0f64, u in 0.5..1.0f64,
    ) {
        let p = ModelParams::standard(2.0);
        let x = [0.0, y, m];
        let psi = [0.0, psi2, psi3];
        if let Some(best) = maximizing_control(&p, &x, &psi) {
            prop_assert!(hamiltonian(&p, &x, best, &psi) >= hamiltonian(&p, &x, u, &psi) - 1e-12);
        }
    }

    #[test]
    fn chi_is_monotone_and_bounded(i in 1.0..1e6f64, y0 in 5.0..7.0f64, dy in 0.0..0.1f64) {
        let m = Mollifier::new(i).unwrap();
        let (a, b) = (m.chi(6.0, y0), m.chi(6.0, y0 + dy));
        prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        prop_assert!(b <= a);
        prop_assert!(m.chi_prime(6.0, y0) <= 0.0);
    }

    #[test]
    fn transported_mass_without_gain_is_conserved(
        pts in proptest::collection::vec((0.0..1.0f64, 0.0..6.0f64, 0.01..3.0f64), 1..20),
        seed in any::<u64>(), t in 0.0..17.0f64,
    ) {
        let (p, u) = control(0.0, seed);
        let points: Vec<WeightedPoint> = pts.iter().map(|&(x, y, weight)| WeightedPoint { x, y, weight }).collect();
        let total: f64 = points.iter().map(|q| q.weight).sum();
        let rho = InitialMeasure::particles(points, &p).unwrap();
        let m = pushforward_integrate(&p, &rho, &u, t, |_, _| 1.0).unwrap();
        prop_assert!((m - total).abs() <= 1e-12 * total);
    }

    #[test]
    fn csv_numbers_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let s = fmt_f64(v);
        prop_assert_eq!(s.parse::<f64>().unwrap(), v);
    }

    #[test]
    fn random_controls_stay_admissible(seed in any::<u64>(), t in 0.0..17.0f64) {
        let (p, u) = control(1.0, seed);
        let v = u.value_at(t);
        prop_assert!(v >= p.w && v <= 1.0);
        prop_assert!(u.values().len() <= 8);
    }
}
