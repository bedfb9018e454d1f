//! Shared fixtures for the benchmarks.

use follicle_core::{Control, Ensemble, ModelParams, Particle};

/// Time at which a mass starting at maturity 0 reaches the threshold under `u = w`.
pub const EXIT_W: f64 = 1.160_909_576_912_811_5;

/// `n` unit masses with maturities spread over `[0, 5]`.
pub fn spread_ensemble(cs: f64, n: usize) -> Ensemble {
    let particles = (0..n)
        .map(|k| Particle::new(0.0, 5.0 * k as f64 / n.max(1) as f64, 1.0))
        .collect();
    Ensemble::new(ModelParams::standard(cs), particles).expect("fixture ensemble is valid")
}

/// Eight-piece alternating control.
pub fn staircase(params: &ModelParams) -> Control {
    let breaks: Vec<f64> = (0..=8)
        .map(|k| params.t0 + (params.t1 - params.t0) * k as f64 / 8.0)
        .collect();
    let values = (0..8).map(|k| if k % 2 == 0 { params.w } else { 1.0 }).collect();
    Control::new(params, breaks, values).expect("fixture control is valid")
}
