//! Shared fixtures for the kernel benchmarks.

use roughpde::field::{lift_field, sample_stationary_trajectory, SpectralField};
use roughpde::measures::{build_drift, PotentialPair};
use roughpde::rng::StreamId;
use roughpde::rough::{ControlledPath, Grid, RoughPath};
use roughpde::solver::{NoiseSource, Problem};

/// Stationary field with the largest band the grid resolves, and its lift.
pub fn gaussian_lift(m: usize, dim: usize, seed: u64) -> (SpectralField, RoughPath) {
    let mut rng = StreamId::new(seed, 0).rng();
    let sf = SpectralField::sample_stationary(m / 2 - 1, dim, 1.0, 0.0, &mut rng);
    let rp = lift_field(&sf, &Grid::periodic(m).expect("valid grid")).expect("resolved field");
    (sf, rp)
}

/// `sin ∘ ψ` as a controlled path over a scalar lift.
pub fn sine_integrand(rp: &RoughPath) -> ControlledPath {
    let sin = roughpde::rough::SmoothMap::scalar(f64::sin, f64::cos, |y| -y.sin());
    ControlledPath::canonical(rp).compose(&sin).expect("dimensions match")
}

/// Default two-component problem on `m` cells with noise sampled on
/// `steps + 1` times of spacing `dt`.
pub fn default_problem(m: usize, steps: usize, dt: f64, seed: u64) -> (Problem, NoiseSource) {
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
    let traj = sample_stationary_trajectory(m / 2 - 1, 2, 1.0, &times, StreamId::new(seed, 0)).expect("valid times");
    let noise = NoiseSource::from_trajectory(&traj, m).expect("resolved noise");
    let (f, g) = build_drift(&PotentialPair::default_pair());
    let mut u0 = vec![0.0; 2 * m];
    for j in 0..m {
        let x = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
        u0[j] = 0.5 * x.sin();
        u0[m + j] = 0.3 * (2.0 * x).cos();
    }
    let problem = Problem::new(f, g, u0, m).expect("consistent problem");
    (problem, noise)
}
