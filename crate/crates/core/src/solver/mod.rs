//! Mild solutions of `du = ∂ₓ²u + f(u) + g(u)∂ₓu + σdW` on the circle.
//!
//! With `ψ` the stationary damped linear solution and `U_t = S_t(u₀ − ψ₀)`,
//! the remainder `v = u − ψ − U` solves
//! `v_t = ∫₀ᵗ S_{t−s}[g(u_s)(∂ₓv_s + ∂ₓU_s) + f̂(u_s)] ds + ∫₀ᵗ ∫ p_{t−s}(x−y) g(u_s(y)) dψ_s(y) ds`,
//! where the inner spatial integral is a rough integral against the lift of `ψ_s`.

mod classical;
mod convolution;
mod mild;
mod noise;
mod perturbation;

pub use classical::{classical_solve, Stencil, StencilSpec};
pub use convolution::{
    cell_masses, density_coefficients, rough_heat_convolution, rough_heat_convolution_direct,
    ConvolutionKernel,
};
pub use mild::{
    solve_fixed_point, solve_stepping, BlowUpEvent, IntervalMap, IntervalReport, Problem,
    Solution, SolverOptions,
};
pub use noise::NoiseSource;
pub use perturbation::{perturbation_response, PerturbationResponse};
