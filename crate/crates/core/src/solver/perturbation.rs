use super::mild::{solve_fixed_point, Problem, SolverOptions};
use super::noise::NoiseSource;
use crate::error::{Error, Result};
use crate::norms::{c_alpha, max_over_components};
use crate::rough::{gap_sizes, norm};
use serde::{Deserialize, Serialize};

/// Input and output distances of two solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationResponse {
    /// `‖u₀ − ū₀‖_{C^β} + sup_t ‖ψ_t − ψ̄_t‖_{C^β} + sup_t ‖𝚿_t − 𝚿̄_t‖_{2α}`.
    pub input_distance: f64,
    /// `sup_t ‖u_t − ū_t‖_{C^α}` over the common times.
    pub output_distance: f64,
    /// Set when either run blew up; distances then cover the common prefix.
    pub flagged: bool,
}

fn area_distance(a: &NoiseSource, b: &NoiseSource, i: usize, alpha: f64) -> f64 {
    let (pa, pb) = (a.lift(i), b.lift(i));
    let m = pa.grid().cells();
    let h = pa.grid().spacing();
    let d = pa.dim();
    let mut worst = 0.0f64;
    let mut diff = vec![0.0; d * d];
    for gap in gap_sizes(m, false) {
        let w = (gap as f64 * h).powf(2.0 * alpha);
        for s in 0..=(m - gap) {
            let (x, y) = (
                pa.query_area(s, s + gap).expect("nodes in range"),
                pb.query_area(s, s + gap).expect("nodes in range"),
            );
            for k in 0..d * d {
                diff[k] = x[k] - y[k];
            }
            worst = worst.max(norm(&diff) / w);
        }
    }
    worst
}

/// Solves both problems to `horizon` and compares inputs and outputs.
pub fn perturbation_response(
    problem: &Problem,
    noise: &NoiseSource,
    other: &Problem,
    other_noise: &NoiseSource,
    horizon: f64,
    opts: &SolverOptions,
) -> Result<PerturbationResponse> {
    if noise.len() != other_noise.len() || noise.times() != other_noise.times() {
        return Err(Error::Domain("perturbed noise must share the time grid".into()));
    }
    let m = problem.cells();
    let (alpha, beta) = (problem.alpha(), problem.beta());
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
    let mut input = max_over_components(&diff(problem.initial(), other.initial()), m, |u| c_alpha(u, beta));
    let (mut psi_worst, mut area_worst) = (0.0f64, 0.0f64);
    let last = noise
        .times()
        .iter()
        .position(|&t| t >= noise.times()[0] + horizon - 1e-12)
        .unwrap_or(noise.len() - 1);
    for i in 0..=last {
        psi_worst = psi_worst.max(max_over_components(
            &diff(noise.values(i), other_noise.values(i)),
            m,
            |u| c_alpha(u, beta),
        ));
        area_worst = area_worst.max(area_distance(noise, other_noise, i, alpha));
    }
    input += psi_worst + area_worst;
    let a = solve_fixed_point(problem, noise, horizon, opts)?;
    let b = solve_fixed_point(other, other_noise, horizon, opts)?;
    let common = a.states.len().min(b.states.len());
    let output = (0..common)
        .map(|i| max_over_components(&diff(&a.states[i], &b.states[i]), m, |u| c_alpha(u, alpha)))
        .fold(0.0, f64::max);
    Ok(PerturbationResponse {
        input_distance: input,
        output_distance: output,
        flagged: a.blow_up.is_some() || b.blow_up.is_some(),
    })
}
