use super::mild::{phi1, BlowUpEvent, Problem, Solution};
use crate::error::{Error, Result};
use crate::field::FieldTrajectory;
use crate::norms::sup_norm;
use crate::rough::SmoothMap;
use crate::spectral::{self, wavenumber};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Discretisation of `∂ₓu` in the nonlinear term `g(u)∂ₓu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    /// `(u_{j+1} − u_j)/h`
    Forward,
    /// `(u_j − u_{j−1})/h`
    Backward,
    /// `(u_{j+1} − u_{j−1})/2h`
    Centered,
    /// Pseudo-spectral derivative.
    SpectralGalerkin,
    /// `∂ₓ G(u)` with `DG = g`, differentiated spectrally.
    Conservative,
}

impl Stencil {
    pub fn is_finite_difference(self) -> bool {
        matches!(self, Stencil::Forward | Stencil::Backward | Stencil::Centered)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StencilSpec {
    pub stencil: Stencil,
    pub dt: f64,
}

/// Semi-implicit scheme for smooth noise: with `w = u − ψ`, the linear part
/// is stepped exactly in Fourier space and `f̂(u) + g(u) D u` is frozen over
/// each step. `ψ` is synthesised from the trajectory on the problem grid.
///
/// `primitive` is required by [`Stencil::Conservative`]: a map `G: ℝⁿ → ℝⁿ`
/// with Jacobian `g`.
pub fn classical_solve(
    problem: &Problem,
    trajectory: &FieldTrajectory,
    spec: StencilSpec,
    horizon: f64,
    primitive: Option<&SmoothMap>,
) -> Result<Solution> {
    let (n, m) = (problem.dim(), problem.cells());
    if trajectory.dim() != n {
        return Err(Error::shape(format!("noise of dimension {n}"), trajectory.dim()));
    }
    let h = 2.0 * PI / m as f64;
    if !(spec.dt > 0.0) {
        return Err(Error::config("stencil.dt", "time step must be positive"));
    }
    if spec.stencil.is_finite_difference() && spec.dt > h * h / 4.0 * (1.0 + 1e-12) {
        return Err(Error::config(
            "stencil.dt",
            format!("Δt = {} exceeds h²/4 = {}", spec.dt, h * h / 4.0),
        ));
    }
    let primitive = match (spec.stencil, primitive) {
        (Stencil::Conservative, None) => {
            return Err(Error::config("stencil", "conservative form needs the primitive of g"))
        }
        (Stencil::Conservative, Some(p)) => {
            if p.input_dim() != n || p.output_dim() != n {
                return Err(Error::shape(format!("primitive ℝ^{n} → ℝ^{n}"), p.input_dim()));
            }
            Some(p)
        }
        _ => None,
    };
    let times = trajectory.times();
    let spacing = times[1] - times[0];
    let stride = (spec.dt / spacing).round() as usize;
    if stride == 0 || ((stride as f64 * spacing) - spec.dt).abs() > 1e-9 * spec.dt {
        return Err(Error::Alignment(spec.dt));
    }
    let target = times[0] + horizon;
    let last = times
        .iter()
        .position(|&t| (t - target).abs() <= 1e-9 * (1.0 + target.abs()))
        .ok_or(Error::Alignment(target))?;
    if last % stride != 0 {
        return Err(Error::Alignment(horizon));
    }
    let psi_at = |i: usize| trajectory.snapshot(i).evaluate_components(m);
    let sg = *problem.semigroup();
    let decay: Vec<f64> = (0..m).map(|j| sg.multiplier(wavenumber(j, m), spec.dt)).collect();
    let euler: Vec<f64> = (0..m)
        .map(|j| spec.dt * phi1(sg.rate(wavenumber(j, m)) * spec.dt))
        .collect();

    let mut psi = psi_at(0)?;
    let mut w: Vec<f64> = problem.initial().iter().zip(&psi).map(|(a, b)| a - b).collect();
    let mut sol = Solution {
        times: vec![times[0]],
        states: vec![problem.initial().to_vec()],
        remainder_norms: vec![0.0],
        intervals: vec![],
        blow_up: None,
        noise_norm: 0.0,
        radius: f64::INFINITY,
    };
    let nn = n * n;
    let mut uj = vec![0.0; n];
    let mut fh = vec![0.0; n];
    let mut g = vec![0.0; nn];
    let mut node = 0;
    while node < last {
        let u: Vec<f64> = w.iter().zip(&psi).map(|(a, b)| a + b).collect();
        let du = derivative(&u, m, spec.stencil, primitive, h)?;
        let mut nl = vec![0.0; n * m];
        for j in 0..m {
            for c in 0..n {
                uj[c] = u[c * m + j];
            }
            let x = j as f64 * h;
            problem.drift_hat(&uj, x, &mut fh);
            if spec.stencil == Stencil::Conservative {
                for i in 0..n {
                    nl[i * m + j] = fh[i] + du[i * m + j];
                }
            } else {
                problem.coupling().eval_into(&uj, x, &mut g);
                for i in 0..n {
                    let mut s = fh[i];
                    for l in 0..n {
                        s += g[i * n + l] * du[l * m + j];
                    }
                    nl[i * m + j] = s;
                }
            }
        }
        let next = node + stride;
        let mut new_w = Vec::with_capacity(n * m);
        for c in 0..n {
            let wc = spectral::forward(&w[c * m..(c + 1) * m]);
            let nc = spectral::forward(&nl[c * m..(c + 1) * m]);
            let stepped: Vec<Complex64> = (0..m).map(|j| decay[j] * wc[j] + euler[j] * nc[j]).collect();
            new_w.extend(spectral::inverse(&stepped));
        }
        w = new_w;
        psi = psi_at(next)?;
        let state: Vec<f64> = w.iter().zip(&psi).map(|(a, b)| a + b).collect();
        let size = sup_norm(&state);
        if !size.is_finite() || size > 1e8 {
            sol.blow_up = Some(BlowUpEvent {
                time: times[next],
                norm: size,
                radius: 1e8,
            });
            return Ok(sol);
        }
        sol.times.push(times[next]);
        sol.states.push(state);
        sol.remainder_norms.push(sup_norm(&w));
        node = next;
    }
    Ok(sol)
}

/// `D u` per component (or `∂ₓG(u)` for the conservative form).
fn derivative(u: &[f64], m: usize, stencil: Stencil, primitive: Option<&SmoothMap>, h: f64) -> Result<Vec<f64>> {
    let n = u.len() / m;
    let mut out = vec![0.0; u.len()];
    match stencil {
        Stencil::Forward | Stencil::Backward | Stencil::Centered => {
            for c in 0..n {
                let uc = &u[c * m..(c + 1) * m];
                for j in 0..m {
                    let (l, r) = (uc[(j + m - 1) % m], uc[(j + 1) % m]);
                    out[c * m + j] = match stencil {
                        Stencil::Forward => (r - uc[j]) / h,
                        Stencil::Backward => (uc[j] - l) / h,
                        _ => (r - l) / (2.0 * h),
                    };
                }
            }
        }
        Stencil::SpectralGalerkin => {
            for c in 0..n {
                out[c * m..(c + 1) * m].copy_from_slice(&spectral::derivative(&u[c * m..(c + 1) * m]));
            }
        }
        Stencil::Conservative => {
            let p = primitive.ok_or_else(|| Error::config("stencil", "missing primitive"))?;
            let mut gu = vec![0.0; n * m];
            let mut uj = vec![0.0; n];
            let mut o = vec![0.0; n];
            for j in 0..m {
                for c in 0..n {
                    uj[c] = u[c * m + j];
                }
                p.eval_into(&uj, j as f64 * h, &mut o);
                for c in 0..n {
                    gu[c * m + j] = o[c];
                }
            }
            for c in 0..n {
                out[c * m..(c + 1) * m].copy_from_slice(&spectral::derivative(&gu[c * m..(c + 1) * m]));
            }
        }
    }
    Ok(out)
}
