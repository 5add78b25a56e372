use super::convolution::{cell_masses, density_coefficients};
use super::noise::NoiseSource;
use crate::error::{Error, Result};
use crate::norms::{c_alpha, max_over_components, sup_norm};
use crate::rough::{ControlledPath, SmoothMap};
use crate::semigroup::SemigroupSpec;
use crate::spectral::{self, ifft_in_place, is_nyquist, wavenumber};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Equation data: drift `f`, matrix field `g`, initial condition and exponents.
#[derive(Debug, Clone)]
pub struct Problem {
    dim: usize,
    cells: usize,
    drift: SmoothMap,
    coupling: SmoothMap,
    initial: Vec<f64>,
    alpha: f64,
    beta: f64,
    semigroup: SemigroupSpec,
}

impl Problem {
    /// `drift: ℝⁿ → ℝⁿ`, `coupling: ℝⁿ → ℝ^{n×n}` (row-major), `initial`
    /// component-major `n × M`. Exponents default to `α = 0.4`, `β = 0.45`;
    /// the semigroup defaults to the damped heat semigroup, in which case the
    /// drift actually used is `f̂(u) = f(u) + u`.
    pub fn new(drift: SmoothMap, coupling: SmoothMap, initial: Vec<f64>, cells: usize) -> Result<Self> {
        let dim = drift.input_dim();
        if drift.output_dim() != dim {
            return Err(Error::shape(format!("drift with {dim} outputs"), drift.output_dim()));
        }
        if coupling.input_dim() != dim || coupling.output_dim() != dim * dim {
            return Err(Error::shape(
                format!("coupling ℝ^{dim} → ℝ^{}", dim * dim),
                format!("ℝ^{} → ℝ^{}", coupling.input_dim(), coupling.output_dim()),
            ));
        }
        if initial.len() != dim * cells {
            return Err(Error::shape(dim * cells, initial.len()));
        }
        Ok(Self {
            dim,
            cells,
            drift,
            coupling,
            initial,
            alpha: 0.4,
            beta: 0.45,
            semigroup: SemigroupSpec::damped(),
        })
    }

    /// Requires `1/3 < α < β < 1/2`.
    pub fn with_exponents(mut self, alpha: f64, beta: f64) -> Result<Self> {
        if !(1.0 / 3.0 < alpha && alpha < beta && beta < 0.5) {
            return Err(Error::Domain(format!(
                "need 1/3 < α < β < 1/2, got α = {alpha}, β = {beta}"
            )));
        }
        self.alpha = alpha;
        self.beta = beta;
        Ok(self)
    }

    pub fn with_semigroup(mut self, semigroup: SemigroupSpec) -> Self {
        self.semigroup = semigroup;
        self
    }

    pub fn with_initial(mut self, initial: Vec<f64>) -> Result<Self> {
        if initial.len() != self.dim * self.cells {
            return Err(Error::shape(self.dim * self.cells, initial.len()));
        }
        self.initial = initial;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn drift(&self) -> &SmoothMap {
        &self.drift
    }

    pub fn coupling(&self) -> &SmoothMap {
        &self.coupling
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn semigroup(&self) -> &SemigroupSpec {
        &self.semigroup
    }

    fn check_noise(&self, noise: &NoiseSource) -> Result<()> {
        if noise.dim() != self.dim {
            return Err(Error::shape(format!("noise of dimension {}", self.dim), noise.dim()));
        }
        if noise.grid().cells() != self.cells {
            return Err(Error::shape(format!("noise on {} cells", self.cells), noise.grid().cells()));
        }
        Ok(())
    }

    /// `f̂(u)` at one node; adds `c·u` for the damping constant `c`.
    pub(crate) fn drift_hat(&self, u: &[f64], x: f64, out: &mut [f64]) {
        self.drift.eval_into(u, x, out);
        if self.semigroup.damping != 0.0 {
            for (o, ui) in out.iter_mut().zip(u) {
                *o += self.semigroup.damping * ui;
            }
        }
    }
}

/// Iteration controls for the fixed-point solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop when `‖v^{(k+1)} − v^{(k)}‖_{1,T}` falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Halve the interval when a successive-difference ratio exceeds this.
    pub contraction_threshold: f64,
    pub max_halvings: usize,
    /// Blow-up radius for `‖v_t‖_{C¹}`; `None` uses `10(1 + ‖u₀‖_{C^α} + ⟪Ψ⟫)`.
    pub blow_up_radius: Option<f64>,
    /// Initial interval length in time nodes; `None` tries the whole horizon.
    pub interval_nodes: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 60,
            contraction_threshold: 0.9,
            max_halvings: 12,
            blow_up_radius: None,
            interval_nodes: None,
        }
    }
}

/// One accepted fixed-point interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalReport {
    pub start: f64,
    pub end: f64,
    pub iterations: usize,
    /// Largest `‖v^{(k+1)} − v^{(k)}‖ / ‖v^{(k)} − v^{(k−1)}‖` over `k ≥ 2`.
    pub contraction_factor: f64,
    pub halvings: usize,
    pub final_increment: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowUpEvent {
    pub time: f64,
    pub norm: f64,
    pub radius: f64,
}

/// Solution snapshots `u = v + ψ + U` with diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub times: Vec<f64>,
    /// Component-major `n × M` per time.
    pub states: Vec<Vec<f64>>,
    /// `‖v_t‖_{C¹}` per time.
    pub remainder_norms: Vec<f64>,
    pub intervals: Vec<IntervalReport>,
    pub blow_up: Option<BlowUpEvent>,
    /// `⟪Ψ⟫` over the horizon.
    pub noise_norm: f64,
    pub radius: f64,
}

impl Solution {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("solutions hold the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("solutions hold the initial time")
    }

    /// Largest contraction factor over the accepted intervals.
    pub fn max_contraction(&self) -> f64 {
        self.intervals.iter().map(|r| r.contraction_factor).fold(0.0, f64::max)
    }

    /// The solution, or the blow-up as an error.
    pub fn into_result(self) -> Result<Self> {
        match self.blow_up {
            Some(b) => Err(Error::BlowUp {
                time: b.time,
                norm: b.norm,
                radius: b.radius,
            }),
            None => Ok(self),
        }
    }
}

/// `(1 − e^{−z})/z`.
pub(crate) fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 - z / 2.0 + z * z / 6.0
    } else {
        -(-z).exp_m1() / z
    }
}

/// `(1 − e^{−z}(1 + z))/z²`, the weight of the left endpoint in the exact
/// integral of `e^{−λ(Δ−r)}` against a linear interpolant.
pub(crate) fn phi_left(z: f64) -> f64 {
    if z.abs() < 0.1 {
        // Σ_j (−1)^j (j+1) z^j / (j+2)!
        let mut term = 0.5;
        let mut sum = 0.0;
        for j in 0..14 {
            sum += term * (j + 1) as f64;
            term *= -z / (j + 3) as f64;
        }
        sum
    } else {
        (1.0 - (-z).exp() * (1.0 + z)) / (z * z)
    }
}

/// Spectral coefficients (FFT bin order) of each component of `u`.
fn coefficients(u: &[f64], m: usize) -> Vec<Complex64> {
    u.chunks(m).flat_map(spectral::forward).collect()
}

fn synthesize(c: &[Complex64], m: usize, derivative: bool) -> Vec<f64> {
    let mut out = Vec::with_capacity(c.len());
    let mut buf = vec![ZERO; m];
    for comp in c.chunks(m) {
        for (j, (b, a)) in buf.iter_mut().zip(comp).enumerate() {
            *b = if is_nyquist(j, m) {
                ZERO
            } else if derivative {
                a * Complex64::new(0.0, wavenumber(j, m) as f64)
            } else {
                *a
            };
        }
        ifft_in_place(&mut buf);
        out.extend(buf.iter().map(|z| z.re));
    }
    out
}

/// `‖w‖_{C¹}` of a field given by its coefficients, maximised over components.
fn c1_of_coefficients(c: &[Complex64], m: usize) -> f64 {
    let v = synthesize(c, m, false);
    let dv = synthesize(c, m, true);
    v.chunks(m)
        .zip(dv.chunks(m))
        .map(|(a, b)| sup_norm(a) + sup_norm(b))
        .fold(0.0, f64::max)
}

/// Physical `U` and `∂ₓU` at one time node.
#[derive(Debug, Clone)]
struct LinearPart {
    value: Vec<f64>,
    derivative: Vec<f64>,
}

fn linear_part(start: &[Complex64], t: f64, spec: &SemigroupSpec, m: usize) -> LinearPart {
    let c: Vec<Complex64> = start
        .chunks(m)
        .flat_map(|comp| {
            comp.iter()
                .enumerate()
                .map(|(j, a)| a * spec.multiplier(wavenumber(j, m), t))
                .collect::<Vec<_>>()
        })
        .collect();
    LinearPart {
        value: synthesize(&c, m, false),
        derivative: synthesize(&c, m, true),
    }
}

/// Evaluates the integrand `N_s = ĝ(u)(∂v + ∂U) + f̂(u) + g(u)∂ψ` of the
/// mild formulation in Fourier space.
fn integrand(
    problem: &Problem,
    noise: &NoiseSource,
    node: usize,
    lin: &LinearPart,
    v: &[Complex64],
) -> Result<Vec<Complex64>> {
    let (n, m) = (problem.dim, problem.cells);
    let grid = noise.grid();
    let vp = synthesize(v, m, false);
    let dv = synthesize(v, m, true);
    let psi = noise.values(node);
    let mut u = vec![0.0; n * m];
    for i in 0..n * m {
        u[i] = vp[i] + psi[i] + lin.value[i];
    }
    let nn = n * n;
    let mut classical = vec![0.0; n * m];
    let mut gvals = vec![0.0; (m + 1) * nn];
    let mut gjac = vec![0.0; (m + 1) * nn * n];
    let mut uj = vec![0.0; n];
    let mut um = vec![0.0; n];
    let mut fh = vec![0.0; n];
    let mut g = vec![0.0; nn];
    for j in 0..m {
        let right = (j + 1) % m;
        for c in 0..n {
            uj[c] = u[c * m + j];
            // Smooth part at the cell midpoint: cancels the O(h) cross term
            // ½ g'(u) δw δψ that a left-point compensated sum leaves behind.
            um[c] = psi[c * m + j] + 0.5 * (u[c * m + j] - psi[c * m + j] + u[c * m + right] - psi[c * m + right]);
        }
        let x = grid.node(j);
        problem.drift_hat(&uj, x, &mut fh);
        problem.coupling.eval_into(&uj, x, &mut g);
        problem.coupling.eval_into(&um, x, &mut gvals[j * nn..(j + 1) * nn]);
        problem.coupling.jacobian_into(&um, x, &mut gjac[j * nn * n..(j + 1) * nn * n]);
        for i in 0..n {
            let mut s = fh[i];
            for l in 0..n {
                s += g[i * n + l] * (dv[l * m + j] + lin.derivative[l * m + j]);
            }
            classical[i * m + j] = s;
        }
    }
    gvals.copy_within(0..nn, m * nn);
    gjac.copy_within(0..nn * n, m * nn * n);
    if !classical.iter().all(|v| v.is_finite()) || !gvals.iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("non-finite solution values".into()));
    }
    let rp = noise.lift(node);
    let cp = ControlledPath::new(rp, nn, gvals, gjac)?;
    let density = density_coefficients(&cell_masses(&cp, rp)?, m);
    let mut out = coefficients(&classical, m);
    for (j, (o, d)) in out.iter_mut().zip(&density).enumerate() {
        if is_nyquist(j % m, m) {
            *o = ZERO;
        } else {
            *o += d;
        }
    }
    Ok(out)
}

/// Per-step weights `e^{−z}`, `Δψ(z)`, `Δ(φ₁(z) − ψ(z))` with `z = λ_kΔ`.
#[derive(Debug, Clone)]
struct StepWeights {
    decay: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
    euler: Vec<f64>,
}

fn step_weights(spec: &SemigroupSpec, dt: f64, m: usize) -> StepWeights {
    let mut w = StepWeights {
        decay: Vec::with_capacity(m),
        left: Vec::with_capacity(m),
        right: Vec::with_capacity(m),
        euler: Vec::with_capacity(m),
    };
    for j in 0..m {
        let z = spec.rate(wavenumber(j, m)) * dt;
        let (p1, pl) = (phi1(z), phi_left(z));
        w.decay.push((-z).exp());
        w.left.push(dt * pl);
        w.right.push(dt * (p1 - pl));
        w.euler.push(dt * p1);
    }
    w
}

/// The map `v ↦ M v` on the time nodes `start..=end` of a noise source,
/// with `v` given per node by its Fourier coefficients (`n × M`, bin order).
///
/// The integrand is interpolated linearly in time between nodes and the
/// semigroup integral over each step is then exact.
pub struct IntervalMap<'a> {
    problem: &'a Problem,
    noise: &'a NoiseSource,
    start: usize,
    end: usize,
    linear: Vec<LinearPart>,
    weights: Vec<StepWeights>,
}

impl<'a> IntervalMap<'a> {
    /// `state` is `u` at `start` (component-major). `U` at the first node is
    /// evaluated half a step later, where `∂ₓU` is finite.
    pub fn new(problem: &'a Problem, noise: &'a NoiseSource, start: usize, end: usize, state: &[f64]) -> Result<Self> {
        problem.check_noise(noise)?;
        if !(start < end && end < noise.len()) {
            return Err(Error::Domain(format!(
                "interval {start}..={end} outside the {} noise times",
                noise.len()
            )));
        }
        let m = problem.cells;
        let diff: Vec<f64> = state.iter().zip(noise.values(start)).map(|(a, b)| a - b).collect();
        let c0 = coefficients(&diff, m);
        let times = noise.times();
        let t0 = times[start];
        let linear: Vec<LinearPart> = (start..=end)
            .into_par_iter()
            .map(|j| {
                let t = if j == start {
                    (times[start + 1] - t0) / 2.0
                } else {
                    times[j] - t0
                };
                linear_part(&c0, t, &problem.semigroup, m)
            })
            .collect();
        let weights = (start..end)
            .map(|j| step_weights(&problem.semigroup, times[j + 1] - times[j], m))
            .collect();
        Ok(Self {
            problem,
            noise,
            start,
            end,
            linear,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn zero(&self) -> Vec<Vec<Complex64>> {
        vec![vec![ZERO; self.problem.dim * self.problem.cells]; self.len()]
    }

    /// One application of the map.
    pub fn apply(&self, v: &[Vec<Complex64>]) -> Result<Vec<Vec<Complex64>>> {
        if v.len() != self.len() {
            return Err(Error::shape(self.len(), v.len()));
        }
        let m = self.problem.cells;
        let evals: Vec<Vec<Complex64>> = (0..self.len())
            .into_par_iter()
            .map(|i| integrand(self.problem, self.noise, self.start + i, &self.linear[i], &v[i]))
            .collect::<Result<_>>()?;
        let mut out = self.zero();
        for i in 0..self.len() - 1 {
            let w = &self.weights[i];
            let (prev, next) = out.split_at_mut(i + 1);
            let (cur, nxt) = (&prev[i], &mut next[0]);
            for (idx, o) in nxt.iter_mut().enumerate() {
                let j = idx % m;
                *o = w.decay[j] * cur[idx] + w.left[j] * evals[i][idx] + w.right[j] * evals[i + 1][idx];
            }
        }
        Ok(out)
    }

    /// `sup_t ‖a_t − b_t‖_{C¹}` over the nodes.
    pub fn distance(&self, a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
        let m = self.problem.cells;
        a.par_iter()
            .zip(b)
            .map(|(x, y)| {
                let d: Vec<Complex64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
                c1_of_coefficients(&d, m)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// `sup_t ‖v_t‖_{C¹}`.
    pub fn norm(&self, v: &[Vec<Complex64>]) -> f64 {
        v.par_iter()
            .map(|x| c1_of_coefficients(x, self.problem.cells))
            .reduce(|| 0.0, f64::max)
    }

    /// `u = v + ψ + U` at every node except the first, which is the given state.
    fn reconstruct(&self, v: &[Vec<Complex64>], state: &[f64]) -> Vec<Vec<f64>> {
        let m = self.problem.cells;
        let mut out = vec![state.to_vec()];
        for i in 1..self.len() {
            let vp = synthesize(&v[i], m, false);
            let psi = self.noise.values(self.start + i);
            out.push(
                (0..vp.len())
                    .map(|k| vp[k] + psi[k] + self.linear[i].value[k])
                    .collect(),
            );
        }
        out
    }
}

/// `10(1 + ‖u₀‖_{C^α} + ⟪Ψ⟫)` unless overridden.
fn radius_and_noise_norm(problem: &Problem, noise: &NoiseSource, opts: &SolverOptions) -> (f64, f64) {
    let noise_norm = noise.norm(problem.alpha);
    let u0 = max_over_components(&problem.initial, problem.cells, |u| c_alpha(u, problem.alpha));
    let radius = opts
        .blow_up_radius
        .unwrap_or(10.0 * (1.0 + u0 + noise_norm));
    (radius, noise_norm)
}

fn horizon_node(noise: &NoiseSource, horizon: f64) -> Result<usize> {
    let times = noise.times();
    let t0 = times[0];
    let target = t0 + horizon;
    let idx = times
        .iter()
        .position(|&t| (t - target).abs() <= 1e-9 * (1.0 + target.abs()))
        .ok_or(Error::Alignment(target))?;
    if idx == 0 {
        return Err(Error::Domain("horizon must be positive".into()));
    }
    Ok(idx)
}

enum Attempt {
    Converged {
        v: Vec<Vec<Complex64>>,
        report: IntervalReport,
    },
    Failed {
        factor: f64,
        iterations: usize,
        increment: f64,
        /// `‖v‖` of the last iterate.
        norm: f64,
    },
}

fn iterate(map: &IntervalMap<'_>, opts: &SolverOptions, times: &[f64]) -> Result<Attempt> {
    let mut v = map.zero();
    let mut diffs: Vec<f64> = vec![];
    let mut factor = 0.0f64;
    for k in 0..opts.max_iter {
        let next = match map.apply(&v) {
            Ok(n) => n,
            Err(Error::Domain(_)) => {
                return Ok(Attempt::Failed {
                    factor: f64::INFINITY,
                    iterations: k,
                    increment: f64::INFINITY,
                    norm: f64::INFINITY,
                })
            }
            Err(e) => return Err(e),
        };
        let diff = map.distance(&next, &v);
        let scale = 1.0 + map.norm(&next);
        v = next;
        if !diff.is_finite() {
            return Ok(Attempt::Failed {
                factor: f64::INFINITY,
                iterations: k + 1,
                increment: diff,
                norm: f64::INFINITY,
            });
        }
        diffs.push(diff);
        // diffs[k] = ‖v^{(k+1)} − v^{(k)}‖; ratios count from k = 2
        if k >= 2 && diffs[k - 1] > 1e-12 * scale && diff > 1e-12 * scale {
            factor = factor.max(diff / diffs[k - 1]);
            if factor > opts.contraction_threshold {
                return Ok(Attempt::Failed {
                    factor,
                    iterations: k + 1,
                    increment: diff,
                    norm: map.norm(&v),
                });
            }
        }
        if diff <= opts.tol {
            return Ok(Attempt::Converged {
                v,
                report: IntervalReport {
                    start: times[map.start],
                    end: times[map.end],
                    iterations: k + 1,
                    contraction_factor: factor,
                    halvings: 0,
                    final_increment: diff,
                },
            });
        }
    }
    Ok(Attempt::Failed {
        factor,
        iterations: opts.max_iter,
        increment: *diffs.last().unwrap_or(&f64::INFINITY),
        norm: map.norm(&v),
    })
}

/// Picard iteration of the mild formulation on successive intervals up to
/// `horizon` (measured from the first noise time). Intervals are halved
/// while the observed contraction factor exceeds the threshold, and the
/// iteration restarts from the reached state on the next interval.
pub fn solve_fixed_point(problem: &Problem, noise: &NoiseSource, horizon: f64, opts: &SolverOptions) -> Result<Solution> {
    problem.check_noise(noise)?;
    let last = horizon_node(noise, horizon)?;
    let (radius, noise_norm) = radius_and_noise_norm(problem, noise, opts);
    let times = noise.times();
    let mut sol = Solution {
        times: vec![times[0]],
        states: vec![problem.initial.clone()],
        remainder_norms: vec![0.0],
        intervals: vec![],
        blow_up: None,
        noise_norm,
        radius,
    };
    let mut a = 0;
    let mut state = problem.initial.clone();
    let mut span = opts.interval_nodes.unwrap_or(last).max(1);
    while a < last {
        let mut halvings = 0;
        let (v, mut report, b, map) = loop {
            let b = (a + span).min(last);
            let map = IntervalMap::new(problem, noise, a, b, &state)?;
            match iterate(&map, opts, times)? {
                Attempt::Converged { v, report } => break (v, report, b, map),
                Attempt::Failed {
                    factor,
                    iterations,
                    increment,
                    norm,
                } => {
                    if b - a <= 1 || halvings >= opts.max_halvings {
                        // Iterates that diverge outside the ball are the
                        // blow-up itself, not a solver failure.
                        if !(norm <= radius) {
                            sol.blow_up = Some(BlowUpEvent {
                                time: times[b],
                                norm,
                                radius,
                            });
                            return Ok(sol);
                        }
                        return Err(Error::NonConvergence {
                            iterations,
                            increment: if increment.is_finite() { increment } else { factor },
                        });
                    }
                    span = ((b - a) / 2).max(1);
                    halvings += 1;
                }
            }
        };
        report.halvings = halvings;
        let states = map.reconstruct(&v, &state);
        let m = problem.cells;
        for i in 1..map.len() {
            let norm = c1_of_coefficients(&v[i], m);
            if norm > radius || !norm.is_finite() {
                sol.blow_up = Some(BlowUpEvent {
                    time: times[a + i],
                    norm,
                    radius,
                });
                sol.intervals.push(report);
                return Ok(sol);
            }
            sol.times.push(times[a + i]);
            sol.states.push(states[i].clone());
            sol.remainder_norms.push(norm);
        }
        sol.intervals.push(report);
        state = states.last().expect("interval has nodes").clone();
        a = b;
    }
    Ok(sol)
}

/// Exponential Euler in Fourier space: the integrand is frozen at the left
/// node of each step of `stride` noise intervals and the semigroup integral
/// over the step is exact.
pub fn solve_stepping(
    problem: &Problem,
    noise: &NoiseSource,
    horizon: f64,
    stride: usize,
    blow_up_radius: Option<f64>,
) -> Result<Solution> {
    problem.check_noise(noise)?;
    if stride == 0 {
        return Err(Error::Domain("step stride must be positive".into()));
    }
    let last = horizon_node(noise, horizon)?;
    if last % stride != 0 {
        return Err(Error::Alignment(horizon));
    }
    let opts = SolverOptions {
        blow_up_radius,
        ..SolverOptions::default()
    };
    let (radius, noise_norm) = radius_and_noise_norm(problem, noise, &opts);
    let m = problem.cells;
    let times = noise.times();
    let diff: Vec<f64> = problem
        .initial
        .iter()
        .zip(noise.values(0))
        .map(|(a, b)| a - b)
        .collect();
    let c0 = coefficients(&diff, m);
    let mut sol = Solution {
        times: vec![times[0]],
        states: vec![problem.initial.clone()],
        remainder_norms: vec![0.0],
        intervals: vec![],
        blow_up: None,
        noise_norm,
        radius,
    };
    let mut v = vec![ZERO; problem.dim * m];
    let mut node = 0;
    while node < last {
        let next = node + stride;
        let dt = times[next] - times[node];
        let t_eval = if node == 0 { dt / 2.0 } else { times[node] - times[0] };
        let lin = linear_part(&c0, t_eval, &problem.semigroup, m);
        let nl = match integrand(problem, noise, node, &lin, &v) {
            Ok(r) => r,
            Err(Error::Domain(_)) => {
                sol.blow_up = Some(BlowUpEvent {
                    time: times[node],
                    norm: f64::INFINITY,
                    radius,
                });
                return Ok(sol);
            }
            Err(e) => return Err(e),
        };
        let w = step_weights(&problem.semigroup, dt, m);
        for (idx, vi) in v.iter_mut().enumerate() {
            let j = idx % m;
            *vi = w.decay[j] * *vi + w.euler[j] * nl[idx];
        }
        let norm = c1_of_coefficients(&v, m);
        if norm > radius || !norm.is_finite() {
            sol.blow_up = Some(BlowUpEvent {
                time: times[next],
                norm,
                radius,
            });
            return Ok(sol);
        }
        let lin_next = linear_part(&c0, times[next] - times[0], &problem.semigroup, m);
        let vp = synthesize(&v, m, false);
        let psi = noise.values(next);
        sol.times.push(times[next]);
        sol.states.push((0..vp.len()).map(|k| vp[k] + psi[k] + lin_next.value[k]).collect());
        sol.remainder_norms.push(norm);
        node = next;
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_functions_are_continuous_across_branches() {
        for &z in &[0.0999999f64, 0.1, 0.1000001] {
            let direct = (1.0 - (-z).exp() * (1.0 + z)) / (z * z);
            assert!((phi_left(z) - direct).abs() < 1e-12);
        }
        assert!((phi_left(0.0) - 0.5).abs() < 1e-16);
        assert!((phi1(1e-8) - 1.0).abs() < 1e-8);
        assert!((phi1(2.0) - (1.0 - (-2.0f64).exp()) / 2.0).abs() < 1e-15);
    }
}
