//! Gaussian reference measures, the Gibbs density `Ξ`, drifts built from
//! potentials, a pCN sampler for `μ ∝ exp(Ξ) ν` and reversibility checks.

use crate::error::{Error, Result};
use crate::field::{sample_trajectory_from, SpectralField};
use crate::rng::{StreamId, StreamRng};
use crate::rough::SmoothMap;
use crate::semigroup::SemigroupSpec;
use crate::solver::{solve_stepping, NoiseSource, Problem};
use crate::spectral;
use crate::stats::{
    batch_means, bootstrap_mean_ci, effective_sample_size, geweke_z, order_invariant_sum, Estimate,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Centred Gaussian field with independent modes of standard deviation
/// `s_k = (1 + k² + ε²k⁴)^{−1/2}`, i.e. covariance `(1 − ∂ₓ² + ε²∂ₓ⁴)^{−1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianReference {
    pub eps: f64,
    pub modes: usize,
    pub dim: usize,
}

impl GaussianReference {
    pub fn new(modes: usize, dim: usize, eps: f64) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::Domain(format!("ε must be nonnegative, got {eps}")));
        }
        if modes == 0 || dim == 0 {
            return Err(Error::Domain("need at least one mode and one component".into()));
        }
        Ok(Self { eps, modes, dim })
    }

    /// Largest cutoff resolvable on `m` nodes.
    pub fn for_grid(m: usize, dim: usize, eps: f64) -> Result<Self> {
        Self::new(m / 2 - 1, dim, eps)
    }

    pub fn std_dev(&self, k: i64) -> f64 {
        let k2 = (k * k) as f64;
        (1.0 + k2 + self.eps * self.eps * k2 * k2).powf(-0.5)
    }

    /// `E|a_k|² = s_k²/(2π)` for `u = Σ a_k e^{ikx}`.
    pub fn mode_variance(&self, k: i64) -> f64 {
        let s = self.std_dev(k);
        s * s / (2.0 * PI)
    }

    /// `Σ_{|k|≤N} s_k²/(2π)`.
    pub fn pointwise_variance(&self) -> f64 {
        (-(self.modes as i64)..=self.modes as i64)
            .map(|k| self.mode_variance(k))
            .sum()
    }

    pub fn sample(&self, rng: &mut StreamRng) -> SpectralField {
        SpectralField::sample(self.modes, self.dim, 1.0, |k| self.mode_variance(k), rng)
    }
}

/// A draw from `ν_ε` on `m` nodes, component-major.
pub fn sample_reference(reference: &GaussianReference, m: usize, rng: &mut StreamRng) -> Result<Vec<f64>> {
    reference.sample(rng).evaluate_components(m)
}

/// Potentials `G: ℝⁿ → ℝⁿ` and `F: ℝⁿ → ℝ`.
#[derive(Debug, Clone)]
pub struct PotentialPair {
    pub g: SmoothMap,
    pub f: SmoothMap,
}

impl PotentialPair {
    pub fn new(g: SmoothMap, f: SmoothMap) -> Result<Self> {
        let n = g.input_dim();
        if g.output_dim() != n || f.input_dim() != n || f.output_dim() != 1 {
            return Err(Error::shape(
                format!("G: ℝ^{n} → ℝ^{n}, F: ℝ^{n} → ℝ"),
                format!(
                    "G: ℝ^{} → ℝ^{}, F: ℝ^{} → ℝ^{}",
                    g.input_dim(),
                    g.output_dim(),
                    f.input_dim(),
                    f.output_dim()
                ),
            ));
        }
        if !g.has_hessian() || !f.has_hessian() {
            return Err(Error::Domain("potentials need second-derivative callbacks".into()));
        }
        Ok(Self { g, f })
    }

    pub fn dim(&self) -> usize {
        self.g.input_dim()
    }

    /// `G(u) = (sin u₂, sin u₁)`, `F(u) = −(cos u₁ + cos u₂)`.
    pub fn default_pair() -> Self {
        let bounds = crate::rough::MapBounds {
            sup: Some(1.0),
            jacobian_sup: Some(1.0),
            hessian_sup: Some(1.0),
        };
        let g = SmoothMap::new(
            2,
            2,
            |u, _, o| {
                o[0] = u[1].sin();
                o[1] = u[0].sin();
            },
            |u, _, o| {
                o[0] = 0.0;
                o[1] = u[1].cos();
                o[2] = u[0].cos();
                o[3] = 0.0;
            },
        )
        .with_hessian(|u, _, o| {
            o.fill(0.0);
            // ∂²G₁/∂u₂², ∂²G₂/∂u₁²
            o[3] = -u[1].sin();
            o[4] = -u[0].sin();
        })
        .with_bounds(bounds);
        let f = SmoothMap::new(
            2,
            1,
            |u, _, o| o[0] = -(u[0].cos() + u[1].cos()),
            |u, _, o| {
                o[0] = u[0].sin();
                o[1] = u[1].sin();
            },
        )
        .with_hessian(|u, _, o| {
            o[0] = u[0].cos();
            o[1] = 0.0;
            o[2] = 0.0;
            o[3] = u[1].cos();
        })
        .with_bounds(bounds);
        Self { g, f }
    }

    /// `n = 1`, `G(w) = sin w`, `F ≡ 0`.
    pub fn scalar_sine() -> Self {
        Self {
            g: SmoothMap::scalar(f64::sin, f64::cos, |w| -w.sin()),
            f: SmoothMap::constant(1, vec![0.0]),
        }
    }

    /// `G ≡ 0`, `F ≡ 0` in dimension `n`.
    pub fn zero(n: usize) -> Self {
        Self {
            g: SmoothMap::constant(n, vec![0.0; n]),
            f: SmoothMap::constant(n, vec![0.0]),
        }
    }
}

/// Discretisation of `∮ G(W) ∘ dW`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiScheme {
    /// `G((W_i + W_{i+1})/2)·(W_{i+1} − W_i)`
    Midpoint,
    /// `½(G(W_i) + G(W_{i+1}))·(W_{i+1} − W_i)`
    Trapezoid,
}

fn node(w: &[f64], m: usize, n: usize, j: usize, out: &mut [f64]) {
    for c in 0..n {
        out[c] = w[c * m + j % m];
    }
}

/// Per-cell terms of the Stratonovich sum.
fn stratonovich_terms(w: &[f64], m: usize, g: &SmoothMap, scheme: XiScheme) -> Vec<f64> {
    let n = g.input_dim();
    let (mut a, mut b, mut mid) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut ga, mut gb) = (vec![0.0; n], vec![0.0; n]);
    let h = 2.0 * PI / m as f64;
    (0..m)
        .map(|j| {
            node(w, m, n, j, &mut a);
            node(w, m, n, j + 1, &mut b);
            match scheme {
                XiScheme::Midpoint => {
                    for c in 0..n {
                        mid[c] = 0.5 * (a[c] + b[c]);
                    }
                    g.eval_into(&mid, (j as f64 + 0.5) * h, &mut ga);
                    (0..n).map(|c| ga[c] * (b[c] - a[c])).sum()
                }
                XiScheme::Trapezoid => {
                    g.eval_into(&a, j as f64 * h, &mut ga);
                    g.eval_into(&b, (j + 1) as f64 * h, &mut gb);
                    (0..n).map(|c| 0.5 * (ga[c] + gb[c]) * (b[c] - a[c])).sum()
                }
            }
        })
        .collect()
}

/// `∮ G(W) ∘ dW` alone.
pub fn stratonovich_integral(w: &[f64], m: usize, g: &SmoothMap, scheme: XiScheme) -> f64 {
    order_invariant_sum(stratonovich_terms(w, m, g, scheme))
}

/// `Ξ(W) = ∮ G(W) ∘ dW + ∫ F(W) dx` for component-major samples `W` on `m`
/// nodes. Terms are summed in sorted order, so cyclic relabelling of the
/// nodes leaves the value unchanged bit for bit.
pub fn evaluate_xi(w: &[f64], m: usize, pair: &PotentialPair, scheme: XiScheme) -> f64 {
    let n = pair.dim();
    let h = 2.0 * PI / m as f64;
    let mut terms = stratonovich_terms(w, m, &pair.g, scheme);
    let mut a = vec![0.0; n];
    let mut o = [0.0];
    for j in 0..m {
        node(w, m, n, j, &mut a);
        pair.f.eval_into(&a, j as f64 * h, &mut o);
        terms.push(o[0] * h);
    }
    order_invariant_sum(terms)
}

/// `f_i = ∂_iF − u_i` and `g_{ij} = ∂_iG_j − ∂_jG_i` (row-major `n × n`).
pub fn build_drift(pair: &PotentialPair) -> (SmoothMap, SmoothMap) {
    let n = pair.dim();
    let fpot = pair.f.clone();
    let fpot2 = pair.f.clone();
    let f = SmoothMap::new(
        n,
        n,
        move |u, x, o| {
            fpot.jacobian_into(u, x, o);
            for (oi, ui) in o.iter_mut().zip(u) {
                *oi -= ui;
            }
        },
        move |u, x, o| {
            fpot2
                .hessian_into(u, x, o)
                .expect("potential pairs carry second derivatives");
            for i in 0..n {
                o[i * n + i] -= 1.0;
            }
        },
    );
    let gpot = pair.g.clone();
    let gpot2 = pair.g.clone();
    let g = SmoothMap::new(
        n,
        n * n,
        move |u, x, o| {
            // J[o·n + i] = ∂G_o/∂u_i
            let j = gpot.jacobian(u, x);
            for a in 0..n {
                for b in 0..n {
                    o[a * n + b] = j[b * n + a] - j[a * n + b];
                }
            }
        },
        move |u, x, o| {
            let h = gpot2
                .hessian(u, x)
                .expect("potential pairs carry second derivatives");
            for a in 0..n {
                for b in 0..n {
                    for k in 0..n {
                        o[(a * n + b) * n + k] = h[(b * n + a) * n + k] - h[(a * n + b) * n + k];
                    }
                }
            }
        },
    );
    (f, g)
}

/// One state of the pCN chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsSample {
    /// Component-major node values.
    pub w: Vec<f64>,
    pub xi: f64,
    pub accepted: bool,
    pub step: usize,
}

/// Metropolis chain with the `ν`-reversible proposal `W′ = √(1−ρ²) W + ρ ξ`.
pub struct PcnSampler<'a> {
    reference: GaussianReference,
    pair: &'a PotentialPair,
    m: usize,
    rho: f64,
    scheme: XiScheme,
    current: GibbsSample,
    accepted: usize,
}

impl<'a> PcnSampler<'a> {
    /// Starts from a draw of `ν`.
    pub fn new(
        reference: GaussianReference,
        pair: &'a PotentialPair,
        m: usize,
        rho: f64,
        rng: &mut StreamRng,
    ) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::Domain(format!("ρ must lie in (0, 1], got {rho}")));
        }
        if reference.dim != pair.dim() {
            return Err(Error::shape(pair.dim(), reference.dim));
        }
        let w = sample_reference(&reference, m, rng)?;
        let xi = evaluate_xi(&w, m, pair, XiScheme::Midpoint);
        Ok(Self {
            reference,
            pair,
            m,
            rho,
            scheme: XiScheme::Midpoint,
            current: GibbsSample {
                w,
                xi,
                accepted: true,
                step: 0,
            },
            accepted: 0,
        })
    }

    pub fn with_scheme(mut self, scheme: XiScheme) -> Self {
        self.scheme = scheme;
        self.current.xi = evaluate_xi(&self.current.w, self.m, self.pair, scheme);
        self
    }

    pub fn current(&self) -> &GibbsSample {
        &self.current
    }

    pub fn step(&mut self, rng: &mut StreamRng) -> Result<&GibbsSample> {
        let xi_noise = sample_reference(&self.reference, self.m, rng)?;
        let keep = (1.0 - self.rho * self.rho).sqrt();
        let proposal: Vec<f64> = self
            .current
            .w
            .iter()
            .zip(&xi_noise)
            .map(|(w, z)| keep * w + self.rho * z)
            .collect();
        let xi = evaluate_xi(&proposal, self.m, self.pair, self.scheme);
        let u = rng.uniform();
        let step = self.current.step + 1;
        if u < (xi - self.current.xi).exp() {
            self.current = GibbsSample {
                w: proposal,
                xi,
                accepted: true,
                step,
            };
            self.accepted += 1;
        } else {
            self.current.accepted = false;
            self.current.step = step;
        }
        Ok(&self.current)
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.current.step == 0 {
            return 1.0;
        }
        self.accepted as f64 / self.current.step as f64
    }
}

/// Summary of a pCN run for one observable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcnSummary {
    pub observations: Vec<f64>,
    pub xi: Vec<f64>,
    pub accepted: Vec<bool>,
    pub acceptance_rate: f64,
    /// Batch-means estimate of the observable's mean.
    pub estimate: Estimate,
    pub effective_sample_size: f64,
    pub geweke_z: f64,
}

/// Chain length and proposal settings of [`pcn_sample_mu`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcnSettings {
    pub burn_in: usize,
    pub steps: usize,
    pub rho: f64,
    pub scheme: XiScheme,
}

impl Default for PcnSettings {
    fn default() -> Self {
        Self {
            burn_in: 2_000,
            steps: 100_000,
            rho: 0.5,
            scheme: XiScheme::Midpoint,
        }
    }
}

/// Runs `burn_in + steps` pCN steps and records `observe(W)` after each of
/// the last `steps`.
pub fn pcn_sample_mu(
    reference: GaussianReference,
    pair: &PotentialPair,
    m: usize,
    settings: &PcnSettings,
    stream: StreamId,
    observe: impl Fn(&[f64]) -> f64,
) -> Result<PcnSummary> {
    let (burn_in, steps) = (settings.burn_in, settings.steps);
    let mut rng = stream.rng();
    let mut chain = PcnSampler::new(reference, pair, m, settings.rho, &mut rng)?.with_scheme(settings.scheme);
    for _ in 0..burn_in {
        chain.step(&mut rng)?;
    }
    let mut observations = Vec::with_capacity(steps);
    let mut xi = Vec::with_capacity(steps);
    let mut accepted = Vec::with_capacity(steps);
    for _ in 0..steps {
        let s = chain.step(&mut rng)?;
        observations.push(observe(&s.w));
        xi.push(s.xi);
        accepted.push(s.accepted);
    }
    let estimate = batch_means(&observations, None)?;
    Ok(PcnSummary {
        acceptance_rate: chain.acceptance_rate(),
        effective_sample_size: effective_sample_size(&observations),
        geweke_z: geweke_z(&observations)?,
        estimate,
        observations,
        xi,
        accepted,
    })
}

/// Self-normalised importance sampling of `E_μ observe` from `ν` draws with
/// weights `exp(Ξ)`; the standard error uses the delta method.
pub fn importance_sampling_mean(
    reference: GaussianReference,
    pair: &PotentialPair,
    m: usize,
    samples: usize,
    scheme: XiScheme,
    stream: StreamId,
    observe: impl Fn(&[f64]) -> f64 + Sync,
) -> Result<Estimate> {
    if samples < 2 {
        return Err(Error::Statistics("need at least two samples".into()));
    }
    let draws: Vec<(f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.child(i as u64).rng();
            let w = sample_reference(&reference, m, &mut rng)?;
            Ok((evaluate_xi(&w, m, pair, scheme), observe(&w)))
        })
        .collect::<Result<_>>()?;
    let top = draws.iter().map(|d| d.0).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = draws.iter().map(|d| (d.0 - top).exp()).collect();
    let total = order_invariant_sum(weights.clone());
    let mean = order_invariant_sum(weights.iter().zip(&draws).map(|(w, d)| w * d.1).collect()) / total;
    let var = order_invariant_sum(
        weights
            .iter()
            .zip(&draws)
            .map(|(w, d)| w * w * (d.1 - mean) * (d.1 - mean))
            .collect(),
    ) / (total * total);
    Ok(Estimate {
        mean,
        std_err: var.sqrt(),
        samples,
    })
}

/// Integration window for exponential moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    /// `[0, 2π]`
    Full,
    /// `[0, π]`
    Half,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpMomentEstimate {
    pub eps: f64,
    pub window: Window,
    pub estimate: Estimate,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Monte Carlo estimates of `E_ε exp(∫ G(W)·∂ₓW dx)` over the window for
/// each `ε > 0`, using `ν_ε` draws with `modes` Fourier modes on `m` nodes
/// (classical Riemann sums with spectral derivatives).
pub fn exp_moment_estimate(
    eps: &[f64],
    g: &SmoothMap,
    modes: usize,
    m: usize,
    samples: usize,
    window: Window,
    stream: StreamId,
) -> Result<Vec<ExpMomentEstimate>> {
    if eps.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Domain(
            "exponential moments are estimated for ε > 0 only; use evaluate_xi at ε = 0".into(),
        ));
    }
    if m < 2 * modes + 2 {
        return Err(Error::Resolution { points: m, modes });
    }
    let n = g.input_dim();
    let h = 2.0 * PI / m as f64;
    let nodes = match window {
        Window::Full => m,
        Window::Half => m / 2,
    };
    eps.iter()
        .enumerate()
        .map(|(ie, &e)| {
            let reference = GaussianReference::new(modes, n, e)?;
            let sub = stream.child(ie as u64);
            let values: Vec<f64> = (0..samples)
                .into_par_iter()
                .map(|i| {
                    let mut rng = sub.child(i as u64).rng();
                    let field = reference.sample(&mut rng);
                    let w = field.evaluate_components(m)?;
                    let dw = field.evaluate_derivative(m)?;
                    let mut a = vec![0.0; n];
                    let mut ga = vec![0.0; n];
                    let mut terms = Vec::with_capacity(nodes + 1);
                    for j in 0..=nodes {
                        node(&w, m, n, j, &mut a);
                        g.eval_into(&a, j as f64 * h, &mut ga);
                        let mut s: f64 = (0..n).map(|c| ga[c] * dw[c * m + j % m]).sum();
                        if window == Window::Half && (j == 0 || j == nodes) {
                            s *= 0.5;
                        } else if window == Window::Full && j == nodes {
                            continue;
                        }
                        terms.push(s * h);
                    }
                    Ok(order_invariant_sum(terms).exp())
                })
                .collect::<Result<_>>()?;
            let estimate = Estimate::from_samples(&values)?;
            let mut rng = sub.child(u64::MAX).rng();
            let (ci_low, ci_high) = bootstrap_mean_ci(&values, 400, 0.95, &mut rng);
            Ok(ExpMomentEstimate {
                eps: e,
                window,
                estimate,
                ci_low,
                ci_high,
            })
        })
        .collect()
}

/// Mean over the grid of `u_c(x)·cos(kx)` (or `sin`), a linear probe.
pub fn fourier_probe(u: &[f64], m: usize, component: usize, k: i64, sine: bool) -> f64 {
    let uc = &u[component * m..(component + 1) * m];
    let s: f64 = uc
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let x = 2.0 * PI * j as f64 / m as f64 * k as f64;
            v * if sine { x.sin() } else { x.cos() }
        })
        .sum();
    s / m as f64
}

/// Probe functionals of a component-major state on `m` nodes.
pub type ProbeFn = dyn Fn(&[f64], usize) -> f64 + Sync;

/// Ensemble settings for the reversibility test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReversibilitySettings {
    pub ensemble: usize,
    pub cells: usize,
    pub lag: f64,
    pub dt: f64,
    pub burn_in: usize,
    pub rho: f64,
}

impl Default for ReversibilitySettings {
    fn default() -> Self {
        Self {
            ensemble: 512,
            cells: 128,
            lag: 0.1,
            dt: 1e-3,
            burn_in: 300,
            rho: 0.3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginalCheck {
    pub name: String,
    pub initial: Estimate,
    /// At half the lag.
    pub midway: Estimate,
    pub lagged: Estimate,
    /// `√(se₀² + se_t²)`
    pub combined_std_err: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReversibilityReport {
    /// `E[φ₁(u₀)φ₂(u_t)]`
    pub forward: Estimate,
    /// `E[φ₂(u₀)φ₁(u_t)]`
    pub backward: Estimate,
    pub difference: f64,
    pub combined_std_err: f64,
    pub marginals: Vec<MarginalCheck>,
    pub members: usize,
    pub dropped: usize,
    pub mean_acceptance: f64,
}

struct Member {
    initial: Vec<f64>,
    midway: Vec<f64>,
    lagged: Vec<f64>,
    acceptance: f64,
}

/// One ensemble member: `u₀` from a pCN chain for `μ`, independent
/// stationary `ψ`, exponential-Euler solve to the lag.
fn run_member(
    pair: &PotentialPair,
    settings: &ReversibilitySettings,
    stream: StreamId,
) -> Result<Option<Member>> {
    let m = settings.cells;
    let n = pair.dim();
    let reference = GaussianReference::for_grid(m, n, 0.0)?;
    let mut rng = stream.child(0).rng();
    let mut chain = PcnSampler::new(reference, pair, m, settings.rho, &mut rng)?;
    for _ in 0..settings.burn_in {
        chain.step(&mut rng)?;
    }
    let u0 = chain.current().w.clone();
    if settings.lag == 0.0 {
        return Ok(Some(Member {
            initial: u0.clone(),
            midway: u0.clone(),
            lagged: u0,
            acceptance: chain.acceptance_rate(),
        }));
    }
    let steps = (settings.lag / settings.dt).round() as usize;
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * settings.dt).collect();
    let mut prng = stream.child(1).rng();
    let psi0 = SpectralField::sample_stationary(reference.modes, n, 1.0, 0.0, &mut prng);
    let traj = sample_trajectory_from(&psi0, &times, stream.child(2))?;
    let noise = NoiseSource::from_trajectory(&traj, m)?;
    let (f, g) = build_drift(pair);
    let problem = Problem::new(f, g, u0.clone(), m)?.with_semigroup(SemigroupSpec::damped());
    let sol = solve_stepping(&problem, &noise, times[steps], 1, None)?;
    if sol.blow_up.is_some() {
        return Ok(None);
    }
    Ok(Some(Member {
        initial: u0,
        midway: sol.states[steps / 2].clone(),
        lagged: sol.final_state().to_vec(),
        acceptance: chain.acceptance_rate(),
    }))
}

/// Estimates `E[φ₁(u₀)φ₂(u_t)]` and `E[φ₂(u₀)φ₁(u_t)]` over a `μ`-initialised
/// ensemble, plus time-0 versus time-`t` means of the marginal probes.
pub fn reversibility_test(
    pair: &PotentialPair,
    settings: &ReversibilitySettings,
    phi1: &ProbeFn,
    phi2: &ProbeFn,
    marginal_probes: &[(&str, &ProbeFn)],
    stream: StreamId,
) -> Result<ReversibilityReport> {
    if settings.ensemble < 2 {
        return Err(Error::Statistics("ensemble needs at least two members".into()));
    }
    let m = settings.cells;
    let runs: Vec<Option<Member>> = (0..settings.ensemble)
        .into_par_iter()
        .map(|i| run_member(pair, settings, stream.child(i as u64)))
        .collect::<Result<_>>()?;
    let kept: Vec<&Member> = runs.iter().flatten().collect();
    let dropped = runs.len() - kept.len();
    let fwd: Vec<f64> = kept.iter().map(|r| phi1(&r.initial, m) * phi2(&r.lagged, m)).collect();
    let bwd: Vec<f64> = kept.iter().map(|r| phi2(&r.initial, m) * phi1(&r.lagged, m)).collect();
    let forward = Estimate::from_samples(&fwd)?;
    let backward = Estimate::from_samples(&bwd)?;
    let marginals = marginal_probes
        .iter()
        .map(|(name, p)| {
            let at = |f: fn(&Member) -> &Vec<f64>| {
                let xs: Vec<f64> = kept.iter().map(|r| p(f(r), m)).collect();
                Estimate::from_samples(&xs)
            };
            let initial = at(|r| &r.initial)?;
            let midway = at(|r| &r.midway)?;
            let lagged = at(|r| &r.lagged)?;
            Ok(MarginalCheck {
                name: name.to_string(),
                midway,
                combined_std_err: initial.std_err.hypot(lagged.std_err),
                initial,
                lagged,
            })
        })
        .collect::<Result<_>>()?;
    let mean_acceptance = kept.iter().map(|r| r.acceptance).sum::<f64>() / kept.len().max(1) as f64;
    Ok(ReversibilityReport {
        difference: forward.mean - backward.mean,
        combined_std_err: forward.std_err.hypot(backward.std_err),
        forward,
        backward,
        marginals,
        members: kept.len(),
        dropped,
        mean_acceptance,
    })
}

/// Spectral derivative of each component.
pub fn component_derivative(u: &[f64], m: usize) -> Vec<f64> {
    u.chunks(m).flat_map(spectral::derivative).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_from_default_pair() {
        let pair = PotentialPair::default_pair();
        let (f, g) = build_drift(&pair);
        let u = [0.3, -1.1];
        let gv = g.eval(&u, 0.0);
        assert!((gv[1] - (0.3f64.cos() - (-1.1f64).cos())).abs() < 1e-15);
        assert_eq!(gv[1], -gv[2]);
        assert_eq!(gv[0], 0.0);
        assert!(g.eval(&[0.0, 0.0], 0.0).iter().all(|v| *v == 0.0));
        let fv = f.eval(&u, 0.0);
        assert!((fv[0] - (0.3f64.sin() - 0.3)).abs() < 1e-15);
        assert!((fv[1] - ((-1.1f64).sin() + 1.1)).abs() < 1e-15);
        let probes = vec![(u.to_vec(), 0.0), (vec![2.0, 0.5], 0.0)];
        assert!(g.derivative_check(&probes, 1e-6) < 1e-8);
        assert!(f.derivative_check(&probes, 1e-6) < 1e-8);
    }

    #[test]
    fn scalar_case_has_no_coupling() {
        let (_, g) = build_drift(&PotentialPair::scalar_sine());
        for w in [-2.0, 0.0, 0.7] {
            assert_eq!(g.eval(&[w], 0.0), vec![0.0]);
        }
    }

    #[test]
    fn xi_trivial_cases_and_cyclic_invariance() {
        let m = 32;
        let mut rng = StreamId::new(3, 0).rng();
        let r = GaussianReference::for_grid(m, 2, 0.0).unwrap();
        let w = sample_reference(&r, m, &mut rng).unwrap();
        assert_eq!(evaluate_xi(&w, m, &PotentialPair::zero(2), XiScheme::Midpoint), 0.0);
        let constant = PotentialPair {
            g: SmoothMap::constant(2, vec![0.7, -1.3]),
            f: SmoothMap::constant(2, vec![0.0]),
        };
        assert!(evaluate_xi(&w, m, &constant, XiScheme::Midpoint).abs() < 1e-14);
        let pair = PotentialPair {
            g: PotentialPair::default_pair().g,
            f: SmoothMap::constant(2, vec![0.0]),
        };
        let a = evaluate_xi(&w, m, &pair, XiScheme::Midpoint);
        let mut rotated = w.clone();
        for c in 0..2 {
            rotated[c * m..(c + 1) * m].rotate_left(5);
        }
        assert_eq!(a, evaluate_xi(&rotated, m, &pair, XiScheme::Midpoint));
    }

    #[test]
    fn pcn_accepts_everything_without_density() {
        let pair = PotentialPair::zero(1);
        let r = GaussianReference::for_grid(16, 1, 0.0).unwrap();
        let settings = PcnSettings {
            burn_in: 10,
            steps: 200,
            ..PcnSettings::default()
        };
        let s = pcn_sample_mu(r, &pair, 16, &settings, StreamId::new(1, 1), |w| w[0]).unwrap();
        assert_eq!(s.acceptance_rate, 1.0);
    }

    #[test]
    fn exp_moment_rejects_zero_eps_and_is_one_without_g() {
        let g0 = SmoothMap::constant(1, vec![0.0]);
        assert!(exp_moment_estimate(&[0.0], &g0, 8, 32, 100, Window::Full, StreamId::new(1, 0)).is_err());
        let est = exp_moment_estimate(&[0.1], &g0, 8, 32, 100, Window::Full, StreamId::new(1, 0)).unwrap();
        assert_eq!(est[0].estimate.mean, 1.0);
    }

    #[test]
    fn reference_variance_decreases_with_eps() {
        let a = GaussianReference::new(256, 1, 0.0).unwrap();
        let b = GaussianReference::new(256, 1, 0.5).unwrap();
        assert!(b.pointwise_variance() < a.pointwise_variance());
        let full = 0.5 / PI.tanh();
        assert!((a.pointwise_variance() - full).abs() < 2e-3);
    }
}
