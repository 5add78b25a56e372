//! Stationary solution `ψ` of the damped stochastic heat equation in Fourier
//! modes, its exact OU time stepping and its canonical spatial lift.
//!
//! A real field is `ψ(x) = Σ_{|k|≤N} a_k e^{ikx}` with `a_{-k} = conj(a_k)`.
//! With noise amplitude `σ`, mode `k` relaxes at rate `λ_k = 1 + k²` (plus
//! `ε²k⁴` under hyperviscosity) and has stationary law `E|a_k|² = σ²/(2πλ_k)`,
//! so that `E ψ(x)ψ(y) = σ²cosh(|x−y|−π)/(2 sinh π)`.

use crate::error::{Error, Result};
use crate::rng::{StreamId, StreamRng};
use crate::rough::{AreaMode, Grid, RoughPath};
use crate::spectral::{bin, fft_in_place, ifft_in_place};
use crate::stats::{fit_rate, Estimate, RateFit};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Relaxation rate `1 + k² + ε²k⁴` of mode `k`.
#[inline]
pub fn mode_rate(k: i64, eps: f64) -> f64 {
    let k2 = (k * k) as f64;
    1.0 + k2 + eps * eps * k2 * k2
}

/// Fourier-mode representation of a periodic `ℝⁿ`-valued field.
///
/// Only modes `k = 0..=N` are stored; negative modes are conjugates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    modes: usize,
    dim: usize,
    sigma: f64,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    /// Coefficients are `dim × (modes + 1)`, component-major, for `k ≥ 0`.
    pub fn new(modes: usize, dim: usize, sigma: f64, mut coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != dim * (modes + 1) {
            return Err(Error::shape(dim * (modes + 1), coeffs.len()));
        }
        for c in 0..dim {
            coeffs[c * (modes + 1)].im = 0.0;
        }
        Ok(Self {
            modes,
            dim,
            sigma,
            coeffs,
        })
    }

    pub fn zeros(modes: usize, dim: usize, sigma: f64) -> Self {
        Self {
            modes,
            dim,
            sigma,
            coeffs: vec![Complex64::new(0.0, 0.0); dim * (modes + 1)],
        }
    }

    /// Independent Gaussian modes with `E|a_k|² = variance(k)` (`a_0` real).
    pub fn sample(
        modes: usize,
        dim: usize,
        sigma: f64,
        variance: impl Fn(i64) -> f64,
        rng: &mut StreamRng,
    ) -> Self {
        let mut coeffs = Vec::with_capacity(dim * (modes + 1));
        for _ in 0..dim {
            for k in 0..=modes {
                let v = variance(k as i64);
                if k == 0 {
                    coeffs.push(Complex64::new(v.sqrt() * rng.normal(), 0.0));
                } else {
                    let s = (v / 2.0).sqrt();
                    coeffs.push(Complex64::new(s * rng.normal(), s * rng.normal()));
                }
            }
        }
        Self {
            modes,
            dim,
            sigma,
            coeffs,
        }
    }

    /// A draw from the stationary law of `ψ` (hyperviscosity `eps`).
    pub fn sample_stationary(modes: usize, dim: usize, sigma: f64, eps: f64, rng: &mut StreamRng) -> Self {
        Self::sample(modes, dim, sigma, |k| stationary_variance(k, sigma, eps), rng)
    }

    /// Analysis of component-major samples `dim × M` on `x_j = 2πj/M`.
    pub fn from_samples(values: &[f64], m: usize, modes: usize, sigma: f64) -> Result<Self> {
        if m < 2 * modes + 2 {
            return Err(Error::Resolution { points: m, modes });
        }
        if !values.len().is_multiple_of(m) {
            return Err(Error::shape(format!("multiple of {m}"), values.len()));
        }
        let dim = values.len() / m;
        let mut coeffs = Vec::with_capacity(dim * (modes + 1));
        for comp in values.chunks(m) {
            let c = crate::spectral::forward(comp);
            coeffs.extend_from_slice(&c[..=modes]);
        }
        Self::new(modes, dim, sigma, coeffs)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Stored coefficients for `k ≥ 0`, component-major.
    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `a_k` of component `c` for any integer `k` (zero beyond the cutoff).
    pub fn coefficient(&self, c: usize, k: i64) -> Complex64 {
        let ka = k.unsigned_abs() as usize;
        if ka > self.modes {
            return Complex64::new(0.0, 0.0);
        }
        let a = self.coeffs[c * (self.modes + 1) + ka];
        if k < 0 {
            a.conj()
        } else {
            a
        }
    }

    /// All `a_k`, `k = -N..=N`, of component `c`.
    pub fn full_coefficients(&self, c: usize) -> Vec<Complex64> {
        let n = self.modes as i64;
        (-n..=n).map(|k| self.coefficient(c, k)).collect()
    }

    /// `max |a_{-k} − conj(a_k)|` over the full coefficient vector.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let n = self.modes as i64;
        let mut worst = 0.0f64;
        for c in 0..self.dim {
            for k in -n..=n {
                worst = worst.max((self.coefficient(c, -k) - self.coefficient(c, k).conj()).norm());
            }
        }
        worst
    }

    /// Multiplies mode `k` by the real factor `f(k)`.
    pub fn map_modes(&self, f: impl Fn(i64) -> f64) -> Self {
        let mut out = self.clone();
        let w = self.modes + 1;
        for (i, a) in out.coeffs.iter_mut().enumerate() {
            *a *= f((i % w) as i64);
        }
        out
    }

    /// Keeps modes `|k| ≤ modes`.
    pub fn truncate(&self, modes: usize) -> Self {
        let modes = modes.min(self.modes);
        let w = self.modes + 1;
        let coeffs = (0..self.dim)
            .flat_map(|c| self.coeffs[c * w..c * w + modes + 1].iter().copied())
            .collect();
        Self {
            modes,
            dim: self.dim,
            sigma: self.sigma,
            coeffs,
        }
    }

    /// `ψ_c(x)` by direct summation.
    pub fn point_value(&self, c: usize, x: f64) -> f64 {
        let w = self.modes + 1;
        let a = &self.coeffs[c * w..(c + 1) * w];
        let mut s = a[0].re;
        for (k, ak) in a.iter().enumerate().skip(1) {
            let e = Complex64::from_polar(1.0, k as f64 * x);
            s += 2.0 * (ak * e).re;
        }
        s
    }

    /// `Σ_k |a_k|²` of component `c`, the spatial mean square.
    pub fn mean_square(&self, c: usize) -> f64 {
        let w = self.modes + 1;
        let a = &self.coeffs[c * w..(c + 1) * w];
        a[0].norm_sqr() + 2.0 * a[1..].iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if !grid.is_periodic() {
            return Err(Error::Domain("field synthesis needs the periodic grid on [0, 2π]".into()));
        }
        if grid.cells() < 2 * self.modes + 2 {
            return Err(Error::Resolution {
                points: grid.cells(),
                modes: self.modes,
            });
        }
        Ok(())
    }

    /// Samples of component `c` (or its derivative) on `len` equispaced points.
    fn synthesize(&self, c: usize, len: usize, derivative: bool) -> Vec<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        let n = self.modes as i64;
        for k in -n..=n {
            let mut a = self.coefficient(c, k);
            if derivative {
                a *= Complex64::new(0.0, k as f64);
            }
            buf[bin(k, len)] += a;
        }
        ifft_in_place(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// Component-major samples `dim × M` at `x_j = 2πj/M`.
    pub fn evaluate_components(&self, m: usize) -> Result<Vec<f64>> {
        if m < 2 * self.modes + 2 {
            return Err(Error::Resolution {
                points: m,
                modes: self.modes,
            });
        }
        Ok((0..self.dim).flat_map(|c| self.synthesize(c, m, false)).collect())
    }

    /// Spatial derivative samples, component-major `dim × M`.
    pub fn evaluate_derivative(&self, m: usize) -> Result<Vec<f64>> {
        if m < 2 * self.modes + 2 {
            return Err(Error::Resolution {
                points: m,
                modes: self.modes,
            });
        }
        Ok((0..self.dim).flat_map(|c| self.synthesize(c, m, true)).collect())
    }
}

/// Node values `(M+1) × n` node-major; node `M` repeats node 0.
pub fn evaluate_field(sf: &SpectralField, grid: &Grid) -> Result<Vec<f64>> {
    sf.check_grid(grid)?;
    let m = grid.cells();
    let n = sf.dim;
    let comps = sf.evaluate_components(m)?;
    let mut out = vec![0.0; (m + 1) * n];
    for c in 0..n {
        for j in 0..m {
            out[j * n + c] = comps[c * m + j];
        }
        out[m * n + c] = comps[c * m];
    }
    Ok(out)
}

/// Canonical lift of the trigonometric polynomial: level 1 at the nodes,
/// level 2 the exact cell integrals `∫ δψ^i_{s,r} ∂ψ^j(r) dr`.
///
/// The product `ψ^i ∂ψ^j` has modes up to `2N`; its coefficients come from a
/// zero-padded transform, and each cell integral is then a closed-form sum
/// over those modes, evaluated for all cells with one inverse transform.
pub fn lift_field(sf: &SpectralField, grid: &Grid) -> Result<RoughPath> {
    sf.check_grid(grid)?;
    let m = grid.cells();
    let n = sf.dim;
    let h = grid.spacing();
    let values = evaluate_field(sf, grid)?;
    let big = (4 * sf.modes + 2).next_power_of_two().max(8);
    let fine: Vec<Vec<f64>> = (0..n).map(|c| sf.synthesize(c, big, false)).collect();
    let fine_d: Vec<Vec<f64>> = (0..n).map(|c| sf.synthesize(c, big, true)).collect();
    let two_n = 2 * sf.modes as i64;
    let weights: Vec<Complex64> = (-two_n..=two_n)
        .map(|k| {
            if k == 0 {
                Complex64::new(h, 0.0)
            } else {
                let kf = k as f64;
                Complex64::from_polar(2.0 * (kf * h / 2.0).sin() / kf, kf * h / 2.0)
            }
        })
        .collect();
    let mut areas = vec![0.0; m * n * n];
    let mut prod = vec![Complex64::new(0.0, 0.0); big];
    let mut cells = vec![Complex64::new(0.0, 0.0); m];
    for i in 0..n {
        for j in 0..n {
            for (l, p) in prod.iter_mut().enumerate() {
                *p = Complex64::new(fine[i][l] * fine_d[j][l] / big as f64, 0.0);
            }
            fft_in_place(&mut prod);
            cells.fill(Complex64::new(0.0, 0.0));
            for (idx, k) in (-two_n..=two_n).enumerate() {
                cells[bin(k, m)] += prod[bin(k, big)] * weights[idx];
            }
            ifft_in_place(&mut cells);
            for c in 0..m {
                let xi = values[c * n + i];
                let dxj = values[(c + 1) * n + j] - values[c * n + j];
                areas[(c * n + i) * n + j] = cells[c].re - xi * dxj;
            }
        }
    }
    RoughPath::build(*grid, n, values, AreaMode::Supplied(areas))
}

/// The same lift with Gauss–Legendre cell quadrature of the given order
/// applied to the trigonometric interpolant; accurate when `N·h` is small.
pub fn lift_field_quadrature(sf: &SpectralField, grid: &Grid, order: usize) -> Result<RoughPath> {
    sf.check_grid(grid)?;
    let n = sf.dim;
    let values = evaluate_field(sf, grid)?;
    let path = |x: f64, out: &mut [f64]| {
        for (c, o) in out.iter_mut().enumerate() {
            *o = sf.point_value(c, x);
        }
    };
    let derivative = |x: f64, out: &mut [f64]| {
        let w = sf.modes + 1;
        for (c, o) in out.iter_mut().enumerate() {
            let a = &sf.coeffs[c * w..(c + 1) * w];
            let mut s = 0.0;
            for (k, ak) in a.iter().enumerate().skip(1) {
                let e = Complex64::from_polar(1.0, k as f64 * x) * Complex64::new(0.0, k as f64);
                s += 2.0 * (ak * e).re;
            }
            *o = s;
        }
    };
    RoughPath::build(
        *grid,
        n,
        values,
        AreaMode::Quadrature {
            order,
            path: &path,
            derivative: &derivative,
        },
    )
}

/// `E|a_k|²` under the stationary law.
#[inline]
pub fn stationary_variance(k: i64, sigma: f64, eps: f64) -> f64 {
    sigma * sigma / (2.0 * PI * mode_rate(k, eps))
}

/// `K(x) = σ² cosh(|x| − π) / (2 sinh π)` with `x` folded into `[−π, π]`.
pub fn covariance_exact(x: f64, sigma: f64) -> f64 {
    let r = x - 2.0 * PI * (x / (2.0 * PI)).round();
    sigma * sigma * (r.abs() - PI).cosh() / (2.0 * PI.sinh())
}

/// `σ²/(2π) Σ_{|k|≤N} cos(kx)/(1 + k²)`.
pub fn covariance_partial_sum(x: f64, sigma: f64, modes: usize) -> f64 {
    let mut s = 1.0;
    for k in 1..=modes {
        let kf = k as f64;
        s += 2.0 * (kf * x).cos() / (1.0 + kf * kf);
    }
    sigma * sigma * s / (2.0 * PI)
}

/// `E|ψ(x,t+δ) − ψ(x,t)|² = Σ_{|k|≤N} 2 E|a_k|² (1 − e^{−λ_k δ})` under the
/// stationary law.
pub fn increment_variance_exact(sigma: f64, modes: usize, gap: f64) -> f64 {
    let mut s = 0.0;
    for k in -(modes as i64)..=(modes as i64) {
        s += 2.0 * stationary_variance(k, sigma, 0.0) * (-(mode_rate(k, 0.0) * gap)).exp_m1().abs();
    }
    s
}

/// Ordered snapshots of one or more coupled fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldTrajectory {
    times: Vec<f64>,
    snapshots: Vec<SpectralField>,
    stream: StreamId,
    hyperviscosity: f64,
}

impl FieldTrajectory {
    pub fn new(times: Vec<f64>, snapshots: Vec<SpectralField>, stream: StreamId, hyperviscosity: f64) -> Result<Self> {
        check_times(&times)?;
        if snapshots.len() != times.len() {
            return Err(Error::shape(times.len(), snapshots.len()));
        }
        Ok(Self {
            times,
            snapshots,
            stream,
            hyperviscosity,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[SpectralField] {
        &self.snapshots
    }

    pub fn snapshot(&self, i: usize) -> &SpectralField {
        &self.snapshots[i]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn stream(&self) -> StreamId {
        self.stream
    }

    pub fn hyperviscosity(&self) -> f64 {
        self.hyperviscosity
    }

    pub fn modes(&self) -> usize {
        self.snapshots.first().map_or(0, |s| s.modes)
    }

    pub fn dim(&self) -> usize {
        self.snapshots.first().map_or(0, |s| s.dim)
    }

    /// Every `step`-th snapshot, starting with the first.
    pub fn subsample(&self, step: usize) -> Self {
        let step = step.max(1);
        let idx: Vec<usize> = (0..self.len()).step_by(step).collect();
        Self {
            times: idx.iter().map(|&i| self.times[i]).collect(),
            snapshots: idx.iter().map(|&i| self.snapshots[i].clone()).collect(),
            stream: self.stream,
            hyperviscosity: self.hyperviscosity,
        }
    }

    /// Snapshots up to and including index `last`.
    pub fn prefix(&self, last: usize) -> Self {
        Self {
            times: self.times[..=last].to_vec(),
            snapshots: self.snapshots[..=last].to_vec(),
            stream: self.stream,
            hyperviscosity: self.hyperviscosity,
        }
    }

    pub fn truncate_modes(&self, modes: usize) -> Self {
        self.map_snapshots(|s| s.truncate(modes))
    }

    /// Applies a real Fourier multiplier to every snapshot (e.g. a mollifier).
    pub fn map_modes(&self, f: impl Fn(i64) -> f64) -> Self {
        self.map_snapshots(|s| s.map_modes(&f))
    }

    fn map_snapshots(&self, f: impl Fn(&SpectralField) -> SpectralField) -> Self {
        Self {
            times: self.times.clone(),
            snapshots: self.snapshots.iter().map(f).collect(),
            stream: self.stream,
            hyperviscosity: self.hyperviscosity,
        }
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Domain("trajectory needs at least one time".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain("trajectory times must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Stationary trajectory of `ψ` with `N` modes, `n` components and noise
/// amplitude `σ`, sampled at `times` with exact OU transitions.
pub fn sample_stationary_trajectory(
    modes: usize,
    dim: usize,
    sigma: f64,
    times: &[f64],
    stream: StreamId,
) -> Result<FieldTrajectory> {
    let mut family = sample_coupled_trajectories(modes, dim, sigma, &[0.0], times, stream)?;
    Ok(family.pop().expect("one member"))
}

/// Trajectory started from given coefficients instead of the stationary law.
pub fn sample_trajectory_from(initial: &SpectralField, times: &[f64], stream: StreamId) -> Result<FieldTrajectory> {
    check_times(times)?;
    check_sigma(initial.sigma)?;
    let mut rng = stream.rng();
    let mut current = initial.clone();
    let mut snapshots = vec![current.clone()];
    for w in times.windows(2) {
        let dt = w[1] - w[0];
        let w1 = current.modes + 1;
        for c in 0..current.dim {
            for k in 0..w1 {
                let lam = mode_rate(k as i64, 0.0);
                let decay = (-lam * dt).exp();
                let v = stationary_variance(k as i64, current.sigma, 0.0) * -(-2.0 * lam * dt).exp_m1();
                let a = &mut current.coeffs[c * w1 + k];
                *a *= decay;
                if k == 0 {
                    a.re += v.sqrt() * rng.normal();
                } else {
                    let s = (v / 2.0).sqrt();
                    a.re += s * rng.normal();
                    a.im += s * rng.normal();
                }
            }
        }
        snapshots.push(current.clone());
    }
    FieldTrajectory::new(times.to_vec(), snapshots, stream, 0.0)
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("noise amplitude must be nonnegative, got {sigma}")));
    }
    Ok(())
}

/// Stationary trajectories of the fields solving `dψ = (∂ₓ² − 1 − ε²∂ₓ⁴)ψ dt + σ dW`
/// for each `ε` in `eps`, all driven by the same noise `W`.
///
/// Each real mode coordinate forms a Gaussian vector across the family with
/// stationary covariance `q/(λ_i + λ_j)` and exact transition covariance
/// `q(1 − e^{−(λ_i+λ_j)Δ})/(λ_i + λ_j)`.
pub fn sample_coupled_trajectories(
    modes: usize,
    dim: usize,
    sigma: f64,
    eps: &[f64],
    times: &[f64],
    stream: StreamId,
) -> Result<Vec<FieldTrajectory>> {
    check_times(times)?;
    check_sigma(sigma)?;
    if modes == 0 {
        return Err(Error::Domain("need at least one mode".into()));
    }
    if eps.is_empty() || eps.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::Domain("hyperviscosity list must be nonempty and nonnegative".into()));
    }
    let r = eps.len();
    let w = modes + 1;
    let mut rng = stream.rng();
    // q per real coordinate: σ²/(2π) for each part of a complex mode, σ²/π for k = 0
    let q = |k: usize| if k == 0 { sigma * sigma / PI } else { sigma * sigma / (2.0 * PI) };
    let rates: Vec<Vec<f64>> = (0..w)
        .map(|k| eps.iter().map(|&e| mode_rate(k as i64, e)).collect())
        .collect();
    let mut state = vec![vec![Complex64::new(0.0, 0.0); dim * w]; r];
    let mut z = vec![0.0; r];
    let draw = |cov: &[f64], rng: &mut StreamRng, z: &mut [f64]| {
        let l = cholesky_psd(cov, r);
        let xi: Vec<f64> = (0..r).map(|_| rng.normal()).collect();
        for i in 0..r {
            z[i] = (0..=i).map(|j| l[i * r + j] * xi[j]).sum();
        }
    };
    let mut cov = vec![0.0; r * r];
    for c in 0..dim {
        for k in 0..w {
            let parts = if k == 0 { 1 } else { 2 };
            for p in 0..parts {
                for i in 0..r {
                    for j in 0..r {
                        cov[i * r + j] = q(k) / (rates[k][i] + rates[k][j]);
                    }
                }
                draw(&cov, &mut rng, &mut z);
                for i in 0..r {
                    let a = &mut state[i][c * w + k];
                    if p == 0 {
                        a.re = z[i];
                    } else {
                        a.im = z[i];
                    }
                }
            }
        }
    }
    let snap = |st: &Vec<Complex64>| SpectralField {
        modes,
        dim,
        sigma,
        coeffs: st.clone(),
    };
    let mut out: Vec<Vec<SpectralField>> = state.iter().map(|s| vec![snap(s)]).collect();
    for tw in times.windows(2) {
        let dt = tw[1] - tw[0];
        for c in 0..dim {
            for k in 0..w {
                let lam = &rates[k];
                for i in 0..r {
                    for j in 0..r {
                        let s = lam[i] + lam[j];
                        cov[i * r + j] = q(k) * -(-s * dt).exp_m1() / s;
                    }
                }
                let parts = if k == 0 { 1 } else { 2 };
                for p in 0..parts {
                    draw(&cov, &mut rng, &mut z);
                    for i in 0..r {
                        let decay = (-lam[i] * dt).exp();
                        let a = &mut state[i][c * w + k];
                        if p == 0 {
                            a.re = decay * a.re + z[i];
                        } else {
                            a.im = decay * a.im + z[i];
                        }
                    }
                }
            }
        }
        for i in 0..r {
            out[i].push(snap(&state[i]));
        }
    }
    out.into_iter()
        .zip(eps)
        .map(|(snaps, &e)| FieldTrajectory::new(times.to_vec(), snaps, stream, e))
        .collect()
}

/// Lower Cholesky factor of a positive semi-definite matrix; pivots below a
/// relative tolerance are treated as exact zeros.
fn cholesky_psd(a: &[f64], r: usize) -> Vec<f64> {
    let mut l = vec![0.0; r * r];
    let scale = (0..r).map(|i| a[i * r + i]).fold(0.0f64, f64::max);
    for j in 0..r {
        let mut d = a[j * r + j];
        for k in 0..j {
            d -= l[j * r + k] * l[j * r + k];
        }
        if d <= 1e-13 * scale {
            continue;
        }
        let d = d.sqrt();
        l[j * r + j] = d;
        for i in (j + 1)..r {
            let mut s = a[i * r + j];
            for k in 0..j {
                s -= l[i * r + k] * l[j * r + k];
            }
            l[i * r + j] = s / d;
        }
    }
    l
}

/// Monte Carlo study of `E|ψ(x,t+δ) − ψ(x,t)|²` against the gap `δ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IncrementScaling {
    pub gaps: Vec<f64>,
    pub variances: Vec<Estimate>,
    pub fit: RateFit,
}

/// Draws `samples` independent stationary states, advances each exactly by
/// every gap, and fits the log-log slope of the increment variance at `x`.
pub fn temporal_increment_scaling(
    modes: usize,
    sigma: f64,
    x: f64,
    gaps: &[f64],
    samples: usize,
    stream: StreamId,
) -> Result<IncrementScaling> {
    check_sigma(sigma)?;
    if samples < 1000 {
        return Err(Error::Statistics(format!("need at least 1000 samples, got {samples}")));
    }
    if gaps.len() < 4 {
        return Err(Error::Statistics(format!("need at least 4 gaps, got {}", gaps.len())));
    }
    if gaps.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::Domain("gaps must be positive".into()));
    }
    let w = modes + 1;
    let phases: Vec<Complex64> = (0..w).map(|k| Complex64::from_polar(1.0, k as f64 * x)).collect();
    let eval = |a: &[Complex64]| -> f64 {
        a[0].re + 2.0 * a.iter().zip(&phases).skip(1).map(|(ak, e)| (ak * e).re).sum::<f64>()
    };
    let rows: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream.child(s as u64).rng();
            let start = SpectralField::sample_stationary(modes, 1, sigma, 0.0, &mut rng);
            let x0 = eval(&start.coeffs);
            gaps.iter()
                .map(|&g| {
                    let mut moved = start.coeffs.clone();
                    for (k, a) in moved.iter_mut().enumerate() {
                        let lam = mode_rate(k as i64, 0.0);
                        let v = stationary_variance(k as i64, sigma, 0.0) * -(-2.0 * lam * g).exp_m1();
                        *a *= (-lam * g).exp();
                        if k == 0 {
                            a.re += v.sqrt() * rng.normal();
                        } else {
                            let sd = (v / 2.0).sqrt();
                            a.re += sd * rng.normal();
                            a.im += sd * rng.normal();
                        }
                    }
                    let d = eval(&moved) - x0;
                    d * d
                })
                .collect()
        })
        .collect();
    let variances = (0..gaps.len())
        .map(|g| {
            let col: Vec<f64> = rows.iter().map(|r| r[g]).collect();
            Estimate::from_samples(&col)
        })
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(f64, f64)> = gaps.iter().zip(&variances).map(|(&g, e)| (g, e.mean)).collect();
    let fit = fit_rate(&pairs)?;
    Ok(IncrementScaling {
        gaps: gaps.to_vec(),
        variances,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariance_closed_form_values() {
        assert!((covariance_exact(0.0, 1.0) - 0.5 / PI.tanh()).abs() < 1e-15);
        assert!((covariance_exact(0.0, 1.0) - 0.501871).abs() < 1e-6);
        assert!((covariance_exact(PI, 1.0) - 0.0432948).abs() < 1e-6);
        assert!((covariance_exact(2.0 * PI + 0.3, 1.0) - covariance_exact(0.3, 1.0)).abs() < 1e-15);
        assert!((covariance_partial_sum(0.0, 1.0, 1000) - covariance_exact(0.0, 1.0)).abs() < 1e-3);
    }

    #[test]
    fn single_mode_synthesis_is_cosine() {
        let mut c = vec![Complex64::new(0.0, 0.0); 5];
        c[1] = Complex64::new(0.5, 0.0);
        let sf = SpectralField::new(4, 1, 1.0, c).unwrap();
        let grid = Grid::periodic(16).unwrap();
        let v = evaluate_field(&sf, &grid).unwrap();
        for (i, x) in grid.nodes().iter().enumerate() {
            assert!((v[i] - x.cos()).abs() < 1e-14);
        }
        assert!(matches!(
            evaluate_field(&sf, &Grid::periodic(8).unwrap()),
            Err(Error::Resolution { .. })
        ));
    }

    #[test]
    fn analysis_synthesis_round_trip_and_parseval() {
        let mut rng = StreamId::new(9, 0).rng();
        let sf = SpectralField::sample_stationary(20, 2, 1.0, 0.0, &mut rng);
        let m = 64;
        let vals = sf.evaluate_components(m).unwrap();
        let back = SpectralField::from_samples(&vals, m, 20, 1.0).unwrap();
        let diff = sf
            .coefficients()
            .iter()
            .zip(back.coefficients())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(diff < 1e-10);
        for c in 0..2 {
            let ms = vals[c * m..(c + 1) * m].iter().map(|v| v * v).sum::<f64>() / m as f64;
            assert!((ms - sf.mean_square(c)).abs() < 1e-10 * (1.0 + ms));
        }
        assert_eq!(sf.conjugate_symmetry_defect(), 0.0);
    }

    #[test]
    fn lift_of_circle_has_area_pi() {
        // (cos x, sin x)
        let mut c = vec![Complex64::new(0.0, 0.0); 2 * 3];
        c[1] = Complex64::new(0.5, 0.0);
        c[3 + 1] = Complex64::new(0.0, -0.5);
        let sf = SpectralField::new(2, 2, 1.0, c).unwrap();
        let grid = Grid::periodic(256).unwrap();
        let rp = lift_field(&sf, &grid).unwrap();
        let a = rp.query_area(0, 256).unwrap();
        assert!((a[1] - PI).abs() < 1e-10, "{}", a[1]);
        let q = lift_field_quadrature(&sf, &grid, 8).unwrap();
        let diff = rp
            .cell_areas()
            .iter()
            .zip(q.cell_areas())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn constant_field_has_zero_areas() {
        let mut c = vec![Complex64::new(0.0, 0.0); 2 * 5];
        c[0] = Complex64::new(1.3, 0.0);
        c[5] = Complex64::new(-0.2, 0.0);
        let sf = SpectralField::new(4, 2, 1.0, c).unwrap();
        let rp = lift_field(&sf, &Grid::periodic(32).unwrap()).unwrap();
        assert!(rp.cell_areas().iter().all(|a| a.abs() < 1e-15));
    }

    #[test]
    fn zero_noise_from_zero_stays_zero() {
        let zero = SpectralField::zeros(8, 1, 0.0);
        let tr = sample_trajectory_from(&zero, &[0.0, 0.1, 0.2], StreamId::new(1, 0)).unwrap();
        assert!(tr.snapshots().iter().all(|s| s.coefficients().iter().all(|a| a.norm() == 0.0)));
        let st = sample_stationary_trajectory(8, 1, 0.0, &[0.0, 0.5], StreamId::new(1, 0)).unwrap();
        assert!(st.snapshot(1).coefficients().iter().all(|a| a.norm() == 0.0));
        assert!(sample_stationary_trajectory(8, 1, -1.0, &[0.0], StreamId::new(1, 0)).is_err());
        assert!(sample_stationary_trajectory(8, 1, 1.0, &[0.0, 0.0], StreamId::new(1, 0)).is_err());
    }

    #[test]
    fn deterministic_decay_without_noise() {
        let mut c = vec![Complex64::new(0.0, 0.0); 4];
        c[2] = Complex64::new(1.0, 0.5);
        let sf = SpectralField::new(3, 1, 0.0, c).unwrap();
        let tr = sample_trajectory_from(&sf, &[0.0, 0.3], StreamId::new(1, 0)).unwrap();
        let a = tr.snapshot(1).coefficient(0, 2);
        let f = (-5.0f64 * 0.3).exp();
        assert!((a - Complex64::new(f, 0.5 * f)).norm() < 1e-15);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let times = [0.0, 0.01, 0.02];
        let a = sample_stationary_trajectory(16, 2, 1.0, &times, StreamId::new(5, 2)).unwrap();
        let b = sample_stationary_trajectory(16, 2, 1.0, &times, StreamId::new(5, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coupled_family_member_with_zero_eps_matches_law() {
        // covariance between family members stays symmetric positive; the eps=0
        // member alone equals a single-family sample in distribution only, but
        // identical rates must produce identical paths
        let times = [0.0, 0.05, 0.1];
        let fam = sample_coupled_trajectories(8, 1, 1.0, &[0.0, 0.0], &times, StreamId::new(2, 0)).unwrap();
        for i in 0..3 {
            let (a, b) = (fam[0].snapshot(i), fam[1].snapshot(i));
            let d = a
                .coefficients()
                .iter()
                .zip(b.coefficients())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0f64, f64::max);
            assert!(d < 1e-12);
        }
    }

    #[test]
    fn increment_study_preconditions() {
        let s = StreamId::new(1, 0);
        assert!(matches!(
            temporal_increment_scaling(8, 1.0, 0.0, &[0.1, 0.2, 0.3, 0.4], 10, s),
            Err(Error::Statistics(_))
        ));
        assert!(matches!(
            temporal_increment_scaling(8, 1.0, 0.0, &[0.1, 0.2], 2000, s),
            Err(Error::Statistics(_))
        ));
    }

    #[test]
    fn exact_increment_variance_limits() {
        let big = increment_variance_exact(1.0, 64, 50.0);
        let two_var = 2.0 * (0..=64i64).map(|k| {
            let v = stationary_variance(k, 1.0, 0.0);
            if k == 0 { v } else { 2.0 * v }
        }).sum::<f64>();
        assert!((big - two_var).abs() < 1e-12);
        assert!(increment_variance_exact(1.0, 64, 1e-4) < increment_variance_exact(1.0, 64, 1e-3));
    }
}
