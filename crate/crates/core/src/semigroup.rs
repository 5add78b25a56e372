//! Heat, damped-heat and hyperviscous semigroups on the circle as Fourier
//! multipliers, together with physical-space kernels used for diagnostics.

use crate::error::{Error, Result};
use crate::norms::{c_alpha, periodic_holder};
use crate::quadrature::GaussRule;
use crate::spectral;
use crate::stats::{fit_rate, RateFit};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Generator `∂ₓ² − c − ε²∂ₓ⁴` with multiplier `m_k(t) = exp(−t(c + k² + ε²k⁴))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemigroupSpec {
    pub damping: f64,
    pub hyperviscosity: f64,
}

impl SemigroupSpec {
    /// `damping` must be 0 or 1 and `hyperviscosity` nonnegative.
    pub fn new(damping: f64, hyperviscosity: f64) -> Result<Self> {
        if damping != 0.0 && damping != 1.0 {
            return Err(Error::Domain(format!("damping must be 0 or 1, got {damping}")));
        }
        if !(hyperviscosity >= 0.0 && hyperviscosity.is_finite()) {
            return Err(Error::Domain(format!(
                "hyperviscosity must be nonnegative, got {hyperviscosity}"
            )));
        }
        Ok(Self {
            damping,
            hyperviscosity,
        })
    }

    pub fn heat() -> Self {
        Self {
            damping: 0.0,
            hyperviscosity: 0.0,
        }
    }

    pub fn damped() -> Self {
        Self {
            damping: 1.0,
            hyperviscosity: 0.0,
        }
    }

    pub fn hyperviscous(eps: f64) -> Self {
        Self {
            damping: 1.0,
            hyperviscosity: eps,
        }
    }

    /// `c + k² + ε²k⁴`.
    #[inline]
    pub fn rate(&self, k: i64) -> f64 {
        let k2 = (k * k) as f64;
        self.damping + k2 + self.hyperviscosity * self.hyperviscosity * k2 * k2
    }

    #[inline]
    pub fn multiplier(&self, k: i64, t: f64) -> f64 {
        (-t * self.rate(k)).exp()
    }

    /// Multipliers for `k = 0..=kmax`, shareable across threads.
    pub fn table(&self, t: f64, kmax: usize) -> Vec<f64> {
        (0..=kmax as i64).map(|k| self.multiplier(k, t)).collect()
    }
}

/// `S_t u` for periodic samples `u` on `x_j = 2πj/M`.
///
/// # Panics
/// If `t < 0`.
pub fn apply_semigroup(u: &[f64], t: f64, spec: &SemigroupSpec) -> Vec<f64> {
    assert!(t >= 0.0, "semigroup time must be nonnegative");
    spectral::apply_multiplier(u, |k| Complex64::new(spec.multiplier(k, t), 0.0))
}

/// Evaluation route for the periodic heat kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelEval {
    /// Sum of Gaussian images; `None` uses `⌈6√t/2π⌉ + 2` periods.
    ImageSum { radius: Option<usize> },
    /// Fourier series truncated where `e^{−k²t}` drops below `1e-17`,
    /// or at the given number of modes.
    Spectral { modes: Option<usize> },
}

impl Default for KernelEval {
    fn default() -> Self {
        KernelEval::ImageSum { radius: None }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("kernel time must be positive, got {t}")));
    }
    Ok(())
}

/// Image radius covering Gaussian tails below `1e-12`.
pub fn image_radius(t: f64) -> usize {
    (6.0 * t.sqrt() / (2.0 * PI)).ceil() as usize + 2
}

fn spectral_cutoff(t: f64) -> usize {
    // e^{-k² t} < 1e-17 once k² t > 39.2
    ((39.2 / t).sqrt().ceil() as usize).max(4)
}

/// `x`-derivative of order `order ∈ {0, 1, 2}` of the undamped periodic heat kernel.
fn kernel_derivative(x: f64, t: f64, order: u8, mode: KernelEval) -> Result<f64> {
    check_time(t)?;
    match mode {
        KernelEval::ImageSum { radius } => {
            let r = radius.unwrap_or_else(|| image_radius(t)) as i64;
            let norm = 1.0 / (4.0 * PI * t).sqrt();
            let mut s = 0.0;
            for n in -r..=r {
                let y = x - 2.0 * PI * n as f64;
                let g = norm * (-y * y / (4.0 * t)).exp();
                s += match order {
                    0 => g,
                    1 => -y / (2.0 * t) * g,
                    _ => (y * y / (4.0 * t * t) - 1.0 / (2.0 * t)) * g,
                };
            }
            Ok(s)
        }
        KernelEval::Spectral { modes } => {
            let n = modes.unwrap_or_else(|| spectral_cutoff(t));
            let mut s = if order == 0 { 1.0 } else { 0.0 };
            for k in 1..=n {
                let kf = k as f64;
                let e = (-kf * kf * t).exp();
                s += 2.0
                    * e
                    * match order {
                        0 => (kf * x).cos(),
                        1 => -kf * (kf * x).sin(),
                        _ => -kf * kf * (kf * x).cos(),
                    };
            }
            Ok(s / (2.0 * PI))
        }
    }
}

/// Periodic heat kernel `p_t(x)` of `∂ₓ²` on `[0, 2π]`.
pub fn heat_kernel(x: f64, t: f64, mode: KernelEval) -> Result<f64> {
    kernel_derivative(x, t, 0, mode)
}

/// `∂ₓp_t(x)`.
pub fn heat_kernel_derivative(x: f64, t: f64, mode: KernelEval) -> Result<f64> {
    kernel_derivative(x, t, 1, mode)
}

/// `∂ₓ²p_t(x)`.
pub fn heat_kernel_second_derivative(x: f64, t: f64, mode: KernelEval) -> Result<f64> {
    kernel_derivative(x, t, 2, mode)
}

/// Scaled derivative profile `f_t(z) = t ∂ₓp_t(z√t)`, so that
/// `∂ₓp_t(x) = t^{-1} f_t(x/√t)`.
pub fn scaled_derivative_profile(z: f64, t: f64) -> Result<f64> {
    Ok(t * heat_kernel_derivative(z * t.sqrt(), t, KernelEval::default())?)
}

/// `Σ_n sup_{[n,n+1]} (|f_t| + |f_t'|)` over the window `|z| ≤ π/√t`,
/// with each sup taken over `samples` points per unit cell.
pub fn scaled_profile_norm(t: f64, samples: usize) -> Result<f64> {
    check_time(t)?;
    let half = PI / t.sqrt();
    let cells = half.ceil() as i64;
    let samples = samples.max(2);
    let st = t.sqrt();
    let mut total = 0.0;
    for n in -cells..cells {
        let mut worst = 0.0f64;
        for j in 0..=samples {
            let z = n as f64 + j as f64 / samples as f64;
            if z.abs() > half {
                continue;
            }
            let f = t * heat_kernel_derivative(z * st, t, KernelEval::default())?;
            let df = t * st * heat_kernel_second_derivative(z * st, t, KernelEval::default())?;
            worst = worst.max(f.abs() + df.abs());
        }
        total += worst;
    }
    Ok(total)
}

/// Quartic kernel `φ(x) = (1/2π)∫ e^{−k⁴−ikx} dk = (1/π)∫₀^∞ e^{−k⁴}cos(kx) dk`.
pub fn quartic_kernel(x: f64) -> f64 {
    // e^{-k^4} < 1e-300 beyond k = 5.3
    let rule = GaussRule::new(16);
    let panels = 24 + (x.abs() * 2.0).ceil() as usize;
    rule.integrate_composite(0.0, 5.3, panels, |k| (-(k * k * k * k)).exp() * (k * x).cos()) / PI
}

/// `Ŝ_t u` computed in physical space as the periodic convolution with
/// `t^{-1/4} φ(· t^{-1/4})` (trapezoid rule, images summed until negligible).
pub fn quartic_semigroup_by_convolution(u: &[f64], t: f64) -> Result<Vec<f64>> {
    check_time(t)?;
    let m = u.len();
    let h = 2.0 * PI / m as f64;
    let s = t.powf(-0.25);
    // |φ(y)| < 1e-16 for |y| > 14
    let images = ((14.0 / s) / (2.0 * PI)).ceil() as i64 + 1;
    let kernel: Vec<f64> = (0..m)
        .map(|j| {
            let x = j as f64 * h;
            (-images..=images)
                .map(|n| s * quartic_kernel((x + 2.0 * PI * n as f64) * s))
                .sum::<f64>()
        })
        .collect();
    Ok((0..m)
        .map(|i| (0..m).map(|j| kernel[(i + m - j) % m] * u[j]).sum::<f64>() * h)
        .collect())
}

/// Shape of a unit-mass mollifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MollifierProfile {
    /// Standard Gaussian density.
    Gaussian,
    /// Normalized `exp(−1/(1 − x²))` on `(−1, 1)`.
    Bump,
}

/// Fourier transform `φ̂(ξ) = ∫φ(x)e^{−iξx}dx` of the profile, `φ̂(0) = 1`.
pub fn profile_transform(profile: MollifierProfile, xi: f64) -> f64 {
    match profile {
        MollifierProfile::Gaussian => (-xi * xi / 2.0).exp(),
        MollifierProfile::Bump => {
            let rule = GaussRule::new(16);
            let bump = |x: f64| {
                if x.abs() >= 1.0 {
                    0.0
                } else {
                    (-1.0 / (1.0 - x * x)).exp()
                }
            };
            let panels = 16 + xi.abs().ceil() as usize;
            let mass = rule.integrate_composite(0.0, 1.0, 16, bump);
            rule.integrate_composite(0.0, 1.0, panels, |x| bump(x) * (xi * x).cos()) / mass
        }
    }
}

/// `Q_ε u`: mode `k` multiplied by `φ̂(εk)`.
pub fn mollify(u: &[f64], eps: f64, profile: MollifierProfile) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("mollifier width must be positive, got {eps}")));
    }
    let m = u.len() as i64;
    let table: Vec<f64> = (0..=m / 2)
        .map(|k| profile_transform(profile, eps * k as f64))
        .collect();
    Ok(spectral::apply_multiplier(u, |k| {
        Complex64::new(table[k.unsigned_abs() as usize], 0.0)
    }))
}

/// `‖S^ε_t u − S_t u‖_{C^α}` with damped semigroups (`c = 1`).
pub fn semigroup_difference_norm(u: &[f64], t: f64, eps: f64, alpha: f64) -> f64 {
    if eps == 0.0 {
        return 0.0;
    }
    let plain = SemigroupSpec::damped();
    let hyper = SemigroupSpec::hyperviscous(eps);
    let d = spectral::apply_multiplier(u, |k| {
        Complex64::new(hyper.multiplier(k, t) - plain.multiplier(k, t), 0.0)
    });
    c_alpha(&d, alpha)
}

/// Maximum of [`semigroup_difference_norm`] over a time grid.
pub fn semigroup_difference_sup(u: &[f64], times: &[f64], eps: f64, alpha: f64) -> f64 {
    times
        .iter()
        .map(|&t| semigroup_difference_norm(u, t, eps, alpha))
        .fold(0.0, f64::max)
}

/// `Σ_{j ≤ J} 2^{−jβ} cos(2^j x)` on `M` nodes with `2^J ≤ M/4`; a `C^β` test function.
pub fn weierstrass(m: usize, beta: f64) -> Vec<f64> {
    let mut levels = 0;
    while (1usize << (levels + 1)) <= m / 4 {
        levels += 1;
    }
    (0..m)
        .map(|i| {
            let x = 2.0 * PI * i as f64 / m as f64;
            (0..=levels)
                .map(|j| 2f64.powf(-(j as f64) * beta) * ((1u64 << j) as f64 * x).cos())
                .sum()
        })
        .collect()
}

/// Fitted ε-slope of the uniform-in-time semigroup difference.
pub fn semigroup_rate(u: &[f64], times: &[f64], eps: &[f64], alpha: f64) -> Result<RateFit> {
    let pairs: Vec<(f64, f64)> = eps
        .iter()
        .map(|&e| (e, semigroup_difference_sup(u, times, e, alpha)))
        .collect();
    fit_rate(&pairs)
}

/// Hölder-`2α` seminorm of `p_t − p^ε_t` (damped kernels) on `m` nodes.
pub fn kernel_difference_holder(t: f64, eps: f64, alpha: f64, kappa: f64, m: usize) -> Result<f64> {
    check_time(t)?;
    if !(alpha > 0.0 && kappa >= 0.0 && 2.0 * alpha + kappa <= 1.0) {
        return Err(Error::Domain(format!(
            "need α > 0, κ ≥ 0 and 2α + κ ≤ 1, got α = {alpha}, κ = {kappa}"
        )));
    }
    if eps == 0.0 {
        return Ok(0.0);
    }
    let plain = SemigroupSpec::damped();
    let hyper = SemigroupSpec::hyperviscous(eps);
    let mut c = vec![Complex64::new(0.0, 0.0); m];
    for (j, cj) in c.iter_mut().enumerate() {
        let k = spectral::wavenumber(j, m);
        *cj = Complex64::new(
            (plain.multiplier(k, t) - hyper.multiplier(k, t)) / (2.0 * PI),
            0.0,
        );
    }
    let d = spectral::inverse(&c);
    Ok(periodic_holder(&d, 2.0 * alpha, true))
}
