use crate::error::{Error, Result};
use crate::rough::{cell_term, ControlledPath, RoughPath};
use crate::semigroup::SemigroupSpec;
use crate::spectral::{fft_in_place, ifft_in_place, is_nyquist, wavenumber};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Kernel of the spatial convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvolutionKernel {
    /// `p_τ`
    Heat,
    /// `∂ₓp_τ`
    HeatDerivative,
}

impl ConvolutionKernel {
    fn symbol(self, k: i64) -> Complex64 {
        match self {
            ConvolutionKernel::Heat => Complex64::new(1.0, 0.0),
            ConvolutionKernel::HeatDerivative => Complex64::new(0.0, k as f64),
        }
    }
}

/// Compensated cell sums `Σ_l (Y_{il} δX^l + Σ_k Y'_{il,k} 𝐗^{kl})` of a
/// matrix-valued integrand (`p × d`, flattened row-major) against a
/// `d`-dimensional periodic rough path; `p × M` component-major.
pub fn cell_masses(cp: &ControlledPath, rp: &RoughPath) -> Result<Vec<f64>> {
    cp.check_reference(rp)?;
    if !rp.grid().is_periodic() {
        return Err(Error::Domain("rough convolution needs a periodic grid".into()));
    }
    let d = rp.dim();
    if !cp.dim().is_multiple_of(d) {
        return Err(Error::shape(format!("integrand dimension divisible by {d}"), cp.dim()));
    }
    let p = cp.dim() / d;
    let m = rp.grid().cells();
    let mut term = vec![0.0; cp.dim() * d];
    let mut out = vec![0.0; p * m];
    for c in 0..m {
        cell_term(cp, rp, c, &mut term);
        for i in 0..p {
            out[i * m + c] = (0..d).map(|l| term[(i * d + l) * d + l]).sum();
        }
    }
    Ok(out)
}

/// `i k h / (e^{ikh} − 1)`: turns the transform of cell masses into the
/// transform of the density of their band-limited primitive.
#[inline]
fn cell_correction(k: i64, h: f64) -> Complex64 {
    if k == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let half = k as f64 * h / 2.0;
    Complex64::from_polar(half / half.sin(), -half)
}

/// Fourier coefficients (FFT bin order, `u = Σ ĉ_k e^{ikx}` convention) of the
/// distribution `Y dX` from its cell masses, `p × M`. The Nyquist mode is
/// dropped.
pub fn density_coefficients(masses: &[f64], m: usize) -> Vec<Complex64> {
    let h = 2.0 * PI / m as f64;
    let mut out = Vec::with_capacity(masses.len());
    for comp in masses.chunks(m) {
        let mut buf: Vec<Complex64> = comp.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_in_place(&mut buf);
        for (j, b) in buf.iter_mut().enumerate() {
            if is_nyquist(j, m) {
                *b = Complex64::new(0.0, 0.0);
            } else {
                *b *= cell_correction(wavenumber(j, m), h) / (2.0 * PI);
            }
        }
        out.extend(buf);
    }
    out
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Contract(format!("convolution time must be positive, got {tau}")));
    }
    Ok(())
}

/// `x ↦ ∫ K_τ(x − y) Y_y dX(y)` at every node, `p × M` component-major.
///
/// The cell masses are read as increments of a band-limited primitive whose
/// density is then convolved with the kernel spectrally. For `Y ≡ 1` and a
/// trigonometric `X` this reproduces `K_τ ∗ ∂ₓX` exactly.
pub fn rough_heat_convolution(
    kernel: ConvolutionKernel,
    tau: f64,
    cp: &ControlledPath,
    rp: &RoughPath,
    semigroup: &SemigroupSpec,
) -> Result<Vec<f64>> {
    check_tau(tau)?;
    let m = rp.grid().cells();
    let mut coeffs = density_coefficients(&cell_masses(cp, rp)?, m);
    let mut out = Vec::with_capacity(coeffs.len());
    for comp in coeffs.chunks_mut(m) {
        for (j, c) in comp.iter_mut().enumerate() {
            let k = wavenumber(j, m);
            *c *= kernel.symbol(k) * semigroup.multiplier(k, tau);
        }
        ifft_in_place(comp);
        out.extend(comp.iter().map(|z| z.re));
    }
    Ok(out)
}

/// Reference `O(M²)` evaluation of [`rough_heat_convolution`]: kernel samples
/// summed mode by mode, then a direct circular convolution with the cell masses.
pub fn rough_heat_convolution_direct(
    kernel: ConvolutionKernel,
    tau: f64,
    cp: &ControlledPath,
    rp: &RoughPath,
    semigroup: &SemigroupSpec,
) -> Result<Vec<f64>> {
    check_tau(tau)?;
    let m = rp.grid().cells();
    let h = rp.grid().spacing();
    let masses = cell_masses(cp, rp)?;
    let band: Vec<(i64, Complex64)> = (0..m)
        .filter(|&j| !is_nyquist(j, m))
        .map(|j| {
            let k = wavenumber(j, m);
            (
                k,
                kernel.symbol(k) * semigroup.multiplier(k, tau) * cell_correction(k, h) / (2.0 * PI),
            )
        })
        .collect();
    let samples: Vec<f64> = (0..m)
        .map(|j| {
            let x = j as f64 * h;
            band.iter()
                .map(|(k, w)| (w * Complex64::from_polar(1.0, *k as f64 * x)).re)
                .sum()
        })
        .collect();
    let mut out = vec![0.0; masses.len()];
    for (comp, res) in masses.chunks(m).zip(out.chunks_mut(m)) {
        for (i, r) in res.iter_mut().enumerate() {
            *r = (0..m).map(|j| samples[(i + m - j) % m] * comp[j]).sum();
        }
    }
    Ok(out)
}
