//! FFT helpers for periodic samples on `x_j = 2πj/M`, `j = 0..M`.
//!
//! Coefficients follow `u_j = Σ_k c_k e^{ikx_j}` with `k` in `[-M/2, M/2)`;
//! `forward` returns `c` indexed by FFT bin.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

/// Signed wavenumber of FFT bin `j` for length `m`. The Nyquist bin maps to `-m/2`.
#[inline]
pub fn wavenumber(j: usize, m: usize) -> i64 {
    if j < m.div_ceil(2) {
        j as i64
    } else {
        j as i64 - m as i64
    }
}

/// FFT bin holding wavenumber `k` (taken mod `m`).
#[inline]
pub fn bin(k: i64, m: usize) -> usize {
    k.rem_euclid(m as i64) as usize
}

#[inline]
pub fn is_nyquist(j: usize, m: usize) -> bool {
    m.is_multiple_of(2) && j == m / 2
}

/// In-place unnormalised forward transform `Σ_l x_l e^{-2πi jl/n}`.
pub fn fft_in_place(buf: &mut [Complex64]) {
    plans(buf.len()).forward.process(buf);
}

/// In-place unnormalised inverse transform `Σ_j x_j e^{+2πi jl/n}`.
pub fn ifft_in_place(buf: &mut [Complex64]) {
    plans(buf.len()).inverse.process(buf);
}

/// Normalised Fourier coefficients of real samples.
pub fn forward(u: &[f64]) -> Vec<Complex64> {
    let m = u.len() as f64;
    let mut buf: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_in_place(&mut buf);
    for c in buf.iter_mut() {
        *c /= m;
    }
    buf
}

/// Synthesis `u_j = Re Σ_k c_k e^{ikx_j}`.
pub fn inverse(c: &[Complex64]) -> Vec<f64> {
    let mut buf = c.to_vec();
    ifft_in_place(&mut buf);
    buf.into_iter().map(|z| z.re).collect()
}

/// Applies a Fourier multiplier `k ↦ mult(k)` to real samples. The Nyquist
/// bin is multiplied by `Re mult(-M/2)` so that the result stays real.
pub fn apply_multiplier(u: &[f64], mult: impl Fn(i64) -> Complex64) -> Vec<f64> {
    let m = u.len();
    let mut c = forward(u);
    for (j, cj) in c.iter_mut().enumerate() {
        let k = wavenumber(j, m);
        let f = mult(k);
        *cj *= if is_nyquist(j, m) {
            Complex64::new(f.re, 0.0)
        } else {
            f
        };
    }
    inverse(&c)
}

/// Spectral first derivative of periodic samples on `[0, 2π)`.
pub fn derivative(u: &[f64]) -> Vec<f64> {
    apply_multiplier(u, |k| Complex64::new(0.0, k as f64))
}

/// Spectral derivative of coefficients, in place (Nyquist zeroed).
pub fn differentiate_coefficients(c: &mut [Complex64]) {
    let m = c.len();
    for (j, cj) in c.iter_mut().enumerate() {
        if is_nyquist(j, m) {
            *cj = Complex64::new(0.0, 0.0);
        } else {
            *cj *= Complex64::new(0.0, wavenumber(j, m) as f64);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wavenumbers_cover_symmetric_range() {
        let ks: Vec<i64> = (0..8).map(|j| wavenumber(j, 8)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        for k in -4..4 {
            assert_eq!(wavenumber(bin(k, 8), 8), k);
        }
    }

    #[test]
    fn derivative_of_trig_polynomial() {
        let m = 64;
        let x: Vec<f64> = (0..m).map(|j| 2.0 * PI * j as f64 / m as f64).collect();
        let u: Vec<f64> = x.iter().map(|&x| (3.0 * x).sin() + 0.5 * x.cos()).collect();
        let du = derivative(&u);
        for (xi, d) in x.iter().zip(&du) {
            let exact = 3.0 * (3.0 * xi).cos() - 0.5 * xi.sin();
            assert!((d - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip() {
        let u: Vec<f64> = (0..37).map(|j| ((j * j) % 11) as f64 - 3.0).collect();
        let back = inverse(&forward(&u));
        for (a, b) in u.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
