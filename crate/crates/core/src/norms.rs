//! Discrete norms of periodic samples `u_j = u(2πj/M)`, `j = 0..M`.
//!
//! Hölder seminorms use the circular distance and, by default, only dyadic
//! gap sizes; the full pairwise maximum differs by at most a factor `2^α`.

use crate::spectral;
use std::f64::consts::PI;

pub fn sup_norm(u: &[f64]) -> f64 {
    u.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// `sup |u(x) − u(y)| / d(x, y)^α` over circular gaps.
pub fn periodic_holder(u: &[f64], alpha: f64, full: bool) -> f64 {
    let m = u.len();
    let h = 2.0 * PI / m as f64;
    let mut gaps: Vec<usize> = if full {
        (1..=m / 2).collect()
    } else {
        let mut g = vec![];
        let mut s = 1;
        while s <= m / 2 {
            g.push(s);
            s *= 2;
        }
        g
    };
    if gaps.is_empty() {
        gaps.push(1);
    }
    let mut worst = 0.0f64;
    for g in gaps {
        let w = (g as f64 * h).powf(alpha);
        for i in 0..m {
            let d = (u[(i + g) % m] - u[i]).abs();
            worst = worst.max(d / w);
        }
    }
    worst
}

/// `‖u‖_∞ + [u]_α`.
pub fn c_alpha(u: &[f64], alpha: f64) -> f64 {
    sup_norm(u) + periodic_holder(u, alpha, false)
}

/// `‖u‖_∞ + ‖∂ₓu‖_∞` with a spectral derivative.
pub fn c1_norm(u: &[f64]) -> f64 {
    sup_norm(u) + sup_norm(&spectral::derivative(u))
}

/// Component-wise maximum of a norm over a component-major `n × M` array.
pub fn max_over_components(u: &[f64], m: usize, norm: impl Fn(&[f64]) -> f64) -> f64 {
    u.chunks(m).map(norm).fold(0.0f64, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holder_of_cosine() {
        let m = 256;
        let u: Vec<f64> = (0..m).map(|j| (2.0 * PI * j as f64 / m as f64).cos()).collect();
        // Lipschitz constant of cos is 1, approached at the smallest gap
        let lip = periodic_holder(&u, 1.0, true);
        assert!(lip <= 1.0 && lip > 0.99);
        assert!((c1_norm(&u) - 2.0).abs() < 1e-3);
        assert_eq!(periodic_holder(&[2.0; 16], 0.3, false), 0.0);
    }
}
