use super::linalg::matmul_into;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Callback `(y, x, out)`.
pub type MapFn = Arc<dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync>;

/// Advertised sup-norm bounds of a map and its first two `y`-derivatives.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MapBounds {
    pub sup: Option<f64>,
    pub jacobian_sup: Option<f64>,
    pub hessian_sup: Option<f64>,
}

/// A map `φ: ℝᵐ × ℝ → ℝⁿ`, `C²` in its first argument.
///
/// Layouts: the Jacobian is `n × m` row-major, `J[o·m + i] = ∂φ_o/∂y_i`; the
/// Hessian is `n × m × m`, `H[(o·m + i)·m + j] = ∂²φ_o/∂y_i∂y_j`.
#[derive(Clone)]
pub struct SmoothMap {
    input_dim: usize,
    output_dim: usize,
    value: MapFn,
    jacobian: MapFn,
    hessian: Option<MapFn>,
    bounds: MapBounds,
}

impl std::fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothMap")
            .field("input_dim", &self.input_dim)
            .field("output_dim", &self.output_dim)
            .field("has_hessian", &self.hessian.is_some())
            .field("bounds", &self.bounds)
            .finish()
    }
}

impl SmoothMap {
    pub fn new(
        input_dim: usize,
        output_dim: usize,
        value: impl Fn(&[f64], f64, &mut [f64]) + Send + Sync + 'static,
        jacobian: impl Fn(&[f64], f64, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            input_dim,
            output_dim,
            value: Arc::new(value),
            jacobian: Arc::new(jacobian),
            hessian: None,
            bounds: MapBounds::default(),
        }
    }

    pub fn with_hessian(
        mut self,
        hessian: impl Fn(&[f64], f64, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.hessian = Some(Arc::new(hessian));
        self
    }

    pub fn with_bounds(mut self, bounds: MapBounds) -> Self {
        self.bounds = bounds;
        self
    }

    /// A function of `x` only (input dimension 0).
    pub fn of_x(output_dim: usize, f: impl Fn(f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        Self::new(0, output_dim, move |_, x, out| f(x, out), |_, _, _| {})
            .with_hessian(|_, _, _| {})
    }

    /// Scalar map `y ↦ f(y)` with its first two derivatives.
    pub fn scalar(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(1, 1, move |y, _, o| o[0] = f(y[0]), move |y, _, o| o[0] = df(y[0]))
            .with_hessian(move |y, _, o| o[0] = d2f(y[0]))
    }

    pub fn identity(m: usize) -> Self {
        Self::new(
            m,
            m,
            |y, _, o| o.copy_from_slice(y),
            move |_, _, o| {
                o.fill(0.0);
                for i in 0..m {
                    o[i * m + i] = 1.0;
                }
            },
        )
        .with_hessian(|_, _, o| o.fill(0.0))
    }

    /// Constant map with value `c` on inputs of dimension `m`.
    pub fn constant(m: usize, c: Vec<f64>) -> Self {
        let n = c.len();
        Self::new(m, n, move |_, _, o| o.copy_from_slice(&c), |_, _, o| o.fill(0.0))
            .with_hessian(|_, _, o| o.fill(0.0))
            .with_bounds(MapBounds {
                sup: None,
                jacobian_sup: Some(0.0),
                hessian_sup: Some(0.0),
            })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn bounds(&self) -> MapBounds {
        self.bounds
    }

    pub fn has_hessian(&self) -> bool {
        self.hessian.is_some()
    }

    #[inline]
    pub fn eval_into(&self, y: &[f64], x: f64, out: &mut [f64]) {
        (self.value)(y, x, out)
    }

    #[inline]
    pub fn jacobian_into(&self, y: &[f64], x: f64, out: &mut [f64]) {
        (self.jacobian)(y, x, out)
    }

    pub fn hessian_into(&self, y: &[f64], x: f64, out: &mut [f64]) -> Result<()> {
        match &self.hessian {
            Some(h) => {
                h(y, x, out);
                Ok(())
            }
            None => Err(Error::Domain("map has no second-derivative callback".into())),
        }
    }

    pub fn eval(&self, y: &[f64], x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.output_dim];
        self.eval_into(y, x, &mut out);
        out
    }

    pub fn jacobian(&self, y: &[f64], x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.output_dim * self.input_dim];
        self.jacobian_into(y, x, &mut out);
        out
    }

    pub fn hessian(&self, y: &[f64], x: f64) -> Result<Vec<f64>> {
        let m = self.input_dim;
        let mut out = vec![0.0; self.output_dim * m * m];
        self.hessian_into(y, x, &mut out)?;
        Ok(out)
    }

    /// `outer ∘ self`, with the chain rule applied to both derivative callbacks.
    pub fn then(&self, outer: &SmoothMap) -> Result<SmoothMap> {
        if outer.input_dim != self.output_dim {
            return Err(Error::shape(
                format!("outer input dimension {}", self.output_dim),
                outer.input_dim,
            ));
        }
        let (m, k, n) = (self.input_dim, self.output_dim, outer.output_dim);
        let (a, b) = (self.clone(), outer.clone());
        let value = {
            let (a, b) = (a.clone(), b.clone());
            move |y: &[f64], x: f64, o: &mut [f64]| {
                let z = a.eval(y, x);
                b.eval_into(&z, x, o);
            }
        };
        let jacobian = {
            let (a, b) = (a.clone(), b.clone());
            move |y: &[f64], x: f64, o: &mut [f64]| {
                let z = a.eval(y, x);
                let ja = a.jacobian(y, x);
                let jb = b.jacobian(&z, x);
                matmul_into(&jb, &ja, n, k, m, o);
            }
        };
        let mut out = SmoothMap::new(m, n, value, jacobian);
        if a.hessian.is_some() && b.hessian.is_some() {
            out = out.with_hessian(move |y, x, o| {
                let z = a.eval(y, x);
                let ja = a.jacobian(y, x);
                let ha = a.hessian(y, x).expect("checked above");
                let jb = b.jacobian(&z, x);
                let hb = b.hessian(&z, x).expect("checked above");
                for p in 0..n {
                    for i in 0..m {
                        for j in 0..m {
                            let mut s = 0.0;
                            for q in 0..k {
                                for r in 0..k {
                                    s += hb[(p * k + q) * k + r] * ja[q * m + i] * ja[r * m + j];
                                }
                                s += jb[p * k + q] * ha[(q * m + i) * m + j];
                            }
                            o[(p * m + i) * m + j] = s;
                        }
                    }
                }
            });
        }
        Ok(out)
    }

    /// Largest deviation between the derivative callbacks and central finite
    /// differences of the level below, relative to `max(1, |exact|)`.
    pub fn derivative_check(&self, probes: &[(Vec<f64>, f64)], step: f64) -> f64 {
        let (m, n) = (self.input_dim, self.output_dim);
        let mut worst = 0.0f64;
        for (y, x) in probes {
            let jac = self.jacobian(y, *x);
            let hess = self.hessian(y, *x).ok();
            for i in 0..m {
                let mut yp = y.clone();
                let mut ym = y.clone();
                yp[i] += step;
                ym[i] -= step;
                let (fp, fm) = (self.eval(&yp, *x), self.eval(&ym, *x));
                for o in 0..n {
                    let fd = (fp[o] - fm[o]) / (2.0 * step);
                    let exact = jac[o * m + i];
                    worst = worst.max((fd - exact).abs() / exact.abs().max(1.0));
                }
                if let Some(h) = &hess {
                    let (jp, jm) = (self.jacobian(&yp, *x), self.jacobian(&ym, *x));
                    for o in 0..n {
                        for j in 0..m {
                            let fd = (jp[o * m + j] - jm[o * m + j]) / (2.0 * step);
                            let exact = h[(o * m + j) * m + i];
                            worst = worst.max((fd - exact).abs() / exact.abs().max(1.0));
                        }
                    }
                }
            }
        }
        worst
    }

    /// Whether the advertised bounds hold at every probe.
    pub fn respects_bounds(&self, probes: &[(Vec<f64>, f64)]) -> bool {
        let sup = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        probes.iter().all(|(y, x)| {
            let ok_v = self.bounds.sup.is_none_or(|b| sup(&self.eval(y, *x)) <= b);
            let ok_j = self
                .bounds
                .jacobian_sup
                .is_none_or(|b| sup(&self.jacobian(y, *x)) <= b);
            let ok_h = match (self.bounds.hessian_sup, self.hessian(y, *x)) {
                (Some(b), Ok(h)) => sup(&h) <= b,
                _ => true,
            };
            ok_v && ok_j && ok_h
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamId;

    fn sin_map() -> SmoothMap {
        SmoothMap::scalar(f64::sin, f64::cos, |y| -y.sin())
    }

    fn square_map() -> SmoothMap {
        SmoothMap::scalar(|y| y * y, |y| 2.0 * y, |_| 2.0)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = StreamId::new(3, 0).rng();
        let probes: Vec<(Vec<f64>, f64)> =
            (0..50).map(|_| (vec![rng.uniform_in(-3.0, 3.0)], 0.0)).collect();
        let composed = sin_map().then(&square_map()).unwrap();
        for map in [sin_map(), square_map(), composed] {
            assert!(map.derivative_check(&probes, 1e-5) <= 1e-6);
        }
    }

    #[test]
    fn composition_matches_direct_formula() {
        let composed = sin_map().then(&square_map()).unwrap();
        for y in [-1.3, 0.0, 0.4, 2.2] {
            assert!((composed.eval(&[y], 0.0)[0] - y.sin().powi(2)).abs() < 1e-15);
            assert!((composed.jacobian(&[y], 0.0)[0] - (2.0 * y).sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(SmoothMap::identity(2).then(&sin_map()).is_err());
    }

    #[test]
    fn bounds_probe() {
        let map = sin_map().with_bounds(MapBounds {
            sup: Some(1.0),
            jacobian_sup: Some(1.0),
            hessian_sup: Some(1.0),
        });
        let probes: Vec<(Vec<f64>, f64)> = (0..20).map(|i| (vec![i as f64 * 0.7], 0.0)).collect();
        assert!(map.respects_bounds(&probes));
        let tight = sin_map().with_bounds(MapBounds {
            sup: Some(0.5),
            ..Default::default()
        });
        assert!(!tight.respects_bounds(&probes));
    }
}
