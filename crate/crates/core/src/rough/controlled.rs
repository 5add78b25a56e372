use super::grid::Grid;
use super::linalg::norm;
use super::path::{gap_sizes, PathToken, RoughPath};
use super::smooth::SmoothMap;
use crate::error::{Error, Result};
use crate::stats::{fit_rate, CompensatedSum, RateFit};
use serde::{Deserialize, Serialize};

/// A path `Y` with Gubinelli derivative `Y'` relative to a [`RoughPath`].
///
/// Values are `(M+1) × m` node-major; the derivative is `(M+1) × m × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlledPath {
    reference: PathToken,
    grid: Grid,
    ref_dim: usize,
    dim: usize,
    values: Vec<f64>,
    derivative: Vec<f64>,
}

/// Parts of the controlled norm `‖Y‖_{C^α} + ‖Y'‖_{C^α} + ‖R‖_{2α}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlledNorm {
    pub value: f64,
    pub derivative: f64,
    pub remainder: f64,
    pub total: f64,
}

/// Result of a rough integral over a window.
#[derive(Debug, Clone)]
pub struct RoughIntegral {
    /// `∫_a^b Y ⊗ dX`, `m × d` row-major.
    pub value: Vec<f64>,
    /// Indefinite integral from node 0 with derivative `Y ⊗ I`.
    pub path: ControlledPath,
}

impl ControlledPath {
    pub fn new(rp: &RoughPath, dim: usize, values: Vec<f64>, derivative: Vec<f64>) -> Result<Self> {
        let nodes = rp.grid().num_nodes();
        let d = rp.dim();
        if values.len() != nodes * dim {
            return Err(Error::shape(format!("{} values", nodes * dim), values.len()));
        }
        if derivative.len() != nodes * dim * d {
            return Err(Error::shape(
                format!("{} derivative entries", nodes * dim * d),
                derivative.len(),
            ));
        }
        Ok(Self {
            reference: rp.token(),
            grid: *rp.grid(),
            ref_dim: d,
            dim,
            values,
            derivative,
        })
    }

    /// `ι f = (f, 0)` for a function of `x` only.
    pub fn lift_smooth(rp: &RoughPath, f: &SmoothMap) -> Result<Self> {
        if f.input_dim() != 0 {
            return Err(Error::shape("map of x only (input dimension 0)", f.input_dim()));
        }
        let m = f.output_dim();
        let grid = rp.grid();
        let mut values = vec![0.0; grid.num_nodes() * m];
        for (i, chunk) in values.chunks_mut(m).enumerate() {
            f.eval_into(&[], grid.node(i), chunk);
        }
        Self::lift_values(rp, m, values)
    }

    /// `ι Y = (Y, 0)` from node values.
    pub fn lift_values(rp: &RoughPath, dim: usize, values: Vec<f64>) -> Result<Self> {
        let zeros = vec![0.0; rp.grid().num_nodes() * dim * rp.dim()];
        Self::new(rp, dim, values, zeros)
    }

    /// `(X, I)`.
    pub fn canonical(rp: &RoughPath) -> Self {
        let d = rp.dim();
        let nodes = rp.grid().num_nodes();
        let mut derivative = vec![0.0; nodes * d * d];
        for i in 0..nodes {
            for c in 0..d {
                derivative[(i * d + c) * d + c] = 1.0;
            }
        }
        Self {
            reference: rp.token(),
            grid: *rp.grid(),
            ref_dim: d,
            dim: d,
            values: rp.values().to_vec(),
            derivative,
        }
    }

    pub fn reference(&self) -> PathToken {
        self.reference
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ref_dim(&self) -> usize {
        self.ref_dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivative(&self) -> &[f64] {
        &self.derivative
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// `Y'_i`, `m × d`.
    pub fn derivative_at(&self, i: usize) -> &[f64] {
        let w = self.dim * self.ref_dim;
        &self.derivative[i * w..(i + 1) * w]
    }

    pub fn check_reference(&self, rp: &RoughPath) -> Result<()> {
        if self.reference != rp.token() || self.ref_dim != rp.dim() || self.grid != *rp.grid() {
            return Err(Error::Contract(format!(
                "path controlled by {} used with rough path {}",
                self.reference,
                rp.token()
            )));
        }
        Ok(())
    }

    /// `(φ(Y, x), D_yφ(Y, x) Y')`.
    pub fn compose(&self, phi: &SmoothMap) -> Result<Self> {
        if phi.input_dim() != self.dim {
            return Err(Error::shape(
                format!("map input dimension {}", self.dim),
                phi.input_dim(),
            ));
        }
        let (m, n, d) = (self.dim, phi.output_dim(), self.ref_dim);
        let nodes = self.grid.num_nodes();
        let mut values = vec![0.0; nodes * n];
        let mut derivative = vec![0.0; nodes * n * d];
        let mut jac = vec![0.0; n * m];
        for i in 0..nodes {
            let x = self.grid.node(i);
            let y = self.value(i);
            phi.eval_into(y, x, &mut values[i * n..(i + 1) * n]);
            phi.jacobian_into(y, x, &mut jac);
            let yp = self.derivative_at(i);
            let out = &mut derivative[i * n * d..(i + 1) * n * d];
            for o in 0..n {
                for c in 0..d {
                    let mut s = 0.0;
                    for k in 0..m {
                        s += jac[o * m + k] * yp[k * d + c];
                    }
                    out[o * d + c] = s;
                }
            }
        }
        Ok(Self {
            reference: self.reference,
            grid: self.grid,
            ref_dim: d,
            dim: n,
            values,
            derivative,
        })
    }

    /// Product with a function of `x` supplied as node values, `(fY, fY')`.
    pub fn scale_by(&self, f: &[f64]) -> Result<Self> {
        if f.len() != self.grid.num_nodes() {
            return Err(Error::shape(self.grid.num_nodes(), f.len()));
        }
        let mut out = self.clone();
        let w = self.dim * self.ref_dim;
        for (i, &fi) in f.iter().enumerate() {
            out.values[i * self.dim..(i + 1) * self.dim]
                .iter_mut()
                .for_each(|v| *v *= fi);
            out.derivative[i * w..(i + 1) * w].iter_mut().for_each(|v| *v *= fi);
        }
        Ok(out)
    }

    /// `R_{s,t} = δY_{s,t} − Y'_s δX_{s,t}`.
    pub fn remainder(&self, rp: &RoughPath, s: usize, t: usize) -> Result<Vec<f64>> {
        self.check_reference(rp)?;
        self.grid.check_node(s)?;
        self.grid.check_node(t)?;
        let mut out = vec![0.0; self.dim];
        self.remainder_into(rp, s, t, &mut out);
        Ok(out)
    }

    fn remainder_into(&self, rp: &RoughPath, s: usize, t: usize, out: &mut [f64]) {
        let d = self.ref_dim;
        let (xs, xt) = (rp.value(s), rp.value(t));
        let (ys, yt) = (self.value(s), self.value(t));
        let yp = self.derivative_at(s);
        for o in 0..self.dim {
            let mut r = yt[o] - ys[o];
            for c in 0..d {
                r -= yp[o * d + c] * (xt[c] - xs[c]);
            }
            out[o] = r;
        }
    }

    /// Largest `|R_{s,t}|` at each dyadic gap, as `(gap length, max |R|)` pairs.
    pub fn remainder_profile(&self, rp: &RoughPath) -> Result<Vec<(f64, f64)>> {
        self.check_reference(rp)?;
        let m = self.grid.cells();
        let h = self.grid.spacing();
        let mut r = vec![0.0; self.dim];
        let mut out = Vec::new();
        for gap in gap_sizes(m, false) {
            let mut worst = 0.0f64;
            for s in 0..=(m - gap) {
                self.remainder_into(rp, s, s + gap, &mut r);
                worst = worst.max(norm(&r));
            }
            out.push((gap as f64 * h, worst));
        }
        Ok(out)
    }

    /// Log-log slope of the remainder profile over gaps of at most `max_gap` length.
    pub fn remainder_exponent(&self, rp: &RoughPath, max_gap: f64) -> Result<RateFit> {
        let pairs: Vec<(f64, f64)> = self
            .remainder_profile(rp)?
            .into_iter()
            .filter(|(g, _)| *g <= max_gap)
            .collect();
        fit_rate(&pairs)
    }

    /// `‖Y‖_{C^α}`, `‖Y'‖_{C^α}`, `‖R‖_{2α}` and their sum, with the Hölder
    /// parts restricted to dyadic gaps unless `full` is set.
    pub fn controlled_norm(&self, rp: &RoughPath, alpha: f64, full: bool) -> Result<ControlledNorm> {
        self.check_reference(rp)?;
        let m = self.grid.cells();
        let h = self.grid.spacing();
        let w = self.dim * self.ref_dim;
        let sup = |data: &[f64], width: usize| {
            data.chunks(width).map(norm).fold(0.0f64, f64::max)
        };
        let (mut hy, mut hyp, mut hr) = (0.0f64, 0.0f64, 0.0f64);
        let mut r = vec![0.0; self.dim];
        let mut diff = vec![0.0; w.max(self.dim)];
        for gap in gap_sizes(m, full) {
            let len = gap as f64 * h;
            let (wa, w2a) = (len.powf(alpha), len.powf(2.0 * alpha));
            for s in 0..=(m - gap) {
                let t = s + gap;
                for (k, dk) in diff[..self.dim].iter_mut().enumerate() {
                    *dk = self.value(t)[k] - self.value(s)[k];
                }
                hy = hy.max(norm(&diff[..self.dim]) / wa);
                let (ps, pt) = (self.derivative_at(s), self.derivative_at(t));
                for k in 0..w {
                    diff[k] = pt[k] - ps[k];
                }
                hyp = hyp.max(norm(&diff[..w]) / wa);
                self.remainder_into(rp, s, t, &mut r);
                hr = hr.max(norm(&r) / w2a);
            }
        }
        let value = sup(&self.values, self.dim) + hy;
        let derivative = sup(&self.derivative, w) + hyp;
        Ok(ControlledNorm {
            value,
            derivative,
            remainder: hr,
            total: value + derivative + hr,
        })
    }

    /// Replaces `(Y, Y')` by `(λ⁻¹Y, λ⁻²Y')` and rebinds to `rp`.
    pub fn rescaled_for(&self, rp: &RoughPath, lambda: f64) -> Result<Self> {
        let values = self.values.iter().map(|v| v / lambda).collect();
        let derivative = self.derivative.iter().map(|v| v / (lambda * lambda)).collect();
        Self::new(rp, self.dim, values, derivative)
    }
}

/// Compensated Riemann sum `Σ (Y_s ⊗ δX_{s,t} + Y'_s 𝐗_{s,t})` over the cells
/// between node indices `a ≤ b`.
pub fn rough_integral(cp: &ControlledPath, rp: &RoughPath, a: usize, b: usize) -> Result<RoughIntegral> {
    cp.check_reference(rp)?;
    rp.grid().check_node(a)?;
    rp.grid().check_node(b)?;
    if a > b {
        return Err(Error::Order { start: a, end: b });
    }
    let (m, d) = (cp.dim, cp.ref_dim);
    let md = m * d;
    let cells = rp.grid().cells();
    let nodes = cells + 1;
    let mut acc = vec![CompensatedSum::new(); md];
    let mut window = vec![CompensatedSum::new(); md];
    let mut z = vec![0.0; nodes * md];
    let mut term = vec![0.0; md];
    for c in 0..cells {
        cell_term(cp, rp, c, &mut term);
        for k in 0..md {
            acc[k].add(term[k]);
            z[(c + 1) * md + k] = acc[k].value();
            if c >= a && c < b {
                window[k].add(term[k]);
            }
        }
    }
    let mut zder = vec![0.0; nodes * md * d];
    for i in 0..nodes {
        let y = cp.value(i);
        for (o, yo) in y.iter().enumerate() {
            for j in 0..d {
                zder[((i * m + o) * d + j) * d + j] = *yo;
            }
        }
    }
    let path = ControlledPath {
        reference: cp.reference,
        grid: cp.grid,
        ref_dim: d,
        dim: md,
        values: z,
        derivative: zder,
    };
    Ok(RoughIntegral {
        value: window.iter().map(|s| s.value()).collect(),
        path,
    })
}

/// Rough integral over grid-aligned coordinates `[a, b]`.
pub fn rough_integral_between(
    cp: &ControlledPath,
    rp: &RoughPath,
    a: f64,
    b: f64,
) -> Result<RoughIntegral> {
    let (i, j) = (rp.grid().snap(a)?, rp.grid().snap(b)?);
    rough_integral(cp, rp, i, j)
}

/// `Y_c ⊗ δX_c + Y'_c 𝐗_c` for cell `c`, `m × d`.
#[inline]
pub(crate) fn cell_term(cp: &ControlledPath, rp: &RoughPath, c: usize, out: &mut [f64]) {
    let (m, d) = (cp.dim, cp.ref_dim);
    let y = cp.value(c);
    let yp = cp.derivative_at(c);
    let (x0, x1) = (rp.value(c), rp.value(c + 1));
    let area = rp.cell_area(c);
    for o in 0..m {
        for j in 0..d {
            let mut s = y[o] * (x1[j] - x0[j]);
            for k in 0..d {
                s += yp[o * d + k] * area[k * d + j];
            }
            out[o * d + j] = s;
        }
    }
}
