use super::grid::Grid;
use super::linalg::{norm, outer_into};
use crate::error::{Error, Result};
use crate::quadrature::GaussRule;
use crate::stats::CompensatedSum;
use serde::{Deserialize, Serialize};
use std::hash::{Hash, Hasher};

/// Identity of the level-1 path of a [`RoughPath`]; controlled paths record
/// the token of the path they are controlled by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathToken(pub u64);

impl std::fmt::Display for PathToken {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// Callback writing a `d`-vector evaluated at a point.
pub type PathFn<'a> = &'a dyn Fn(f64, &mut [f64]);

/// How the level-2 cell increments are obtained.
pub enum AreaMode<'a> {
    /// `∫_s^t δX_{s,r} ⊗ X'(r) dr` per cell by Gauss–Legendre of the given order,
    /// using a continuous interpolant of `X` and its derivative.
    Quadrature {
        order: usize,
        path: PathFn<'a>,
        derivative: PathFn<'a>,
    },
    /// Cell increments given directly, `M × d × d` row-major.
    Supplied(Vec<f64>),
    /// All areas zero.
    Zero,
}

pub const DEFAULT_HOLDER_EXPONENT: f64 = 0.45;
pub const DEFAULT_QUADRATURE_ORDER: usize = 8;

/// Level-1 samples plus per-cell level-2 increments on a uniform grid.
///
/// Areas over longer windows are reconstructed through Chen's relation from
/// a compensated prefix accumulation, so every query is O(1).
#[derive(Debug, Clone, PartialEq)]
pub struct RoughPath {
    grid: Grid,
    dim: usize,
    alpha: f64,
    values: Vec<f64>,
    cell_areas: Vec<f64>,
    prefix: Vec<f64>,
    token: PathToken,
}

impl RoughPath {
    /// Builds a rough path from node values `(M+1) × d` (node-major).
    pub fn build(grid: Grid, dim: usize, values: Vec<f64>, mode: AreaMode<'_>) -> Result<Self> {
        let m = grid.cells();
        if dim == 0 {
            return Err(Error::Domain("rough path dimension must be positive".into()));
        }
        if values.len() != (m + 1) * dim {
            return Err(Error::shape(
                format!("{} node values", (m + 1) * dim),
                values.len(),
            ));
        }
        if grid.is_periodic() {
            let scale = 1.0 + values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for c in 0..dim {
                let gap = (values[m * dim + c] - values[c]).abs();
                if gap > 1e-12 * scale {
                    return Err(Error::Domain(format!(
                        "samples are not periodic: component {c} differs by {gap:e} between the endpoints"
                    )));
                }
            }
        }
        let cell_areas = match mode {
            AreaMode::Zero => vec![0.0; m * dim * dim],
            AreaMode::Supplied(a) => {
                if a.len() != m * dim * dim {
                    return Err(Error::shape(
                        format!("{m}x{dim}x{dim} cell increments"),
                        format!("{} values", a.len()),
                    ));
                }
                a
            }
            AreaMode::Quadrature {
                order,
                path,
                derivative,
            } => quadrature_areas(&grid, dim, order, path, derivative)?,
        };
        Ok(Self::from_parts(grid, dim, values, cell_areas))
    }

    pub(crate) fn from_parts(grid: Grid, dim: usize, values: Vec<f64>, cell_areas: Vec<f64>) -> Self {
        let token = level_one_token(&grid, dim, &values);
        let prefix = prefix_areas(&grid, dim, &values, &cell_areas);
        Self {
            grid,
            dim,
            alpha: DEFAULT_HOLDER_EXPONENT,
            values,
            cell_areas,
            prefix,
            token,
        }
    }

    /// Sets the advertised Hölder exponent, which must lie in `(1/3, 1/2]`.
    pub fn with_holder_exponent(mut self, alpha: f64) -> Result<Self> {
        if !(alpha > 1.0 / 3.0 && alpha <= 0.5) {
            return Err(Error::Domain(format!(
                "Hölder exponent {alpha} outside (1/3, 1/2]"
            )));
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn holder_exponent(&self) -> f64 {
        self.alpha
    }

    pub fn token(&self) -> PathToken {
        self.token
    }

    /// Node values, `(M+1) × d` node-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Cell increments, `M × d × d`.
    pub fn cell_areas(&self) -> &[f64] {
        &self.cell_areas
    }

    pub fn cell_area(&self, i: usize) -> &[f64] {
        let d2 = self.dim * self.dim;
        &self.cell_areas[i * d2..(i + 1) * d2]
    }

    /// `X_t - X_s` for node indices.
    pub fn increment(&self, s: usize, t: usize) -> Vec<f64> {
        let (a, b) = (self.value(s), self.value(t));
        a.iter().zip(b).map(|(x, y)| y - x).collect()
    }

    fn check_pair(&self, s: usize, t: usize) -> Result<()> {
        self.grid.check_node(s)?;
        self.grid.check_node(t)?;
        if s > t {
            return Err(Error::Order { start: s, end: t });
        }
        Ok(())
    }

    /// `𝐗_{s,t}` for node indices `s ≤ t`, `d × d` row-major.
    pub fn query_area(&self, s: usize, t: usize) -> Result<Vec<f64>> {
        self.check_pair(s, t)?;
        let mut out = vec![0.0; self.dim * self.dim];
        self.area_into(s, t, &mut out);
        Ok(out)
    }

    /// `𝐗_{s,t}` for grid-aligned coordinates.
    pub fn area_between(&self, s: f64, t: f64) -> Result<Vec<f64>> {
        let (i, j) = (self.grid.snap(s)?, self.grid.snap(t)?);
        self.query_area(i, j)
    }

    pub(crate) fn area_into(&self, s: usize, t: usize, out: &mut [f64]) {
        let d = self.dim;
        let d2 = d * d;
        if s == t {
            out.fill(0.0);
            return;
        }
        if t == s + 1 {
            out.copy_from_slice(self.cell_area(s));
            return;
        }
        let (ps, pt) = (&self.prefix[s * d2..(s + 1) * d2], &self.prefix[t * d2..(t + 1) * d2]);
        let x0 = self.value(0);
        let (xs, xt) = (self.value(s), self.value(t));
        for i in 0..d {
            for j in 0..d {
                let k = i * d + j;
                out[k] = (pt[k] - ps[k]) - (xs[i] - x0[i]) * (xt[j] - xs[j]);
            }
        }
    }

    /// `𝐗_{s,t} − 𝐗_{u,t} − 𝐗_{s,u} − δX_{s,u} ⊗ δX_{u,t}`.
    pub fn chen_defect(&self, s: usize, u: usize, t: usize) -> Result<Vec<f64>> {
        self.check_pair(s, u)?;
        self.check_pair(u, t)?;
        let ast = self.query_area(s, t)?;
        let aut = self.query_area(u, t)?;
        let asu = self.query_area(s, u)?;
        let (dsu, dut) = (self.increment(s, u), self.increment(u, t));
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let k = i * d + j;
                out[k] = ast[k] - aut[k] - asu[k] - dsu[i] * dut[j];
            }
        }
        Ok(out)
    }

    /// `(‖X‖_α, ‖𝐗‖_{2α})` as maxima over dyadic gaps plus the full window,
    /// or over all pairs when `full` is set.
    pub fn holder_seminorms(&self, alpha: f64, full: bool) -> (f64, f64) {
        let m = self.grid.cells();
        let h = self.grid.spacing();
        let mut area = vec![0.0; self.dim * self.dim];
        let (mut x_norm, mut a_norm) = (0.0f64, 0.0f64);
        for gap in gap_sizes(m, full) {
            let len = gap as f64 * h;
            let (wx, wa) = (len.powf(alpha), len.powf(2.0 * alpha));
            for s in 0..=(m - gap) {
                let t = s + gap;
                let dx: f64 = self
                    .value(s)
                    .iter()
                    .zip(self.value(t))
                    .map(|(a, b)| (b - a) * (b - a))
                    .sum::<f64>()
                    .sqrt();
                x_norm = x_norm.max(dx / wx);
                self.area_into(s, t, &mut area);
                a_norm = a_norm.max(norm(&area) / wa);
            }
        }
        (x_norm, a_norm)
    }

    /// Replaces every cell increment by `𝐗_{i,i+1} + F_{i+1} − F_i`; level 1
    /// (and therefore the token) is unchanged. `f` holds `(M+1) × d × d` values.
    pub fn shift_area(&self, f: &[f64]) -> Result<Self> {
        let m = self.grid.cells();
        let d2 = self.dim * self.dim;
        if f.len() != (m + 1) * d2 {
            return Err(Error::shape(
                format!("{}x{}x{} node matrices", m + 1, self.dim, self.dim),
                format!("{} values", f.len()),
            ));
        }
        let mut areas = self.cell_areas.clone();
        for i in 0..m {
            for k in 0..d2 {
                areas[i * d2 + k] += f[(i + 1) * d2 + k] - f[i * d2 + k];
            }
        }
        let mut out = Self::from_parts(self.grid, self.dim, self.values.clone(), areas);
        out.alpha = self.alpha;
        Ok(out)
    }

    /// `(X, 𝐗) ↦ (λX, λ²𝐗)`.
    pub fn dilate(&self, lambda: f64) -> Self {
        let values = self.values.iter().map(|v| lambda * v).collect();
        let areas = self.cell_areas.iter().map(|a| lambda * lambda * a).collect();
        let mut out = Self::from_parts(self.grid, self.dim, values, areas);
        out.alpha = self.alpha;
        out
    }

    /// Rough path with the same grid and values but other cell increments.
    pub fn with_cell_areas(&self, areas: Vec<f64>) -> Result<Self> {
        let mut out = Self::build(self.grid, self.dim, self.values.clone(), AreaMode::Supplied(areas))?;
        out.alpha = self.alpha;
        Ok(out)
    }
}

/// Dyadic gap sizes `1, 2, 4, …` below `m`, plus `m` itself.
pub(crate) fn gap_sizes(m: usize, full: bool) -> Vec<usize> {
    if full {
        return (1..=m).collect();
    }
    let mut gaps = Vec::new();
    let mut g = 1;
    while g < m {
        gaps.push(g);
        g *= 2;
    }
    gaps.push(m);
    gaps
}

fn quadrature_areas(
    grid: &Grid,
    dim: usize,
    order: usize,
    path: PathFn<'_>,
    derivative: PathFn<'_>,
) -> Result<Vec<f64>> {
    if order == 0 {
        return Err(Error::Domain("quadrature order must be positive".into()));
    }
    let rule = GaussRule::new(order);
    let m = grid.cells();
    let d2 = dim * dim;
    let mut areas = vec![0.0; m * d2];
    let (mut xs, mut xr, mut dxr) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    for c in 0..m {
        let (s, t) = (grid.node(c), grid.node(c + 1));
        path(s, &mut xs);
        let cell = &mut areas[c * d2..(c + 1) * d2];
        for (r, w) in rule.mapped(s, t) {
            path(r, &mut xr);
            derivative(r, &mut dxr);
            for i in 0..dim {
                let di = w * (xr[i] - xs[i]);
                for j in 0..dim {
                    cell[i * dim + j] += di * dxr[j];
                }
            }
        }
    }
    Ok(areas)
}

fn prefix_areas(grid: &Grid, dim: usize, values: &[f64], cell_areas: &[f64]) -> Vec<f64> {
    let m = grid.cells();
    let d2 = dim * dim;
    let mut prefix = vec![0.0; (m + 1) * d2];
    let mut acc = vec![CompensatedSum::new(); d2];
    let mut cross = vec![0.0; d2];
    let x0 = &values[..dim];
    let mut from0 = vec![0.0; dim];
    let mut step = vec![0.0; dim];
    for i in 0..m {
        for c in 0..dim {
            from0[c] = values[i * dim + c] - x0[c];
            step[c] = values[(i + 1) * dim + c] - values[i * dim + c];
        }
        outer_into(&from0, &step, &mut cross);
        for k in 0..d2 {
            acc[k].add(cell_areas[i * d2 + k]);
            acc[k].add(cross[k]);
            prefix[(i + 1) * d2 + k] = acc[k].value();
        }
    }
    prefix
}

fn level_one_token(grid: &Grid, dim: usize, values: &[f64]) -> PathToken {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    grid.cells().hash(&mut h);
    grid.start().to_bits().hash(&mut h);
    grid.end().to_bits().hash(&mut h);
    grid.is_periodic().hash(&mut h);
    dim.hash(&mut h);
    for v in values {
        v.to_bits().hash(&mut h);
    }
    PathToken(h.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn identity_path(grid: Grid) -> RoughPath {
        let values = grid.nodes();
        let id = |x: f64, out: &mut [f64]| out[0] = x;
        let one = |_: f64, out: &mut [f64]| out[0] = 1.0;
        RoughPath::build(
            grid,
            1,
            values,
            AreaMode::Quadrature {
                order: 8,
                path: &id,
                derivative: &one,
            },
        )
        .unwrap()
    }

    #[test]
    fn linear_path_has_half_square_areas() {
        let grid = Grid::interval(0.0, 2.0 * PI, 64).unwrap();
        let rp = identity_path(grid);
        let h = grid.spacing();
        for c in 0..64 {
            assert!((rp.cell_area(c)[0] - h * h / 2.0).abs() < 1e-14);
        }
        let full = rp.query_area(0, 64).unwrap()[0];
        assert!((full - (2.0 * PI).powi(2) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_areas_vanish_and_order_is_checked() {
        let rp = identity_path(Grid::interval(0.0, 1.0, 16).unwrap());
        assert_eq!(rp.query_area(5, 5).unwrap(), vec![0.0]);
        assert!(matches!(rp.query_area(6, 5), Err(Error::Order { .. })));
        assert!(matches!(rp.area_between(0.0, 0.3), Err(Error::Alignment(_))));
    }

    #[test]
    fn sub_window_area_of_linear_path() {
        let rp = identity_path(Grid::interval(0.0, 1.0, 16).unwrap());
        let a = rp.area_between(0.25, 0.75).unwrap()[0];
        assert!((a - 0.5 * 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_area_chen_defect_is_product_free() {
        let grid = Grid::periodic(32).unwrap();
        let values: Vec<f64> = grid
            .nodes()
            .iter()
            .flat_map(|&x| [x.cos(), x.sin()])
            .collect();
        let rp = RoughPath::build(grid, 2, values, AreaMode::Zero).unwrap();
        let a = rp.query_area(3, 3).unwrap();
        assert!(a.iter().all(|&v| v == 0.0));
        let def = rp.chen_defect(2, 9, 20).unwrap();
        assert!(def.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn rejects_non_periodic_samples_and_bad_shapes() {
        let grid = Grid::periodic(8).unwrap();
        let values = grid.nodes();
        assert!(matches!(
            RoughPath::build(grid, 1, values.clone(), AreaMode::Zero),
            Err(Error::Domain(_))
        ));
        let periodic = vec![0.0; 9];
        assert!(matches!(
            RoughPath::build(grid, 1, periodic, AreaMode::Supplied(vec![0.0; 3])),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn holder_of_identity_at_one_half() {
        let rp = identity_path(Grid::interval(0.0, 2.0 * PI, 128).unwrap());
        let (x, _) = rp.holder_seminorms(0.5, false);
        assert!((x - (2.0 * PI).sqrt()).abs() < 1e-12);
        let (xf, _) = rp.holder_seminorms(0.5, true);
        assert!((xf - x).abs() < 1e-12);
    }

    #[test]
    fn constant_path_has_zero_seminorms() {
        let grid = Grid::periodic(16).unwrap();
        let rp = RoughPath::build(grid, 2, vec![1.5; 34], AreaMode::Zero).unwrap();
        assert_eq!(rp.holder_seminorms(0.4, true), (0.0, 0.0));
    }

    #[test]
    fn shift_keeps_token() {
        let rp = identity_path(Grid::interval(0.0, 1.0, 8).unwrap());
        let f: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let shifted = rp.shift_area(&f).unwrap();
        assert_eq!(shifted.token(), rp.token());
        assert!(rp.shift_area(&f[..4]).is_err());
    }
}
