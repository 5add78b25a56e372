use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Uniform grid with `M` cells on `[start, end]`.
///
/// The default is the periodic grid on `[0, 2π]`; node `M` is then identified
/// with node 0 for periodic data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    cells: usize,
    start: f64,
    end: f64,
    periodic: bool,
}

impl Grid {
    /// Periodic grid on `[0, 2π]` with `m` cells.
    pub fn periodic(m: usize) -> Result<Self> {
        Self::check_cells(m)?;
        Ok(Self {
            cells: m,
            start: 0.0,
            end: 2.0 * PI,
            periodic: true,
        })
    }

    /// Non-periodic grid on `[start, end]` with `m` cells.
    pub fn interval(start: f64, end: f64, m: usize) -> Result<Self> {
        Self::check_cells(m)?;
        if !(start.is_finite() && end.is_finite() && end > start) {
            return Err(Error::Domain(format!("invalid interval [{start}, {end}]")));
        }
        Ok(Self {
            cells: m,
            start,
            end,
            periodic: false,
        })
    }

    fn check_cells(m: usize) -> Result<()> {
        if m < 4 {
            return Err(Error::Domain(format!("grid needs at least 4 cells, got {m}")));
        }
        Ok(())
    }

    /// Number of cells `M`.
    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Number of nodes `M + 1`.
    pub fn num_nodes(&self) -> usize {
        self.cells + 1
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn spacing(&self) -> f64 {
        self.length() / self.cells as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.cells {
            self.end
        } else {
            self.start + self.length() * i as f64 / self.cells as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.cells).map(|i| self.node(i)).collect()
    }

    /// Index of the node at `x`; fails if `x` is not a node.
    pub fn snap(&self, x: f64) -> Result<usize> {
        let r = (x - self.start) / self.spacing();
        let i = r.round();
        if !(i >= 0.0 && i <= self.cells as f64) || (r - i).abs() > 1e-9 {
            return Err(Error::Alignment(x));
        }
        Ok(i as usize)
    }

    pub(crate) fn check_node(&self, i: usize) -> Result<()> {
        if i > self.cells {
            return Err(Error::Domain(format!(
                "node index {i} outside grid with {} cells",
                self.cells
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_grid_spans_two_pi() {
        let g = Grid::periodic(16).unwrap();
        assert_eq!(g.node(16), 2.0 * PI);
        assert!((g.spacing() - PI / 8.0).abs() < 1e-15);
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rejects_small_grids() {
        assert!(matches!(Grid::periodic(3), Err(Error::Domain(_))));
    }

    #[test]
    fn snap_to_nodes() {
        let g = Grid::interval(0.0, 1.0, 8).unwrap();
        assert_eq!(g.snap(0.25).unwrap(), 2);
        assert_eq!(g.snap(1.0).unwrap(), 8);
        assert!(matches!(g.snap(0.3), Err(Error::Alignment(_))));
        assert!(matches!(g.snap(1.5), Err(Error::Alignment(_))));
    }
}
