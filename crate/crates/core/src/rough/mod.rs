//! Discrete rough paths, controlled paths and compensated Riemann sums.

mod controlled;
mod grid;
pub(crate) mod linalg;
mod path;
mod smooth;

pub use controlled::{
    rough_integral, rough_integral_between, ControlledNorm, ControlledPath, RoughIntegral,
};
pub(crate) use controlled::cell_term;
pub use grid::Grid;
pub use linalg::norm;
pub use path::{
    AreaMode, PathFn, PathToken, RoughPath, DEFAULT_HOLDER_EXPONENT, DEFAULT_QUADRATURE_ORDER,
};
pub(crate) use path::gap_sizes;
pub use smooth::{MapBounds, MapFn, SmoothMap};
