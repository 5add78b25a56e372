//! Rough-path solutions of Burgers-type SPDEs driven by space-time white noise.
//!
//! The noise enters through the stationary solution `ψ` of the damped
//! stochastic heat equation, lifted in the spatial variable to a rough path.
//! The nonlinearity `g(u)∂ₓu` is then a rough integral against that lift.

// `!(x > 0.0)` rejects NaN along with nonpositive values, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the component/node formulas they implement.
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod field;
pub mod harness;
pub mod io;
pub mod measures;
pub mod norms;
pub mod quadrature;
pub mod rng;
pub mod rough;
pub mod semigroup;
pub mod solver;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use rng::{StreamId, StreamRng};
pub use rough::{
    rough_integral, rough_integral_between, AreaMode, ControlledNorm, ControlledPath, Grid,
    MapBounds, PathToken, RoughIntegral, RoughPath, SmoothMap,
};
pub use stats::{fit_rate, Estimate, RateFit};
