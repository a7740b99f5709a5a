//! Simulator for direction-private quantum communication with biphoton
//! difference-correlated states.
//!
//! The numerical core (grids, states, optics) is generic over the scalar
//! type; the statistics stack runs in `f64`. Concrete `f64` aliases for the
//! common types are re-exported at the crate root.

pub mod adversary;
pub mod error;
pub mod fft;
pub mod geometry;
pub mod grid;
pub mod measurement;
pub mod metrics;
pub mod optics;
pub mod runner;
pub mod scalar;
pub mod scenario;
pub mod state;

pub use error::{Error, Result};
pub use scalar::Real;

/// Default-precision transverse grid.
pub type Grid = grid::TransverseGrid<f64>;
/// Default-precision biphoton state.
pub type State = state::BiphotonState<f64>;
/// Default-precision scenario geometry.
pub type Geometry = geometry::SystemGeometry<f64>;
