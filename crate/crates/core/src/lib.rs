//! Operators on weighted Lebesgue spaces `L_{p,ω}` with Muckenhoupt weights,
//! sampled on uniform grids, plus numerical checks of the norm inequalities
//! they satisfy.

pub mod approx;
pub mod ensemble;
pub mod error;
pub mod frac;
pub mod grid;
pub mod io;
pub mod measure;
pub mod ops;
pub mod par;
pub mod report;
pub mod transference;
pub mod verify;
pub mod weights;

pub use error::{Error, Result};
pub use grid::{Grid, GridBox, GridFunction, QuadKind, QuadratureRule};
pub use measure::{weighted_lp_norm, WeightedMeasure};
pub use weights::Weight;
