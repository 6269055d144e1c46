//! Monte Carlo simulation and weak-error analysis for stochastic differential
//! equations driven by Brownian noise and Poisson jumps whose intensity
//! depends on the state.
//!
//! The library is generic over the floating point type through [`Scalar`];
//! the aliases at the crate root fix it to `f64` (and `f32` for the `*32`
//! variants).

pub mod boltzmann;
pub mod bounds;
pub mod deriv;
pub mod error;
pub mod generator;
pub mod linalg;
pub mod measure;
pub mod model;
pub mod quadrature;
pub mod regimes;
pub mod rng;
mod scalar;
pub mod simulate;
pub mod suite;
pub mod weakerr;

pub use error::{Error, Result};
pub use measure::{Atom, Density, DensityPiece, MarkSampler};
pub use model::{CoefficientSet, Diffusion, ValidationReport};
pub use rng::RngStream;
pub use scalar::{dot, norm, Scalar};
pub use simulate::{PathRecord, Representation, SimConfig};
pub use weakerr::{RateFit, WeakErrorReport};

/// Default precision.
pub type Real = f64;

pub type Region = measure::Region<f64>;
pub type MarkMeasure = measure::MarkMeasure<f64>;
pub type JumpModel = model::JumpModel<f64>;
pub type TestFunction = generator::TestFunction<f64>;

pub type Region32 = measure::Region<f32>;
pub type MarkMeasure32 = measure::MarkMeasure<f32>;
pub type JumpModel32 = model::JumpModel<f32>;
pub type TestFunction32 = generator::TestFunction<f32>;
