//! Physically based outdoor sky lighting.
//!
//! The crate renders HDR sky environment maps from a compact parameterization
//! (sun direction, turbidity, exposure), fits those parameters to LDR
//! panoramas, builds training datasets of pinhole crops paired with lighting
//! targets, and scores lighting estimates by relighting a Lambertian object.
//!
//! Module map:
//!
//! * [`sky`]: spectral sky and sun radiance, spectral to RGB conversion and
//!   environment map synthesis.
//! * [`geometry`]: lat-long mappings, pinhole crops, camera sampling.
//! * [`lsq`]: bound-constrained nonlinear least squares.
//! * [`fitting`]: sun detection, closed-form exposure and turbidity fitting.
//! * [`dataset`]: sun bins, von Mises-Fisher targets, dataset builder.
//! * [`eval`]: losses, relighting and image metrics, error statistics.
//! * [`io`]: PFM, PNG and JSON file formats.
//! * [`cli`]: the `skyfit` command line front end.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod fitting;
pub mod geometry;
pub mod image;
pub mod io;
pub mod lsq;
pub mod sky;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
