//! Two-scale simulation toolkit for coupled heat and moisture transport in
//! hydrating concrete.
//!
//! The crate covers the whole chain from a periodic unit cell to a time-dependent
//! simulation:
//!
//! * [`microstructure`] rasterizes two-phase unit cells (cement paste / aggregate)
//!   and evaluates the `ε`-periodic phase indicator on the macro domain.
//! * [`laws`] holds the constitutive functions, the checks of their structural
//!   assumptions and the Kirchhoff transformation used by the pressure solver.
//! * [`fem`] is a small bilinear finite-element kernel on uniform rectangular grids.
//! * [`cell`] solves the periodic cell problems and tabulates effective tensors.
//! * [`coupled`] is the semi-implicit time stepper shared by the meso-scale
//!   (resolved microstructure) and the homogenized (effective tensor) problems.
//! * [`lab`] runs the numerical verification experiments.
//! * [`io`] reads run configurations and writes fields and reports.

pub mod cell;
pub mod coupled;
mod error;
pub mod fem;
pub mod io;
pub mod lab;
pub mod laws;
pub mod microstructure;
pub mod quadrature;

pub use error::{Error, Result};
