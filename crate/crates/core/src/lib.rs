//! Numerical model of quantum ghost interference and quantum ghost imaging of
//! transparent, polarization-sensitive phase patterns with photon pairs that are
//! simultaneously EPR (position) entangled and polarization entangled.
//!
//! The crate is organised bottom-up:
//!
//! * [`polarization`] two-qubit polarization algebra (Bell states, the pattern's
//!   phase transform, linear-polarizer projections, CHSH),
//! * [`biphoton`] the two-photon position amplitude of a Gaussian pair source,
//!   in closed form and as an independent quadrature oracle,
//! * [`optics`] thin-lens phase, Fresnel kernel and the imaging amplitude,
//! * [`experiments`] ghost interference and ghost image coincidence maps,
//! * [`detector`] Monte Carlo emulation of a triggered, gated camera,
//! * [`io`] and [`config`] file formats and run configuration.
//!
//! Grid evaluations run on rayon when the `parallel` feature is enabled (the
//! default). Every parallel path has a fixed per-element summation order, so
//! results are bit-identical to the sequential path; see [`Exec`].

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod biphoton;
pub mod config;
pub mod detector;
mod error;
mod exec;
pub mod experiments;
pub mod grid;
pub mod io;
pub mod optics;
pub mod polarization;
pub mod quadrature;
pub mod validation;

mod cmat;

pub use error::{Error, Result};
pub use exec::Exec;

pub use num_complex::Complex64;
