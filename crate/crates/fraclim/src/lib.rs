//! Numerical laboratory for the linear BGK equation with heavy-tailed or
//! degenerate equilibria and its fractional diffusion limits.

pub mod auxchi;
pub mod collision;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod fractional;
pub mod kinetic;
pub mod params;
pub mod quadrature;
pub mod spectral;
pub mod study;
pub mod vgrid;

pub use error::{Error, Result};
