//! Self-similar solutions of the heat and Stokes systems whose singular sets
//! are a point, a Cantor set, or a circle, together with numerical checks of
//! their scaling rates.

pub mod config;
pub mod error;
pub mod field;
pub mod fractal;
pub mod grid;
pub mod jet;
pub mod lift;
pub mod params;
pub mod profile;
pub mod quadrature;
pub mod verify;

pub use error::{Error, Result};
