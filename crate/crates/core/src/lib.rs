//! Numerical laboratory for Allen-Cahn interfaces on warped products and
//! rotationally symmetric manifolds, reduced to a single radial coordinate.

pub mod analysis;
pub mod barriers;
pub mod discretization;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod linalg;
pub mod potential;
pub mod profile;
pub mod quadrature;
pub mod solver;

pub use error::{LabError, Result};
