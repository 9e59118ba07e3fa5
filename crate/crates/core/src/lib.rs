//! Numerical checks of band-width estimates for warped-product bands with
//! spectral curvature bounds: model metrics, curvature, principal
//! eigenvalues and the warped μ-bubble reduction.

pub mod bubble;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod models;
pub mod ode;
pub mod report;
pub mod roots;
pub mod spectral;

pub use error::{Error, Result};
