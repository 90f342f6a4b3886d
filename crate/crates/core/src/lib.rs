//! Numerical toolkit for one-dimensional topological insulators on finite
//! lattice windows: symmetry classification, indices, homotopies and the
//! diagonal-plus-shift normal form.

pub mod ensembles;
pub mod error;
pub mod homotopy;
pub mod index;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod models;
pub mod spectral;
pub mod stummel;
pub mod symmetry;

pub use error::{Error, ErrorFamily, Result};
