//! Scattering of a time-harmonic lattice wave by two staggered semi-infinite
//! cracks on a square lattice.

pub mod contour;
pub mod direct;
pub mod far_field;
pub mod kernel;
pub mod lattice;
pub mod mat2;
pub mod scalar_factors;
pub mod wh;

pub use num_complex::Complex64;
