//! Complex Bessel functions, the deformed integration contour and the
//! quadrature primitives the reconstruction relies on.

pub mod bessel;
pub mod contour;
pub mod quad;

pub use bessel::{bessel_j, bessel_j_orders};
pub use contour::{build_contour, ContourC, ContourParams};
pub use quad::{abel_weighted_integral, AbelRule};

/// Complex scalar used throughout the spectral pipeline.
pub type ComplexScalar = num_complex::Complex64;
