//! Special functions and the small numerical kernel shared by the analysis modules.

pub mod bessel;
pub mod continuation;
pub mod newton;
pub mod quadrature;
pub mod roots;

pub use bessel::{bessel_i, bessel_i_orders, bessel_j, bessel_j_roots, BesselError, RELIABLE_RADIUS};
pub use continuation::{arclength_continue, arclength_continue_until, ContinuationError, ContinuationOptions};
pub use newton::{newton_solve, Jacobian, Matrix, NewtonError, NewtonOptions, NewtonSolution, Vector};
pub use quadrature::{QuadratureKind, QuadratureRule};
pub use roots::{find_complex_roots, RootSearchOptions, Rect, SeedGrid};

/// Complex values used throughout: growth rates, Bessel arguments.
pub type ComplexValue = num_complex::Complex64;
