//! Shared numerical machinery: random streams, special functions,
//! quadrature and dense linear algebra.

pub mod linalg;
pub mod quadrature;
pub mod rng;
pub mod special;

pub use linalg::{det_complex, det_real, hermitian_eigenvalues, solve_real};
pub use quadrature::{CircleContour, QuadratureKind, QuadratureRule};
pub use rng::RngStream;
pub use special::{
    bessel_i, bessel_i_scaled, gauss_2f1, heat_kernel, hermite, theta3, xi_from_zeta,
    xi_moment_function, zeta,
};
