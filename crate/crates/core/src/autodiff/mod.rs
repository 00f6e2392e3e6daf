//! Differentiation engine: forward-mode duals, multi-tangent duals for local
//! pullbacks, truncated Taylor jets for spatial derivatives, and
//! finite-difference validation.

mod check;
mod dual;
mod jet;
mod multi;
mod params;
mod real;

pub use check::{
    central_differences, check_gradient, compare_gradient, gradient, hessian, jacobian, third_directional,
    third_directional_fd, GradientReport, ScalarField, VectorField,
};
pub use dual::{seed3, third_coefficient, Dual, Dual3};
pub use jet::{Coeffs, JetSpace, Taylor, MAX_COEFFS, MAX_DIM, MAX_ORDER};
pub use multi::{MultiDual, MAX_TANGENTS};
pub use params::ParameterVector;
pub use real::{dot, dot_f64, lift, norm, values, Real};
