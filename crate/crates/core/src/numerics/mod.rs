//! Numerical building blocks: adaptive quadrature, explicit and collocation
//! ODE steppers, Hermite interpolation and small dense linear algebra.

pub mod gauss;
pub mod interp;
pub mod linalg;
pub mod ode;
pub mod quadrature;
