//! Generic numerical building blocks used by the solvers.

pub mod lsq;
pub mod ode;
pub mod quadrature;
pub mod roots;
pub mod stencil;
