//! Bound states of Schrödinger and Gross–Pitaevskii equations with expulsive
//! potentials `-½|x|^{2γ}`: stationary solvers, closed-form references,
//! tail analysis and time evolution.

pub mod analysis;
pub mod closedform;
pub mod error;
pub mod evolve;
pub mod model;
pub mod numerics;
pub mod solver1d;
pub mod solver2d;

pub use error::{Error, Result};
pub use model::{Geometry, Grid, Nonlinearity, Normalization, Parity, ProblemSpec, WaveFunction};
