//! Construction and spectral-stability analysis of standing pulses in a
//! three-component activator-inhibitor reaction-diffusion system.
//!
//! The crate builds the singular (fast-slow) skeleton of a standing pulse,
//! solves the full pulse as a boundary value problem, computes the Maslov
//! index of the wave by transporting its unstable bundle through the
//! Lagrangian Grassmannian, and cross-validates the verdict against a direct
//! eigenvalue computation and time evolution of the full PDE.

pub mod error;
pub mod linalg;
pub mod maslov;
pub mod model;
pub mod pde;
pub mod pulse;
pub mod singular;
pub mod spectrum;
pub mod symplectic;

pub use error::{Error, Result};
