//! Serially connected inhomogeneous Euler-Bernoulli beams in port-Hamiltonian form:
//! hypothesis checks for boundary-feedback stability, a structure-preserving
//! discretization, spectral and resolvent diagnostics, and energy-decay fitting.

pub mod cli;
pub mod discretize;
pub mod linalg;
pub mod model;
pub mod passivity;
pub mod ports;
pub mod report;
pub mod spectral;
pub mod timestep;

pub use faer::c64;
