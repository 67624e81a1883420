//! Open-system simulation of a qubit–oscillator model with both dipole and
//! nonlinear dispersive coupling, with cavity decay: steady states, two-time
//! correlations, emission spectra, a weak-excitation analytic layer, and a
//! quantum-jump Monte-Carlo unraveling, all behind a sweep/figure CLI.

pub mod error;
pub mod hilbert;
pub mod model;
pub mod ode;
pub mod solvers;
pub mod spectral;
pub mod sweep;
pub mod trajectory;
pub mod weak;
