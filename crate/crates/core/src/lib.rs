//! Simulation toolkit for two incoherently pumped spin ensembles coupled through
//! reciprocal dissipative and nonreciprocal coherent interactions.
//!
//! * [`model`]: parameters, directional couplings and waveguide maps.
//! * [`meanfield`]: thermodynamic-limit dynamics, attractor classification and scans.
//! * [`cumulant`]: second-order cumulant equations at finite `N`.
//! * [`exact`]: Lindblad superoperators in the product and permutation-invariant bases.
//! * [`spectra`]: two-time correlations, spectral densities and exceptional points.
//! * [`io`]: CSV tables and JSON sidecars for the results above.

pub mod cumulant;
pub mod error;
pub mod exact;
pub mod io;
pub mod meanfield;
pub mod model;
pub mod ode;
pub mod spectra;

pub use error::{Error, Result};
