//! Two-time correlations, spectral densities, exceptional points and
//! output-field observables.
//!
//! Correlations follow the linear regression equations for single-spin
//! coherences, with populations either frozen at a steady state or
//! co-evolved with the second-order moments.

pub mod correlation;
pub mod ep;
pub mod output;
pub mod regression;
pub mod spectrum;

pub use correlation::{
    correlation_ode_options, cycle_averaged_correlations, evolve_correlations, initial_correlations,
    initial_correlations_exact, CorrelationVector, RegressionSource,
};
pub use ep::{exceptional_point_scan, EpOptions, EpScan, EpScanPoint, ExceptionalPoint, PopulationSource};
pub use output::{collective_moments, output_field_correlations, OutputField};
pub use regression::{regression_matrix, x_coefficient, DegeneracyKind, RegressionMatrix};
pub use spectrum::{
    detect_comb, spectral_density, spectral_density_fft, spectral_density_resolvent, spectral_peaks, symmetric_grid,
    CombOptions, CombReport, QuadratureOptions, Spectrum, SpectrumMethod,
};
