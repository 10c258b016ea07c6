//! Verification instruments: Pohozaev-type identity checks, entire-kernel
//! residuals, linearised-operator spectra, and solution-uniqueness probes.

pub mod fields;
pub mod kernel;
pub mod pohozaev;
pub mod spectrum;
pub mod uniqueness;
