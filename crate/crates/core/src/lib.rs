//! Numerical toolkit for bubbling solutions of mean field equations on the
//! flat unit torus and the unit disk.
//!
//! The crate is organised around the pipeline used by the `bubblekit` CLI:
//!
//! * [`geometry`] — domains, Green functions and their regular parts, with
//!   analytic derivatives up to second order.
//! * [`weight`] — the singular weight `h = h* exp(-4π Σ α_j G(·,p_j))` and its
//!   logarithmic derivatives.
//! * [`quantities`] — the configuration functional `f_m` and the derived
//!   scalars `G_j^*`, `ℓ(q)`, `D(q)`, `Φ_j`, `f_{q,j}`, plus critical-point
//!   search and domain partitions.
//! * [`solver`] — spectral/radial discretisations, Newton solves, amplitude
//!   continuation of the bubbling branch and blow-up descriptor extraction.
//! * [`asymptotics`] — expansion predictors for `ρ - 8πm` and least-squares
//!   coefficient fits against solver branches.
//! * [`diagnostics`] — Pohozaev-type identity checks, entire-kernel residuals,
//!   linearised spectra and uniqueness probes.

pub mod asymptotics;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod quad;
pub mod quantities;
pub mod solver;
pub mod weight;

pub use error::{Error, Result};
pub use geometry::{DomainKind, DomainSpec, GreenMethod, GreenTable, Point};
pub use quantities::{BlowupConfiguration, PartitionRule, PartitionSpec};
pub use solver::{BlowupDescriptors, BranchRecord, SolutionField};
pub use weight::{SmoothPart, WeightSpec};
