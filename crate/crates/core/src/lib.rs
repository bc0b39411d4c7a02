//! Quantum dots as probes of the local density of optical states.
//!
//! The crate covers the full analysis chain for time-resolved emission of
//! single quantum dots:
//!
//! - [`kinetics`]: three-level bright/dark exciton model and its bi-exponential solution
//! - [`synth`]: synthetic Poisson photon-counting histograms under periodic excitation
//! - [`fit`]: Poisson maximum-likelihood bi-exponential fits
//! - [`extract`]: inversion of fitted decays to radiative, non-radiative and spin-flip rates
//! - [`ldos`]: projected LDOS, inhibition factors and frequency-resolved maps
//!
//! Rates are in ns^-1 and times in ns throughout.

pub mod basis;
pub mod error;
pub mod extract;
pub mod fit;
pub mod kinetics;
pub mod ldos;
pub mod synth;

pub use error::{Error, Result};
pub use kinetics::{bright_population, solve_decay, BiExpSolution, RateSet};
pub use synth::{AcquisitionConfig, DecayHistogram};
