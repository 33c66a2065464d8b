//! Two-mode chi(2) frequency conversion in width-engineered waveguides.
//!
//! The crate propagates the coupled signal/idler amplitudes along a waveguide
//! whose width (and therefore phase mismatch) varies with position, and
//! compares the numerics against the closed-form limits: the uniform sinc^2
//! efficiency, the Landau-Zener transition probability, the first-order
//! bandwidth estimate and the spectral area law.
//!
//! Unit conventions, used everywhere without further comment:
//!
//! * positions, lengths and waveguide widths: micrometres
//! * wavelengths and width detunings (`delta_w`): nanometres
//! * phase mismatch and coupling strength: rad/um
//! * `dbeta_dlambda`: rad/um per nm of idler wavelength
//! * `kappa_w`: rad/um per nm of width change
//! * pump power: watts; propagation loss: 1/m on the photon flux

pub mod analytic;
pub mod cli;
pub mod dispersion;
pub mod experiments;
pub mod profile;
pub mod propagation;
pub mod selfcheck;
pub mod spectrum;

mod error;
mod pchip;

pub use error::{Error, Result};

/// Crate version echoed into every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
