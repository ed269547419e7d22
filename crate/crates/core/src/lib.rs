//! Simulation of a Newtonian liquid film coated by an Ellis shear-thinning
//! film on a solid substrate, in the lubrication approximation.
//!
//! The crate is organized bottom-up:
//!
//! * [`rheology`]: Ellis law, the odd power map `Phi`, the constant `C_p`,
//!   and inversion of general stress laws.
//! * [`lubrication`]: fluxes for arbitrary monotone closures by quadrature.
//! * [`model`]: closed-form mobilities, fluxes, coefficient matrix and
//!   lower-order terms of the film system.
//! * [`grid`]: node-centered mesh, finite differences, reflection ghosts.
//! * [`stepper`]: implicit and semi-implicit time integration.
//! * [`diagnostics`]: masses, energy, dissipation, relative energy, decay fits.
//! * [`stability`]: flat-film spectrum and modal decay rates.

pub mod banded;
pub mod diagnostics;
pub mod grid;
pub mod lubrication;
pub mod model;
pub mod quadrature;
pub mod rheology;
pub mod stability;
pub mod stepper;

pub use diagnostics::DiagnosticsRecord;
pub use grid::{Grid, State};
pub use rheology::FluidParams;
pub use stability::StabilityReport;
pub use stepper::{advance, Scheme, StepConfig, StepOutcome, StepStatus, Trajectory};
