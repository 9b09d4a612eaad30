//! Magnon spectra, NV-magnon couplings and magnon-mediated two-qubit
//! dynamics for nanoscale YIG waveguides and bars.
//!
//! Internal frequencies are angular (rad/s), lengths in metres, fields as
//! μ0H in tesla. Dynamics use ħ = 1.

pub mod bar;
pub mod constants;
pub mod error;
pub mod lindblad;
pub mod numerics;
pub mod paraunitary;
pub mod waveguide;

pub use error::{Error, Result};

/// Double-precision paraunitary decomposition.
pub type Decomposition = paraunitary::ParaunitaryDecomposition<f64>;
/// Double-precision quadratic boson form.
pub type BosonForm = paraunitary::QuadraticBosonForm<f64>;
/// Double-precision Bogoliubov factors.
pub type Bogoliubov = paraunitary::BogoliubovFactors<f64>;
/// Double-precision quadrature settings.
pub type Quadrature = numerics::quad::QuadratureSpec<f64>;
/// Complex scalar used by the dynamics.
pub type C64 = num_complex::Complex<f64>;
