//! Simulation and inference for small clusters of radiatively coupled
//! two-level emitters with vibrational branching.
//!
//! The crate is organized in layers:
//!
//! * [`model`] holds the physical data model, near-field couplings and the
//!   single-excitation dressed states of a coupled pair.
//! * [`lindblad`] builds the dense Lindblad generator in the frame of the
//!   drive laser and provides steady states, time propagation and two-time
//!   correlations via the quantum regression theorem.
//! * [`observables`] turns the engine into measurable curves: excitation
//!   spectra, extinction ratios, g2(tau), lifetime traces, saturation series,
//!   Lorentzian peak extraction and a random-resonance Monte Carlo estimate.
//! * [`inference`] fits physical parameters to any of those curves with a
//!   bounded Levenberg-Marquardt solver ([`optimize`]).
//!
//! Units: every user-facing frequency or rate is an ordinary frequency in MHz
//! and every time is in ns. Internally the dynamics run on angular
//! frequencies in rad/ns (see [`units`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod inference;
pub mod lindblad;
pub mod model;
pub mod observables;
pub mod optimize;
pub mod units;

pub use error::{Error, Result};
pub use lindblad::{DensityOperator, Liouvillian};
pub use model::{DecayModel, DressedStates, DriveParams, EmitterParams, MediumParams, SystemModel};
pub use observables::{CorrelationTrace, PeakSet, SpectrumTrace};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix used for operators and generators.
pub type CMatrix = nalgebra::DMatrix<C64>;
