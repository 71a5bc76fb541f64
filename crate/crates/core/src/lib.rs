//! Dissipative kernels of open quantum systems in the energy eigenbasis.
//!
//! The crate builds the second-order (Born) kernel of a system coupled to a
//! harmonic bath, its two Markov limits (Redfield with the frequency fixed by
//! the incoming or by the outgoing coherence), the energy-conserving Redfield
//! kernel obtained by imposing on-shell selection rules, and the Lindblad
//! kernel in first standard form. All kernels are dense superoperators over
//! index pairs `(p, p')` in the eigenbasis of the system Hamiltonian.
//!
//! On top of the kernels sit propagation ([`dynamics`]), quantum-map checks
//! ([`diagnostics`]) and independent reference solutions ([`oracle`]).

pub mod bath;
pub mod config;
pub mod coupling;
pub mod density;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod kernels;
pub mod oracle;
pub mod random;
pub mod spectrum;
pub mod superop;

pub use bath::{BathSpectrum, SpectrumKind, TimeCorrelation};
pub use coupling::{CouplingChannelSet, JumpOperatorSet};
pub use density::{DensityMatrix, Tolerances};
pub use error::{Error, Result};
pub use kernels::{Kernel, KernelVariant};
pub use spectrum::{BohrBin, EnergySpectrum};
pub use superop::{SuperIndex, Superoperator};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;
