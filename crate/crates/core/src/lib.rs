//! Simulation of local phonon modes in a trapped-ion chain and their
//! phonon-number-resolving readout.
//!
//! The crate is `no_std` (it needs `alloc`). Physical quantities are SI
//! throughout: angular frequencies in rad/s, times in s, lengths in m.
//!
//! Module map:
//! - [`fock`]: truncated product basis, states, operators, Born sampling
//! - [`dynamics`]: hopping Hamiltonian, hopping rate, unitary and Lindblad evolution
//! - [`pulses`]: carrier/sideband rotations, composite pulse, shelving, adiabatic passage
//! - [`protocol`]: mapping schemes, fluorescence readout, shots and histograms
//! - [`scenarios`]: named experiment reproductions

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dynamics;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod protocol;
pub mod pulses;
pub mod rng;
pub mod scenarios;

pub use error::{Error, Result};
pub use fock::{Basis, DensityOperator, Level, Operator, Populations, StateVector};
pub use linalg::C64;
