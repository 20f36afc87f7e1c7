//! Simulation and analysis toolkit for optically addressable molecular
//! spin-1 (triplet) qubits.
//!
//! The crate covers the full modelling chain for a powder sample of
//! photoexcited triplets:
//!
//! * [`spinham`] — zero-field-splitting + Zeeman Hamiltonian, eigensystem,
//!   transition frequencies and drive couplings;
//! * [`powder`] — orientation averaging on a Fibonacci sphere: ODMR
//!   spectra, field-frequency maps and ensemble Rabi traces;
//! * [`fitting`] — derivative-free least squares (Nelder–Mead) plus the
//!   specific fits used here (ZFS parameters, stretched exponentials,
//!   power laws, T1 vs temperature);
//! * [`photophysics`] — classical rate equations for the
//!   S0/S1/T1/T2 manifold and optically-addressed-delayed-fluorescence
//!   (OADF) readout contrast;
//! * [`coherence`] — CPMG filter functions over power-law noise spectra,
//!   T2 scaling, the clock-transition model and the two-phonon T1 law;
//! * [`sensing`] — slope-based DC/AC magnetometry budgets and dipole-field
//!   helpers for nuclear-spin detection estimates.
//!
//! All frequencies are ordinary (not angular) frequencies in Hz, fields in
//! Tesla, times in seconds. Everything is deterministic: no RNG, no
//! time-dependent state, and the optional `parallel` feature changes only
//! wall-clock time, never results.

pub mod coherence;
pub mod fitting;
pub mod linalg;
pub mod photophysics;
pub mod powder;
pub mod sensing;
pub mod spinham;

mod error;

pub use error::CoreError;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CoreError>;
