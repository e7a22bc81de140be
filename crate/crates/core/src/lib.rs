//! Full counting statistics of weak measurements with pre- and post-selection.
//!
//! A system prepared in `ρ_i` couples instantaneously to a probe through
//! `H = -λ δ(t) q̂ Â`; the probe is then read out and the system post-selected
//! in `ρ_f`. This crate evaluates the resulting conditional statistics of the
//! probe in three ways:
//!
//! - [`exact`]: non-perturbative conditional distributions, characteristic
//!   functions and moments, either in closed form for Gaussian probes or on a
//!   discretized probe grid.
//! - [`perturb`]: second-order interpolation formulas written in terms of the
//!   normal weak values of [`weakvalues`], which stay finite for nearly
//!   orthogonal pre- and post-selection.
//! - [`mc`]: a seeded Monte Carlo simulation of the full protocol, including
//!   random acceptance of post-selected records.
//!
//! [`spinhalf`] collects the closed-form qubit solutions used as oracles and
//! for the θ-sweeps driven by [`config`] and [`sweep`].
//!
//! Units: ħ = 1 and `[q̂, p̂] = i`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod exact;
pub mod hilbert;
pub mod mc;
pub mod perturb;
pub mod probe;
pub mod report;
pub mod single;
pub mod spinhalf;
pub mod sweep;
pub mod weakvalues;
mod util;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Dense complex matrix used for system and probe operators.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<Complex64>;
