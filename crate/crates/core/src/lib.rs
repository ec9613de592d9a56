//! Maximally non-Markovian qubit dynamics generated by environments that
//! evolve autonomously and are never disturbed by the system.
//!
//! Each dynamics is available in several equivalent representations:
//!
//! - closed-form solution maps ([`dephasing`], [`random_unitary`]),
//! - local-in-time master equations integrated with [`numerics::integrate_ode`],
//! - time-convoluted master equations solved with [`numerics::volterra_solve`],
//! - Lindblad rate equations, bipartite Lindblad embeddings and collisional
//!   Monte Carlo trajectories ([`hybrid`]),
//! - stochastic Ornstein–Uhlenbeck Hamiltonians and their Fokker–Planck
//!   counterpart ([`gaussian_noise`]).
//!
//! The [`measures`] module implements the divisibility-based non-Markovianity
//! measures used to certify maximality, and [`validation`] bundles the
//! cross-checks that the `nmq validate` command and the acceptance suite run.
//!
//! Units: ħ = 1 and times are measured in units of 1/γ unless stated otherwise.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::excessive_precision,
    clippy::needless_range_loop
)]
#![forbid(unsafe_code)]

pub mod dephasing;
pub mod error;
pub mod gaussian_noise;
pub mod hybrid;
pub mod linops;
pub mod measures;
pub mod numerics;
pub mod random_unitary;
pub mod validation;

pub use error::{Error, Result};
pub use linops::{CMatrix, ChoiMatrix, DensityMatrix, HermitianOperator, Superoperator};
