//! Stochastic convolutions driven by compensated Poisson random measures.
//!
//! The crate samples finite-activity Poisson random measures, evaluates
//! compensated stochastic integrals and Ornstein–Uhlenbeck type stochastic
//! convolutions exactly per realization in a spectrally diagonal model
//! space, computes real-interpolation norms by quadrature, and checks moment
//! and maximal-regularity inequalities by Monte Carlo against exact oracles.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod convolution;
pub mod error;
pub mod mark_space;
pub mod montecarlo;
pub mod oracle;
pub mod prm;
pub mod quadrature;
pub mod semigroup;
pub mod stochastic_integral;
pub mod verify;

pub use error::{Error, Result};
