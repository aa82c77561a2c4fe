//! Simulation and verification toolkit for fluid queues fed by fractional
//! Brownian motion.
//!
//! The crate is `no_std` (with `alloc`) so the numerical core can be embedded
//! anywhere; file formats, configuration and the command line live in the
//! `regfbm` companion crate.
//!
//! Module map:
//!
//! * [`fbm`]: exact fractional Gaussian noise / fBM generation and the
//!   covariance primitives.
//! * [`storage`]: netput, reflection (Lindley recursion), busy cycles,
//!   sojourns and scaled deviation paths.
//! * [`constants`]: limit constants, most-likely hitting time, window
//!   geometry, tail asymptotics, Borell bounds and the proof-parameter
//!   feasibility region.
//! * [`conditioning`]: closed-form conditional means and covariances of the
//!   scaled netput together with a dense Gaussian conditioning oracle.
//! * [`experiments`]: conditional Monte Carlo samplers and the statistical
//!   checks built on them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod conditioning;
pub mod constants;
pub mod error;
pub mod experiments;
pub mod fbm;
pub mod fft;
pub mod linalg;
pub mod quadrature;
pub mod stats;
pub mod storage;

pub use error::{Error, Result};
pub use fbm::{HurstParam, RngSeed, SamplePath, TimeGrid};
pub use storage::ModelParams;
