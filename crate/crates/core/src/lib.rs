//! Precision limits for estimating the separation of two incoherent point
//! sources whose photon numbers may be unequal and unknown.
//!
//! The crate is organised bottom-up:
//!
//! - [`psf`]: point-spread functions and their overlap and momentum integrals.
//! - [`qcrb`]: classical and quantum Fisher matrices and the resulting
//!   separation precisions.
//! - [`smalld`]: small-separation expansions and the regime tables.
//! - [`gaussian`]: closed forms for Gaussian PSFs.
//! - [`oracle`]: a brute-force density-matrix oracle on a spatial grid.
//! - [`lab`]: Monte-Carlo photon sampling and maximum-likelihood fitting.
//!
//! Fisher matrices are per photon and parameters are always ordered
//! (centroid, separation, imbalance).

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gaussian;
pub mod lab;
pub mod oracle;
pub mod psf;
pub mod qcrb;
pub mod quadrature;
pub mod smalld;

pub use error::{Error, Result};
