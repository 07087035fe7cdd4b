//! Finite models of polyanalytic Fock spaces.
//!
//! `L²(ℂ, μ)` splits into true-polyanalytic levels `F²₍ₖ₎`. The crate keeps
//! `K` levels and `J` analytic degrees of the complex-Hermite basis, builds
//! dense matrices for ladder, projection, Weyl, multiplication, Toeplitz and
//! Hankel operators, evaluates scalar, matrix and standard Berezin transforms,
//! and runs numerical probes of compactness at large `|z|`.

// `!(a < b)` guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod berezin;
pub mod commands;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod operators;
pub mod quadrature;
pub mod specfun;
pub mod symbol;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;
