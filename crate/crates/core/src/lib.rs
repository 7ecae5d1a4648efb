//! Hyperfine population dynamics, echo and hole-burning observables, chirped
//! readout correction and least-squares fitting for rare-earth doped crystals.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chirp;
pub mod dynamics;
pub mod error;
pub mod fitting;
pub mod io;
pub mod model;
pub mod observables;

pub use error::{Error, Result};
