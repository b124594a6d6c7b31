//! Exact computer algebra for classical dynamical r-matrices and their
//! quantization to dynamical twists.

pub mod adt;
pub mod cdyb;
pub mod cli;
pub mod cohomology;
pub mod element;
pub mod error;
pub mod gauge;
pub mod hseries;
pub mod invariant;
pub mod lie;
pub mod linf;
pub mod quantizer;
pub mod schema;
pub mod suite;
pub mod linalg;
pub mod uea;

pub use error::{Error, Result};
