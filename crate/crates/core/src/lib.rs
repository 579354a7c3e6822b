//! Permutationally symmetric Lindblad dynamics for ensembles of identical
//! multi-level emitters coupled to a shared bosonic mode.

pub mod config;
pub mod counting;
pub mod error;
pub mod fock;
pub mod lindblad;
pub mod models;
pub mod operators;
pub mod oracle;
pub mod runner;
pub mod sparse;

pub use error::{Error, Result};
