//! Multilevel bond structures.
//!
//! A hyperstructure is a stack of levels: level 0 is a plain set, and every
//! element above it is a bond binding a nonempty subset of the level below.
//! Bonds can carry formation states drawn from a partial table of
//! admissible states per subset, so the same collection can be bound in
//! different ways at once. On top of that sit the derived notions: cluster
//! chains and supports, decomposition into trees and back, transfer of
//! structure along maps, all-or-nothing towers, bottom-up state
//! propagation, and the correlation statistics that detect bound-but-
//! pairwise-independent triples in data.
//!
//! Everything speaks the same JSON formats, exposed in [`io`] and consumed
//! by the companion command-line tool.

#![forbid(unsafe_code)]

pub mod brunnian;
pub mod cluster;
pub mod correlations;
pub mod dot;
pub mod io;
pub mod states;
pub mod transfer;

mod error;
mod id;
mod structure;
mod validate;

pub use error::Error;
pub use id::{ElementId, StateValue};
pub use structure::{Bond, Hyperstructure, StateTable};
pub use validate::{ValidationReport, Violation, ViolationKind};

pub type Result<T> = std::result::Result<T, Error>;
