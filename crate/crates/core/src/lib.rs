//! Decomposition of finite-dimensional quantum Markov semigroups and quantum
//! channels into transient and recurrent parts, minimal enclosures, and
//! degenerate families, with identifiability checks and open quantum random
//! walk utilities.

pub mod decomposition;
pub mod error;
pub mod fixtures;
pub mod identifiability;
pub mod io;
pub mod linalg;
pub mod oqrw;
pub mod random;
pub mod semigroup;

pub use error::{Error, ErrorKind, Result};
pub use linalg::Tolerances;
