//! Single-excitation waveguide QED of giant atoms coupled to a left-handed
//! superlattice metamaterial.

pub mod analytics;
pub mod bandstructure;
pub mod dynamics;
pub mod error;
pub mod hamiltonian;
pub mod numeric;

pub use error::{Error, ErrorKind, Result};
