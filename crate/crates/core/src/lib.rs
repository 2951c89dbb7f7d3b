//! Full counting statistics of work and heat in driven open quantum systems.
//!
//! Counting fields dress the jump terms of a Lindblad generator so that the
//! trace of the evolved state becomes a generating function. From it the
//! crate derives energy distributions, fluctuation-relation checks and
//! long-time cumulant rates.

pub mod error;
pub mod evolve;
pub mod linop;
pub mod liouville;
pub mod longtime;
pub mod model;
pub mod oracles;
pub mod stats;

pub use error::{FcsError, Result};
pub use liouville::CountingField;
pub use model::{SystemModel, Temperature};
