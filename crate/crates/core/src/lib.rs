//! Riemann theta functions, the bordered-determinant form `eta` on the theta
//! divisor, the Gauss map, and the Arakelov invariants of genus-2
//! hyperelliptic curves.

pub mod arakelov;
pub mod curve;
pub mod error;
pub mod gaussmap;
pub mod numeric;
pub mod ramification;
pub mod siegel;
pub mod theta;
pub mod verify;

pub use error::{Error, Result};
pub use siegel::C64;
