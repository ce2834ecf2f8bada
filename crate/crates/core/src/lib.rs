//! Spin-dependent squeezed states for displacement sensing.
//!
//! The crate builds hybrid spin ⊗ boson states, evaluates their Fisher-information
//! bounds in closed form and numerically, simulates the readout protocols, and
//! propagates the stroboscopic sideband drive that prepares the states.

pub mod datasets;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod io;
pub mod metrology;
pub mod optimize;
pub mod protocols;

pub use error::{Result, SdsError};
pub use num_complex::Complex64 as C64;
