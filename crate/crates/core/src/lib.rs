//! Bit-true software model of a jammer-mitigating 32×8 multi-user MIMO uplink
//! receiver.
//!
//! The crate is organised along the signal chain:
//!
//! * [`numerics`]: fixed-point formats, saturating complex arithmetic,
//!   block-floating-point matrices and the LUT inverse square root.
//! * [`airlink`]: constellations, pilots, Rayleigh block-fading frames with a
//!   single-antenna jammer, and the frame dump format.
//! * [`receiver`]: least-squares channel estimation, the joint jammer-nulling
//!   and data-detection iteration (float and fixed point), LMMSE and LLRs.
//! * [`pe_array`]: a functional and cycle-level model of the 32×8 processing
//!   element array that replays the fixed-point detector.
//! * [`harness`]: deterministic Monte-Carlo BER sweeps and curve comparison.

pub mod airlink;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod pe_array;
pub mod receiver;

pub use error::{Error, Result};

/// Double-precision complex sample.
pub type C64 = num_complex::Complex64;
/// Double-precision complex matrix (column-major, nalgebra).
pub type CMat = nalgebra::DMatrix<C64>;
