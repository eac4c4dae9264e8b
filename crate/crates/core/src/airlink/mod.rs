//! Jammed multi-user uplink: constellations, pilots and frame generation.
//!
//! The received block is `Y = H·S + j·w + N` with i.i.d. Rayleigh `H`, a
//! single-antenna jammer with signature `j` and masked Gaussian sequence `w`,
//! and circularly-symmetric white noise `N`.

mod constellation;
mod dump;
mod frame;
mod pilots;

pub use constellation::{Constellation, QAM16_A};
pub use dump::{read_dump, write_dump, DumpHeader, DUMP_FORMAT};
pub use frame::{generate_frame, noise_variance, Frame, FrameConfig, JammerKind, JammerProfile, Seed};
pub use pilots::pilot_matrix;
