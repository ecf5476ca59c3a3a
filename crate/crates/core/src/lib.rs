//! Diffusion models with a Gaussian-mixture prior.
//!
//! The forward process pushes data towards a mixture `Σ p_j N(c_j, σ_j² I)`
//! instead of the standard normal; each training point is dispatched to its
//! nearest center, and the reverse chain starts from the dispatched
//! component. With a single center at the origin every routine reduces to the
//! classical DDPM or score-based model.

pub mod datasets;
pub mod error;
pub mod metrics;
pub mod net;
pub mod prior;
pub mod rng;
pub mod sample;
pub mod schedules;
pub mod train;

pub use error::{Error, Result};
