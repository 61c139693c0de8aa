//! Squared Bessel (BESQ) processes of every real dimension, skew Brownian
//! motion, Brownian local-time fields and the embedding of `BESQ(δ)` /
//! `BESQ(−δ)` pairs inside the local times of a single Brownian path.
//!
//! The crate is organised bottom-up:
//!
//! * [`samplers`]: exact draws from the closed-form marginal laws.
//! * [`sde`]: Euler paths for BESQ of any real dimension and the
//!   composite (weakly additive) process.
//! * [`brownian`]: Brownian paths, local-time fields and inverse local time.
//! * [`skew`]: the skew Brownian coupling, its frontier, and the local-time
//!   decompositions built from it.
//! * [`analytic`]: closed-form densities, transforms and functionals.
//! * [`verify`]: statistical tests and the experiment registry.

pub mod analytic;
pub mod brownian;
pub mod error;
pub mod path;
pub mod rng;
pub mod samplers;
pub mod sde;
pub mod skew;
pub mod verify;

pub use error::{Error, Result};
pub use path::Path;
pub use rng::RandomStream;
