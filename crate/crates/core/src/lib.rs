//! Stable-by-design neural LPV state-space identification.
//!
//! A linear encoder maps the first measured output to an initial latent
//! state. At every step a generator MLP, scheduled on the current latent
//! state, emits the factors of a transition matrix that is Schur-stable by
//! construction, together with the input and output matrices. Models are
//! trained on sliding windows with a multi-step output loss plus a
//! state-consistency penalty, and evaluated in free-running simulation.

pub mod baseline;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod linalg;
pub mod model;
pub mod net;
pub mod schur;
pub mod train;

pub use error::{Error, Result};
pub use linalg::Mat;
