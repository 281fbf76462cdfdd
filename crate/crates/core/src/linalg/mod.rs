//! Small dense-matrix kernel: storage, LU inversion and spectral radius.

mod eigen;
mod lu;
mod mat;

pub use eigen::{spectral_radius, SpectralReport, MAX_DIM, SWEEPS_PER_DIM};
pub use lu::{invert, PIVOT_TOLERANCE};
pub use mat::{dot, Mat};
